"""Sectioned key=value run configuration."""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass
from pathlib import Path

from .errors import InvalidArgument

DEFAULTS = {
    "grid": {"r_max": "1400.0", "n": "2048"},
    "potential": {
        "kind": "gaussian",
        "mass": "1.0",
        "depth": "4.0",
        "radius": "1.0",
        "amplitude": "-3.0",
        "width": "2.0",
        "table": "",
        "omega": "0.4",
    },
    "normalform": {"N": "auto", "D_max": "auto", "remainder_budget": "inf"},
    "simulate": {
        "lambda": "-1.0",
        "dt": "0.05",
        "T": "1300.0",
        "a0": "0.3",
        "phase0": "0.0",
        "c0": "0.0",
        "C0": "1.0",
        "stride": "10",
        "scheme": "strang",
        "seed_center": "5.0",
        "seed_width": "1.5",
        "blowup_bound": "1000.0",
    },
    "fgr": {"sigma_ladder": "8,4,2", "eps_ladder": "8,4,2"},
    "fit": {"window": "auto", "sigma": "3.0", "trajectory": "trajectory.csv"},
}


def _floats(text: str) -> tuple:
    return tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())


@dataclass
class RunConfig:
    parser: configparser.ConfigParser
    seed: int = 0
    source: str | None = None
    allow_boundary: bool = False

    def get(self, section, key) -> str:
        return self.parser.get(section, key)

    def getfloat(self, section, key) -> float:
        try:
            return self.parser.getfloat(section, key)
        except ValueError as exc:
            raise InvalidArgument(f"[{section}] {key}: {exc}") from None

    def getint(self, section, key) -> int:
        try:
            return self.parser.getint(section, key)
        except ValueError as exc:
            raise InvalidArgument(f"[{section}] {key}: {exc}") from None

    def optional_int(self, section, key):
        val = self.get(section, key).strip().lower()
        return None if val in ("", "auto") else self.getint(section, key)

    def optional_float(self, section, key):
        val = self.get(section, key).strip().lower()
        return None if val in ("", "auto") else self.getfloat(section, key)

    def ladder(self, key) -> tuple:
        vals = _floats(self.get("fgr", key))
        if len(vals) < 3 or any(b >= a for a, b in zip(vals, vals[1:])) or vals[-1] <= 0:
            raise InvalidArgument(f"[fgr] {key} must be >= 3 strictly decreasing positive factors")
        return vals

    def window(self):
        val = self.get("fit", "window").strip().lower()
        if val in ("", "auto"):
            return None
        w = _floats(val)
        if len(w) != 2 or not w[0] < w[1]:
            raise InvalidArgument("[fit] window must be 't0,t1' with t0 < t1")
        return w

    def echo(self) -> str:
        buf = io.StringIO()
        self.parser.write(buf)
        return f"# seed = {self.seed}\n" + buf.getvalue()


def load_config(path=None, overrides: dict | None = None, seed: int = 0) -> RunConfig:
    """Read a config file on top of the embedded defaults."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser.read_dict(DEFAULTS)
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise InvalidArgument(f"config file {path} not found")
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except configparser.Error as exc:
            raise InvalidArgument(f"malformed config {path}: {exc}") from None
    for section, items in (overrides or {}).items():
        for k, v in items.items():
            parser.set(section, k, str(v))
    unknown = set(parser.sections()) - set(DEFAULTS)
    if unknown:
        raise InvalidArgument(f"unknown config sections: {sorted(unknown)}")
    for section in DEFAULTS:
        extra = set(parser[section]) - set(DEFAULTS[section])
        if extra:
            raise InvalidArgument(f"unknown keys in [{section}]: {sorted(extra)}")
    return RunConfig(parser, seed, str(path) if path else None)
