"""Command-line front end: spectrum | fgr | normalform | simulate | fit | report."""
from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import errors
from .config import RunConfig, load_config
from .dynamics import SimConfig, simulate
from .envelope import FitResult, fit_decay, fit_linear, fit_report_csv, period_average, theta_growth
from .fgr import GoldenRuleReport, check_window, gamma_coefficient
from .io import atomic_write
from .normalform import normal_form_recursion
from .spectral import PotentialSpec, build_grid, load_potential_table, spectrum, tune_strength

EXIT_OK = 0
EXIT_SPECTRAL = 2
EXIT_BORDERLINE = 3
EXIT_TRUNCATION = 4
EXIT_BLOWUP = 5
EXIT_MISSING = 6
EXIT_USAGE = 1


class MissingTrajectory(errors.KGDecayError):
    pass


def build_potential(cfg: RunConfig) -> PotentialSpec:
    kind = cfg.get("potential", "kind").strip()
    mass = cfg.getfloat("potential", "mass")
    if kind == "tabulated":
        return load_potential_table(cfg.get("potential", "table"), mass)
    if kind == "square_well":
        return PotentialSpec("square_well", mass, depth=cfg.getfloat("potential", "depth"),
                             radius=cfg.getfloat("potential", "radius"))
    if kind == "gaussian":
        return PotentialSpec("gaussian", mass, amplitude=cfg.getfloat("potential", "amplitude"),
                             width=cfg.getfloat("potential", "width"))
    if kind == "zero":
        return PotentialSpec("zero", mass)
    raise errors.InvalidArgument(f"unknown potential kind {kind!r}")


def build_spectrum(cfg: RunConfig):
    grid = build_grid(cfg.getfloat("grid", "r_max"), cfg.getint("grid", "n"))
    pot = build_potential(cfg)
    omega = cfg.optional_float("potential", "omega")
    if omega is not None and pot.kind in ("square_well", "gaussian"):
        pot = tune_strength(grid, pot, omega)
    return spectrum(grid, pot)


def resolve_N(cfg: RunConfig, spec) -> int:
    N = cfg.optional_int("normalform", "N")
    N = spec.window_N() if N is None else N
    check_window(spec, N)
    return N


def _ladders(cfg, spec, N):
    from .fgr import level_spacing

    delta = level_spacing(spec, (2 * N + 1) * spec.omega)
    return (tuple(f * delta for f in cfg.ladder("sigma_ladder")), tuple(f * delta for f in cfg.ladder("eps_ladder")))


def run_normalform(cfg: RunConfig, spec, N: int, with_gamma: bool = True):
    D_max = cfg.optional_int("normalform", "D_max")
    budget = cfg.getfloat("normalform", "remainder_budget")
    lam = cfg.getfloat("simulate", "lambda")
    res = normal_form_recursion(spec, lam, N, D_max, budget, with_gamma=False)
    report = None
    if with_gamma:
        sig, eps = _ladders(cfg, spec, N)
        report = gamma_coefficient(spec, res.Phi_res, N, sig, eps)
    return res, report


def sim_config(cfg: RunConfig, spec) -> SimConfig:
    return SimConfig(
        spec,
        lam=cfg.getfloat("simulate", "lambda"),
        dt=cfg.getfloat("simulate", "dt"),
        T=cfg.getfloat("simulate", "T"),
        scheme=cfg.get("simulate", "scheme").strip(),
        stride=cfg.getint("simulate", "stride"),
        a0=cfg.getfloat("simulate", "a0"),
        phase0=cfg.getfloat("simulate", "phase0"),
        c0=cfg.getfloat("simulate", "c0"),
        C0=cfg.getfloat("simulate", "C0"),
        seed_center=cfg.getfloat("simulate", "seed_center"),
        seed_width=cfg.getfloat("simulate", "seed_width"),
        blowup_bound=cfg.getfloat("simulate", "blowup_bound"),
        allow_boundary=cfg.allow_boundary,
    )


def auto_window(a0: float, gamma: float, N: int, t_reflect: float, horizon: float):
    """[5e-2 |xi_0|^(-4N) / gamma, min(t_reflect, horizon)]."""
    start = 5e-2 * a0 ** (-4 * N) / gamma if gamma > 0 and a0 > 0 else 1.0
    return max(start, 1e-12), min(t_reflect, horizon)


def fit_trajectory(t, abs_xi, theta, eta, omega, N, gamma, window, lam=1.0):
    """Fit rows comparing measured and predicted decay exponents."""
    fits = []
    period = 2 * np.pi / omega
    ta, aa = period_average(t, abs_xi, period)
    fits.append(fit_decay(ta, aa, window, "abs_xi", -1.0 / (4 * N)))
    _, inv = period_average(t, np.asarray(abs_xi) ** (-4 * N), period)
    try:
        s, _, r2 = fit_linear(ta, inv, window)
        from scipy import stats

        sel = (ta >= window[0]) & (ta <= window[1])
        stderr = stats.linregress(ta[sel], inv[sel]).stderr
        fits.append(FitResult(f"abs_xi^-{4 * N}", window[0], window[1], s, float(stderr), 4 * N * gamma))
        fits.append(FitResult(f"R2(abs_xi^-{4 * N})", window[0], window[1], r2, 0.0, 1.0))
    except errors.EmptyWindow:
        pass
    if np.any(np.asarray(eta) > 0):
        fits.append(fit_decay(t, eta, window, "eta_L8", -3.0 / (4 * N)))
    expo = theta_growth(t, theta, window)
    fits.append(FitResult("theta", window[0], window[1], expo, 0.0, 1 - 1 / (2 * N)))
    return fits


def read_trajectory(path: Path):
    if not path.is_file():
        raise MissingTrajectory(f"trajectory file {path} not found")
    with open(path, encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["t", "abs_xi", "theta", "eta_L8", "energy", "Pc_L2"]:
            raise MissingTrajectory(f"{path} is not a trajectory file")
        data = np.array([[float(x) for x in row] for row in reader])
    if data.ndim != 2 or len(data) < 2:
        raise MissingTrajectory(f"{path} has no samples")
    return {k: data[:, i] for i, k in enumerate(header)}


# commands


def cmd_spectrum(cfg: RunConfig, out: Path) -> int:
    spec = build_spectrum(cfg)
    atomic_write(out / "spectrum.csv", spec.to_csv())
    N = resolve_N(cfg, spec)
    print(f"unique bound state, omega={spec.omega:.12g}, m={spec.mass:.12g}, N={N} window")
    return EXIT_OK


def cmd_fgr(cfg: RunConfig, out: Path) -> int:
    spec = build_spectrum(cfg)
    N = cfg.optional_int("normalform", "N") or spec.window_N()
    Lam = (2 * N + 1) * spec.omega
    if Lam <= spec.mass - 1e-6 * spec.mass:
        # the harmonic misses the continuum: no golden-rule coupling
        report = GoldenRuleReport(N, spec.omega, spec.mass, Lam, 0.0, 0.0)
    else:
        check_window(spec, N)
        _, report = run_normalform(cfg, spec, N)
    atomic_write(out / "fgr.csv", report.to_csv())
    flag = " (kernel/resolvent spread above 5%)" if report.flagged else ""
    print(f"gamma={report.gamma:.10g} spread={report.spread:.3g}{flag}")
    return EXIT_OK


def cmd_normalform(cfg: RunConfig, out: Path) -> int:
    spec = build_spectrum(cfg)
    N = resolve_N(cfg, spec)
    res, report = run_normalform(cfg, spec, N)
    atomic_write(out / "normalform.csv", res.to_csv())
    atomic_write(out / "phi_res.txt", res.phi_table())
    atomic_write(out / "fgr.csv", report.to_csv())
    bad = res.violations()
    print("normal-form: OK" if not bad else f"normal-form: {len(bad)} violations")
    print(f"(0,{2 * N + 1}) resonant vector norm={np.sqrt(np.sum(np.abs(res.Phi_res) ** 2) * spec.grid.dr):.10g}")
    return EXIT_OK if not bad else EXIT_TRUNCATION


def _fits_for(cfg, spec, N, gamma, t, abs_xi, theta, eta, t_reflect, horizon):
    window = cfg.window()
    if window is None:
        window = auto_window(abs_xi[0], gamma, N, t_reflect, horizon)
    elif window[1] > t_reflect and not cfg.allow_boundary:
        raise errors.InvalidArgument(
            f"fit window ends at {window[1]:g}, past the reflection time {t_reflect:g}; use --allow-boundary"
        )
    return fit_trajectory(t, abs_xi, theta, eta, spec.omega, N, gamma, window)


def cmd_simulate(cfg: RunConfig, out: Path) -> int:
    spec = build_spectrum(cfg)
    N = resolve_N(cfg, spec)
    sc = sim_config(cfg, spec)
    traj = simulate(sc)
    atomic_write(out / "trajectory.csv", traj.to_csv())
    gamma = 0.0
    if sc.lam != 0 and sc.a0 > 0:
        _, report = run_normalform(cfg, spec, N)
        gamma = report.gamma
    fits = _fits_for(cfg, spec, N, gamma, traj.t, traj.abs_xi, traj.theta, traj.eta_L8, sc.t_reflect, sc.T)
    atomic_write(out / "fit.csv", fit_report_csv(fits))
    print(f"abs_xi slope {fits[0].slope:.6g} (predicted {fits[0].predicted:.6g})")
    return EXIT_OK


def _fit_from_file(cfg: RunConfig, out: Path):
    data = read_trajectory(out / cfg.get("fit", "trajectory"))
    spec = build_spectrum(cfg)
    N = resolve_N(cfg, spec)
    sc = sim_config(cfg, spec)
    _, report = run_normalform(cfg, spec, N)
    fits = _fits_for(cfg, spec, N, report.gamma, data["t"], data["abs_xi"], data["theta"], data["eta_L8"],
                     sc.t_reflect, data["t"][-1])
    return spec, N, report, fits


def cmd_fit(cfg: RunConfig, out: Path) -> int:
    _, _, _, fits = _fit_from_file(cfg, out)
    atomic_write(out / "fit.csv", fit_report_csv(fits))
    for f in fits:
        print(f"{f.quantity}: slope {f.slope:.6g} predicted {f.predicted:.6g}")
    return EXIT_OK


def cmd_report(cfg: RunConfig, out: Path) -> int:
    spec, N, report, fits = _fit_from_file(cfg, out)
    atomic_write(out / "report.csv", fit_report_csv(fits))
    lines = ["# run configuration", cfg.echo().rstrip(), "", "# golden rule", report.to_csv().rstrip(), "",
             "# measured vs predicted"]
    for f in fits:
        lines.append(f"{f.quantity:>16s}  measured {f.slope: .6g}  predicted {f.predicted: .6g}  ratio {f.ratio: .4g}")
    atomic_write(out / "report.txt", "\n".join(lines) + "\n")
    print("\n".join(lines[-len(fits) - 1 :]))
    return EXIT_OK


COMMANDS = {
    "spectrum": cmd_spectrum,
    "fgr": cmd_fgr,
    "normalform": cmd_normalform,
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "report": cmd_report,
}


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kgdecay", description=__doc__)
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", type=Path, default=None, help="sectioned key=value config file")
    p.add_argument("--out-dir", type=Path, default=Path("."), help="directory for output files")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--allow-boundary", action="store_true", help="permit horizons past the reflection time")
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, seed=args.seed)
        cfg.allow_boundary = args.allow_boundary
        out = args.out_dir
        out.mkdir(parents=True, exist_ok=True)
        atomic_write(out / "run_config.ini", cfg.echo())
        return COMMANDS[args.command](cfg, out)
    except errors.SpectralAssumptionViolated as exc:
        print(f"error: spectral assumption violated: {exc}", file=sys.stderr)
        return EXIT_SPECTRAL
    except errors.BorderlineResonance as exc:
        print(f"error: borderline resonance: {exc}", file=sys.stderr)
        return EXIT_BORDERLINE
    except errors.TruncationOverflow as exc:
        print(f"error: truncation overflow: {exc}", file=sys.stderr)
        return EXIT_TRUNCATION
    except errors.BlowupDetected as exc:
        print(f"error: blow-up detected: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except MissingTrajectory as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (errors.KGDecayError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
