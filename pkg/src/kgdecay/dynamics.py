"""Time integration of the radial nonlinear Klein-Gordon equation.

In the reduced variable w = r u the equation reads

    w_tt = w_rr - (m^2 + V) w + lam w^3 / r^2

with Dirichlet conditions at both ends of the box.  The default scheme is
Strang splitting in the eigenbasis of H, with exact linear half steps and a
nonlinear kick in between.
"""
from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import BlowupDetected, BoundaryContaminated, InvalidArgument
from .fgr import level_spacing
from .spectral import SpectralData, assemble_hamiltonian, lp_norm, project, weight


@dataclass(frozen=True, eq=False)
class SimState:
    w: np.ndarray
    w_t: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        if not (np.all(np.isfinite(self.w)) and np.all(np.isfinite(self.w_t))):
            raise InvalidArgument("non-finite state")


def support_radius(grid, w, rel: float = 1e-8) -> float:
    """Radius beyond which |w| stays below ``rel`` times its maximum."""
    a = np.abs(w)
    if not np.any(a):
        return 0.0
    idx = np.flatnonzero(a > rel * a.max())
    return float(grid.r[idx[-1]])


@dataclass(frozen=True, eq=False)
class SimConfig:
    """Parameters of a simulation run.

    ``a0`` is the initial |xi| and ``phase0`` the initial arg(xi).  The
    continuous seed is a smooth bump r exp(-((r - seed_center)/seed_width)^2),
    projected onto the continuous subspace and scaled to L^2 norm ``c0``,
    which must not exceed ``C0`` times the bound-state part.
    """

    spec: SpectralData
    lam: float = 1.0
    dt: float = 0.05
    T: float = 100.0
    scheme: str = "strang"
    stride: int = 1
    a0: float = 0.1
    phase0: float = 0.0
    c0: float = 0.0
    C0: float = 1.0
    seed_center: float = 5.0
    seed_width: float = 1.5
    blowup_bound: float = 1e3
    allow_boundary: bool = False

    def __post_init__(self):
        if self.scheme not in ("strang", "leapfrog"):
            raise InvalidArgument(f"unknown scheme {self.scheme!r}")
        if not (self.dt > 0 and self.T >= 0 and self.stride >= 1):
            raise InvalidArgument("need dt > 0, T >= 0, stride >= 1")
        if self.dt * np.sqrt(self.spec.energies[-1]) > 1.0:
            raise InvalidArgument("dt violates the stability margin dt * max sqrt(E_k) <= 1")
        if self.a0 < 0 or self.c0 < 0:
            raise InvalidArgument("amplitudes must be non-negative")
        pd = self.a0 * np.sqrt(2.0 / self.spec.omega) if self.a0 else 0.0
        if self.c0 > self.C0 * pd + 1e-15:
            raise InvalidArgument("continuous seed exceeds C0 times the bound-state part")
        if self.T > self.t_return and not self.allow_boundary:
            raise InvalidArgument(
                f"T={self.T} exceeds the return time {self.t_return:.4g} of outgoing radiation; set allow_boundary"
            )

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def support(self) -> float:
        return support_radius(self.spec.grid, initial_state(self).w)

    @property
    def t_reflect(self) -> float:
        """Time at which radiation from the data support reaches the wall."""
        return self.spec.grid.r_max - self.support

    @property
    def t_return(self) -> float:
        """Time at which reflected radiation is back at the data support."""
        return 2.0 * self.t_reflect


def initial_state(cfg: SimConfig) -> SimState:
    spec = cfg.spec
    om = spec.omega
    xi = cfg.a0 * np.exp(-1j * cfg.phase0)
    q = np.sqrt(2.0 / om) * xi.real
    p = np.sqrt(2.0 * om) * xi.imag
    w = q * spec.phi
    w_t = p * spec.phi
    if cfg.c0 > 0:
        r = spec.grid.r
        bump = project(spec, r * np.exp(-(((r - cfg.seed_center) / cfg.seed_width) ** 2)), "continuous")
        w = w + cfg.c0 * bump / np.sqrt(np.sum(bump**2) * spec.grid.dr)
    return SimState(w, w_t, 0.0)


def linear_propagate(spec: SpectralData, state: SimState, tau: float) -> SimState:
    """Exact linear evolution by time ``tau`` in the eigenbasis."""
    c = spec.coefficients(state.w)
    d = spec.coefficients(state.w_t)
    c, d = _rotate(c, d, spec.frequencies, tau)
    return SimState(spec.synthesize(c), spec.synthesize(d), state.t + tau)


def _rotate(c, d, freqs, tau):
    cs, sn = np.cos(freqs * tau), np.sin(freqs * tau)
    return c * cs + d * sn / freqs, -c * freqs * sn + d * cs


class StrangStepper:
    """Strang splitting carried in eigen-coefficients (c, d) of (w, w_t)."""

    def __init__(self, spec: SpectralData, lam: float, dt: float):
        self.spec = spec
        self.lam = lam
        self.dt = dt
        self.V = spec.vectors
        self.VTdr = np.ascontiguousarray(spec.vectors.T * spec.grid.dr)
        self.inv_r2 = 1.0 / spec.grid.r**2
        half = dt / 2.0
        f = spec.frequencies
        self._cs, self._sn = np.cos(f * half), np.sin(f * half)
        self._f = f

    def load(self, state: SimState):
        return self.VTdr @ state.w, self.VTdr @ state.w_t

    def unload(self, c, d, t):
        return SimState(self.V @ c, self.V @ d, t)

    def _half(self, c, d, sign):
        cs, sn, f = self._cs, sign * self._sn, self._f
        return c * cs + d * sn / f, -c * f * sn + d * cs

    def step(self, c, d, sign: int = 1):
        c, d = self._half(c, d, sign)
        if self.lam != 0.0:
            w = self.V @ c
            d = d + sign * self.dt * self.lam * (self.VTdr @ (w**3 * self.inv_r2))
        return self._half(c, d, sign)


class LeapfrogStepper:
    """Velocity Verlet with the finite-difference operator on the grid."""

    def __init__(self, spec: SpectralData, lam: float, dt: float):
        self.spec = spec
        self.lam = lam
        self.dt = dt
        self.H = assemble_hamiltonian(spec.grid, spec.potential)
        self.inv_r2 = 1.0 / spec.grid.r**2

    def load(self, state):
        return state.w.copy(), state.w_t.copy()

    def unload(self, w, v, t):
        return SimState(w, v, t)

    def _acc(self, w):
        return -self.H.matvec(w) + self.lam * w**3 * self.inv_r2

    def step(self, w, v, sign: int = 1):
        h = sign * self.dt
        v = v + 0.5 * h * self._acc(w)
        w = w + h * v
        v = v + 0.5 * h * self._acc(w)
        return w, v


def make_stepper(spec, lam, dt, scheme="strang"):
    if scheme == "strang":
        return StrangStepper(spec, lam, dt)
    if scheme == "leapfrog":
        return LeapfrogStepper(spec, lam, dt)
    raise InvalidArgument(f"unknown scheme {scheme!r}")


def step_nlkg(state: SimState, dt: float, lam: float, spec: SpectralData, scheme: str = "strang",
              n_steps: int = 1, blowup_bound: float = np.inf) -> SimState:
    """Advance ``n_steps`` steps of size ``dt`` (negative dt steps backwards)."""
    sign = 1 if dt >= 0 else -1
    stepper = make_stepper(spec, lam, abs(dt), scheme)
    a, b = stepper.load(state)
    for _ in range(n_steps):
        a, b = stepper.step(a, b, sign)
    out = stepper.unload(a, b, state.t + n_steps * dt)
    sup = float(np.max(np.abs(out.w)))
    if sup > blowup_bound:
        raise BlowupDetected(out.t, sup)
    return out


def energy(state: SimState, spec: SpectralData, lam: float) -> float:
    """1/2 sum(d_k^2 + E_k c_k^2) - (lam/4) int u^4 (3D measure per solid angle)."""
    c = spec.coefficients(state.w)
    d = spec.coefficients(state.w_t)
    quad = 0.5 * np.sum(d * d + spec.energies * c * c)
    quart = np.sum(state.w**4 / spec.grid.r**2) * spec.grid.dr
    return float(quad - 0.25 * lam * quart)


def energy_flux(w, w_t, grid, radius: float) -> float:
    """Outgoing energy flux across the bond just outside ``radius``.

    For the semi-discrete system the energy of the nodes r_j <= r_i changes
    exactly at the rate w_t[i] (w[i+1] - w[i]) / dr, so the outgoing flux is
    its negative.
    """
    i = int(round(radius / grid.dr)) - 1
    if not 0 <= i < grid.n - 1:
        raise InvalidArgument(f"radius {radius} is outside the grid")
    return float(-w_t[i] * (w[i + 1] - w[i]) / grid.dr)


def xi_of(q, p, omega):
    return (q * np.sqrt(omega) + 1j * p / np.sqrt(omega)) / np.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Recorded time series of a run."""

    t: np.ndarray
    xi: np.ndarray
    eta_L8: np.ndarray
    energy: np.ndarray
    Pc_L2: np.ndarray
    omega: float
    final: SimState
    t_reflect: float = np.inf
    t_return: float = np.inf
    snapshots: tuple = field(default=(), repr=False)

    @property
    def abs_xi(self):
        return np.abs(self.xi)

    @property
    def theta(self):
        from .envelope import unwrap_theta

        return unwrap_theta(self.t, self.xi, self.omega)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "abs_xi", "theta", "eta_L8", "energy", "Pc_L2"])
        for row in zip(self.t, self.abs_xi, self.theta, self.eta_L8, self.energy, self.Pc_L2):
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def simulate(cfg: SimConfig, keep_snapshots: bool = False) -> Trajectory:
    """Run the configured simulation and record diagnostics every ``stride`` steps."""
    spec = cfg.spec
    grid = spec.grid
    om = spec.omega
    phi = spec.phi
    stepper = make_stepper(spec, cfg.lam, cfg.dt, cfg.scheme)
    state = initial_state(cfg)
    a, b = stepper.load(state)
    n = cfg.n_steps
    rec_t, rec_xi, rec_eta, rec_E, rec_pc, snaps = [], [], [], [], [], []

    def record(step, a, b):
        s = stepper.unload(a, b, step * cfg.dt)
        sup = float(np.max(np.abs(s.w)))
        if not np.isfinite(sup) or sup > cfg.blowup_bound:
            raise BlowupDetected(s.t, sup)
        q = phi @ s.w * grid.dr
        p = phi @ s.w_t * grid.dr
        pc = s.w - q * phi
        rec_t.append(s.t)
        rec_xi.append(xi_of(q, p, om))
        rec_eta.append(lp_norm(pc, 8, grid))
        rec_pc.append(lp_norm(pc, 2, grid))
        rec_E.append(energy(s, spec, cfg.lam))
        if keep_snapshots:
            snaps.append(s)
        return s

    last = record(0, a, b)
    for step in range(1, n + 1):
        a, b = stepper.step(a, b)
        if step % cfg.stride == 0 or step == n:
            last = record(step, a, b)
    return Trajectory(
        np.array(rec_t),
        np.array(rec_xi),
        np.array(rec_eta),
        np.array(rec_E),
        np.array(rec_pc),
        om,
        last,
        cfg.t_reflect,
        cfg.t_return,
        tuple(snaps),
    )


@dataclass(frozen=True, eq=False)
class ProbeResult:
    slope: float
    stderr: float
    times: np.ndarray
    values: np.ndarray


def _fit_loglog(t, v):
    fit = stats.linregress(np.log(t), np.log(v))
    return float(fit.slope), float(fit.stderr)


def dispersive_decay_probe(spec: SpectralData, psi, p: int = 8, sigma: float | None = None,
                           horizon: float | None = None, t_start: float = 1.0, n_times: int = 60) -> ProbeResult:
    """Log-log slope of || <x>^-sigma B^-1/2 exp(-iBt) P_c psi ||_{L^p} over [t_start, horizon]."""
    grid = spec.grid
    t_ref = grid.r_max - support_radius(grid, psi)
    horizon = t_ref if horizon is None else horizon
    if horizon > t_ref:
        warnings.warn(f"horizon {horizon:g} beyond reflection time {t_ref:g}", BoundaryContaminated, stacklevel=2)
    mask = spec.continuous
    c = spec.coefficients(psi)[mask] / np.sqrt(spec.frequencies[mask])
    V = spec.vectors[:, mask]
    freqs = spec.frequencies[mask]
    wt = 1.0 if sigma is None else weight(grid, sigma)
    times = np.geomspace(t_start, horizon, n_times)
    vals = np.array([lp_norm(wt * (V @ (c * np.exp(-1j * freqs * t))), p, grid) for t in times])
    return ProbeResult(*_fit_loglog(times, vals), times, vals)


def singular_resolvent_probe(spec: SpectralData, Lam: float, psi, horizon: float | None = None, l: int = 1,
                             sigma: float = 3.5, eps: float | None = None, t_start: float = 1.0,
                             n_times: int = 60) -> ProbeResult:
    """Decay of || <x>^-sigma exp(iBt) (B - Lam + i0)^-l P_c <x>^-sigma psi ||_{L^2}.

    The i0 limit is realized with ``eps`` (default two level spacings at Lam),
    which leaves the continuum comb smooth on the probed time scale.
    """
    if Lam <= spec.mass:
        raise InvalidArgument("Lam must lie in the continuous spectrum (Lam > m)")
    grid = spec.grid
    wt = weight(grid, sigma)
    t_ref = grid.r_max - support_radius(grid, wt * psi, 1e-6)
    horizon = t_ref if horizon is None else horizon
    if horizon > t_ref:
        warnings.warn(f"horizon {horizon:g} beyond reflection time {t_ref:g}", BoundaryContaminated, stacklevel=2)
    eps = 2.0 * level_spacing(spec, Lam) if eps is None else eps
    mask = spec.continuous
    freqs = spec.frequencies[mask]
    c = spec.coefficients(wt * psi)[mask] / (freqs - Lam + 1j * eps) ** l
    V = spec.vectors[:, mask]
    times = np.geomspace(t_start, horizon, n_times)
    vals = np.array([lp_norm(wt * (V @ (c * np.exp(1j * freqs * t))), 2, grid) for t in times])
    return ProbeResult(*_fit_loglog(times, vals), times, vals)
