"""Mode extraction, the reduced envelope law and its comparison barriers, fits.

The reduced law for the bound-state amplitude is

    d|xi|^2/dt = -2 gamma |xi|^(4N+2) + 2 Re(conj(xi) R_xi),

whose unforced solution is |xi(t)|^(-4N) = |xi_0|^(-4N) + 4 N gamma t.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, stats

from .errors import EmptyWindow, HypothesisViolated, InvalidArgument, PhaseAmbiguous
from .fgr import ResolventQuery, resolvent_apply
from .spectral import SpectralData, apply_B_power, lp_norm, weight
from .dynamics import SimState, Trajectory

SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class ModePair:
    xi: complex
    f: np.ndarray
    t: float = 0.0


def extract_modes(state: SimState, spec: SpectralData) -> ModePair:
    """xi = (q sqrt(omega) + i p / sqrt(omega)) / sqrt 2 and
    f = (B^(1/2) P_c w + i B^(-1/2) P_c w_t) / sqrt 2."""
    om = spec.omega
    phi, dr = spec.phi, spec.grid.dr
    q = phi @ state.w * dr
    p = phi @ state.w_t * dr
    xi = (q * np.sqrt(om) + 1j * p / np.sqrt(om)) / SQRT2
    f = (
        apply_B_power(spec, 1.0, state.w, "continuous")
        + 1j * apply_B_power(spec, -1.0, state.w_t, "continuous")
    ) / SQRT2
    return ModePair(complex(xi), f, state.t)


def reconstruct(modes: ModePair, spec: SpectralData) -> SimState:
    """Inverse of :func:`extract_modes`."""
    om = spec.omega
    xi, f = modes.xi, modes.f
    q = SQRT2 * xi.real / np.sqrt(om)
    p = SQRT2 * np.sqrt(om) * xi.imag
    w = q * spec.phi + SQRT2 * apply_B_power(spec, -1.0, f, "continuous").real
    w_t = p * spec.phi + SQRT2 * apply_B_power(spec, 1.0, f, "continuous").imag
    return SimState(w, w_t, modes.t)


def unwrap_theta(t, xi, omega):
    """theta(t) = -arg xi(t) - omega t, unwrapped along the samples."""
    t = np.asarray(t, dtype=float)
    xi = np.asarray(xi, dtype=complex)
    if len(t) < 2:
        return np.zeros(len(t))
    # per-sample phase increment with the linear rotation removed
    inc = np.angle(xi[1:] / xi[:-1] * np.exp(1j * omega * np.diff(t)))
    if np.any(np.abs(omega * np.diff(t)) >= np.pi / 2 + 1e-12):
        raise PhaseAmbiguous("sample spacing exceeds pi / (2 omega)")
    if np.any(np.abs(inc) > np.pi / 2):
        raise PhaseAmbiguous("phase jump beyond pi/2 between samples")
    theta0 = -np.angle(xi[0]) - omega * t[0]
    return theta0 - np.concatenate(([0.0], np.cumsum(inc)))


@dataclass(frozen=True, eq=False)
class EnvelopeSeries:
    times: np.ndarray
    abs_xi: np.ndarray
    theta: np.ndarray
    eta_L8: np.ndarray
    f_L8: np.ndarray | None = None
    f_weighted_L4: np.ndarray | None = None

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise InvalidArgument("times must be strictly increasing")

    @classmethod
    def from_trajectory(cls, traj: Trajectory) -> "EnvelopeSeries":
        return cls(traj.t, traj.abs_xi, traj.theta, traj.eta_L8)

    def quantity(self, name: str) -> np.ndarray:
        return {
            "abs_xi": self.abs_xi,
            "theta": np.abs(self.theta),
            "eta_L8": self.eta_L8,
            "f_L8": self.f_L8,
            "f_weighted_L4": self.f_weighted_L4,
        }[name]


def f_norms(modes: ModePair, spec: SpectralData, sigma: float = 3.0):
    """||B^(-1/2) f||_{L^8} and ||<x>^-sigma B^(1/2) f||_{L^4}."""
    g = spec.grid
    a = lp_norm(apply_B_power(spec, -1.0, modes.f, "continuous"), 8, g)
    b = lp_norm(weight(g, sigma) * apply_B_power(spec, 1.0, modes.f, "continuous"), 4, g)
    return a, b


def closed_form(xi0: float, gamma: float, N: int, t):
    """|xi_0| (1 + 4 N gamma |xi_0|^(4N) t)^(-1/(4N))."""
    a = abs(xi0)
    return a * (1.0 + 4 * N * gamma * a ** (4 * N) * np.asarray(t, dtype=float)) ** (-1.0 / (4 * N))


@dataclass(frozen=True, eq=False)
class EnvelopeSolution:
    t: np.ndarray
    r: np.ndarray
    clipped: bool = False

    @property
    def abs_xi(self):
        return np.sqrt(self.r)


def envelope_ode_solve(
    xi0: float,
    gamma: float,
    N: int,
    horizon: float,
    forcing: Callable[[float, float], float] | None = None,
    t_eval=None,
    rtol: float = 1e-12,
) -> EnvelopeSolution:
    """Integrate r' = -2 gamma r^(2N+1) + F(t, r) for r = |xi|^2.

    ``forcing(t, r)`` returns the term 2 Re(conj(xi) R_xi).  The state is
    clipped at zero if the forcing would drive it negative.
    """
    if gamma < 0:
        raise InvalidArgument("gamma must be non-negative")
    if int(N) != N or N < 1:
        raise InvalidArgument("N must be a positive integer")
    r0 = abs(xi0) ** 2
    t_eval = np.linspace(0.0, horizon, 201) if t_eval is None else np.asarray(t_eval, dtype=float)
    clipped = False

    def rhs(t, y):
        r = max(y[0], 0.0)
        val = -2.0 * gamma * r ** (2 * N + 1)
        if forcing is not None:
            val += forcing(t, r)
        return [val]

    def hit_zero(t, y):
        return y[0]

    hit_zero.terminal = True
    hit_zero.direction = -1
    sol = integrate.solve_ivp(
        rhs, (0.0, horizon), [r0], method="DOP853", t_eval=t_eval, rtol=rtol, atol=1e-300 + r0 * 1e-16,
        events=hit_zero if forcing is not None else None,
    )
    r = sol.y[0]
    if len(r) < len(t_eval):
        clipped = True
        r = np.concatenate((r, np.zeros(len(t_eval) - len(r))))
    return EnvelopeSolution(t_eval, np.maximum(r, 0.0), clipped)


@dataclass(frozen=True)
class BarrierPair:
    """Upper barrier h and lower barrier h_tilde for y = |xi|^(4N)."""

    r0: float
    gamma: float
    N: int
    Q0: float
    delta: float
    C0: float
    eps: float | None

    def x(self, t):
        return 4 * self.N * self.gamma * self.r0 * np.asarray(t, dtype=float)

    def h(self, t):
        s = 1.0 + self.x(t)
        return (self.r0 + self.C0 * s ** (-self.delta / 2.0)) / s

    def h_tilde(self, t):
        s = 1.0 + self.x(t)
        if self.Q0 == 0:
            return self.r0 / s
        if self.eps is None or self.eps <= 0:
            raise HypothesisViolated("lower barrier needs Q0 = O(|xi_0|^(4N+1+eps)) with eps > 0")
        return (self.r0 - self.r0 ** (1 + self.eps / (8 * self.N)) * s ** (-self.delta)) / s

    @property
    def lower_sufficient(self) -> bool:
        """Whether the differential inequality behind h_tilde holds at the given constants."""
        if self.Q0 == 0:
            return True
        if self.eps is None or self.eps <= 0:
            return False
        q = self.r0 ** (self.eps / (8 * self.N))
        return self.gamma * (1 - self.delta - q) > q


def _C0_condition(C, r0, gamma, N, Q0):
    a = (4 * N - 1) / (4 * N)
    return 4 * N * gamma * C * C - 8 * N * Q0 * (r0**a + C**a)


def comparison_bounds(r0: float, gamma: float, N: int, Q0: float, delta: float) -> BarrierPair:
    """Barriers of the comparison argument for y = |xi|^(4N) with y(0) = r0.

    C0 is the smallest constant with
    4 N gamma C0^2 >= 8 N Q0 r0^((4N-1)/4N) + 8 N Q0 C0^((4N-1)/4N),
    found by bisection.
    """
    if not (gamma > 0 and r0 > 0 and Q0 >= 0 and delta > 0):
        raise HypothesisViolated("need gamma > 0, r0 > 0, Q0 >= 0 and delta > 0")
    if Q0 == 0:
        return BarrierPair(r0, gamma, N, 0.0, delta, 0.0, None)
    lo, hi = 0.0, 1.0
    while _C0_condition(hi, r0, gamma, N, Q0) < 0:
        hi *= 2.0
        if hi > 1e300:
            raise HypothesisViolated("no admissible C0")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _C0_condition(mid, r0, gamma, N, Q0) >= 0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-15 * hi:
            break
    xi0 = r0 ** (1.0 / (4 * N))
    eps = np.log(Q0) / np.log(xi0) - (4 * N + 1) if xi0 < 1 else None
    return BarrierPair(r0, gamma, N, Q0, delta, hi, eps)


def forcing_envelope(Q0: float, gamma: float, N: int, xi0: float, delta: float):
    """The bound Q0 (1 + 4 N gamma |xi_0|^(4N) t)^(-(4N+1)/(4N) - delta) on |R_xi|."""
    c = 4 * N * gamma * abs(xi0) ** (4 * N)
    p = (4 * N + 1) / (4 * N) + delta
    return lambda t: Q0 * (1.0 + c * t) ** (-p)


def measure_forcing(t, abs_xi, gamma: float, N: int, delta: float = 0.1, smooth: int = 1):
    """Q0 = sup |R_xi| (1 + 4 N gamma |xi_0|^(4N) t)^((4N+1)/(4N) + delta).

    |R_xi| is estimated from the mismatch between the measured d|xi|^2/dt
    and -2 gamma |xi|^(4N+2), using 2 |Re(conj xi R_xi)| <= 2 |xi| |R_xi|.
    """
    t = np.asarray(t, dtype=float)
    a = np.asarray(abs_xi, dtype=float)
    drdt = np.gradient(a * a, t)
    resid = np.abs(drdt + 2 * gamma * a ** (4 * N + 2)) / (2 * a)
    c = 4 * N * gamma * a[0] ** (4 * N)
    p = (4 * N + 1) / (4 * N) + delta
    return float(np.max(resid * (1 + c * t) ** p))


def main_term_f(xi: complex, Phi_res, spec: SpectralData, N: int, eps_ladder=None):
    """M_f = -xi^(2N+1) (B - (2N+1) omega - i0)^(-1) conj(Phi_res)."""
    Lam = (2 * N + 1) * spec.omega
    if Lam <= spec.mass:
        raise InvalidArgument("(2N+1) omega must lie in the continuous spectrum")
    if xi == 0:
        return np.zeros(spec.grid.n, dtype=complex)
    res = resolvent_apply(spec, ResolventQuery(Lam, np.conj(np.asarray(Phi_res, dtype=complex)), -1, eps_ladder))
    return -(xi ** (2 * N + 1)) * res.limit


@dataclass(frozen=True)
class FitResult:
    quantity: str
    t0: float
    t1: float
    slope: float
    stderr: float
    predicted: float = np.nan

    @property
    def ratio(self) -> float:
        return self.slope / self.predicted if self.predicted else np.nan

    HEADER = ("quantity", "t0", "t1", "slope", "stderr", "predicted", "ratio")

    def row(self):
        return [self.quantity, self.t0, self.t1, self.slope, self.stderr, self.predicted, self.ratio]


def fit_report_csv(fits) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FitResult.HEADER)
    for fit in fits:
        writer.writerow([v if isinstance(v, str) else repr(float(v)) for v in fit.row()])
    return buf.getvalue()


def fit_decay(t, values, window, quantity: str = "value", predicted: float = np.nan, min_samples: int = 20) -> FitResult:
    """Least squares of log(value) against log(t) over ``window``."""
    t = np.asarray(t, dtype=float)
    v = np.abs(np.asarray(values, dtype=float))
    t0, t1 = window
    sel = (t >= t0) & (t <= t1) & (t > 0) & (v > 0)
    if sel.sum() < min_samples:
        raise EmptyWindow(f"only {int(sel.sum())} usable samples in [{t0}, {t1}]")
    fit = stats.linregress(np.log(t[sel]), np.log(v[sel]))
    return FitResult(quantity, float(t0), float(t1), float(fit.slope), float(fit.stderr), predicted)


def fit_linear(t, values, window, min_samples: int = 20):
    """Slope, intercept and R^2 of a straight-line fit over ``window``."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    sel = (t >= window[0]) & (t <= window[1])
    if sel.sum() < min_samples:
        raise EmptyWindow(f"only {int(sel.sum())} samples in {window}")
    fit = stats.linregress(t[sel], v[sel])
    return float(fit.slope), float(fit.intercept), float(fit.rvalue**2)


def period_average(t, values, period: float):
    """Running mean over one period (centered, valid part only)."""
    t = np.asarray(t, dtype=float)
    dt = t[1] - t[0]
    k = max(1, int(round(period / dt)))
    ker = np.ones(k) / k
    v = np.convolve(values, ker, mode="valid")
    tt = np.convolve(t, ker, mode="valid")
    return tt, v


def theta_growth(t, theta, window=None, N: int | None = None, tol: float = 0.15) -> float:
    """Growth exponent of |theta(t) - theta(t_0)| fitted in log-log.

    With ``N`` given, raises ``AssertionError`` when the exponent exceeds
    1 - 1/(2N) + ``tol``.
    """
    t = np.asarray(t, dtype=float)
    th = np.asarray(theta, dtype=float)
    if window is None:
        window = (t[t > 0][0], t[-1])
    sel = (t >= window[0]) & (t <= window[1])
    dev = np.abs(th[sel] - th[0])
    if np.all(dev <= 1e-12 * max(1.0, np.abs(th).max())):
        expo = 0.0
    else:
        ok = dev > 0
        expo = float(stats.linregress(np.log(t[sel][ok]), np.log(dev[ok])).slope)
    if N is not None and expo > 1 - 1 / (2 * N) + tol:
        raise AssertionError(f"theta growth exponent {expo:.3f} exceeds {1 - 1 / (2 * N) + tol:.3f}")
    return expo


def _kernel(kind: str, delta: float):
    if kind == "A1":
        return lambda s: np.minimum(s ** (-(1 + delta)), s ** (-(1 - delta))), -(1 - delta)
    if kind == "A2":
        return lambda s: s ** -0.5, -0.5
    raise InvalidArgument(f"unknown kernel {kind!r}")


def convolution_integral(kind: str, alpha: float, xi0: float, N: int, t: float, delta: float = 0.3) -> float:
    """int_0^t K(t - s) <|xi_0|^(4N) s>^(-alpha) ds by adaptive quadrature."""
    K, beta = _kernel(kind, delta)
    c = abs(xi0) ** (4 * N)

    def g(s):
        return (1.0 + (c * s) ** 2) ** (-alpha / 2.0)

    # near tau = t - s = 0 the kernel is tau^beta: use an algebraic weight
    a = min(1.0, t)
    total = integrate.quad(lambda tau: g(t - tau), 0.0, a, weight="alg", wvar=(beta, 0.0), limit=200)[0]
    if t > 1.0:
        knots = np.unique(np.concatenate((
            np.geomspace(1.0, t, 40),
            t - np.geomspace(min(1.0, t / 2), t - 1.0, 40) if t > 2.0 else [],
            [1.0, t],
        )))
        knots = knots[(knots >= 1.0) & (knots <= t)]
        for lo, hi in zip(knots[:-1], knots[1:]):
            total += integrate.quad(lambda tau: K(tau) * g(t - tau), lo, hi, limit=200)[0]
    return float(total)


def convolution_bound(kind: str, alpha: float, xi0: float, N: int, t) -> np.ndarray:
    c = abs(xi0) ** (4 * N)
    t = np.asarray(t, dtype=float)
    if kind == "A1":
        return (1.0 + (c * t) ** 2) ** (-alpha / 2.0)
    return abs(xi0) ** (-2 * N) * (1.0 + (c * t) ** 2) ** (-0.25)


def convolution_check(kind: str, alpha: float, xi0: float, N: int, t_grid, delta: float = 0.3):
    """Ratios of the convolution integral to its claimed bound on ``t_grid``.

    Returns ``(max_ratio, ratios)``.
    """
    if kind == "A1":
        if not 0 < delta < 1:
            raise InvalidArgument("need 0 < delta < 1")
        if not 0 <= alpha <= 1 + delta:
            raise InvalidArgument("need 0 <= alpha <= 1 + delta")
    elif kind == "A2":
        if not alpha > 1:
            raise InvalidArgument("need alpha > 1")
    else:
        raise InvalidArgument(f"unknown kernel {kind!r}")
    t_grid = np.asarray(t_grid, dtype=float)
    vals = np.array([convolution_integral(kind, alpha, xi0, N, t, delta) for t in t_grid])
    ratios = vals / convolution_bound(kind, alpha, xi0, N, t_grid)
    return float(ratios.max()), ratios
