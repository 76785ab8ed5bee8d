"""Regularized resolvents, the spectral delta measure and the golden-rule rate.

On a finite box the continuous spectrum is a comb of box modes.  The delta
measure delta(B - Lam) is therefore estimated by smoothing the comb with a
kernel whose width is a few level spacings, and extrapolating the width to
zero.  Two independent smoothings are used: a Gaussian (method a) and the
Lorentzian implied by the resolvent's imaginary part (method b).
"""
from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BorderlineResonance,
    FrequencyWindowError,
    IllConditionedLimit,
    InvalidArgument,
    WeakResonance,
)
from .spectral import SpectralData

LADDER_FACTORS = (8.0, 4.0, 2.0)


def level_spacing(spec: SpectralData, Lam: float) -> float:
    """Local spacing of continuum frequencies around ``Lam``."""
    freqs = spec.frequencies[spec.continuous]
    j = int(np.clip(np.searchsorted(freqs, Lam), 1, len(freqs) - 2))
    return float((freqs[j + 1] - freqs[j - 1]) / 2.0)


def extrapolation_weights(x) -> np.ndarray:
    """Lagrange weights that extrapolate samples at abscissae ``x`` to x = 0."""
    x = np.asarray(x, dtype=float)
    w = np.ones(len(x))
    for j in range(len(x)):
        for i in range(len(x)):
            if i != j:
                w[j] *= x[i] / (x[i] - x[j])
    return w


def _ladder(spec, Lam, ladder):
    if ladder is None:
        delta = level_spacing(spec, Lam)
        return tuple(f * delta for f in LADDER_FACTORS)
    ladder = tuple(float(e) for e in ladder)
    if len(ladder) < 3 or any(b >= a for a, b in zip(ladder, ladder[1:])) or ladder[-1] <= 0:
        raise InvalidArgument("ladder must be strictly decreasing, positive, with >= 3 entries")
    return ladder


@dataclass(frozen=True)
class ResolventQuery:
    """Request for (B - Lam - sign*i*eps)^-1 P_c target over an eps ladder.

    ``sign=-1`` is the -i0 prescription, ``sign=+1`` the +i0 one.  An empty
    ladder (or ``eps_ladder=(0.0,)``) asks for the plain inverse, valid for
    Lam outside the continuum.
    """

    Lam: float
    target: np.ndarray = field(repr=False)
    sign: int = -1
    eps_ladder: tuple | None = None

    def __post_init__(self):
        if self.sign not in (-1, 1):
            raise InvalidArgument("sign must be -1 (-i0) or +1 (+i0)")


@dataclass(frozen=True, eq=False)
class ResolventResult:
    eps: tuple
    values: tuple
    limit: np.ndarray
    ill_conditioned: bool = False


def resolvent_apply(spec: SpectralData, q: ResolventQuery) -> ResolventResult:
    """Apply the regularized resolvent on the continuous subspace.

    Returns the vector for each eps and the Richardson limit eps -> 0.
    """
    target = np.asarray(q.target)
    if not np.all(np.isfinite(target)):
        raise InvalidArgument("non-finite target")
    mask = spec.continuous
    c = spec.coefficients(target)[mask]
    freqs = spec.frequencies[mask]
    V = spec.vectors[:, mask]
    if q.eps_ladder is not None and all(e == 0 for e in q.eps_ladder):
        if np.min(np.abs(freqs - q.Lam)) < 1e-9:
            raise InvalidArgument("Lam coincides with a box frequency; need eps > 0")
        lim = V @ (c / (freqs - q.Lam))
        return ResolventResult((0.0,), (lim,), lim)
    eps = _ladder(spec, q.Lam, q.eps_ladder)
    values = tuple(V @ (c / (freqs - q.Lam - q.sign * 1j * e)) for e in eps)
    w = extrapolation_weights(eps)
    limit = sum(wj * vj for wj, vj in zip(w, values))
    ill = bool(np.min(np.abs(freqs - q.Lam)) < 1e-9 and eps[-1] < level_spacing(spec, q.Lam))
    if ill:
        warnings.warn("resolvent limit taken on top of a box frequency", IllConditionedLimit, stacklevel=2)
    return ResolventResult(eps, values, limit, ill)


@dataclass(frozen=True)
class DeltaEstimate:
    """Two estimates of <Phi, delta(B - Lam) conj(Phi)>; ``value`` is the kernel one."""

    value: float
    resolvent: float
    sigmas: tuple = ()
    kernel_ladder: tuple = ()
    epsilons: tuple = ()
    resolvent_ladder: tuple = ()
    below_threshold: bool = False

    def __float__(self):
        return self.value

    @property
    def spread(self) -> float:
        scale = max(abs(self.value), abs(self.resolvent))
        return 0.0 if scale == 0 else abs(self.value - self.resolvent) / scale


def spectral_delta(spec: SpectralData, Phi, Lam: float, sigma_ladder=None, eps_ladder=None) -> DeltaEstimate:
    """Estimate <Phi, delta(B - Lam) conj(Phi)> by Gaussian and Lorentzian smoothing."""
    if Lam <= spec.mass:
        return DeltaEstimate(0.0, 0.0, below_threshold=True)
    mask = spec.continuous
    weights = np.abs(spec.coefficients(Phi)[mask]) ** 2
    x = spec.frequencies[mask] - Lam

    sigmas = _ladder(spec, Lam, sigma_ladder)
    kern = tuple(
        float(np.sum(weights * np.exp(-0.5 * (x / s) ** 2)) / (np.sqrt(2 * np.pi) * s)) for s in sigmas
    )
    # Gaussian smoothing error is even in sigma
    a = float(extrapolation_weights(np.square(sigmas)) @ np.array(kern))

    eps = _ladder(spec, Lam, eps_ladder)
    lor = tuple(float(np.sum(weights * e / (x * x + e * e)) / np.pi) for e in eps)
    b = float(extrapolation_weights(eps) @ np.array(lor))
    return DeltaEstimate(a, b, sigmas, kern, eps, lor)


def check_window(spec: SpectralData, N: int, tol: float | None = None) -> None:
    """Raise unless (2N-1) omega < m < (2N+1) omega with a margin."""
    if int(N) != N or N < 1:
        raise InvalidArgument("N must be a positive integer")
    m, om = spec.mass, spec.omega
    tol = 1e-6 * m if tol is None else tol
    for k in (2 * N - 1, 2 * N + 1):
        if abs(m - k * om) < tol:
            raise BorderlineResonance(f"m = {m} is within {tol:g} of {k} omega = {k * om}")
    if not (2 * N - 1) * om < m < (2 * N + 1) * om:
        raise FrequencyWindowError(
            f"omega={om:.6g}, m={m:.6g} lies outside the N={N} window; expected N={spec.window_N()}"
        )


@dataclass(frozen=True)
class GoldenRuleReport:
    N: int
    omega: float
    m: float
    Lam: float
    gamma_kernel: float
    gamma_resolvent: float
    sigma_ladder: tuple = ()
    eps_ladder: tuple = ()

    @property
    def gamma(self) -> float:
        return 0.5 * (self.gamma_kernel + self.gamma_resolvent)

    @property
    def spread(self) -> float:
        scale = max(abs(self.gamma_kernel), abs(self.gamma_resolvent))
        return 0.0 if scale == 0 else abs(self.gamma_kernel - self.gamma_resolvent) / scale

    @property
    def flagged(self) -> bool:
        return self.spread > 0.05

    HEADER = ("N", "omega", "m", "Lambda", "gamma_kernel", "gamma_resolvent", "gamma", "spread")

    def row(self) -> list:
        return [self.N, self.omega, self.m, self.Lam, self.gamma_kernel, self.gamma_resolvent, self.gamma, self.spread]

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        if header:
            writer.writerow(self.HEADER)
        writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in self.row()])
        return buf.getvalue()


def gamma_coefficient(spec: SpectralData, Phi, N: int, sigma_ladder=None, eps_ladder=None) -> GoldenRuleReport:
    """Golden-rule rate gamma = (2N+1) pi <Phi, delta(B - (2N+1) omega) conj(Phi)>.

    With this normalization the envelope obeys d|xi|^2/dt = -2 gamma |xi|^(4N+2).
    """
    check_window(spec, N)
    Lam = (2 * N + 1) * spec.omega
    est = spectral_delta(spec, Phi, Lam, sigma_ladder, eps_ladder)
    k = (2 * N + 1) * np.pi
    return GoldenRuleReport(
        int(N), spec.omega, spec.mass, Lam, k * est.value, k * est.resolvent, est.sigmas, est.epsilons
    )


def cubic_source(spec: SpectralData) -> np.ndarray:
    """P_c(phi^3) as a reduced grid function."""
    from .spectral import project

    r = spec.grid.r
    return project(spec, spec.phi**3 / r**2, "continuous")


def gamma_sw(spec: SpectralData, sigma_ladder=None, eps_ladder=None) -> float:
    """Cubic-order constant (pi / 3 omega) <P_c phi^3, delta(B - 3 omega) P_c phi^3>."""
    om = spec.omega
    if 3 * om <= spec.mass:
        raise WeakResonance(f"3 omega = {3 * om:.6g} does not reach the continuum at m = {spec.mass}")
    est = spectral_delta(spec, cubic_source(spec), 3 * om, sigma_ladder, eps_ladder)
    return float(np.pi / (3 * om) * est.value)
