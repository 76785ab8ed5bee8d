"""Radial discretization of H = -Laplacian + V + m^2 and functional calculus for B = sqrt(H).

Radial data are carried in the reduced form w = r u, for which the 3D
Laplacian becomes d^2/dr^2 with a Dirichlet condition at r = 0.  Grid
functions are plain numpy arrays of length ``grid.n`` in this reduced form.
Inner products are ``<u, v> = sum(u * v) * dr`` (bilinear; conjugate
explicitly where needed), which equals the 3D L^2 pairing per unit solid
angle of the underlying radial functions.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import linalg, optimize

from .errors import InvalidArgument, SpectralAssumptionViolated

MIN_NODES = 16


@dataclass(frozen=True)
class RadialGrid:
    r_max: float
    n: int

    @property
    def dr(self) -> float:
        return self.r_max / (self.n + 1)

    @property
    def r(self) -> np.ndarray:
        return self.dr * np.arange(1, self.n + 1)

    def integrate(self, values) -> complex:
        """Plain quadrature  sum(values) * dr."""
        return np.sum(values) * self.dr

    def integrate3d(self, u_values):
        """Integral of a radial function u against r^2 dr (3D measure per solid angle)."""
        r = self.r
        return np.sum(u_values * r * r) * self.dr


def build_grid(r_max: float, n: int) -> RadialGrid:
    if not np.isfinite(r_max) or r_max <= 0:
        raise InvalidArgument(f"r_max must be positive, got {r_max}")
    if int(n) != n or n < MIN_NODES:
        raise InvalidArgument(f"need at least {MIN_NODES} interior nodes, got {n}")
    return RadialGrid(float(r_max), int(n))


@dataclass(frozen=True)
class PotentialSpec:
    """Radial potential V(r) together with the mass m.

    ``kind`` is one of ``"square_well"`` (V = -depth for r < radius),
    ``"gaussian"`` (V = amplitude * exp(-(r/width)^2)), ``"tabulated"``
    (linear interpolation of ``table``, zero beyond its last abscissa) or
    ``"zero"``.
    """

    kind: str = "zero"
    mass: float = 1.0
    depth: float = 0.0
    radius: float = 1.0
    amplitude: float = 0.0
    width: float = 1.0
    table: tuple | None = field(default=None, repr=False)
    decay_exponent: float = 5.0

    def __post_init__(self):
        if self.kind not in ("zero", "square_well", "gaussian", "tabulated"):
            raise InvalidArgument(f"unknown potential kind {self.kind!r}")
        if not self.mass > 0:
            raise InvalidArgument("mass must be positive")
        if self.kind == "square_well" and not (self.depth > 0 and self.radius > 0):
            raise InvalidArgument("square well needs depth > 0 and radius > 0")
        if self.kind == "gaussian" and not self.width > 0:
            raise InvalidArgument("gaussian width must be positive")
        if self.kind == "tabulated" and self.table is None:
            raise InvalidArgument("tabulated potential needs a table")

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(r)
        if self.kind == "square_well":
            return np.where(r < self.radius, -self.depth, 0.0)
        if self.kind == "gaussian":
            return self.amplitude * np.exp(-((r / self.width) ** 2))
        rt, vt = (np.asarray(a, dtype=float) for a in self.table)
        return np.interp(r, rt, vt, right=0.0)

    def on_grid(self, grid: "RadialGrid") -> np.ndarray:
        """Values used on the grid diagonal.

        Smooth kinds are sampled at the nodes.  The square well is averaged
        over each cell [r_i - dr/2, r_i + dr/2], which restores second-order
        convergence of the eigenvalues across the jump.
        """
        if self.kind != "square_well":
            return self(grid.r)
        dr = grid.dr
        inside = np.clip((self.radius - (grid.r - 0.5 * dr)) / dr, 0.0, 1.0)
        return -self.depth * inside

    def with_strength(self, s: float) -> "PotentialSpec":
        """Copy with the well strength replaced (depth, or -amplitude for gaussians)."""
        if self.kind == "square_well":
            return PotentialSpec("square_well", self.mass, depth=s, radius=self.radius)
        if self.kind == "gaussian":
            return PotentialSpec("gaussian", self.mass, amplitude=-s, width=self.width)
        raise InvalidArgument(f"cannot rescale a {self.kind} potential")


def load_potential_table(path, mass: float = 1.0) -> PotentialSpec:
    """Read a two-column (r, V) text table."""
    data = np.loadtxt(path, ndmin=2, encoding="utf-8")
    if data.shape[1] != 2:
        raise InvalidArgument("potential table must have exactly two columns")
    return PotentialSpec("tabulated", mass, table=(tuple(data[:, 0]), tuple(data[:, 1])))


def check_decay(grid: RadialGrid, values, exponent: float = 5.0) -> bool:
    """Tail test for |V(r)| <= C <r>^-delta with delta > exponent.

    The weighted profile |V| <r>^exponent must not grow on the outer half of
    the grid beyond its maximum over the inner half.
    """
    r = grid.r
    weighted = np.abs(values) * (1 + r * r) ** (exponent / 2)
    half = grid.n // 2
    inner = weighted[:half].max(initial=0.0)
    outer = weighted[half:].max(initial=0.0)
    if outer == 0.0:
        return True
    return bool(outer <= inner and weighted[-1] <= weighted[half] * (1 + 1e-12))


class TridiagonalMatrix(NamedTuple):
    diagonal: np.ndarray
    off_diagonal: np.ndarray

    def matvec(self, v):
        out = self.diagonal * v
        out[:-1] += self.off_diagonal * v[1:]
        out[1:] += self.off_diagonal * v[:-1]
        return out

    def toarray(self):
        return np.diag(self.diagonal) + np.diag(self.off_diagonal, 1) + np.diag(self.off_diagonal, -1)


def assemble_hamiltonian(grid: RadialGrid, pot: PotentialSpec) -> TridiagonalMatrix:
    """Second-order finite differences for -d^2/dr^2 + m^2 + V(r), Dirichlet at both ends."""
    V = pot.on_grid(grid)
    if not np.all(np.isfinite(V)):
        raise InvalidArgument("potential has non-finite values on the grid")
    if not check_decay(grid, V, pot.decay_exponent):
        raise InvalidArgument(f"potential does not decay faster than <r>^-{pot.decay_exponent} on the grid tail")
    h2 = 1.0 / grid.dr**2
    diag = 2.0 * h2 + pot.mass**2 + V
    off = np.full(grid.n - 1, -h2)
    return TridiagonalMatrix(diag, off)


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Full eigen-decomposition of the discretized H.

    ``vectors[:, k]`` is the k-th eigenvector, orthonormal for the
    dr-weighted product.  Assumption flags that cannot be checked on the
    grid (zero is not a resonance; the commutator bounds on x.grad V) are
    recorded in ``assumptions``.
    """

    grid: RadialGrid
    potential: PotentialSpec
    energies: np.ndarray
    vectors: np.ndarray
    discrete: tuple
    assumptions: tuple = ("zero is not a resonance (unchecked)", "x.grad V commutator bounds (unchecked)")

    @property
    def mass(self) -> float:
        return self.potential.mass

    @property
    def threshold(self) -> float:
        return self.potential.mass**2

    @property
    def frequencies(self) -> np.ndarray:
        return np.sqrt(self.energies)

    @property
    def bound_index(self) -> int:
        return self.discrete[0]

    @property
    def omega(self) -> float:
        return float(np.sqrt(self.energies[self.bound_index]))

    @property
    def phi(self) -> np.ndarray:
        return self.vectors[:, self.bound_index]

    @property
    def continuous(self) -> np.ndarray:
        mask = np.ones(len(self.energies), dtype=bool)
        mask[list(self.discrete)] = False
        return mask

    def coefficients(self, v):
        """Expansion coefficients <v_k, v> for all k."""
        return self.vectors.T @ v * self.grid.dr

    def synthesize(self, coeffs):
        return self.vectors @ coeffs

    def window_N(self) -> int:
        """The N with (2N-1) omega < m < (2N+1) omega."""
        return int(np.floor((self.mass / self.omega + 1) / 2))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["k", "E_k", "is_discrete"])
        disc = set(self.discrete)
        for k, E in enumerate(self.energies):
            writer.writerow([k + 1, repr(float(E)), int(k in disc)])
        return buf.getvalue()


def eigendecompose(hmat: TridiagonalMatrix, grid: RadialGrid, pot: PotentialSpec) -> SpectralData:
    E, U = linalg.eigh_tridiagonal(hmat.diagonal, hmat.off_diagonal)
    U = U / np.sqrt(grid.dr)
    # deterministic signs: first node positive
    signs = np.where(U[0] < 0, -1.0, 1.0)
    U = U * signs
    below = np.flatnonzero(E < pot.mass**2)
    if len(below) != 1 or E[below[0]] <= 0:
        raise SpectralAssumptionViolated(len(below), E[below])
    return SpectralData(grid, pot, E, U, tuple(int(k) for k in below))


def spectrum(grid: RadialGrid, pot: PotentialSpec) -> SpectralData:
    return eigendecompose(assemble_hamiltonian(grid, pot), grid, pot)


def lowest_eigenvalue(grid: RadialGrid, pot: PotentialSpec) -> float:
    h = assemble_hamiltonian(grid, pot)
    return float(
        linalg.eigh_tridiagonal(
            h.diagonal, h.off_diagonal, eigvals_only=True, select="i", select_range=(0, 0)
        )[0]
    )


def tune_strength(grid: RadialGrid, pot: PotentialSpec, omega: float) -> PotentialSpec:
    """Rescale the well so that the discrete bound-state frequency equals ``omega``."""
    if not 0 < omega < pot.mass:
        raise InvalidArgument("target frequency must lie in (0, m)")
    target = omega**2

    def gap(s):
        return lowest_eigenvalue(grid, pot.with_strength(s)) - target

    lo, hi = 1e-8, 1.0
    while gap(hi) > 0:
        hi *= 2
        if hi > 1e8:
            raise InvalidArgument("could not bind a state at the requested frequency")
    s = optimize.brentq(gap, lo, hi, xtol=1e-14, rtol=1e-14)
    return pot.with_strength(s)


def _select(spec: SpectralData, part: str) -> np.ndarray:
    if part == "all":
        return np.ones(len(spec.energies), dtype=bool)
    if part == "continuous":
        return spec.continuous
    if part == "discrete":
        return ~spec.continuous
    raise InvalidArgument(f"unknown spectral part {part!r}")


def apply_B_power(spec: SpectralData, s: float, v, part: str = "all"):
    """sum_k E_k^(s/2) <v_k, v> v_k over the selected part of the spectrum."""
    v = np.asarray(v)
    if not np.all(np.isfinite(v)):
        raise InvalidArgument("non-finite grid function")
    mask = _select(spec, part)
    c = spec.coefficients(v)
    weights = np.where(mask, spec.energies ** (s / 2.0) if s != 0 else 1.0, 0.0)
    return spec.synthesize(weights * c)


def apply_function(spec: SpectralData, func, v, part: str = "continuous"):
    """Apply g(B) for a vectorized g of the frequencies sqrt(E_k)."""
    mask = _select(spec, part)
    c = spec.coefficients(v)
    g = np.zeros(len(c), dtype=complex)
    g[mask] = func(spec.frequencies[mask])
    out = spec.synthesize(g * c)
    return out if np.iscomplexobj(v) or np.any(g.imag) else out.real


def project(spec: SpectralData, v, part: str):
    """P_d v = <phi, v> phi and P_c v = v - P_d v."""
    v = np.asarray(v)
    phi = spec.phi
    pd = (phi @ v) * spec.grid.dr * phi
    if part == "discrete":
        return pd
    if part == "continuous":
        return v - pd
    raise InvalidArgument(f"unknown spectral part {part!r}")


def lp_norm(v, p, grid: RadialGrid) -> float:
    """3D L^p norm of u = w / r for a reduced grid function w (4 pi included)."""
    r = grid.r
    u = np.abs(np.asarray(v)) / r
    if p == np.inf or p == "inf":
        return float(u.max())
    if p not in (1, 2, 4, 8):
        raise InvalidArgument(f"unsupported exponent p={p}")
    return float((4 * np.pi * np.sum(u**p * r * r) * grid.dr) ** (1.0 / p))


def weight(grid: RadialGrid, sigma: float) -> np.ndarray:
    """<x>^-sigma on the grid."""
    return (1.0 + grid.r**2) ** (-sigma / 2.0)
