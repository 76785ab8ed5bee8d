"""Term algebra for Hamiltonians in the variables (xi, f).

A term is

    coeff * xi^mu * conj(xi)^nu * prod_j <A_j, f or conj(f)> * prod_k  int Psi_k (U / r)^d_k r^2 dr

where ``<A, g> = sum(A * g) * dr`` is the bilinear pairing of reduced grid
functions and U = B^(-1/2) (f + conj f) / sqrt(2) is the reduced continuous
field.  Field kernels Psi are ordinary (non-reduced) radial profiles, so a
field factor is the 3D integral per solid angle of Psi * u_c^d.

Products of several field factors are kept as such; this makes the class
closed under Poisson brackets.  Canonicalization folds d = 0 factors into
the coefficient, expands d = 1 factors into two linear factors and merges
like terms.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from math import comb

import numpy as np

from ..spectral import SpectralData, apply_B_power

DROP_RTOL = 1e-13
SQRT2 = np.sqrt(2.0)


class AlgebraContext:
    """Grid data and cached operators shared by all algebra operations."""

    def __init__(self, spec: SpectralData):
        self.spec = spec
        self.r = spec.grid.r
        self.dr = spec.grid.dr
        self.omega = spec.omega
        self.mass = spec.mass
        self._cache: dict = {}

    def b_inv_half(self, v):
        """B^(-1/2) P_c v."""
        return apply_B_power(self.spec, -1.0, v, part="continuous")

    def b_inv_half_cached(self, v):
        key = id(v)
        hit = self._cache.get(key)
        if hit is not None and hit[0] is v:
            return hit[1]
        out = self.b_inv_half(v)
        if len(self._cache) > 4096:
            self._cache.clear()
        self._cache[key] = (v, out)
        return out

    def pair(self, a, b):
        return np.sum(a * b) * self.dr

    def field_integral(self, kernel, U, d):
        r = self.r
        return np.sum(kernel * (U / r) ** d * r * r) * self.dr


@dataclass(frozen=True, eq=False)
class AlgebraTerm:
    """One monomial of the term algebra.

    ``linear`` holds pairs (vector, conjugated) and ``fields`` pairs
    (kernel, power).  Vectors are reduced grid functions, kernels are not.
    """

    coeff: complex
    mu: int
    nu: int
    linear: tuple = ()
    fields: tuple = ()

    @property
    def degree(self) -> int:
        return self.mu + self.nu + len(self.linear) + sum(d for _, d in self.fields)

    @property
    def kind(self) -> str:
        if not self.fields:
            if not self.linear:
                return "scalar"
            if len(self.linear) == 1:
                return "linear"
        elif not self.linear and len(self.fields) == 1:
            return "field"
        return "product"

    @property
    def is_field_free(self) -> bool:
        return not self.fields

    def magnitude(self, dr: float = 1.0) -> float:
        m = abs(self.coeff)
        for v, _ in self.linear:
            m *= np.sqrt(np.sum(np.abs(v) ** 2) * dr)
        for k, _ in self.fields:
            m *= np.sqrt(np.sum(np.abs(k) ** 2) * dr)
        return float(m)

    def scaled(self, c) -> "AlgebraTerm":
        return AlgebraTerm(self.coeff * c, self.mu, self.nu, self.linear, self.fields)

    def conjugate(self) -> "AlgebraTerm":
        return AlgebraTerm(
            np.conj(self.coeff),
            self.nu,
            self.mu,
            tuple((np.conj(v), not c) for v, c in self.linear),
            tuple((np.conj(k), d) for k, d in self.fields),
        )

    @property
    def vector(self):
        """The single linear vector times the coefficient (linear terms only)."""
        return self.coeff * self.linear[0][0]

    @property
    def conjugated(self) -> bool:
        return self.linear[0][1]


@dataclass(frozen=True, eq=False)
class HamiltonianPoly:
    terms: tuple = ()
    remainder_norm: float = 0.0

    def __add__(self, other: "HamiltonianPoly") -> "HamiltonianPoly":
        return HamiltonianPoly(self.terms + other.terms, self.remainder_norm + other.remainder_norm)

    def __sub__(self, other: "HamiltonianPoly") -> "HamiltonianPoly":
        return self + other.scaled(-1.0)

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def scaled(self, c) -> "HamiltonianPoly":
        return HamiltonianPoly(tuple(t.scaled(c) for t in self.terms), abs(c) * self.remainder_norm)

    def conjugate(self) -> "HamiltonianPoly":
        return HamiltonianPoly(tuple(t.conjugate() for t in self.terms), self.remainder_norm)

    def select(self, pred) -> "HamiltonianPoly":
        return HamiltonianPoly(tuple(t for t in self.terms if pred(t)))

    def max_degree(self) -> int:
        return max((t.degree for t in self.terms), default=0)

    def magnitude(self, dr: float = 1.0) -> float:
        return float(sum(t.magnitude(dr) for t in self.terms))


ZERO = HamiltonianPoly()


def _digest(v) -> bytes:
    a = np.round(np.asarray(v, dtype=complex), 13) + 0.0
    return hashlib.blake2b(a.tobytes(), digest_size=16).digest()


def _unit(v):
    """Rescale so the largest entry is exactly 1; returns (vector, scale)."""
    i = int(np.argmax(np.abs(v)))
    s = v[i]
    if s == 0:
        return v, 1.0
    return v / s, s


def _expand_low_fields(term: AlgebraTerm, ctx: AlgebraContext) -> list:
    """Fold d = 0 field factors and expand d = 1 factors into linear ones."""
    out = []
    stack = [term]
    while stack:
        t = stack.pop()
        idx = next((i for i, (_, d) in enumerate(t.fields) if d <= 1), None)
        if idx is None:
            out.append(t)
            continue
        kernel, d = t.fields[idx]
        rest = t.fields[:idx] + t.fields[idx + 1 :]
        if d == 0:
            val = np.sum(kernel * ctx.r**2) * ctx.dr
            stack.append(AlgebraTerm(t.coeff * val, t.mu, t.nu, t.linear, rest))
        else:
            vec = ctx.b_inv_half(ctx.r * kernel) / SQRT2
            for conj in (False, True):
                stack.append(AlgebraTerm(t.coeff, t.mu, t.nu, t.linear + ((vec, conj),), rest))
    return out


def canonicalize(poly, ctx: AlgebraContext) -> HamiltonianPoly:
    """Merge like terms; drop those that cancel to rounding level."""
    terms = poly.terms if isinstance(poly, HamiltonianPoly) else tuple(poly)
    rem = poly.remainder_norm if isinstance(poly, HamiltonianPoly) else 0.0
    groups: dict = {}
    for t0 in terms:
        for t in _expand_low_fields(t0, ctx):
            kind = t.kind
            if kind == "scalar":
                key = ("s", t.mu, t.nu)
                val, mag = t.coeff, abs(t.coeff)
            elif kind == "linear":
                key = ("l", t.mu, t.nu, t.conjugated)
                val = t.vector
                mag = np.sqrt(np.sum(np.abs(val) ** 2))
            elif kind == "field":
                k, d = t.fields[0]
                key = ("f", t.mu, t.nu, d)
                val = t.coeff * k
                mag = np.sqrt(np.sum(np.abs(val) ** 2))
            else:
                coeff = t.coeff
                lin, fld = [], []
                for v, c in t.linear:
                    v, s = _unit(v)
                    coeff *= s
                    lin.append(((c, _digest(v)), v))
                for k, d in t.fields:
                    k, s = _unit(k)
                    coeff *= s
                    fld.append(((d, _digest(k)), k))
                lin.sort(key=lambda x: x[0])
                fld.sort(key=lambda x: x[0])
                key = ("p", t.mu, t.nu, tuple(a for a, _ in lin), tuple(a for a, _ in fld))
                val, mag = coeff, abs(coeff)
                if key not in groups:
                    groups[key] = [
                        0.0,
                        0.0,
                        tuple((v, a[0]) for a, v in lin),
                        tuple((k, a[0]) for a, k in fld),
                    ]
            g = groups.setdefault(key, [0.0, 0.0, None, None])
            g[0] = g[0] + val
            g[1] += mag
    out = []
    for key, (val, mag, lin, fld) in groups.items():
        size = abs(val) if np.isscalar(val) else np.sqrt(np.sum(np.abs(val) ** 2))
        if size == 0 or size <= DROP_RTOL * mag:
            continue
        tag, mu, nu = key[:3]
        if tag == "s":
            out.append(AlgebraTerm(complex(val), mu, nu))
        elif tag == "l":
            out.append(AlgebraTerm(1.0 + 0j, mu, nu, ((val, key[3]),)))
        elif tag == "f":
            out.append(AlgebraTerm(1.0 + 0j, mu, nu, (), ((val, key[3]),)))
        else:
            out.append(AlgebraTerm(complex(val), mu, nu, lin, fld))
    return HamiltonianPoly(tuple(out), rem)


def _bracket_pair(s: AlgebraTerm, t: AlgebraTerm, ctx: AlgebraContext) -> list:
    out = []
    c = s.coeff * t.coeff
    k = s.mu * t.nu - s.nu * t.mu
    if k:
        out.append(AlgebraTerm(1j * k * c, s.mu + t.mu - 1, s.nu + t.nu - 1, s.linear + t.linear, s.fields + t.fields))
    mu, nu = s.mu + t.mu, s.nu + t.nu
    r = ctx.r
    # linear-linear
    for i, (A, a) in enumerate(s.linear):
        s_rest = s.linear[:i] + s.linear[i + 1 :]
        for j, (C, b) in enumerate(t.linear):
            if a == b:
                continue
            sign = 1.0 if (not a and b) else -1.0
            val = 1j * sign * ctx.pair(A, C)
            out.append(AlgebraTerm(c * val, mu, nu, s_rest + t.linear[:j] + t.linear[j + 1 :], s.fields + t.fields))
        # linear of s against fields of t
        if t.fields:
            BA = ctx.b_inv_half_cached(A)
            sign = 1.0 if not a else -1.0
            for j, (Psi, d) in enumerate(t.fields):
                kern = Psi * (d / SQRT2) * BA / r
                fld = t.fields[:j] + t.fields[j + 1 :] + ((kern, d - 1),)
                out.append(AlgebraTerm(1j * sign * c, mu, nu, s_rest + t.linear, s.fields + fld))
    # fields of s against linear of t
    if s.fields:
        for j, (C, b) in enumerate(t.linear):
            BC = ctx.b_inv_half_cached(C)
            sign = 1.0 if b else -1.0
            t_rest = t.linear[:j] + t.linear[j + 1 :]
            for i, (Psi, d) in enumerate(s.fields):
                kern = Psi * (d / SQRT2) * BC / r
                fld = s.fields[:i] + s.fields[i + 1 :] + ((kern, d - 1),)
                out.append(AlgebraTerm(1j * sign * c, mu, nu, s.linear + t_rest, fld + t.fields))
    return out


def poisson_bracket(P: HamiltonianPoly, Q: HamiltonianPoly, ctx: AlgebraContext, D_max: int | None = None) -> HamiltonianPoly:
    """{P, Q} = i(dP/dxi dQ/dxibar - dP/dxibar dQ/dxi) + i<grad_f P, grad_fbar Q> - i<grad_fbar P, grad_f Q>.

    Products whose degree would exceed ``D_max`` are not formed; their
    magnitude bound is accumulated in ``remainder_norm``.
    """
    out = []
    rem = 0.0
    for s in P.terms:
        for t in Q.terms:
            if D_max is not None and s.degree + t.degree - 2 > D_max:
                rem += s.magnitude(ctx.dr) * t.magnitude(ctx.dr)
                continue
            out.extend(_bracket_pair(s, t, ctx))
    return canonicalize(HamiltonianPoly(tuple(out), rem), ctx)


def bracket_with_HL(Q: HamiltonianPoly, ctx: AlgebraContext) -> HamiltonianPoly:
    """{H_L, Q} for field-free Q, with H_L = omega |xi|^2 + <conj f, B f>."""
    spec, om = ctx.spec, ctx.omega
    out = []
    for t in Q.terms:
        if t.fields:
            raise ValueError("bracket with H_L is only implemented for field-free terms")
        k = 1j * om * (t.nu - t.mu)
        if k:
            out.append(t.scaled(k))
        for j, (A, conj) in enumerate(t.linear):
            BA = apply_B_power(spec, 1.0, A, part="continuous")
            lin = t.linear[:j] + ((BA, conj),) + t.linear[j + 1 :]
            out.append(AlgebraTerm(t.coeff * (1j if conj else -1j), t.mu, t.nu, lin))
    return canonicalize(HamiltonianPoly(tuple(out)), ctx)


def free_hamiltonian_value(z, ctx: AlgebraContext) -> float:
    xi, f = z
    return float(ctx.omega * abs(xi) ** 2 + np.real(ctx.pair(np.conj(f), apply_B_power(ctx.spec, 1.0, f, "continuous"))))


class Evaluator:
    """Numerical evaluation of polynomials (and their gradients) at a point z = (xi, f)."""

    def __init__(self, ctx: AlgebraContext, xi: complex, f):
        self.ctx = ctx
        self.xi = complex(xi)
        self.f = np.asarray(f, dtype=complex)
        self.fbar = np.conj(self.f)
        self.U = SQRT2 * ctx.b_inv_half(self.f).real

    def _factors(self, t: AlgebraTerm):
        ctx = self.ctx
        lin = [ctx.pair(v, self.fbar if c else self.f) for v, c in t.linear]
        fld = [ctx.field_integral(k, self.U, d) for k, d in t.fields]
        return lin, fld

    def _mono(self, t, dmu=0, dnu=0):
        return t.coeff * self.xi ** (t.mu - dmu) * np.conj(self.xi) ** (t.nu - dnu)

    def value(self, poly: HamiltonianPoly) -> complex:
        total = 0j
        for t in poly.terms:
            lin, fld = self._factors(t)
            total += self._mono(t) * np.prod(lin) * np.prod(fld)
        return total

    def d_xibar(self, poly: HamiltonianPoly) -> complex:
        total = 0j
        for t in poly.terms:
            if t.nu == 0:
                continue
            lin, fld = self._factors(t)
            total += t.nu * self._mono(t, 0, 1) * np.prod(lin) * np.prod(fld)
        return total

    def grad_fbar(self, poly: HamiltonianPoly):
        ctx = self.ctx
        r = ctx.r
        out = np.zeros_like(self.f)
        g = np.zeros(len(r), dtype=complex)
        for t in poly.terms:
            lin, fld = self._factors(t)
            mono = self._mono(t)
            for j, (v, c) in enumerate(t.linear):
                if c:
                    out += mono * np.prod(lin[:j] + lin[j + 1 :]) * np.prod(fld) * v
            for k, (kern, d) in enumerate(t.fields):
                w = mono * np.prod(lin) * np.prod(fld[:k] + fld[k + 1 :])
                g += w * d * kern * (self.U / r) ** (d - 1) * r
        if np.any(g):
            out += ctx.b_inv_half(g) / SQRT2
        return out


def evaluate_hamiltonian(poly: HamiltonianPoly, z, ctx: AlgebraContext) -> complex:
    xi, f = z
    return Evaluator(ctx, xi, f).value(poly)


def step0_hamiltonian(spec: SpectralData, lam: float, ctx: AlgebraContext | None = None) -> HamiltonianPoly:
    """Exact expansion of H_P = -(lam/4) int u^4 in the variables (xi, f).

    u = (xi + conj xi) phi / sqrt(2 omega) + u_c, so the u_c^d block carries
    the kernel binom(4, d) phi^(4-d) times the binomial expansion of
    (xi + conj xi)^(4-d) / (2 omega)^((4-d)/2).
    """
    ctx = ctx or AlgebraContext(spec)
    om = spec.omega
    phi_u = spec.phi / spec.grid.r
    terms = []
    for d in range(5):
        e = 4 - d
        base = -(lam / 4.0) * comb(4, d) * (2 * om) ** (-e / 2.0)
        kern = phi_u**e
        for mu in range(e + 1):
            terms.append(AlgebraTerm(base * comb(e, mu) + 0j, mu, e - mu, (), ((kern, d),)))
    return canonicalize(HamiltonianPoly(tuple(terms)), ctx)


def random_point(ctx: AlgebraContext, rng: np.random.Generator, size: float, width: float = 3.0):
    """Random (xi, f) with |xi| and ||f|| of order ``size``; f is smooth and localized."""
    r = ctx.r
    xi = size * (rng.normal() + 1j * rng.normal()) / SQRT2
    prof = np.zeros(len(r), dtype=complex)
    for _ in range(3):
        c = rng.uniform(0.5, 2 * width)
        s = rng.uniform(0.5, width)
        prof += (rng.normal() + 1j * rng.normal()) * r * np.exp(-(((r - c) / s) ** 2))
    prof = prof - ctx.spec.phi * ctx.pair(ctx.spec.phi, prof)
    nrm = np.sqrt(np.sum(np.abs(prof) ** 2) * ctx.dr)
    return xi, size * prof / nrm


def point_norm(z, ctx: AlgebraContext) -> float:
    xi, f = z
    return float(np.sqrt(abs(xi) ** 2 + np.sum(np.abs(f) ** 2) * ctx.dr))
