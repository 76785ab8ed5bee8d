"""Homological equation, Lie transforms and the normal-form recursion."""
from __future__ import annotations

import csv
import dataclasses
import io
import weakref
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from ..errors import DomainExit, SmallDivisor, TruncationOverflow
from ..fgr import GoldenRuleReport, check_window, gamma_coefficient
from ..spectral import SpectralData, apply_function
from .algebra import (
    AlgebraContext,
    AlgebraTerm,
    Evaluator,
    HamiltonianPoly,
    ZERO,
    bracket_with_HL,
    canonicalize,
    point_norm,
    poisson_bracket,
    step0_hamiltonian,
)

TOL_RES = 1e-6


def is_normal(term: AlgebraTerm, omega: float, m: float) -> bool:
    """Membership test for the normal form.

    Scalars must be actions (mu = nu).  Single f-linear, field-free terms
    must oscillate above threshold: omega (mu - nu) < -m for <Phi, f> and
    omega (mu - nu) > m for <Phi, conj f>.
    """
    kind = term.kind
    if kind == "scalar":
        return term.mu == term.nu
    if kind == "linear":
        s = omega * (term.mu - term.nu)
        return s > m if term.conjugated else s < -m
    return False


def classify(poly: HamiltonianPoly, omega: float, m: float) -> list:
    """Terms of ``poly`` violating the normal-form definition."""
    return [t for t in poly.terms if not is_normal(t, omega, m)]


def is_head(term: AlgebraTerm, degree: int) -> bool:
    """Terms removed at a step whose lowest degree is ``degree`` (even)."""
    if term.degree != degree:
        return False
    return term.kind in ("scalar", "linear")


def solve_homological(K: HamiltonianPoly, ctx: AlgebraContext, tol_res: float | None = None):
    """Solve {H_L, chi} + Z = K monomial by monomial.

    Returns ``(Z, chi)``.  f-linear terms not in normal form are inverted
    with the (nonsingular) resolvent of B on the continuous subspace.
    """
    om, m, spec = ctx.omega, ctx.mass, ctx.spec
    tol = TOL_RES * m if tol_res is None else tol_res
    Z, chi = [], []
    for t in K.terms:
        kind = t.kind
        if kind == "scalar":
            if t.mu == t.nu:
                Z.append(t)
                continue
            div = om * (t.mu - t.nu)
            if abs(div) < tol:
                raise SmallDivisor(t.mu, t.nu, div)
            chi.append(t.scaled(1j / div))
        elif kind == "linear":
            s = om * (t.mu - t.nu)
            if abs(abs(s) - m) < tol:
                raise SmallDivisor(t.mu, t.nu, abs(s) - m)
            if is_normal(t, om, m):
                Z.append(t)
                continue
            if t.conjugated:
                vec = -1j * apply_function(spec, lambda w: 1.0 / (w - s), t.vector + 0j)
            else:
                vec = 1j * apply_function(spec, lambda w: 1.0 / (w + s), t.vector + 0j)
            chi.append(AlgebraTerm(1.0 + 0j, t.mu, t.nu, ((vec, t.conjugated),)))
        else:
            raise ValueError("homological equation expects scalar or f-linear terms only")
    return HamiltonianPoly(tuple(Z)), HamiltonianPoly(tuple(chi))


def lie_series(chi: HamiltonianPoly, F: HamiltonianPoly, ctx, D_max, first: int = 1) -> HamiltonianPoly:
    """Nested brackets  sum_{j >= 1} ad_chi^j F / (first (first+1) ... (first+j-1)).

    ``first=1`` gives sum_{k>=1} ad^k F / k!, the Lie series without its
    leading term; ``first=2`` gives sum_{k>=2} ad^(k-1) F / k!.
    """
    out = ZERO
    cur = F
    k = first
    while True:
        cur = poisson_bracket(chi, cur, ctx, D_max).scaled(1.0 / k)
        if not cur.terms:
            return out + cur
        out = out + cur
        k += 1


@dataclass(frozen=True, eq=False)
class StepRecord:
    r: int
    degree: int
    K: HamiltonianPoly
    Z: HamiltonianPoly
    chi: HamiltonianPoly
    n_terms: int


@dataclass(frozen=True, eq=False)
class NormalFormResult:
    """Output of the recursion.

    ``Z`` collects the normal-form part, ``chi_list`` the generators in the
    order they were produced and ``Phi_res`` the vector paired with f in
    the conj(xi)^(2N+1) term of ``Z``.
    """

    N: int
    lam: float
    D_max: int
    Z: HamiltonianPoly
    R: HamiltonianPoly
    chi_list: tuple
    Phi_res: np.ndarray
    gamma: GoldenRuleReport | None
    steps_log: tuple
    context: AlgebraContext = field(repr=False, default=None)

    def violations(self) -> list:
        return classify(self.Z, self.context.omega, self.context.mass)

    def to_csv(self) -> str:
        om, m, dr = self.context.omega, self.context.mass, self.context.dr
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["mu", "nu", "d", "|coeff|", "arg(coeff)", "divisor"])
        for t in sorted(self.Z.terms, key=lambda t: (t.degree, len(t.linear), t.mu, t.nu)):
            if t.kind == "scalar":
                mag, arg, d, div = abs(t.coeff), np.angle(t.coeff), 0, om * (t.mu - t.nu)
            else:
                v = t.vector
                mag = float(np.sqrt(np.sum(np.abs(v) ** 2) * dr))
                arg = float(np.angle(v[np.argmax(np.abs(v))]))
                d = 1
                s = om * (t.mu - t.nu)
                div = (s - m) if t.conjugated else (-s - m)
            writer.writerow([t.mu, t.nu, d, repr(float(mag)), repr(float(arg)), repr(float(div))])
        return buf.getvalue()

    def phi_table(self) -> str:
        r = self.context.r
        lines = [f"{float(ri)!r} {complex(v).real!r} {complex(v).imag!r}" for ri, v in zip(r, self.Phi_res)]
        return "\n".join(lines) + "\n"


def resonant_vector(Z: HamiltonianPoly, N: int, n: int) -> np.ndarray:
    for t in Z.terms:
        if t.kind == "linear" and not t.conjugated and t.mu == 0 and t.nu == 2 * N + 1:
            return np.asarray(t.vector, dtype=complex)
    return np.zeros(n, dtype=complex)


def effective_resonant_vector(Z: HamiltonianPoly, N: int, amplitude: float, n: int) -> np.ndarray:
    """Sum of |xi|^(2k) Phi_(k, 2N+1+k) over the f-linear terms of Z.

    These are the terms that force f at the harmonic (2N+1) omega; at
    amplitude |xi| they act as a single vector paired with conj(xi)^(2N+1) f.
    """
    out = np.zeros(n, dtype=complex)
    for t in Z.terms:
        if t.kind == "linear" and not t.conjugated and t.nu - t.mu == 2 * N + 1:
            out += amplitude ** (2 * t.mu) * np.asarray(t.vector, dtype=complex)
    return out


def renormalized_golden_rule(spec: SpectralData, lam: float, N: int, omega_eff: float, amplitude: float,
                             D_max: int | None = None, sigma_ladder=None, eps_ladder=None) -> GoldenRuleReport:
    """Golden-rule rate at finite amplitude.

    The bound-state frequency is replaced by the observed (amplitude-shifted)
    ``omega_eff`` in the divisors and in the resonance condition, and the
    radiating vector includes the amplitude corrections of
    :func:`effective_resonant_vector`.  For ``amplitude -> 0`` and
    ``omega_eff -> omega`` this reduces to the gamma of the recursion.
    """
    energies = spec.energies.copy()
    energies[spec.bound_index] = omega_eff**2
    shifted = dataclasses.replace(spec, energies=energies)
    res = normal_form_recursion(shifted, lam, N, D_max, with_gamma=False)
    Phi = effective_resonant_vector(res.Z, N, amplitude, spec.grid.n)
    return gamma_coefficient(shifted, Phi, N, sigma_ladder, eps_ladder)


def normal_form_recursion(
    spec: SpectralData,
    lam: float,
    N: int,
    D_max: int | None = None,
    remainder_budget: float = np.inf,
    with_gamma: bool = True,
    ctx: AlgebraContext | None = None,
) -> NormalFormResult:
    """Run the Birkhoff recursion for r = 0 .. 2N-1 with degree cutoff ``D_max``.

    Step r removes the scalar and f-linear terms of degree 2r+4 from the
    remainder.  Steps whose degree exceeds ``D_max`` are skipped.
    """
    check_window(spec, N)
    D_max = 2 * N + 4 if D_max is None else int(D_max)
    if D_max < 2 * N + 4:
        raise TruncationOverflow(f"D_max={D_max} cannot reach the order 2N+2={2 * N + 2} resonant term plus its correction")
    ctx = ctx or AlgebraContext(spec)
    R = step0_hamiltonian(spec, lam, ctx)
    Z = ZERO
    chis, log = [], []
    for r in range(2 * N):
        deg = 2 * r + 4
        if deg > D_max:
            continue
        K = R.select(lambda t: is_head(t, deg))
        Zs, chi = solve_homological(K, ctx)
        rest = R.select(lambda t: not is_head(t, deg))
        new = HamiltonianPoly(rest.terms, R.remainder_norm)
        new = new + lie_series(chi, Z + R, ctx, D_max, first=1)
        new = new + lie_series(chi, Zs - K, ctx, D_max, first=2)
        R = canonicalize(new, ctx)
        Z = canonicalize(Z + Zs, ctx)
        chis.append(chi)
        log.append(StepRecord(r, deg, K, Zs, chi, len(R)))
        if R.remainder_norm > remainder_budget:
            raise TruncationOverflow(f"remainder norm {R.remainder_norm:.3g} exceeds budget {remainder_budget:.3g}")
    Phi = resonant_vector(Z, N, spec.grid.n)
    gamma = gamma_coefficient(spec, Phi, N) if with_gamma else None
    return NormalFormResult(N, lam, D_max, Z, R, tuple(chis), Phi, gamma, tuple(log), ctx)


_HL_BRACKETS: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def homological_residual(step: StepRecord, z, ctx: AlgebraContext) -> float:
    """|{H_L, chi} + Z - K| at z, relative to |K| + |Z|."""
    ev = Evaluator(ctx, *z)
    # {H_L, chi} is reused across evaluation points
    cached = _HL_BRACKETS.get(step)
    if cached is None or cached[0] is not ctx:
        cached = (ctx, bracket_with_HL(step.chi, ctx))
        _HL_BRACKETS[step] = cached
    lhs = cached[1]
    res = ev.value(lhs) + ev.value(step.Z) - ev.value(step.K)
    scale = sum(abs(ev.value(HamiltonianPoly((t,)))) for t in step.K.terms)
    return float(abs(res) / scale) if scale else float(abs(res))


def hamiltonian_vector_field(chi: HamiltonianPoly, ctx: AlgebraContext):
    """(xi, f) -> (-i d chi / d conj xi, -i grad_conj(f) chi)."""

    def field_at(xi, f):
        ev = Evaluator(ctx, xi, f)
        return -1j * ev.d_xibar(chi), -1j * ev.grad_fbar(chi)

    return field_at


def lie_transform_flow(
    chi: HamiltonianPoly,
    z,
    ctx: AlgebraContext,
    direction: int = 1,
    rtol: float = 1e-12,
    atol: float | None = None,
    ball: float = 1.0,
):
    """Time-``direction`` flow of the Hamiltonian vector field of ``chi``."""
    xi0, f0 = z
    n = len(f0)
    vf = hamiltonian_vector_field(chi, ctx)
    size = point_norm(z, ctx)
    atol = 1e-15 * max(size, 1e-300) if atol is None else atol

    def rhs(_, y):
        dxi, df = vf(y[0], y[1:])
        return np.concatenate(([dxi], df))

    y0 = np.concatenate(([complex(xi0)], np.asarray(f0, dtype=complex)))
    if not chi.terms or direction == 0:
        return complex(xi0), np.array(f0, dtype=complex)
    sol = solve_ivp(rhs, (0.0, float(direction)), y0, method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise DomainExit(sol.message)
    y = sol.y[:, -1]
    out = (complex(y[0]), y[1 : n + 1])
    if point_norm(out, ctx) > ball:
        raise DomainExit(f"flow left the ball of radius {ball}")
    return out


def normal_form_transform(result: NormalFormResult, z, direction: int = 1, **kw):
    """Composite coordinate change T = phi_1 o phi_2 o ... (or its inverse)."""
    chis = result.chi_list
    if direction > 0:
        for chi in reversed(chis):
            z = lie_transform_flow(chi, z, result.context, 1, **kw)
    else:
        for chi in chis:
            z = lie_transform_flow(chi, z, result.context, -1, **kw)
    return z
