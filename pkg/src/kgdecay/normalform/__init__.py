"""Birkhoff normal form for the (xi, f) Hamiltonian."""
from .algebra import (
    AlgebraContext,
    AlgebraTerm,
    Evaluator,
    HamiltonianPoly,
    bracket_with_HL,
    canonicalize,
    evaluate_hamiltonian,
    free_hamiltonian_value,
    point_norm,
    poisson_bracket,
    random_point,
    step0_hamiltonian,
)
from .recursion import (
    NormalFormResult,
    StepRecord,
    classify,
    effective_resonant_vector,
    homological_residual,
    is_normal,
    lie_series,
    lie_transform_flow,
    normal_form_recursion,
    normal_form_transform,
    renormalized_golden_rule,
    resonant_vector,
    solve_homological,
)

__all__ = [
    "AlgebraContext",
    "AlgebraTerm",
    "Evaluator",
    "HamiltonianPoly",
    "bracket_with_HL",
    "canonicalize",
    "evaluate_hamiltonian",
    "free_hamiltonian_value",
    "point_norm",
    "poisson_bracket",
    "random_point",
    "step0_hamiltonian",
    "NormalFormResult",
    "StepRecord",
    "classify",
    "effective_resonant_vector",
    "homological_residual",
    "is_normal",
    "lie_series",
    "lie_transform_flow",
    "normal_form_recursion",
    "normal_form_transform",
    "renormalized_golden_rule",
    "resonant_vector",
    "solve_homological",
]
