"""Radiative decay of bound states for the radial cubic Klein-Gordon equation."""
from . import errors
from .dynamics import SimConfig, SimState, Trajectory, energy, simulate, step_nlkg
from .envelope import closed_form, comparison_bounds, convolution_check, envelope_ode_solve, extract_modes
from .fgr import GoldenRuleReport, gamma_coefficient, gamma_sw, resolvent_apply, spectral_delta
from .normalform import normal_form_recursion, normal_form_transform
from .spectral import (
    PotentialSpec,
    RadialGrid,
    SpectralData,
    apply_B_power,
    build_grid,
    lp_norm,
    spectrum,
    tune_strength,
)

__all__ = [
    "errors",
    "GoldenRuleReport",
    "PotentialSpec",
    "RadialGrid",
    "SimConfig",
    "SimState",
    "SpectralData",
    "Trajectory",
    "apply_B_power",
    "build_grid",
    "closed_form",
    "comparison_bounds",
    "convolution_check",
    "energy",
    "envelope_ode_solve",
    "extract_modes",
    "gamma_coefficient",
    "gamma_sw",
    "lp_norm",
    "normal_form_recursion",
    "normal_form_transform",
    "resolvent_apply",
    "simulate",
    "spectral_delta",
    "spectrum",
    "step_nlkg",
    "tune_strength",
]
