"""Exact evolution times and quantum speed limits from the non-classical part of the Hamiltonian."""

from __future__ import annotations

from .bounds import (
    BoundReport,
    avg_nonclassical_uncertainty,
    bound_report,
    complexity_bound,
    exact_time_2d,
    exact_time_ddim,
    improved_mt_bound,
    ml_bound,
    parameter_lower_bound,
    real_path_length,
    saturation_check,
    self_inverse_average,
    self_inverse_closed_form,
    statistical_speed,
    theta,
)
from .core import HBAR, OrthonormalBasis, complete_basis_from, hilbert_angle, ket
from .decomposition import classical_part, dispersion, exact_ur_residual, nonclassical_variance
from .evolution import HamiltonianSchedule, Trajectory, evolve, first_passage_time
from .optimizer import OptimizerConfig, minimize_evolution_time, optimality_diagnostics

__version__ = "0.1.0"

__all__ = [
    "HBAR", "BoundReport", "HamiltonianSchedule", "OptimizerConfig", "OrthonormalBasis", "Trajectory",
    "avg_nonclassical_uncertainty", "bound_report", "classical_part", "complete_basis_from",
    "complexity_bound", "dispersion", "evolve", "exact_time_2d", "exact_time_ddim", "exact_ur_residual",
    "first_passage_time", "hilbert_angle", "improved_mt_bound", "ket", "minimize_evolution_time",
    "ml_bound", "nonclassical_variance", "optimality_diagnostics", "parameter_lower_bound",
    "real_path_length", "saturation_check", "self_inverse_average", "self_inverse_closed_form",
    "statistical_speed", "theta",
]
