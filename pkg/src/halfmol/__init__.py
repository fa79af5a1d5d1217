"""Spectral solver for a hard-bound pair of particles on the half-line.

Two ordered particles on [0, inf) with their separation confined to
[0, d] live on the diagonal strip {x, y >= 0, |x - y| <= d}.  Contact
interaction with the origin becomes a Robin boundary condition with a
coordinate-dependent coefficient sigma on the two axes; the separation
walls carry Dirichlet conditions.  This package discretizes the
resulting Laplacian with a symmetric finite-volume scheme, computes its
low-lying spectrum, classifies bound states against the essential
spectrum threshold pi^2/(2 d^2), and ships an acceptance suite for the
closed-form facts the spectrum must satisfy.
"""

from .analysis import (AnalysisError, BisectionStep, ContinuumArtifact,
                       ConvergenceInfo, DiscreteEigenvalue, SandwichReport,
                       SpectralResult, SweepResult,
                       check_ground_energy_sandwich, classify, extrapolate,
                       prolong_solution, run_classified, solve_lowest,
                       stability_gate, sweep_critical_sigma)
from .assembly import DiscreteOperator, assemble, export_operator
from .domain import (DomainSpec, GridGeometry, NodeClass, build_grid,
                     count_unknowns, threshold)
from .eigen import (EigenConfig, EigenPairs, solve_dense, solve_halfline_1d,
                    solve_iterative)
from .sigma import (ConstantProfile, ExponentialProfile,
                    PiecewiseConstantProfile, SigmaProfile, TabulatedProfile,
                    ground_energy_bounds, profile_from_config)
from .verify import CHECK_NAMES, CheckResult, format_report, run_all

__version__ = "0.1.0"

__all__ = [
    "AnalysisError", "BisectionStep", "CHECK_NAMES", "CheckResult",
    "ConstantProfile",
    "ContinuumArtifact", "ConvergenceInfo", "DiscreteEigenvalue",
    "DiscreteOperator", "DomainSpec", "EigenConfig", "EigenPairs",
    "ExponentialProfile", "GridGeometry", "NodeClass",
    "PiecewiseConstantProfile", "SandwichReport", "SigmaProfile",
    "SpectralResult", "SweepResult", "TabulatedProfile", "assemble",
    "build_grid", "check_ground_energy_sandwich", "classify",
    "count_unknowns", "export_operator", "extrapolate", "format_report",
    "ground_energy_bounds", "profile_from_config", "run_all",
    "run_classified", "solve_dense", "solve_halfline_1d", "solve_iterative",
    "solve_lowest",
    "prolong_solution", "stability_gate", "sweep_critical_sigma", "threshold",
]
