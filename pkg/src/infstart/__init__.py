"""Infeasible-start primal-dual interior-point method for conic problems.

The problem pair is solved by minimizing an auxiliary self-concordant barrier
whose minimizer yields a strictly feasible primal-dual pair with duality gap
exactly ``eps``.
"""
from .auxiliary import AuxProblem, ReferencePoints, default_refs, hot_start_refs
from .barriers import Barrier, ConeSpec, Orthant, SecondOrder
from .errors import (
    FormatError,
    InfstartError,
    NotInterior,
    NotPositiveDefinite,
    NotStrictlyFeasible,
    OutOfDomain,
    ProblemError,
    SingularSystem,
)
from .model import AlternativeCertificate, ConicProblem, PrimalDualTriple, Residuals, check_eps_optimal, residuals, validate
from .solvers import SolverOptions, SolveReport, solve

__version__ = "0.1.0"

__all__ = [
    "AlternativeCertificate",
    "AuxProblem",
    "Barrier",
    "ConeSpec",
    "ConicProblem",
    "FormatError",
    "InfstartError",
    "NotInterior",
    "NotPositiveDefinite",
    "NotStrictlyFeasible",
    "Orthant",
    "OutOfDomain",
    "PrimalDualTriple",
    "ProblemError",
    "ReferencePoints",
    "Residuals",
    "SecondOrder",
    "SingularSystem",
    "SolveReport",
    "SolverOptions",
    "check_eps_optimal",
    "default_refs",
    "hot_start_refs",
    "residuals",
    "solve",
    "validate",
]
