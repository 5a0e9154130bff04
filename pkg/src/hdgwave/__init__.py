"""Hybridized DG solver for time-harmonic acoustic-elastic wave problems.

Volume unknowns are condensed element by element onto polynomial face
traces; the global system couples those traces through flux conservation
and, on fluid-solid interfaces, through velocity and traction matching.
"""

from .local_solver import (
    Assembler,
    ModelParams,
    SingularLocalSystem,
    lame_parameters,
)
from .mesh import (
    FaceKind,
    Mesh,
    build_structured_coupled,
    load_mesh,
    refine,
    save_mesh,
)
from .projections import compute_theta
from .skeleton import (
    FieldSolution,
    ProblemData,
    SingularSkeletonSystem,
    conservation_report,
    energy_quantities,
    solve_problem,
)
from .verify import (
    ConvergenceReport,
    ExactFields,
    ManufacturedCase,
    compute_errors,
    make_case,
    make_polynomial_case,
    run_study,
)

__version__ = "0.1.0"

__all__ = [
    "Assembler",
    "ConvergenceReport",
    "ExactFields",
    "FaceKind",
    "FieldSolution",
    "ManufacturedCase",
    "Mesh",
    "ModelParams",
    "ProblemData",
    "SingularLocalSystem",
    "SingularSkeletonSystem",
    "build_structured_coupled",
    "compute_errors",
    "compute_theta",
    "conservation_report",
    "energy_quantities",
    "lame_parameters",
    "load_mesh",
    "make_case",
    "make_polynomial_case",
    "refine",
    "run_study",
    "save_mesh",
    "solve_problem",
]
