"""Gain design and certification for direction-normalized feedback under
actuator saturation and polytopic input-map uncertainty.

The toolkit poses the design as a small dense semidefinite program,
solves it with a bundled interior-point method, recovers the gain and its
region/reaching-time certificate, and verifies the result by geometry
checks and closed-loop simulation over the uncertainty polytope.
"""

from .analysis import (
    RegionSample,
    boundary_directions,
    du_contains,
    fibonacci_sphere_directions,
    inclusion_margins,
    lyapunov_value,
    omega_boundary,
    omega_contains,
    planar_directions,
    reaching_time_bound,
    sector_condition,
)
from .errors import (
    IllConditionedError,
    NoDesignError,
    NumericalFailureError,
    UvcError,
)
from .lmi import (
    ControllerDesign,
    DecisionLayout,
    LmiBlock,
    LmiProgram,
    assemble_program,
    decision_layout,
    recover_design,
)
from .models import manipulator_polytope, rov_polytope
from .sdp import (
    ResidualReport,
    SdpSolution,
    SolverSettings,
    residuals,
    solve_sdp,
)
from .simulation import (
    BatchCase,
    BatchReport,
    IntegratorSettings,
    Trajectory,
    batch_verify,
    blend_vertices,
    dead_zone,
    saturate,
    simulate,
)
from .synthesis import (
    DEFAULT_MU_GRID,
    MuGridEntry,
    MuGridResult,
    mu_grid_search,
    synthesize,
)
from .systems import (
    PolytopicSystem,
    SaturationLimits,
    SimplexWeights,
    SynthesisParameters,
)

__version__ = "0.1.0"

__all__ = [
    "BatchCase",
    "BatchReport",
    "ControllerDesign",
    "DEFAULT_MU_GRID",
    "DecisionLayout",
    "IllConditionedError",
    "IntegratorSettings",
    "LmiBlock",
    "LmiProgram",
    "MuGridEntry",
    "MuGridResult",
    "NoDesignError",
    "NumericalFailureError",
    "PolytopicSystem",
    "RegionSample",
    "ResidualReport",
    "SaturationLimits",
    "SdpSolution",
    "SimplexWeights",
    "SolverSettings",
    "SynthesisParameters",
    "Trajectory",
    "UvcError",
    "assemble_program",
    "batch_verify",
    "blend_vertices",
    "boundary_directions",
    "dead_zone",
    "decision_layout",
    "du_contains",
    "fibonacci_sphere_directions",
    "inclusion_margins",
    "lyapunov_value",
    "manipulator_polytope",
    "mu_grid_search",
    "omega_boundary",
    "omega_contains",
    "planar_directions",
    "reaching_time_bound",
    "recover_design",
    "residuals",
    "rov_polytope",
    "saturate",
    "sector_condition",
    "simulate",
    "solve_sdp",
    "synthesize",
]
