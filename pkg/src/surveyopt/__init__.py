"""Survey coverage planning under a residual detection-risk constraint."""

from ._kernels import backend_name as kernel_backend
from .scenario import (
    Domain,
    GradientMode,
    InitStrategy,
    QmcConfig,
    RiskMode,
    Scenario,
    ScenarioError,
    TranscriptionConfig,
    VehicleParams,
    load_scenario,
    validate_scenario,
)
from .sensor import SensorParams, detection_rate
from .dynamics import (
    ControlSchedule,
    Trajectory,
    VehicleState,
    read_trajectories,
    simulate,
    write_trajectories,
)
from .qmc import QmcPointSet, generate_qmc_points
from .risk import (
    coverage_grid,
    residual_risk,
    risk_oracle_grid,
    shift_estimates,
    write_coverage,
)
from .baseline import (
    BaselinePlan,
    effective_swath_halfwidth,
    plan_boustrophedon,
)
from .solver import (
    DecisionVector,
    SolveResult,
    evaluate_constraints,
    gradient,
    solve,
    sweep_vehicles,
    transcribe,
)

__version__ = "0.1.0"

__all__ = [
    "BaselinePlan",
    "ControlSchedule",
    "DecisionVector",
    "Domain",
    "GradientMode",
    "InitStrategy",
    "QmcConfig",
    "QmcPointSet",
    "RiskMode",
    "Scenario",
    "ScenarioError",
    "SensorParams",
    "SolveResult",
    "Trajectory",
    "TranscriptionConfig",
    "VehicleParams",
    "VehicleState",
    "coverage_grid",
    "detection_rate",
    "effective_swath_halfwidth",
    "evaluate_constraints",
    "generate_qmc_points",
    "gradient",
    "kernel_backend",
    "load_scenario",
    "plan_boustrophedon",
    "read_trajectories",
    "residual_risk",
    "risk_oracle_grid",
    "shift_estimates",
    "simulate",
    "solve",
    "sweep_vehicles",
    "transcribe",
    "validate_scenario",
    "write_coverage",
    "write_trajectories",
    "__version__",
]
