"""Car-following model for mixed CV/HV platoons with string-stability tooling."""

from .model import (
    ConnectivityParams,
    DomainError,
    EquilibriumState,
    GeometricWeights,
    IdmParams,
    InverseDistanceWeights,
    UniformWeights,
    VehicleClass,
    VehicleState,
    compute_weights,
    cv_effect,
    desired_gap,
    equilibrium_gap,
    equilibrium_speed,
    equilibrium_state,
    idm_acceleration,
    total_acceleration,
)
from .simulation import (
    CollisionEvent,
    GrowthClass,
    GrowthReport,
    IndeterminateGrowth,
    Integrator,
    OpenRoad,
    PerturbationSpec,
    PlatoonComposition,
    PositionOffset,
    RingRoad,
    ScenarioSpec,
    SimConfig,
    Simulator,
    SpeedProfile,
    Trajectory,
    VelocityPulse,
    build_platoon,
    connected_predecessors,
    inject_perturbation,
    measure_growth,
    run,
)
from .stability import (
    GridSpec,
    LinearCoefficients,
    StabilityMapGrid,
    StabilityVerdict,
    analytic_partials,
    classify_point,
    finite_difference_partials,
    linear_coefficients,
    region_area,
    stability_lhs,
    stability_map,
)

__version__ = "0.1.0"
