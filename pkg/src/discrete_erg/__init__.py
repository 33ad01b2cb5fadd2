"""Discrete-time explicit reference governor with a state-dependent gain."""

from .core import (
    DYNAMIC,
    INVARIANCE_ONLY,
    ConstraintSet,
    ErgError,
    ErgParams,
    ErgState,
    Governor,
    KappaPolicy,
    LyapunovSpec,
    NotInDError,
    NotQuadraticError,
    PlantModel,
    SingularQuadraticFormError,
    StepInfo,
    ZeroGradientError,
    attraction_field,
    best_admissible_reference,
    distance_to_tightened_constraints,
    dsm,
    erg_step,
    kappa_feasibility_bound,
    kappa_invariance_bound,
    navigation_field,
    repulsion_field,
    threshold,
    threshold_gamma,
    threshold_gamma_hat,
)
from .models import BenchmarkBundle, aircraft, bebop_drone, double_integrator, get_bundle
from .sim import NonFiniteStateError, RunLog, SimConfig, rk4_step, simulate

__all__ = [
    "DYNAMIC",
    "INVARIANCE_ONLY",
    "ConstraintSet",
    "ErgError",
    "ErgParams",
    "ErgState",
    "Governor",
    "KappaPolicy",
    "LyapunovSpec",
    "NotInDError",
    "NotQuadraticError",
    "PlantModel",
    "SingularQuadraticFormError",
    "StepInfo",
    "ZeroGradientError",
    "attraction_field",
    "best_admissible_reference",
    "distance_to_tightened_constraints",
    "dsm",
    "erg_step",
    "kappa_feasibility_bound",
    "kappa_invariance_bound",
    "navigation_field",
    "repulsion_field",
    "threshold",
    "threshold_gamma",
    "threshold_gamma_hat",
    "BenchmarkBundle",
    "aircraft",
    "bebop_drone",
    "double_integrator",
    "get_bundle",
    "NonFiniteStateError",
    "RunLog",
    "SimConfig",
    "rk4_step",
    "simulate",
]
