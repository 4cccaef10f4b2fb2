"""Distributionally robust two-stage discrete optimization over Wasserstein and L-infinity balls."""

from .core import (
    AmbiguityBall,
    CentralDistribution,
    ExplicitDistribution,
    ScenarioMetric,
    ScenarioSpace,
    TwoStageProblem,
    empirical_estimate,
    mask_of,
    members,
    scenario_distance,
    split_seed,
    wasserstein_distance,
)
from .errors import (
    AnchorMissing,
    DrsoError,
    EmptyGrid,
    FlatEllipsoid,
    GuardExceeded,
    InfeasibleMarginals,
    NotMonotone,
    NumericalFailure,
    OracleContractViolation,
    ParseError,
    RoundingGuaranteeViolated,
    TooLarge,
)

__version__ = "0.1.0"
