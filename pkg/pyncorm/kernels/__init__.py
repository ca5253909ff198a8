from .main import (
    ClusterSuffStats,
    log_marginal,
    log_predictive,
    log_predictive_ratio,
    sample_location,
    sample_observation,
)

__all__ = [
    "ClusterSuffStats",
    "log_marginal",
    "log_predictive",
    "log_predictive_ratio",
    "sample_location",
    "sample_observation",
]
