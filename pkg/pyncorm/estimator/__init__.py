from .main import (
    EstimatorCheck,
    PoissonEstimate,
    averaged_poisson_estimate,
    estimate_L,
    estimate_L_k,
    exponential_check,
    noise_variance,
    poisson_estimate,
    poisson_variance,
    tune_a,
)

__all__ = [
    "EstimatorCheck",
    "PoissonEstimate",
    "averaged_poisson_estimate",
    "estimate_L",
    "estimate_L_k",
    "exponential_check",
    "noise_variance",
    "poisson_estimate",
    "poisson_variance",
    "tune_a",
]
