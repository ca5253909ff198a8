import dataclasses
import math
import random

import numpy as np
from scipy.special import logsumexp

from ..datamodel.main import EstimatorConfig, PriorSpec, SamplerConfig

# Robbins-Monro acceptance targets
BLOCK_TARGET = 0.234
SCALAR_TARGET = 0.44


@dataclasses.dataclass
class AdaptiveScale:
    """Random-walk step size adapted on the log scale.

    After every proposal, log s += t^(-exponent) (accepted - target), so the
    adaptation diminishes as t grows.
    """

    log_scale: float = 0.0
    target: float = SCALAR_TARGET
    exponent: float = 0.6
    proposed: int = 0
    accepted: int = 0

    @property
    def scale(self) -> float:
        return math.exp(self.log_scale)

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else math.nan

    def update(self, accepted: bool) -> None:
        self.proposed += 1
        self.accepted += int(accepted)
        self.log_scale += self.proposed ** (-self.exponent) * (float(accepted) - self.target)


@dataclasses.dataclass
class ChainContext:
    """Fixed inputs of a chain: data, location map, priors and tuning."""

    y: np.ndarray
    loc_index: np.ndarray
    priors: PriorSpec
    estimator: EstimatorConfig
    schedule: SamplerConfig


def metropolis_accept(log_ratio: float, rng: np.random.Generator) -> bool:
    """Metropolis-Hastings decision for a log acceptance ratio."""
    if math.isnan(log_ratio):
        return False
    return log_ratio >= 0 or math.log(rng.random()) < log_ratio


def sample_log_categorical(log_weights: np.ndarray, rng: np.random.Generator) -> int:
    """Draw an index with probabilities proportional to exp(log_weights)."""
    probs = np.exp(log_weights - logsumexp(log_weights))
    return int(rng.choice(probs.size, p=probs / probs.sum()))


def sampler_message() -> str:
    """Get a random sampler message"""

    sampler_messages = [
        "Mixing the chain",
        "Mixing the chain 🎲",
        "Sweeping the clusters",
        "Sweeping the clusters 🎲",
        "Drawing jumps",
        "Drawing jumps 🎲",
        "Estimating the Laplace functional",
        "Estimating the Laplace functional 🎲",
        "Walking the posterior",
        "Walking the posterior 🎲",
        "Allocating observations",
        "Allocating observations 🎲",
    ]

    # Randomly accessing a message
    random_message = random.choice(sampler_messages)
    return random_message
