import math
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from ..errors import NumericalError

# Per requested draw; exceeding it means the parameterization is pathological
MAX_REJECTION_DRAWS = 1_000_000


def log_levy_coefficient(sigma: float, gamma_shape: float, beta_like: bool) -> float:
    """Log of the normalizing constant in front of the Lévy density.

    Gamma families: 1 / Gamma(1 - sigma).
    Beta families: Gamma(phi) / (Gamma(sigma + phi) Gamma(1 - sigma)), which
    is 1 in the Beta limit sigma = 0.
    """
    if not beta_like:
        return float(-gammaln(1 - sigma))
    return float(gammaln(gamma_shape) - gammaln(sigma + gamma_shape) - gammaln(1 - sigma))


def beta_tail_integral(x: float, sigma: float, beta: float) -> float:
    """Compute int_x^1 u^(-sigma-1) (1-u)^(beta-1) du for 0 < x < 1.

    The range is split at 1/2: the left part is integrated on the log scale,
    where it is smooth, and the right part with an algebraic weight that
    absorbs the (1-u)^(beta-1) endpoint behaviour.
    """
    if x >= 1:
        return 0.0

    total = 0.0
    if x < 0.5:
        left, _ = integrate.quad(
            lambda w: math.exp(-sigma * w) * (-math.expm1(w)) ** (beta - 1),
            math.log(x),
            math.log(0.5),
            epsabs=0.0,
            epsrel=1e-11,
            limit=200,
        )
        total += left

    right, _ = integrate.quad(
        lambda u: u ** (-sigma - 1),
        max(x, 0.5),
        1.0,
        weight="alg",
        wvar=(0.0, beta - 1),
        epsabs=0.0,
        epsrel=1e-11,
    )
    return total + right


def beta_laplace_integral(scale: float, sigma: float, beta: float) -> float:
    """Compute int_0^1 u^(-sigma) (1-u)^(beta-1) exp(-scale u) du."""
    value, _ = integrate.quad(
        lambda u: math.exp(-scale * u),
        0.0,
        1.0,
        weight="alg",
        wvar=(-sigma, beta - 1),
        epsabs=0.0,
        epsrel=1e-11,
    )
    return value


def truncated_pareto(
    rng: np.random.Generator, size: int, sigma: float, lower: float, upper: float
) -> np.ndarray:
    """Draw from the density proportional to z^(-1-sigma) on (lower, upper).

    sigma = 0 gives the log-uniform distribution.
    """
    u = rng.random(size)
    if sigma == 0:
        return np.exp(math.log(lower) + u * (math.log(upper) - math.log(lower)))
    lo, hi = lower ** (-sigma), upper ** (-sigma)
    return (lo - u * (lo - hi)) ** (-1 / sigma)


def rejection_sample(
    propose: Callable[[int], np.ndarray],
    accept: Callable[[np.ndarray], np.ndarray],
    size: int,
) -> np.ndarray:
    """Vectorized rejection sampling.

    Args:
        propose (Callable[[int], np.ndarray]): Returns m candidate draws.
        accept (Callable[[np.ndarray], np.ndarray]): Returns the boolean
            acceptance mask for a batch of candidates.
        size (int): Number of accepted draws required.

    Raises:
        NumericalError: If more than MAX_REJECTION_DRAWS proposals per
            requested draw were needed.

    Returns:
        np.ndarray: `size` accepted draws.
    """
    accepted = []
    n_accepted = 0
    n_drawn = 0
    batch = max(size, 16)
    while n_accepted < size:
        candidates = propose(batch)
        keep = candidates[accept(candidates)]
        accepted.append(keep)
        n_accepted += keep.size
        n_drawn += batch

        if n_drawn > MAX_REJECTION_DRAWS * size:
            raise NumericalError(
                f"Rejection sampler exceeded {MAX_REJECTION_DRAWS} proposals per draw."
            )

        # Grow the batch from the observed acceptance rate
        rate = max(n_accepted / n_drawn, 1e-3)
        batch = int(min(max((size - n_accepted) / rate * 1.2, 16), 1e6))

    return np.concatenate(accepted)[:size]
