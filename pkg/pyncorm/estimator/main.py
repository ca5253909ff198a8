import concurrent.futures
import logging
import math
from typing import Callable, List, Literal, Optional, Tuple, Union

import numpy as np
import pydantic
from scipy.special import logsumexp

from ..datamodel.main import LevyMeasureSpec
from ..errors import NumericalError
from ..levy.main import bound_density_unnorm, bound_normalizer, sample_bound_density, tail_mass
from ..scores.main import ScoreModel
from .utils import log_poisson_product, split_chunks

logger = logging.getLogger(__name__)

Phi = Callable[[np.ndarray], np.ndarray]
KappaSampler = Callable[[np.random.Generator, int], np.ndarray]

# Largest Poisson rate a C of one location factor
MAX_POISSON_RATE = 1e4

# Poisson points drawn at once
BATCH_SIZE = 10_000


class PoissonEstimate(pydantic.BaseModel):
    """A positive unbiased estimate of a Laplace functional.

    `log_value` is the log of the product of the Poisson factors, `a` and `C`
    the tuning constants, `K_drawn` the number of Poisson points used and
    `component` the location index (or "total" for a product over
    locations, whose per-location logs are kept in `parts`).
    """

    model_config = pydantic.ConfigDict(frozen=True)

    log_value: float = pydantic.Field(..., le=0.0)
    a: float = pydantic.Field(..., gt=1.0)
    C: float = pydantic.Field(..., ge=0.0)
    K_drawn: int = pydantic.Field(..., ge=0)
    component: Union[int, Literal["total"]] = "total"
    parts: Optional[Tuple[float, ...]] = None

    @pydantic.model_validator(mode="after")
    def check_value(self):
        """Validates that the log estimate is finite and the empty product is one."""
        if not math.isfinite(self.log_value):
            raise ValueError(f"The log estimate must be finite, got {self.log_value}.")
        if self.K_drawn == 0 and self.log_value != 0:
            raise ValueError("An estimate with no Poisson points must equal one.")
        return self

    @property
    def value(self) -> float:
        return math.exp(self.log_value)


def poisson_estimate(
    phi: Phi,
    sample_kappa: KappaSampler,
    kappa: Phi,
    C: float,
    a: float,
    rng: np.random.Generator,
) -> PoissonEstimate:
    """Poisson estimator of exp(-int phi).

    Draws K ~ Poisson(a C) points from kappa and returns the product of
    (1 - phi(x) / (a C kappa(x))), accumulated in log space.

    Args:
        phi (Phi): The integrand, vectorized.
        sample_kappa (KappaSampler): Draws `size` points from kappa.
        kappa (Phi): The proposal density, vectorized.
        C (float): Bound on phi / kappa.
        a (float): Tuning constant, a > 1.
        rng (np.random.Generator): Random number generator.

    Raises:
        DominanceError: If a sampled point has phi / (C kappa) > 1.

    Returns:
        PoissonEstimate: The estimate.
    """
    if a <= 1:
        raise ValueError(f"The Poisson estimator needs a > 1, got {a}.")

    count = int(rng.poisson(a * C))
    if count == 0:
        return PoissonEstimate(log_value=0.0, a=a, C=C, K_drawn=0)

    x = sample_kappa(rng, count)
    ratios = phi(x) / (C * kappa(x))
    return PoissonEstimate(log_value=log_poisson_product(ratios, a), a=a, C=C, K_drawn=count)


def estimate_L_k(
    k: int,
    v: np.ndarray,
    score_model: ScoreModel,
    levy_spec: LevyMeasureSpec,
    a: float,
    rng: np.random.Generator,
    mass: float = 1.0,
    max_rate: float = MAX_POISSON_RATE,
) -> PoissonEstimate:
    """Estimate the k-th factor of the Laplace functional.

    The proposal pairs a draw of the normalized tail-mass bound with a
    size-biased score vector, so that the score density and E[m_k] cancel
    and each factor is 1 - exp(-z sum_i v_i m*_i) T(z) / (a kappa~(z)).
    The bound is C = mass * v_k * E[m_k] * D, formed on the log scale.
    Points are drawn in batches of BATCH_SIZE.

    Args:
        k (int): Zero-based location index.
        v (np.ndarray): Latents aggregated per location, nonnegative.
        score_model (ScoreModel): Score prior at the locations.
        levy_spec (LevyMeasureSpec): The directing Lévy measure.
        a (float): Tuning constant, a > 1.
        rng (np.random.Generator): Random number generator.
        mass (float): Total mass M multiplying the Lévy intensity.
        max_rate (float): Largest Poisson rate a C the estimator accepts.

    Raises:
        NumericalError: If a C exceeds `max_rate`.

    Returns:
        PoissonEstimate: The estimate of L_k.
    """
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise ValueError("Latents must be nonnegative.")

    if v[k] == 0 or mass == 0:
        return PoissonEstimate(log_value=0.0, a=a, C=0.0, K_drawn=0, component=k)

    log_C = (
        math.log(mass) + math.log(v[k]) + score_model.log_mean_score(k) + math.log(bound_normalizer(levy_spec))
    )
    if math.log(a) + log_C > math.log(max_rate):
        raise NumericalError(
            f"Poisson rate a C = exp({math.log(a) + log_C:.1f}) at location {k} exceeds {max_rate:g}."
        )
    C = math.exp(log_C)

    count = int(rng.poisson(a * C))
    log_value = 0.0
    for start in range(0, count, BATCH_SIZE):
        size = min(BATCH_SIZE, count - start)
        z = sample_bound_density(levy_spec, rng, size=size)
        log_m = score_model.sample_size_biased_log(k, rng, size=size)
        # log of z * sum_i v_i m*_i; m* may exceed the float range
        log_rate = np.log(z) + logsumexp(log_m, b=v, axis=1)
        with np.errstate(over="ignore"):
            decay = np.exp(-np.exp(log_rate))
        ratios = decay * tail_mass(levy_spec, z) / bound_density_unnorm(levy_spec, z)
        log_value += log_poisson_product(ratios, a)
    return PoissonEstimate(log_value=log_value, a=a, C=C, K_drawn=count, component=k)


def estimate_L(
    v: np.ndarray,
    score_model: ScoreModel,
    levy_spec: LevyMeasureSpec,
    a: float,
    rng: np.random.Generator,
    mass: float = 1.0,
    nworkers: int = 1,
    chunk_size: int = 16,
    max_rate: float = MAX_POISSON_RATE,
) -> PoissonEstimate:
    """Estimate the Laplace functional as the product of its location factors.

    Locations are processed in fixed chunks, each with its own generator
    spawned from `rng`, so the result does not depend on `nworkers`.

    Args:
        v (np.ndarray): Latents aggregated per location.
        score_model (ScoreModel): Score prior at the locations.
        levy_spec (LevyMeasureSpec): The directing Lévy measure.
        a (float): Tuning constant, a > 1.
        rng (np.random.Generator): Random number generator.
        mass (float, optional): Total mass M. Defaults to 1.
        nworkers (int, optional): Threads used for the chunks. Defaults to 1.
        chunk_size (int, optional): Locations per chunk. Defaults to 16.
        max_rate (float, optional): Largest Poisson rate a C of a location
            factor. Defaults to MAX_POISSON_RATE.

    Raises:
        NumericalError: If a location factor exceeds `max_rate`.

    Returns:
        PoissonEstimate: The total estimate, with per-location logs in `parts`.
    """
    v = np.asarray(v, dtype=float)
    chunks = split_chunks(v.size, chunk_size)
    streams = rng.spawn(len(chunks)) if chunks else []

    def run_chunk(index: np.ndarray, stream: np.random.Generator) -> List[PoissonEstimate]:
        return [estimate_L_k(int(k), v, score_model, levy_spec, a, stream, mass, max_rate) for k in index]

    if nworkers > 1 and len(chunks) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=nworkers) as executor:
            results = list(executor.map(run_chunk, chunks, streams))
    else:
        results = [run_chunk(index, stream) for index, stream in zip(chunks, streams)]

    estimates = [estimate for chunk in results for estimate in chunk]
    parts = tuple(estimate.log_value for estimate in estimates)
    return PoissonEstimate(
        log_value=math.fsum(parts),
        a=a,
        C=math.fsum(estimate.C for estimate in estimates),
        K_drawn=sum(estimate.K_drawn for estimate in estimates),
        parts=parts,
    )


def noise_variance(
    phi: Phi,
    sample_kappa: KappaSampler,
    kappa: Phi,
    C: float,
    a: float,
    rng: np.random.Generator,
    n_draws: int = 10_000,
) -> Tuple[float, float]:
    """Monte Carlo noise variance sigma^2 = (1 / (a C)) int phi^2 / kappa.

    Returns:
        Tuple[float, float]: The estimate and its standard error.
    """
    x = sample_kappa(rng, n_draws)
    w = (phi(x) / kappa(x)) ** 2
    scale = 1 / (a * C)
    return float(scale * w.mean()), float(scale * w.std(ddof=1) / math.sqrt(n_draws))


def tune_a(
    target_noise_variance: float,
    phi: Phi,
    sample_kappa: KappaSampler,
    kappa: Phi,
    C: float,
    rng: np.random.Generator,
    a_ref: float = 8.0,
    n_draws: int = 10_000,
) -> float:
    """The a that achieves a target noise variance.

    sigma^2 is inversely proportional to a, so a_opt = sigma^2(a_ref) * a_ref / target.
    """
    if target_noise_variance <= 0:
        raise ValueError(f"The target noise variance must be positive, got {target_noise_variance}.")
    measured, _ = noise_variance(phi, sample_kappa, kappa, C, a_ref, rng, n_draws)
    a_opt = measured * a_ref / target_noise_variance
    logger.debug(f"Measured noise variance {measured:.4g} at a = {a_ref}; a_opt = {a_opt:.4g}")
    return a_opt


def averaged_poisson_estimate(
    phi: Phi,
    sample_kappa: KappaSampler,
    kappa: Phi,
    C: float,
    a: float,
    n_copies: int,
    rng: np.random.Generator,
) -> float:
    """Mean of `n_copies` independent Poisson estimates sharing the budget a C.

    Each copy uses a / n_copies, so the expected number of phi evaluations
    equals that of a single estimate with constant a.
    """
    a_each = a / n_copies
    if a_each <= 1:
        raise ValueError(f"a / n_copies must exceed 1, got {a_each}.")
    values = [poisson_estimate(phi, sample_kappa, kappa, C, a_each, rng).value for _ in range(n_copies)]
    return float(np.mean(values))


def poisson_variance(laplace: float, int_phi2_over_kappa: float, C: float, a: float) -> float:
    """Variance of the Poisson estimator: L^2 (exp(int phi^2 / kappa / (a C)) - 1)."""
    return laplace**2 * math.expm1(int_phi2_over_kappa / (a * C))


class EstimatorCheck(pydantic.BaseModel):
    """Monte Carlo mean and variance of the estimator against their exact values."""

    mean: float
    se: float
    expected_mean: float
    variance: float
    expected_variance: float

    @property
    def z(self) -> float:
        return (self.mean - self.expected_mean) / self.se

    @property
    def passed(self) -> bool:
        # Unbiased within 3 SE, variance within 5%
        return abs(self.z) < 3 and abs(self.variance / self.expected_variance - 1) < 0.05


def exponential_check(rng: np.random.Generator, n_draws: int = 100_000, a: float = 8.0) -> EstimatorCheck:
    """Estimate exp(-int_0^inf e^(-x) dx) = e^(-1) with kappa = Exp(1) and C = 1.

    Here int phi^2 / kappa = 1, so the exact variance is e^(-2) (e^(1/a) - 1).
    """
    phi = lambda x: np.exp(-x)
    sample_kappa = lambda stream, size: stream.exponential(1.0, size)
    values = np.array([poisson_estimate(phi, sample_kappa, phi, 1.0, a, rng).value for _ in range(n_draws)])
    return EstimatorCheck(
        mean=float(values.mean()),
        se=float(values.std(ddof=1) / math.sqrt(n_draws)),
        expected_mean=math.exp(-1),
        variance=float(values.var(ddof=1)),
        expected_variance=poisson_variance(math.exp(-1), 1.0, 1.0, a),
    )
