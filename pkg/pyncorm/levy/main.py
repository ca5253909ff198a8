import logging
import math
from typing import Optional, Union

import numpy as np
from scipy.special import exp1, gammaincc, gammaln

from ..datamodel.main import LevyMeasureSpec
from .utils import (
    beta_laplace_integral,
    beta_tail_integral,
    log_levy_coefficient,
    rejection_sample,
    truncated_pareto,
)

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


def log_levy_density(spec: LevyMeasureSpec, z: ArrayLike) -> ArrayLike:
    """Log of the directing Lévy density, -inf outside the support.

    GeneralizedGamma / Gamma: z^(-1-sigma) exp(-lambda z) / Gamma(1 - sigma).
    StableBeta / Beta: c z^(-1-sigma) (1 - lambda z)^(sigma + phi - 1) on
    (0, 1/lambda).
    """
    z_arr = np.asarray(z, dtype=float)
    inside = (z_arr > 0) & (z_arr < spec.upper)
    zs = np.where(inside, z_arr, 1.0 if not spec.is_beta_like else 0.5 / spec.lam)

    logc = log_levy_coefficient(spec.sigma, spec.gamma_shape, spec.is_beta_like)
    out = logc - (1 + spec.sigma) * np.log(zs)
    if spec.is_beta_like:
        out = out + (spec.sigma + spec.gamma_shape - 1) * np.log1p(-spec.lam * zs)
    else:
        out = out - spec.lam * zs

    out = np.where(inside, out, -np.inf)
    return float(out) if np.ndim(z) == 0 else out


def levy_density(spec: LevyMeasureSpec, z: ArrayLike) -> ArrayLike:
    """Evaluate the Lévy density nu*(z).

    Args:
        spec (LevyMeasureSpec): The directing Lévy measure.
        z (ArrayLike): Jump size(s).

    Raises:
        ValueError: If any z lies outside the support of the family.

    Returns:
        ArrayLike: nu*(z), with the shape of z.
    """
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr <= 0) or np.any(z_arr >= spec.upper):
        raise ValueError(f"z must lie in (0, {spec.upper}) for the {spec.family} family, got {z}.")
    return np.exp(log_levy_density(spec, z))


def tail_mass(spec: LevyMeasureSpec, t: ArrayLike) -> ArrayLike:
    """Tail mass T(t) = int_t^inf nu*(z) dz.

    Uses the exponential integral E1 for the Gamma limit, the regularized
    upper incomplete gamma function for the generalized gamma process and
    quadrature of the incomplete Beta-type integral for the Beta families.

    Args:
        spec (LevyMeasureSpec): The directing Lévy measure.
        t (ArrayLike): The threshold(s), t > 0.

    Raises:
        ValueError: If any t <= 0.

    Returns:
        ArrayLike: T(t), zero beyond the support.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0):
        raise ValueError(f"The tail mass needs t > 0, got {t}.")

    sigma, lam = spec.sigma, spec.lam
    if spec.is_beta_like:
        coef = math.exp(log_levy_coefficient(sigma, spec.gamma_shape, True)) * lam**sigma
        beta = sigma + spec.gamma_shape
        flat = t_arr.reshape(-1)
        values = np.array([
            coef * beta_tail_integral(lam * ti, sigma, beta) if ti < spec.upper else 0.0
            for ti in flat
        ])
        out = values.reshape(t_arr.shape)
    elif spec.is_limit:
        out = exp1(lam * t_arr)
    else:
        # Integration by parts of z^(-1-sigma) e^(-lambda z)
        first = np.exp(-sigma * np.log(t_arr) - lam * t_arr - gammaln(1 - sigma))
        second = lam**sigma * gammaincc(1 - sigma, lam * t_arr)
        out = np.clip(first - second, 0.0, None) / sigma

    return float(out) if np.ndim(t) == 0 else out


def _low_piece(spec: LevyMeasureSpec, t: np.ndarray) -> np.ndarray:
    if spec.is_limit:
        return -np.log(t)
    coef = math.exp(log_levy_coefficient(spec.sigma, spec.gamma_shape, spec.is_beta_like)) / spec.sigma
    return coef * np.expm1(-spec.sigma * np.log(t))


def _edge(spec: LevyMeasureSpec) -> float:
    """Value of the bound at the breakpoint b."""
    return float(_low_piece(spec, np.asarray(spec.b)))


def bound_density_unnorm(spec: LevyMeasureSpec, t: ArrayLike) -> ArrayLike:
    """Unnormalized bounding density kappa~(t) of the tail mass.

    For t < b the bound is c (t^(-sigma) - 1) / sigma (or -log t in the
    sigma -> 0 limits). For t >= b it decays from the breakpoint value as
    exp(-lambda (t - b)) for the gamma families and as
    ((1 - lambda t) / (1 - lambda b))^(sigma + phi) for the Beta families.

    Args:
        spec (LevyMeasureSpec): The directing Lévy measure.
        t (ArrayLike): Point(s), t > 0.

    Raises:
        ValueError: If any t <= 0.

    Returns:
        ArrayLike: kappa~(t), with the shape of t.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0):
        raise ValueError(f"The bound needs t > 0, got {t}.")

    edge = _edge(spec)
    low = _low_piece(spec, np.minimum(t_arr, spec.b))
    if spec.is_beta_like:
        ratio = np.clip((1 - spec.lam * t_arr) / (1 - spec.lam * spec.b), 0.0, None)
        high = edge * ratio ** (spec.sigma + spec.gamma_shape)
    else:
        high = edge * np.exp(-spec.lam * (t_arr - spec.b))

    out = np.where(t_arr < spec.b, low, high)
    return float(out) if np.ndim(t) == 0 else out


def low_piece_mass(spec: LevyMeasureSpec) -> float:
    """Integral of the bound over (0, b)."""
    b, sigma = spec.b, spec.sigma
    if spec.is_limit:
        return b - b * math.log(b)
    coef = math.exp(log_levy_coefficient(sigma, spec.gamma_shape, spec.is_beta_like)) / sigma
    return coef * (b ** (1 - sigma) / (1 - sigma) - b)


def high_piece_mass(spec: LevyMeasureSpec) -> float:
    """Integral of the bound over [b, upper)."""
    edge = _edge(spec)
    if spec.is_beta_like:
        beta = spec.sigma + spec.gamma_shape
        return edge * (1 - spec.lam * spec.b) / (spec.lam * (beta + 1))
    return edge / spec.lam


def bound_normalizer(spec: LevyMeasureSpec) -> float:
    """D = int kappa~(t) dt, in closed form for every family.

    Gamma limit: D = b - b log b - log b. Generalized gamma:
    D = [b^(1-sigma)/(1-sigma) - b + (b^(-sigma) - 1)/lambda] / (sigma Gamma(1-sigma)).
    """
    return low_piece_mass(spec) + high_piece_mass(spec)


def check_dominance(spec: LevyMeasureSpec) -> bool:
    """Whether kappa~ dominates the tail mass for this spec.

    kappa~ - T is nonincreasing below b and T / kappa~ is nonincreasing above
    it, so dominance everywhere reduces to dominance at the breakpoint.
    """
    # The Beta process with phi = 1 touches the bound exactly on (0, b]
    return bool(_edge(spec) * (1 + 1e-9) >= tail_mass(spec, spec.b))


def _sample_low(spec: LevyMeasureSpec, size: int, rng: np.random.Generator) -> np.ndarray:
    sigma, b = spec.sigma, spec.b

    # Gamma limit: y = -log t ~ Gamma(2, 1) truncated to y > -log b
    if spec.is_limit:
        y_b = -math.log(b)
        y = rejection_sample(
            propose=lambda m: rng.gamma(2.0, 1.0, size=m),
            accept=lambda cand: cand > y_b,
            size=size,
        )
        return np.exp(-y)

    # y = (t^-sigma - 1)/sigma, y | Xi ~ Gamma(2, Xi), Xi ~ Gamma(1/sigma - 1, 1/sigma)
    y_b = math.expm1(-sigma * math.log(b)) / sigma

    def propose(m: int) -> np.ndarray:
        xi = rng.gamma(1 / sigma - 1, sigma, size=m)
        return rng.gamma(2.0, 1 / xi)

    y = rejection_sample(propose=propose, accept=lambda cand: cand > y_b, size=size)
    return np.exp(-np.log1p(sigma * y) / sigma)


def _sample_high(spec: LevyMeasureSpec, size: int, rng: np.random.Generator) -> np.ndarray:
    lam, b = spec.lam, spec.b
    if spec.is_beta_like:
        beta = spec.sigma + spec.gamma_shape
        u = rng.random(size) ** (1 / (beta + 1))
        return (1 - (1 - lam * b) * u) / lam
    return b + rng.exponential(1 / lam, size=size)


def sample_bound_density(
    spec: LevyMeasureSpec, rng: np.random.Generator, size: Optional[int] = None
) -> ArrayLike:
    """Draw from the normalized bounding density kappa~(t) / D.

    The piece is chosen by its analytic mass. Below b the draw uses the
    gamma-mixture representation of the transformed variable with rejection
    of the truncated region; above b it inverts the tail piece.

    Args:
        spec (LevyMeasureSpec): The directing Lévy measure.
        rng (np.random.Generator): Random number generator.
        size (Optional[int]): Number of draws. None returns a single float.

    Returns:
        ArrayLike: The draw(s).
    """
    n = 1 if size is None else int(size)
    p_low = low_piece_mass(spec) / bound_normalizer(spec)

    is_low = rng.random(n) < p_low
    out = np.empty(n)
    n_low = int(is_low.sum())
    if n_low:
        out[is_low] = _sample_low(spec, n_low, rng)
    if n - n_low:
        out[~is_low] = _sample_high(spec, n - n_low, rng)

    return float(out[0]) if size is None else out


def log_gamma_integral(spec: LevyMeasureSpec, V: float) -> float:
    """Log of gamma(m) = int z exp(-z V) nu*(z) dz."""
    if V < 0:
        raise ValueError(f"V must be nonnegative, got {V}.")
    sigma, lam = spec.sigma, spec.lam
    if not spec.is_beta_like:
        return (sigma - 1) * math.log(lam + V)

    # Substitute u = lambda z
    logc = log_levy_coefficient(sigma, spec.gamma_shape, True)
    integral = beta_laplace_integral(V / lam, sigma, sigma + spec.gamma_shape)
    return logc + (sigma - 1) * math.log(lam) + math.log(integral)


def gamma_integral(spec: LevyMeasureSpec, V: float) -> float:
    """gamma(m) = int z exp(-z V) nu*(z) dz with V = sum_i v_i m_i.

    Closed form (lambda + V)^(sigma - 1) for the gamma families, quadrature
    for the Beta families.
    """
    return math.exp(log_gamma_integral(spec, V))


def jump_mean_given_scores(spec: LevyMeasureSpec, V: float) -> float:
    """Mean of p(J | m), proportional to J exp(-J V) nu*(J)."""
    sigma, lam = spec.sigma, spec.lam
    if not spec.is_beta_like:
        return (1 - sigma) / (lam + V)
    beta = sigma + spec.gamma_shape
    first = beta_laplace_integral(V / lam, sigma - 1, beta)
    return first / beta_laplace_integral(V / lam, sigma, beta) / lam


def sample_jump_given_scores(spec: LevyMeasureSpec, V: float, rng: np.random.Generator) -> float:
    """Draw J from p(J | m), proportional to J exp(-J V) nu*(J).

    The gamma families are conjugate: J ~ Gamma(1 - sigma, rate lambda + V).
    The Beta families use rejection, from a Beta(1 - sigma, sigma + phi)
    envelope while V / lambda <= 1 and from a Gamma(1 - sigma, V / lambda)
    envelope beyond.
    """
    if V < 0:
        raise ValueError(f"V must be nonnegative, got {V}.")
    sigma, lam = spec.sigma, spec.lam
    if not spec.is_beta_like:
        return float(rng.gamma(1 - sigma, 1 / (lam + V)))

    # Work with u = lambda J in (0, 1)
    beta = sigma + spec.gamma_shape
    scale = V / lam
    if scale <= 1:
        u = rejection_sample(
            propose=lambda m: rng.beta(1 - sigma, beta, size=m),
            accept=lambda cand: rng.random(cand.size) < np.exp(-scale * cand),
            size=1,
        )
    else:
        u = rejection_sample(
            propose=lambda m: rng.gamma(1 - sigma, 1 / scale, size=m),
            accept=lambda cand: (cand < 1)
            & (rng.random(cand.size) < np.clip(1 - cand, 0.0, 1.0) ** (beta - 1)),
            size=1,
        )
    return float(u[0] / lam)


def sample_allocated_jump(
    spec: LevyMeasureSpec,
    n_k: int,
    V: float,
    rng: np.random.Generator,
    current: Optional[float] = None,
    step: float = 1.0,
) -> float:
    """Update an allocated jump against J^n_k exp(-J V) nu*(J).

    Generalized gamma families are sampled exactly from
    Gamma(n_k - sigma, rate lambda + V). The Beta families take one random
    walk Metropolis step on log J from `current`.

    Args:
        spec (LevyMeasureSpec): The directing Lévy measure.
        n_k (int): Number of observations allocated to the jump, >= 1.
        V (float): sum_i v_i m_{k,i}.
        rng (np.random.Generator): Random number generator.
        current (Optional[float]): Current value, required by the Metropolis
            step. Defaults to the mean of the Beta envelope.
        step (float): Proposal standard deviation on log J.

    Raises:
        ValueError: If n_k < 1.

    Returns:
        float: The new value (possibly unchanged).
    """
    if n_k < 1:
        raise ValueError(f"Allocated jumps need n_k >= 1, got {n_k}; unallocated jumps are marginalized.")

    sigma, lam = spec.sigma, spec.lam
    if not spec.is_beta_like:
        return float(rng.gamma(n_k - sigma, 1 / (lam + V)))

    if current is None:
        current = (n_k - sigma) / (n_k + spec.gamma_shape) / lam

    def log_target(j: float) -> float:
        # J^(n_k) e^(-J V) nu*(J) times the log-scale Jacobian J
        return (n_k + 1) * math.log(j) - j * V + log_levy_density(spec, j)

    proposal = current * math.exp(step * rng.standard_normal())
    if proposal >= spec.upper:
        return float(current)
    if math.log(rng.random()) < log_target(proposal) - log_target(current):
        return float(proposal)
    return float(current)


def sample_jumps_above(
    spec: LevyMeasureSpec, mass: float, threshold: float, rng: np.random.Generator
) -> np.ndarray:
    """Simulate the jumps of the CRM with intensity mass * nu* above a threshold.

    Jumps on (threshold, 1) are thinned from a truncated Pareto proposal and
    jumps above 1 from a shifted exponential (gamma families). The Beta
    families thin a truncated Pareto on the whole of (threshold, 1/lambda).

    Args:
        spec (LevyMeasureSpec): The directing Lévy measure.
        mass (float): Total mass M multiplying the intensity.
        threshold (float): Jumps below it are not simulated, > 0.
        rng (np.random.Generator): Random number generator.

    Returns:
        np.ndarray: The jumps, in no particular order.
    """
    if threshold <= 0:
        raise ValueError(f"The threshold must be positive, got {threshold}.")

    sigma, lam = spec.sigma, spec.lam
    coef = mass * math.exp(log_levy_coefficient(sigma, spec.gamma_shape, spec.is_beta_like))

    def pareto_mass(lower: float, upper: float) -> float:
        if sigma == 0:
            return math.log(upper / lower)
        return (lower ** (-sigma) - upper ** (-sigma)) / sigma

    jumps = []
    if spec.is_beta_like:
        if threshold >= spec.upper:
            return np.empty(0)
        count = rng.poisson(coef * pareto_mass(threshold, spec.upper))
        z = truncated_pareto(rng, count, sigma, threshold, spec.upper)
        keep = rng.random(count) < (1 - lam * z) ** (sigma + spec.gamma_shape - 1)
        return z[keep]

    # Small jumps: proposal c z^(-1-sigma) e^(-lambda threshold) on (threshold, 1)
    if threshold < 1:
        count = rng.poisson(coef * math.exp(-lam * threshold) * pareto_mass(threshold, 1.0))
        z = truncated_pareto(rng, count, sigma, threshold, 1.0)
        keep = rng.random(count) < np.exp(-lam * (z - threshold))
        jumps.append(z[keep])

    # Large jumps: proposal c a^(-1-sigma) e^(-lambda z) on (a, inf)
    lower = max(threshold, 1.0)
    count = rng.poisson(coef * lower ** (-1 - sigma) * math.exp(-lam * lower) / lam)
    z = lower + rng.exponential(1 / lam, size=count)
    keep = rng.random(count) < (z / lower) ** (-1 - sigma)
    jumps.append(z[keep])

    return np.concatenate(jumps)
