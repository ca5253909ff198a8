import logging
import math
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
import pydantic
import tqdm

from ..datamodel.main import LevyMeasureSpec, ModelConfig, PriorSpec, RunConfig
from ..kernels.main import ClusterSuffStats, sample_location, sample_observation
from ..levy.main import sample_jumps_above
from ..scores.main import ScoreModel
from .main import (
    ChainState,
    initialize_state,
    store_estimate,
    sweep,
    try_estimate,
    update_hyperparameters,
)
from .utils import ChainContext, sampler_message

logger = logging.getLogger(__name__)

# Relative stick mass left out of the gamma-process representation
STICK_TOLERANCE = 1e-12

# Absolute jump threshold for the other families
JUMP_THRESHOLD = 1e-8


class GewekeReport(pydantic.BaseModel):
    """z-scores comparing marginal-conditional and successive-conditional draws."""

    iterations: int
    means_forward: Dict[str, float]
    means_chain: Dict[str, float]
    z_scores: Dict[str, float]
    threshold: float = 4.0

    @property
    def passed(self) -> bool:
        return all(abs(z) < self.threshold for z in self.z_scores.values())

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "statistic": list(self.z_scores),
            "forward": [self.means_forward[key] for key in self.z_scores],
            "chain": [self.means_chain[key] for key in self.z_scores],
            "z": list(self.z_scores.values()),
        })


def _draw_levy(model: ModelConfig, free: bool, rng: np.random.Generator) -> LevyMeasureSpec:
    """The Lévy spec, with free parameters drawn from their priors when they move."""
    if not free or not model.levy.free_parameters():
        return model.levy
    while True:
        values = {}
        for name in model.levy.free_parameters():
            if name == "sigma" and model.levy.sigma > 0:
                values[name] = rng.random()
            elif name == "gamma_shape":
                values[name] = model.priors.gamma_shape.sample(rng)
        try:
            return LevyMeasureSpec.model_validate({**model.levy.model_dump(), **values})
        except pydantic.ValidationError:
            continue


def _draw_jumps(levy: LevyMeasureSpec, mass: float, rng: np.random.Generator) -> np.ndarray:
    """Jumps of the directing CRM with intensity mass * nu*.

    The gamma process is its Gamma(M, 1) total times Dirichlet-process
    weights from stick breaking; the other families keep the jumps above a
    small threshold.
    """
    if levy.family == "Gamma":
        weights: List[float] = []
        remaining = 1.0
        while remaining > STICK_TOLERANCE:
            piece = remaining * rng.beta(1.0, mass)
            weights.append(piece)
            remaining -= piece
        return rng.gamma(mass, 1.0) * np.asarray(weights)
    return sample_jumps_above(levy, mass, JUMP_THRESHOLD, rng)


def _draw_joint(
    config: RunConfig, x: np.ndarray, rng: np.random.Generator, priors: Optional[PriorSpec] = None
) -> ChainState:
    model, schedule = config.model, config.sampler
    mass = model.priors.mass.sample(rng) if schedule.update_mass else model.mass
    levy = _draw_levy(model, schedule.update_levy, rng)

    score_spec = model.scores
    if schedule.update_tau:
        tau = {name: model.priors.tau_prior(name).sample(rng) for name, value in score_spec.tau.items() if value > 0}
        score_spec = score_spec.model_validate({**score_spec.model_dump(), **tau})

    x = np.asarray(x, dtype=float)
    x = x[:, None] if x.ndim == 1 else x
    locations, loc_index = np.unique(x, axis=0, return_inverse=True)
    loc_index = np.asarray(loc_index).reshape(-1)
    score_model = ScoreModel(score_spec, locations)

    # Random measure and its scores
    jumps = _draw_jumps(levy, mass, rng)
    while jumps.size == 0:
        jumps = _draw_jumps(levy, mass, rng)
    r_all = score_model.sample_log_prior(rng, size=jumps.size)
    weights = jumps[:, None] * np.exp(r_all)
    totals = weights.sum(axis=0)

    n = loc_index.size
    c_all = np.array([rng.choice(jumps.size, p=weights[:, loc] / totals[loc]) for loc in loc_index])
    v = rng.exponential(1 / totals[loc_index])

    active, c = np.unique(c_all, return_inverse=True)
    c = np.asarray(c, dtype=int).reshape(-1)
    kernel = model.kernel
    y = np.empty((n, kernel.dim))
    empty = ClusterSuffStats.empty(kernel.dim)
    for k in range(active.size):
        location = sample_location(kernel, empty, rng)
        for i in np.flatnonzero(c == k):
            y[i] = sample_observation(kernel, location, rng)

    context = ChainContext(
        y=y,
        loc_index=loc_index,
        priors=priors or model.priors,
        estimator=config.estimator,
        schedule=schedule,
    )
    state = ChainState(
        context=context,
        c=c,
        J=jumps[active],
        r=r_all[active],
        v=v,
        mass=mass,
        levy=levy,
        score_model=score_model,
        kernel=kernel,
        log_L=0.0,
        log_L_parts=np.zeros(score_model.n),
        stats=[ClusterSuffStats.from_data(y[c == k]) for k in range(active.size)],
    )
    return state


def simulate_joint(
    config: RunConfig, x: np.ndarray, rng: np.random.Generator, priors: Optional[PriorSpec] = None
) -> ChainState:
    """Draw hyperparameters, the random measure, allocations, latents and data.

    Hyperparameters updated by the schedule are drawn from their priors; the
    others keep their config values. Only the clusters that receive
    observations are kept in the returned state. Draws where the Laplace
    functional cannot be estimated are redrawn, matching the chain, which
    rejects proposals there.

    Args:
        config (RunConfig): Model and schedule.
        x (np.ndarray): Regressors of the simulated observations.
        rng (np.random.Generator): Random number generator.
        priors (Optional[PriorSpec]): Priors handed to the chain's transition
            kernel. Defaults to the model's priors.

    Returns:
        ChainState: A state with a fresh Laplace-functional estimate.
    """
    while True:
        state = _draw_joint(config, x, rng, priors)
        estimate = try_estimate(state, rng)
        if estimate is not None:
            store_estimate(state, estimate)
            return state


def resample_data(state: ChainState, rng: np.random.Generator) -> ChainState:
    """Redraw the responses given the allocations and kernel.

    Cluster locations are drawn from their posterior and discarded after
    new responses are drawn from them.
    """
    y = np.empty_like(state.context.y)
    for k in range(state.K):
        location = sample_location(state.kernel, state.stats[k], rng)
        for i in np.flatnonzero(state.c == k):
            y[i] = sample_observation(state.kernel, location, rng)
    state.context.y = y
    state.stats = [ClusterSuffStats.from_data(y[state.c == k]) for k in range(state.K)]
    return state


def geweke_statistics(state: ChainState) -> Dict[str, float]:
    """Scalar statistics monitored by the joint-distribution test."""
    stats = {
        "K": float(state.K),
        "mean_log_v": float(np.mean(np.log(state.v))),
        "log_M": math.log(state.mass),
    }
    for name, value in state.score_model.spec.tau.items():
        if value > 0:
            stats[f"log_tau.{name}"] = math.log(value)
    for name, value in state.levy.free_parameters().items():
        stats[f"xi.{name}"] = value
    return stats


def _batch_means_variance(values: np.ndarray, batches: int = 50) -> float:
    """Variance of the mean of an autocorrelated series by batch means."""
    size = values.size // batches
    means = values[: size * batches].reshape(batches, size).mean(axis=1)
    return float(means.var(ddof=1) / batches)


def geweke_check(
    config: RunConfig,
    iterations: int,
    rng: np.random.Generator,
    n: int = 5,
    priors: Optional[PriorSpec] = None,
    quiet: bool = True,
) -> GewekeReport:
    """Joint-distribution test of the sampler.

    Marginal-conditional draws simulate everything forward from the model.
    Successive-conditional draws alternate a sweep with a redraw of the
    data. Both must have the same distribution, which is checked on K, the
    mean log latent, log M, the log score hyperparameters and the free Lévy
    parameters. Kernel hyperparameters are held fixed (their prior is
    improper).

    Args:
        config (RunConfig): Model and schedule.
        iterations (int): Draws on each side.
        rng (np.random.Generator): Random number generator.
        n (int, optional): Number of observations. Defaults to 5.
        priors (Optional[PriorSpec]): Priors used inside the transition
            kernel. Different priors make the test fail on purpose.
        quiet (bool, optional): Hide the progress bars. Defaults to True.

    Returns:
        GewekeReport: Means and z-scores of every statistic.
    """
    schedule = config.sampler.model_copy(update={"update_kernel": False})
    config = config.model_copy(update={"sampler": schedule})
    x = rng.random(n) if config.model.scores.kind == "GaussianProcess" else np.column_stack([
        rng.integers(0, config.model.scores.levels[0], size=n),
        rng.integers(0, config.model.scores.levels[1], size=n),
    ])

    message = sampler_message()
    forward = [
        geweke_statistics(simulate_joint(config, x, rng))
        for _ in tqdm.tqdm(range(iterations), desc=f"{message} (forward)", disable=quiet)
    ]

    state = simulate_joint(config, x, rng, priors=priors)
    chain = []
    for _ in tqdm.tqdm(range(iterations), desc=f"{message} (chain)", disable=quiet):
        sweep(state, rng)
        resample_data(state, rng)
        chain.append(geweke_statistics(state))

    forward_frame, chain_frame = pd.DataFrame(forward), pd.DataFrame(chain)
    z_scores, means_forward, means_chain = {}, {}, {}
    for key in forward_frame.columns:
        a, b = forward_frame[key].to_numpy(), chain_frame[key].to_numpy()
        se = math.sqrt(a.var(ddof=1) / a.size + _batch_means_variance(b))
        means_forward[key], means_chain[key] = float(a.mean()), float(b.mean())
        z_scores[key] = (means_forward[key] - means_chain[key]) / se if se > 0 else 0.0
        logger.info(f"Geweke {key}: forward {a.mean():.4f}, chain {b.mean():.4f}, z = {z_scores[key]:.2f}")

    return GewekeReport(
        iterations=iterations, means_forward=means_forward, means_chain=means_chain, z_scores=z_scores
    )


def prior_reproduction(
    config: RunConfig, iterations: int, thin: int, rng: np.random.Generator, quiet: bool = True
) -> pd.DataFrame:
    """Run the hyperparameter blocks with no data.

    With no observations the Laplace functional is one and there are no
    clusters, so the chain targets the hyperpriors. Returns one row per
    retained draw with the mass, the score hyperparameters and the free
    Lévy parameters.
    """
    state = initialize_state(config, None, rng)
    rows = []
    for t in tqdm.tqdm(range(iterations), desc=sampler_message(), disable=quiet):
        update_hyperparameters(state, rng)
        if (t + 1) % thin == 0:
            row = {"M": state.mass}
            row.update({f"tau.{key}": value for key, value in state.score_model.spec.tau.items()})
            row.update({f"xi.{key}": value for key, value in state.levy.free_parameters().items()})
            rows.append(row)
    return pd.DataFrame(rows)
