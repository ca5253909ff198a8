import math
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from ..datamodel.main import ObservationSet, OutputConfig, ScoreModelSpec
from ..errors import DataError
from ..kernels.main import ClusterSuffStats, log_predictive
from ..levy.main import log_gamma_integral
from ..sampler.main import ChainState
from ..scores.utils import check_locations


def log_mixture_weights(
    state: ChainState, locations: np.ndarray, rng: np.random.Generator, draws: int
) -> np.ndarray:
    """Normalized log weights of the K active clusters and the remainder at new locations.

    Cluster k has weight J_k m_k(x*), with m_k(x*) drawn from the score
    process given the cluster's scores at the data locations. The remainder,
    the mass of the unallocated jumps, is M E[m(x*) gamma(V)] with V the
    latent-weighted scores at the data locations, estimated with `draws`
    joint prior draws.

    Returns:
        np.ndarray: (K + 1) x g log weights, normalized over the first axis.
    """
    model = state.score_model
    r_star = model.conditional_log_sample(state.r, locations, rng) if state.K else np.zeros((0, len(locations)))
    log_active = np.log(state.J)[:, None] + r_star

    r_data = model.sample_log_prior(rng, size=draws)
    r_new = model.conditional_log_sample(r_data, locations, rng)
    log_gamma = np.array([log_gamma_integral(state.levy, float(V)) for V in np.exp(r_data) @ state.V_loc])
    log_remainder = math.log(state.mass) + logsumexp(r_new + log_gamma[:, None], axis=0) - math.log(draws)

    log_weights = np.vstack([log_active, log_remainder[None, :]])
    return log_weights - logsumexp(log_weights, axis=0)


def log_component_densities(state: ChainState, y: np.ndarray) -> np.ndarray:
    """(K + 1) x m posterior predictive log densities, the last row for a new cluster."""
    rows = [log_predictive(state.kernel, stats, y) for stats in state.stats]
    rows.append(log_predictive(state.kernel, ClusterSuffStats.empty(state.kernel.dim), y))
    return np.vstack(rows)


def default_grid(data: ObservationSet, output: OutputConfig) -> tuple:
    """Predictive grid from the output block, falling back to the data range."""
    if data.p != 1:
        raise DataError(f"Predictive grids need a univariate response, got p = {data.p}.")

    if output.grid_x is not None:
        x_grid = np.asarray(output.grid_x, dtype=float)
    elif data.categorical:
        x_grid = data.locations()[0]
    else:
        if data.x.shape[1] != 1:
            raise DataError("Set output.grid_x for regressors with more than one column.")
        x_grid = np.linspace(data.x.min(), data.x.max(), 50)

    y = data.y[:, 0]
    span = y.max() - y.min()
    lower = output.grid_y_min if output.grid_y_min is not None else y.min() - 0.1 * span
    upper = output.grid_y_max if output.grid_y_max is not None else y.max() + 0.1 * span
    return x_grid, np.linspace(lower, upper, output.grid_y_size)


def check_grid_locations(data: ObservationSet, locations: np.ndarray, spec: ScoreModelSpec) -> np.ndarray:
    """Grid locations as a matrix; categorical codes must lie in the configured level set."""
    locations = np.asarray(locations, dtype=float)
    if locations.ndim == 1:
        locations = locations[:, None] if data.x.shape[1] == 1 else locations[None, :]
    if locations.shape[1] != data.x.shape[1]:
        raise DataError(f"Grid locations have {locations.shape[1]} columns, the data {data.x.shape[1]}.")
    try:
        return check_locations(spec, locations)
    except ValueError as e:
        raise DataError(f"Invalid prediction locations: {e}") from e


def average_log_density(log_densities: np.ndarray, count: Optional[int] = None) -> np.ndarray:
    """log of the mean density over states stacked on the first axis."""
    count = count or log_densities.shape[0]
    return logsumexp(log_densities, axis=0) - math.log(count)
