import logging
import pathlib
from typing import Optional, Union

import numpy as np
import pandas as pd
import tqdm
from scipy.special import logsumexp

from ..datamodel.main import ObservationSet, RunConfig
from ..load.main import ArchiveDataFrame
from ..sampler.utils import sampler_message
from .utils import (
    average_log_density,
    check_grid_locations,
    default_grid,
    log_component_densities,
    log_mixture_weights,
)

logger = logging.getLogger(__name__)


def predictive_density(
    archive: ArchiveDataFrame,
    config: RunConfig,
    data: ObservationSet,
    x_grid: np.ndarray,
    y_grid: np.ndarray,
    rng: np.random.Generator,
    quiet: bool = True,
) -> np.ndarray:
    """Posterior mean conditional density of y given x on a lattice.

    Every retained state contributes the mixture of its clusters' posterior
    predictive densities, weighted by J_k m_k(x*), and of the prior
    predictive, weighted by the unallocated mass. The result is the average
    over states.

    Args:
        archive (ArchiveDataFrame): Retained states from `fit`.
        config (RunConfig): The configuration used for the fit.
        data (ObservationSet): The training observations.
        x_grid (np.ndarray): Regressor values (g or g x q).
        y_grid (np.ndarray): Univariate response values.
        rng (np.random.Generator): Random number generator.
        quiet (bool, optional): Hide the progress bar. Defaults to True.

    Raises:
        DataError: If a categorical grid code lies outside the level set.

    Returns:
        np.ndarray: len(x_grid) x len(y_grid) densities.
    """
    locations = check_grid_locations(data, x_grid, config.model.scores)
    y_grid = np.asarray(y_grid, dtype=float).reshape(-1, 1)
    draws = config.output.remainder_draws

    total = None
    for idx in tqdm.tqdm(range(len(archive)), desc=sampler_message(), disable=quiet):
        state = archive.read(idx, config, data)
        log_weights = log_mixture_weights(state, locations, rng, draws)
        log_components = log_component_densities(state, y_grid)
        log_density = logsumexp(log_weights[:, :, None] + log_components[:, None, :], axis=0)
        total = log_density if total is None else np.logaddexp(total, log_density)

    return np.exp(total - np.log(len(archive)))


def log_predictive_points(
    archive: ArchiveDataFrame,
    config: RunConfig,
    data: ObservationSet,
    x: np.ndarray,
    y: np.ndarray,
    rng: np.random.Generator,
    quiet: bool = True,
) -> np.ndarray:
    """log p(y_i | x_i, data) for every held-out pair (x_i, y_i).

    The predictive is the one of `predictive_density`, evaluated at the
    pairs; multivariate responses are supported.
    """
    locations = check_grid_locations(data, x, config.model.scores)
    y = np.asarray(y, dtype=float).reshape(len(locations), -1)
    draws = config.output.remainder_draws

    per_state = []
    for idx in tqdm.tqdm(range(len(archive)), desc=sampler_message(), disable=quiet):
        state = archive.read(idx, config, data)
        log_weights = log_mixture_weights(state, locations, rng, draws)
        log_components = log_component_densities(state, y)
        per_state.append(logsumexp(log_weights + log_components, axis=0))

    return average_log_density(np.vstack(per_state))


def write_predictive(
    density: np.ndarray,
    x_grid: np.ndarray,
    y_grid: np.ndarray,
    output: Union[str, pathlib.Path],
) -> pathlib.Path:
    """Write the density lattice as long-format CSV with columns x, y, density."""
    output = pathlib.Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)

    x_grid = np.asarray(x_grid, dtype=float)
    x_labels = x_grid if x_grid.ndim == 1 else [" ".join(f"{value:g}" for value in row) for row in x_grid]
    frame = pd.DataFrame({
        "x": np.repeat(np.asarray(x_labels, dtype=object), len(y_grid)),
        "y": np.tile(np.asarray(y_grid, dtype=float), len(x_grid)),
        "density": density.reshape(-1),
    })
    frame.to_csv(output, index=False)
    return output


def predict(
    archive: ArchiveDataFrame,
    config: RunConfig,
    data: ObservationSet,
    output: Optional[Union[str, pathlib.Path]] = None,
    quiet: Optional[bool] = None,
) -> pathlib.Path:
    """Evaluate the predictive density on the configured grid and write `predictive.csv`."""
    output = pathlib.Path(output or config.output.directory / "predictive.csv")
    quiet = config.output.quiet if quiet is None else quiet

    x_grid, y_grid = default_grid(data, config.output)
    rng = np.random.default_rng(config.sampler.seed)
    density = predictive_density(archive, config, data, x_grid, y_grid, rng, quiet=quiet)
    logger.info(f"Evaluated the predictive on a {len(x_grid)} x {len(y_grid)} grid over {len(archive)} states")
    return write_predictive(density, x_grid, y_grid, output)
