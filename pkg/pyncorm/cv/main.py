import logging
import math
import pathlib
from typing import List, Optional, Union

import numpy as np
import pydantic
import tqdm

from ..datamodel.main import ObservationSet, RunConfig
from ..fit.main import run_chain
from ..load.main import ArchiveDataFrame
from ..predict.main import log_predictive_points
from ..sampler.utils import sampler_message
from .utils import append_rows, fold_ids

logger = logging.getLogger(__name__)


class CrossValidationResult(pydantic.BaseModel):
    """Out-of-sample log-predictive score (lower is better)."""

    lps: float
    se: float
    fold_lps: List[float]
    n: int

    def row(self, dataset: str, params: str) -> dict:
        return {"dataset": dataset, "params": params, "LPS": self.lps, "SE": self.se}


def lps_cross_validation(
    config: RunConfig,
    data: ObservationSet,
    folds: int = 10,
    seed: Optional[int] = None,
    quiet: bool = True,
) -> CrossValidationResult:
    """K-fold cross-validated log-predictive score.

    LPS = -(1/n) sum_i log p(y_i | x_i, training data), where each point is
    scored by the chain fitted without its fold. The standard error is the
    spread of the per-fold scores.

    Args:
        config (RunConfig): Model and schedule used on every fold.
        data (ObservationSet): All observations. Stored fold ids take
            precedence over `folds`.
        folds (int, optional): Number of folds. Defaults to 10.
        seed (Optional[int]): Seed of the fold assignment and of the chains.
            Defaults to `sampler.seed`.
        quiet (bool, optional): Hide the progress bar. Defaults to True.

    Returns:
        CrossValidationResult: LPS, its standard error and the fold scores.
    """
    seed = config.sampler.seed if seed is None else seed
    assignment = fold_ids(data, folds, seed)
    n_folds = int(assignment.max()) + 1
    streams = np.random.SeedSequence(seed).spawn(n_folds)

    scores = np.empty(data.n)
    for fold in tqdm.tqdm(range(n_folds), desc=f"{sampler_message()} (cv)", disable=quiet):
        test_index = np.flatnonzero(assignment == fold)
        train = data.subset(np.flatnonzero(assignment != fold))

        rng = np.random.default_rng(streams[fold])
        run = run_chain(config, train, rng, chain=fold, quiet=True)
        archive = ArchiveDataFrame(run.samples)
        scores[test_index] = log_predictive_points(
            archive, config, train, data.x[test_index], data.y[test_index], rng
        )
        logger.info(f"Fold {fold}: mean log predictive {scores[test_index].mean():.4f}")

    fold_lps = [-float(scores[assignment == fold].mean()) for fold in range(n_folds)]
    se = float(np.std(fold_lps, ddof=1) / math.sqrt(n_folds))
    return CrossValidationResult(lps=-float(scores.mean()), se=se, fold_lps=fold_lps, n=data.n)


def write_lps(
    result: CrossValidationResult, dataset: str, params: str, output: Union[str, pathlib.Path]
) -> pathlib.Path:
    """Append one (dataset, params, LPS, SE) row to a results CSV."""
    return append_rows([result.row(dataset, params)], pathlib.Path(output))
