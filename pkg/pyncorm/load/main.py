import logging
import pathlib
from typing import Optional, Union

import numpy as np
import pandas as pd
import pyarrow.parquet as pq
import pydantic

from ..datamodel.main import DataConfig, ObservationSet, RunConfig
from ..errors import DataError
from ..kernels.main import ClusterSuffStats
from ..sampler.main import ChainState
from ..sampler.utils import ChainContext
from ..scores.main import ScoreModel
from .utils import LIST_COLUMNS, check_columns, check_missing, read_table, to_codes, to_numeric

logger = logging.getLogger(__name__)


def ingest_csv(path: Union[str, pathlib.Path], data: Optional[DataConfig] = None) -> ObservationSet:
    """Read observations from a CSV file with a header row.

    Args:
        path (Union[str, pathlib.Path]): The CSV file.
        data (Optional[DataConfig]): Response, regressor and fold columns.
            Defaults to a single response `y` and a single regressor `x`.

    Raises:
        DataError: If the file is malformed, a designated column is absent,
            a cell is empty or a numeric cell cannot be parsed. Messages
            carry the line number and the column name.

    Returns:
        ObservationSet: The parsed observations.
    """
    path = pathlib.Path(path)
    data = data or DataConfig()
    table = read_table(path)

    columns = [*data.response, *data.regressors, *([data.folds] if data.folds else [])]
    check_columns(table, columns, path)
    check_missing(table, columns, path)

    y = to_numeric(table, data.response, path)
    if data.categorical:
        x, levels = to_codes(table, data.regressors)
        logger.info(f"Categorical levels: {dict(zip(data.regressors, levels))}")
    else:
        x = to_numeric(table, data.regressors, path)

    fold_ids = None
    if data.folds:
        fold_ids, _ = pd.factorize(table[data.folds], sort=True)

    try:
        observations = ObservationSet(y=y, x=x, fold_ids=fold_ids, categorical=data.categorical)
    except pydantic.ValidationError as e:
        raise DataError(f"{path}: {e}") from e

    # Scores live on the distinct regressor values
    n_locations = observations.locations()[0].shape[0]
    logger.info(f"Read {observations.n} observations at {n_locations} distinct locations from {path}")
    return observations


def load_archive(directory: Union[str, pathlib.Path]) -> "ArchiveDataFrame":
    """Load the retained states written by `fit`.

    Args:
        directory (Union[str, pathlib.Path]): The archive directory, or the
            `samples.parquet` file itself.

    Returns:
        ArchiveDataFrame: One row per retained state.
    """
    path = pathlib.Path(directory)
    if path.is_dir():
        path = path / "samples.parquet"
    if not path.exists():
        raise DataError(f"No sample archive at {path}.")
    return ArchiveDataFrame(pq.read_table(path).to_pandas())


class ArchiveDataFrame(pd.DataFrame):
    """Retained states of one or more chains, one row each."""

    @property
    def _constructor(self):
        return ArchiveDataFrame

    def read(self, idx: int, config: RunConfig, data: ObservationSet) -> ChainState:
        """Rebuild the chain state stored in row `idx`.

        Hyperparameters come from the row and everything else from `config`.
        Cluster statistics are recomputed from the data and the allocations.
        """
        row = self.iloc[idx]
        model = config.model
        values = {column: np.asarray(row[column]) for column in LIST_COLUMNS}

        locations, loc_index = data.locations()
        if locations.shape[0] != values["log_L_parts"].size:
            raise DataError(
                f"Archive row {idx} has {values['log_L_parts'].size} locations, the data {locations.shape[0]}."
            )

        tau = {key[4:]: float(row[key]) for key in row.index if key.startswith("tau.")}
        xi = {key[3:]: float(row[key]) for key in row.index if key.startswith("xi.")}
        kernel = {key[7:]: float(row[key]) for key in row.index if key.startswith("kernel.")}

        score_spec = model.scores.model_validate({**model.scores.model_dump(), **tau})
        levy = model.levy.model_validate({**model.levy.model_dump(), **xi})
        kernel_spec = model.kernel.model_validate({**model.kernel.model_dump(), **kernel})

        c = values["c"].astype(int)
        K = int(row["K"])
        context = ChainContext(
            y=data.y,
            loc_index=loc_index,
            priors=model.priors,
            estimator=config.estimator,
            schedule=config.sampler,
        )
        return ChainState(
            context=context,
            c=c,
            J=values["J"].astype(float),
            r=values["r"].astype(float).reshape(K, locations.shape[0]),
            v=values["v"].astype(float),
            mass=float(row["M"]),
            levy=levy,
            score_model=ScoreModel(score_spec, locations),
            kernel=kernel_spec,
            log_L=float(row["log_L"]),
            log_L_parts=values["log_L_parts"].astype(float),
            stats=[ClusterSuffStats.from_data(data.y[c == k]) for k in range(K)],
            iteration=int(row["iteration"]),
        )
