import pathlib
from typing import List

import numpy as np
import pandas as pd

from ..datamodel.main import ObservationSet


def assign_folds(n: int, folds: int, seed: int) -> np.ndarray:
    """Fold of every observation: a seeded permutation taken modulo `folds`."""
    if not 2 <= folds <= n:
        raise ValueError(f"Need 2 <= folds <= n, got folds = {folds}, n = {n}.")
    return np.random.default_rng(seed).permutation(n) % folds


def fold_ids(data: ObservationSet, folds: int, seed: int) -> np.ndarray:
    """Folds stored with the data, or a seeded assignment."""
    if data.fold_ids is not None:
        return np.asarray(data.fold_ids, dtype=int)
    return assign_folds(data.n, folds, seed)


def append_rows(rows: List[dict], output: pathlib.Path) -> pathlib.Path:
    """Append rows to a CSV file, writing the header on creation."""
    output.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows).to_csv(output, mode="a", header=not output.exists(), index=False)
    return output
