import pathlib
from typing import List, Tuple

import numpy as np
import pandas as pd

from ..errors import DataError

# Columns of the sample archive holding nested lists
LIST_COLUMNS = ("c", "v", "J", "r", "log_L_parts")


def read_table(path: pathlib.Path) -> pd.DataFrame:
    """Read a CSV file as strings, turning parser failures into DataError.

    The pandas parser reports the offending line ("Expected 2 fields in line
    5, saw 3"), which is kept in the message.
    """
    if not path.exists():
        raise DataError(f"Data file {path} does not exist.")
    try:
        return pd.read_csv(path, dtype=str, skipinitialspace=True, keep_default_na=False, na_values=[""])
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataError(f"Malformed data file {path}: {e}") from e


def check_columns(table: pd.DataFrame, columns: List[str], path: pathlib.Path) -> None:
    missing = [column for column in columns if column not in table.columns]
    if missing:
        raise DataError(f"{path}: missing column(s) {missing}; header has {list(table.columns)}.")


def check_missing(table: pd.DataFrame, columns: List[str], path: pathlib.Path) -> None:
    """Report the first empty cell. Data row i sits on line i + 2 (the header is line 1)."""
    empty = table[columns].isna()
    if empty.to_numpy().any():
        row = int(np.flatnonzero(empty.any(axis=1).to_numpy())[0])
        column = empty.columns[empty.iloc[row].to_numpy()][0]
        raise DataError(f"{path}: line {row + 2}: missing value in column '{column}'.")


def to_numeric(table: pd.DataFrame, columns: List[str], path: pathlib.Path) -> np.ndarray:
    """Convert columns to floats, naming the column of the first bad cell."""
    values = []
    for column in columns:
        converted = pd.to_numeric(table[column], errors="coerce")
        bad = np.flatnonzero(converted.isna().to_numpy())
        if bad.size:
            row = int(bad[0])
            raise DataError(
                f"{path}: line {row + 2}: non-numeric value '{table[column].iloc[row]}' in column '{column}'."
            )
        values.append(converted.to_numpy(dtype=float))
    return np.column_stack(values)


def to_codes(table: pd.DataFrame, columns: List[str]) -> Tuple[np.ndarray, List[List[str]]]:
    """Factorize categorical columns into sorted zero-based level codes."""
    codes, levels = [], []
    for column in columns:
        values = table[column]
        numeric = pd.to_numeric(values, errors="coerce")
        if not numeric.isna().any() and np.all(numeric == np.round(numeric)):
            # Integer codes are kept as they are
            codes.append(numeric.to_numpy(dtype=float))
            levels.append(sorted(values.unique().tolist()))
            continue
        index, uniques = pd.factorize(values, sort=True)
        codes.append(index.astype(float))
        levels.append([str(level) for level in uniques])
    return np.column_stack(codes), levels


def pack_matrix(values: np.ndarray) -> List[float]:
    """Row-major flattening used for the K x n_loc log-scores."""
    return np.asarray(values, dtype=float).reshape(-1).tolist()
