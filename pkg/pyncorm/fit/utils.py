import pathlib
from typing import Any, Dict, List

import numpy as np
import pandas as pd
import pyarrow as pa
import pyarrow.parquet as pq

from ..datamodel.main import RunConfig
from ..load.utils import pack_matrix
from ..sampler.main import ChainState, trace_record


def state_record(state: ChainState, chain: int) -> Dict[str, Any]:
    """One archive row: the scalar trace plus the nested state arrays."""
    record = {"chain": chain}
    record.update({key: value for key, value in trace_record(state).items() if not key.startswith("acceptance.")})
    record.update({
        "c": state.c.astype(int).tolist(),
        "v": state.v.tolist(),
        "J": state.J.tolist(),
        "r": pack_matrix(state.r),
        "log_L_parts": np.asarray(state.log_L_parts, dtype=float).tolist(),
    })
    return record


def write_samples(samples: pd.DataFrame, path: pathlib.Path) -> pathlib.Path:
    """Write the archive as a zstd-compressed Parquet file."""
    pq.write_table(
        pa.Table.from_pandas(samples, preserve_index=False),
        path,
        compression="zstd",
        use_dictionary=False,
    )
    return path


def acceptance_summary(acceptance: List[Dict[str, float]]) -> Dict[str, float]:
    """Mean acceptance rate of every block across chains."""
    frame = pd.DataFrame(acceptance)
    return {key: float(value) for key, value in frame.mean(axis=0, skipna=True).items()}


def write_report(
    path: pathlib.Path,
    config: RunConfig,
    seeds: List[int],
    acceptance: Dict[str, float],
    retained: int,
    wall_time: float,
) -> pathlib.Path:
    """Plain-text run report: seeds, schedule, wall time and acceptance rates."""
    schedule = config.sampler
    lines = [
        "pyncorm run report",
        "",
        f"seed: {schedule.seed}",
        f"chain seeds: {', '.join(str(seed) for seed in seeds)}",
        f"iterations: {schedule.iterations}",
        f"burn_in: {schedule.burn_in}",
        f"thin: {schedule.thin}",
        f"chains: {schedule.chains}",
        f"retained states: {retained}",
        f"levy family: {config.model.levy.family}",
        f"score model: {config.model.scores.kind}",
        f"kernel: {config.model.kernel.kind}",
        f"estimator a: {config.estimator.a}",
        f"wall time: {wall_time:.2f} s",
        "",
        "acceptance rates:",
    ]
    lines += [f"  {key}: {value:.3f}" for key, value in sorted(acceptance.items())]
    path.write_text("\n".join(lines) + "\n")
    return path
