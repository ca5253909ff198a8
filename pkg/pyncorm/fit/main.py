import concurrent.futures
import dataclasses
import logging
import pathlib
import time
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd
import tqdm

from ..datamodel.main import ObservationSet, RunConfig
from ..sampler.main import initialize_state, sweep, trace_record
from ..sampler.utils import sampler_message
from .utils import acceptance_summary, state_record, write_report, write_samples

logger = logging.getLogger(__name__)


@dataclasses.dataclass
class ChainRun:
    """Retained states, trace and acceptance rates of one chain."""

    chain: int
    samples: pd.DataFrame
    trace: pd.DataFrame
    acceptance: Dict[str, float]
    wall_time: float


def run_chain(
    config: RunConfig,
    data: ObservationSet,
    rng: np.random.Generator,
    chain: int = 0,
    quiet: bool = False,
) -> ChainRun:
    """Run one chain and keep the thinned post-burn-in states.

    Args:
        config (RunConfig): Model, schedule and estimator settings.
        data (ObservationSet): The observations.
        rng (np.random.Generator): The chain's random number generator.
        chain (int, optional): Chain number stored in every row. Defaults to 0.
        quiet (bool, optional): Hide the progress bar. Defaults to False.

    Returns:
        ChainRun: (iterations - burn_in) // thin retained states.
    """
    schedule = config.sampler
    start = time.perf_counter()
    state = initialize_state(config, data, rng)

    rows, trace = [], []
    for t in tqdm.tqdm(
        range(schedule.iterations), desc=f"{sampler_message()} [chain {chain}]", disable=quiet, position=chain
    ):
        sweep(state, rng)
        if t < schedule.burn_in or (t + 1 - schedule.burn_in) % schedule.thin:
            continue
        rows.append(state_record(state, chain))
        trace.append(trace_record(state))

    acceptance = {key: scale.acceptance_rate for key, scale in sorted(state.scales.items())}
    wall_time = time.perf_counter() - start
    logger.info(
        f"Chain {chain}: {len(rows)} states kept, {state.estimates} estimator calls, {wall_time:.1f} s; "
        + ", ".join(f"{key} {value:.2f}" for key, value in acceptance.items())
    )
    return ChainRun(
        chain=chain,
        samples=pd.DataFrame(rows),
        trace=pd.DataFrame(trace),
        acceptance=acceptance,
        wall_time=wall_time,
    )


def fit(
    config: RunConfig,
    data: ObservationSet,
    output: Optional[Union[str, pathlib.Path]] = None,
    quiet: Optional[bool] = None,
) -> pathlib.Path:
    """Fit the mixture and write the sample archive 🎲

    Chains run in a thread pool, each with a generator spawned from
    `sampler.seed`, so the archive depends on the seed only.

    Args:
        config (RunConfig): The run configuration.
        data (ObservationSet): The observations.
        output (Optional[Union[str, pathlib.Path]]): Archive directory.
            Defaults to `output.directory`.
        quiet (Optional[bool]): Hide the progress bars. Defaults to
            `output.quiet`.

    Returns:
        pathlib.Path: The archive directory holding `samples.parquet`,
            one `trace_chain{j}.csv` per chain and `report.txt`.
    """
    output = pathlib.Path(output or config.output.directory)
    output.mkdir(parents=True, exist_ok=True)
    quiet = config.output.quiet if quiet is None else quiet

    schedule = config.sampler
    children = np.random.SeedSequence(schedule.seed).spawn(schedule.chains)
    start = time.perf_counter()

    with concurrent.futures.ThreadPoolExecutor(max_workers=schedule.chains) as executor:
        futures = [
            executor.submit(run_chain, config, data, np.random.default_rng(child), chain, quiet)
            for chain, child in enumerate(children)
        ]
        runs: List[ChainRun] = [future.result() for future in futures]

    samples = pd.concat([run.samples for run in runs], ignore_index=True)
    write_samples(samples, output / "samples.parquet")
    for run in runs:
        run.trace.to_csv(output / f"trace_chain{run.chain}.csv", index=False)

    wall_time = time.perf_counter() - start
    acceptance = acceptance_summary([run.acceptance for run in runs])
    write_report(
        output / "report.txt",
        config,
        seeds=[int(child.generate_state(1)[0]) for child in children],
        acceptance=acceptance,
        retained=len(samples),
        wall_time=wall_time,
    )
    logger.info(f"Wrote {len(samples)} states to {output}")
    return output
