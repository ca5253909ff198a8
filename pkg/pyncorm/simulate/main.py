import logging
import pathlib
from typing import Union

import numpy as np
import pandas as pd

from ..datamodel.main import ObservationSet, SimulationSpec
from .utils import MEANS_I, MEANS_II, draw_components, mean_III, probabilities_I, probabilities_II, sd_III

logger = logging.getLogger(__name__)


def simulate_dataset(spec: SimulationSpec, n: int, rng: np.random.Generator) -> ObservationSet:
    """Simulate one of the benchmark regression data sets.

    The regressor is Uniform(0, 1) in all three. I and II draw a component
    s with x-dependent probabilities and then y ~ N(mean_s, sigma^2). III sets
    y = g_{a,b}(x) + I(c = 1) h(x) + 0.1 eps k(x)^I(d = 1), eps ~ N(0, 1).

    Args:
        spec (SimulationSpec): Data set kind and parameters.
        n (int): Number of observations.
        rng (np.random.Generator): Random number generator.

    Returns:
        ObservationSet: n observations with a single regressor.
    """
    if n < 2:
        raise ValueError(f"At least two observations are required, got {n}.")

    x = rng.random(n)
    if spec.kind == "III":
        y = mean_III(x, spec.a, spec.b, spec.c) + sd_III(x, spec.d) * rng.standard_normal(n)
    else:
        probabilities = probabilities_I(x, spec.r) if spec.kind == "I" else probabilities_II(x)
        means = MEANS_I if spec.kind == "I" else MEANS_II
        s = draw_components(probabilities, rng)
        y = means[s] + spec.sigma * rng.standard_normal(n)

    logger.debug(f"Simulated {n} observations of data set {spec.kind} ({spec.label()})")
    return ObservationSet(y=y, x=x)


def write_dataset(data: ObservationSet, output: Union[str, pathlib.Path]) -> pathlib.Path:
    """Write a single-regressor, single-response data set as CSV with columns x, y."""
    output = pathlib.Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame({"x": data.x[:, 0], "y": data.y[:, 0]}).to_csv(output, index=False)
    return output
