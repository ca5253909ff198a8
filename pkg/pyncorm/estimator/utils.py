from typing import List

import numpy as np

from ..errors import DominanceError

# Tolerance for quadrature round-off in T(z) / kappa~(z)
RATIO_TOLERANCE = 1e-9


def log_poisson_product(ratios: np.ndarray, a: float) -> float:
    """Sum of log(1 - ratio / a) over the Poisson points.

    Raises:
        DominanceError: If a ratio phi / (C kappa) exceeds one.
    """
    ratios = np.asarray(ratios, dtype=float)
    if ratios.size == 0:
        return 0.0
    worst = float(ratios.max())
    if worst > 1 + RATIO_TOLERANCE or not np.isfinite(worst):
        raise DominanceError(f"dominance violated: phi / (C kappa) = {worst} > 1")
    return float(np.log1p(-np.minimum(ratios, 1.0) / a).sum())


def split_chunks(n: int, chunk_size: int) -> List[np.ndarray]:
    """Consecutive index blocks of at most chunk_size elements."""
    return [np.arange(start, min(start + chunk_size, n)) for start in range(0, n, chunk_size)]
