import numpy as np
from scipy.spatial.distance import cdist

from ..datamodel.main import ScoreModelSpec

JITTER = 1e-8


def cross_covariance(spec: ScoreModelSpec, xa: np.ndarray, xb: np.ndarray) -> np.ndarray:
    """Covariance of r(xa) and r(xb) under the score process.

    GaussianProcess: phi * exp(-||xa - xb|| / lengthscale).

    AnovaTwoWay: sigma2_1 [same level of factor 1] + sigma2_2 [same level of
    factor 2] + sigma2_12 [same cell].
    """
    xa = np.atleast_2d(np.asarray(xa, dtype=float))
    xb = np.atleast_2d(np.asarray(xb, dtype=float))

    if spec.kind == "GaussianProcess":
        return spec.phi * np.exp(-cdist(xa, xb, metric="euclidean") / spec.lengthscale)

    same_1 = xa[:, [0]] == xb[:, 0][None, :]
    same_2 = xa[:, [1]] == xb[:, 1][None, :]
    return spec.sigma2_1 * same_1 + spec.sigma2_2 * same_2 + spec.sigma2_12 * (same_1 & same_2)


def covariance_matrix(spec: ScoreModelSpec, locations: np.ndarray) -> np.ndarray:
    """Covariance over the locations with a relative diagonal jitter."""
    cov = cross_covariance(spec, locations, locations)
    cov[np.diag_indices_from(cov)] += JITTER * spec.marginal_variance
    return cov


def check_locations(spec: ScoreModelSpec, locations: np.ndarray) -> np.ndarray:
    """Coerce locations to a 2-D array and validate ANOVA level codes."""
    locations = np.asarray(locations, dtype=float)
    if locations.ndim == 1:
        locations = locations[:, None]

    if spec.kind == "AnovaTwoWay":
        if locations.shape[1] != 2:
            raise ValueError(f"AnovaTwoWay scores need two factor columns, got {locations.shape[1]}.")
        if not np.all(locations == np.round(locations)):
            raise ValueError("AnovaTwoWay locations must be integer level codes.")
        for column, n_levels in enumerate(spec.levels):
            codes = locations[:, column]
            if codes.size and (codes.min() < 0 or codes.max() >= n_levels):
                raise ValueError(
                    f"Factor {column + 1} codes must lie in 0..{n_levels - 1}, got {np.unique(codes)}."
                )
    return locations
