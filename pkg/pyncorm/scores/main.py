import logging
import math
from typing import Optional, Tuple, Union

import numpy as np
import pydantic
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular

from ..datamodel.main import ScoreModelSpec
from ..errors import NumericalError
from .utils import check_locations, covariance_matrix, cross_covariance

logger = logging.getLogger(__name__)


class ScoreModel:
    """Prior over score vectors m_k = exp(r_k) at a fixed set of locations.

    The covariance and its Cholesky factor are computed once, when the model
    is built. A hyperparameter change produces a new model through
    `with_tau`, so cached factors never go stale.

    Args:
        spec (ScoreModelSpec): Kind and hyperparameters of the score process.
        locations (np.ndarray): Distinct regressor values (n x q), or level
            codes (n x 2) for AnovaTwoWay scores.
    """

    def __init__(self, spec: ScoreModelSpec, locations: np.ndarray):
        self.spec = spec
        self.locations = check_locations(spec, locations)
        self.covariance = covariance_matrix(spec, self.locations)

        if self.n == 0:
            self.chol = np.zeros((0, 0))
            self.log_det = 0.0
            return

        try:
            self.chol = cholesky(self.covariance, lower=True)
        except LinAlgError as e:
            raise NumericalError(f"Score covariance is not positive definite for {spec.tau}.") from e
        self.log_det = float(2 * np.log(np.diag(self.chol)).sum())

    @property
    def n(self) -> int:
        return self.locations.shape[0]

    def with_tau(self, **tau: float) -> "ScoreModel":
        """A model at the same locations with some hyperparameters replaced.

        Raises:
            ValueError: If the new hyperparameters are invalid.
        """
        try:
            spec = ScoreModelSpec.model_validate({**self.spec.model_dump(), **tau})
        except pydantic.ValidationError as e:
            raise ValueError(f"Invalid score hyperparameters {tau}: {e}") from e
        return ScoreModel(spec, self.locations)

    def log_density_log(self, r: np.ndarray) -> Union[float, np.ndarray]:
        """Gaussian log density N(r; 0, Sigma) of log-scores (one per row)."""
        r = np.asarray(r, dtype=float)
        rows = np.atleast_2d(r)
        if rows.shape[1] != self.n:
            raise ValueError(f"Expected score vectors of length {self.n}, got {rows.shape[1]}.")

        white = solve_triangular(self.chol, rows.T, lower=True)
        out = -0.5 * (self.n * math.log(2 * math.pi) + self.log_det + (white**2).sum(axis=0))
        return float(out[0]) if r.ndim == 1 else out

    def log_density(self, m: np.ndarray) -> Union[float, np.ndarray]:
        """Log density h(m | tau) of positive score vectors.

        h is the log-normal density induced by r = log m ~ N(0, Sigma):
        log h(m) = log N(log m; 0, Sigma) - sum_i log m_i.

        Args:
            m (np.ndarray): A score vector of length n, or a K x n matrix.

        Raises:
            ValueError: If any entry is nonpositive or the length is wrong.

        Returns:
            Union[float, np.ndarray]: One log density per score vector.
        """
        m = np.asarray(m, dtype=float)
        if np.any(m <= 0):
            raise ValueError("Scores must be strictly positive.")
        r = np.log(m)
        return self.log_density_log(r) - r.sum(axis=-1)

    def sample_log_prior(self, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
        """Draw log-scores r ~ N(0, Sigma)."""
        k = 1 if size is None else size
        r = rng.standard_normal((k, self.n)) @ self.chol.T
        return r[0] if size is None else r

    def sample_prior(self, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
        """Draw scores m = exp(r), r ~ N(0, Sigma)."""
        return np.exp(self.sample_log_prior(rng, size))

    def sample_size_biased_log(
        self, k: int, rng: np.random.Generator, size: Optional[int] = None
    ) -> np.ndarray:
        """Draw log m* where m* has density proportional to m*_k h(m*).

        Tilting a Gaussian by exp(r_k) shifts its mean by the k-th column of
        the covariance, so r ~ N(Sigma e_k, Sigma).

        Args:
            k (int): Zero-based location index.
            rng (np.random.Generator): Random number generator.
            size (Optional[int]): Number of draws. None returns one vector.

        Returns:
            np.ndarray: The size-biased log-score vector(s).
        """
        if not 0 <= k < self.n:
            raise ValueError(f"Location index {k} outside 0..{self.n - 1}.")
        return self.sample_log_prior(rng, size) + self.covariance[:, k]

    def sample_size_biased(
        self, k: int, rng: np.random.Generator, size: Optional[int] = None
    ) -> np.ndarray:
        """Draw m* with density proportional to m*_k h(m*)."""
        return np.exp(self.sample_size_biased_log(k, rng, size))

    def log_mean_score(self, k: int) -> float:
        """log E[m_k] = Sigma_kk / 2."""
        return 0.5 * float(self.covariance[k, k])

    def mean_score(self, k: int) -> float:
        """E[m_k] = exp(Sigma_kk / 2).

        Raises:
            NumericalError: If the mean overflows.
        """
        try:
            return math.exp(self.log_mean_score(k))
        except OverflowError as e:
            raise NumericalError(f"E[m_{k}] overflows for {self.spec.tau}.") from e

    def conditional_log_sample(
        self, r: np.ndarray, new_locations: np.ndarray, rng: np.random.Generator
    ) -> np.ndarray:
        """Draw log-scores at new locations given log-scores at the model locations.

        Args:
            r (np.ndarray): K x n log-scores at `self.locations`.
            new_locations (np.ndarray): The new locations (g x q).
            rng (np.random.Generator): Random number generator.

        Returns:
            np.ndarray: K x g log-scores at the new locations.
        """
        new_locations = check_locations(self.spec, new_locations)
        r = np.atleast_2d(np.asarray(r, dtype=float))
        cross = cross_covariance(self.spec, new_locations, self.locations)
        prior = covariance_matrix(self.spec, new_locations)

        if self.n == 0:
            mean = np.zeros((r.shape[0], new_locations.shape[0]))
            cov = prior
        else:
            mean = cho_solve((self.chol, True), r.T).T @ cross.T
            cov = prior - cross @ cho_solve((self.chol, True), cross.T)

        # The conditional covariance loses definiteness at observed locations
        cov = 0.5 * (cov + cov.T)
        eigval, eigvec = np.linalg.eigh(cov)
        root = eigvec * np.sqrt(np.clip(eigval, 0.0, None))
        return mean + rng.standard_normal(mean.shape) @ root.T


def log_ratio_distribution_check(
    spec: ScoreModelSpec, x: np.ndarray, x_prime: np.ndarray
) -> Tuple[float, float]:
    """Mean and variance of log(m(x) / m(x')) implied by the score process.

    GaussianProcess: 2 phi (1 - exp(-||x - x'|| / lengthscale)). AnovaTwoWay:
    twice the sum of the variances of the effects that differ.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    x_prime = np.atleast_2d(np.asarray(x_prime, dtype=float))
    same = float(cross_covariance(spec, x, x_prime)[0, 0])
    return 0.0, 2 * (spec.marginal_variance - same)
