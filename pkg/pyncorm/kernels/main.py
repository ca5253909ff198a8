import dataclasses
import math
from typing import Tuple, Union

import numpy as np
from scipy import stats
from scipy.special import multigammaln

from ..datamodel.main import KernelSpec
from .utils import niw_posterior, niw_prior, normal_posterior

Location = Union[float, Tuple[np.ndarray, np.ndarray]]


@dataclasses.dataclass
class ClusterSuffStats:
    """Count, sum and sum of outer products of the observations in a cluster."""

    count: int
    sum: np.ndarray
    sum_outer: np.ndarray

    @classmethod
    def empty(cls, dim: int) -> "ClusterSuffStats":
        return cls(count=0, sum=np.zeros(dim), sum_outer=np.zeros((dim, dim)))

    @classmethod
    def from_data(cls, y: np.ndarray) -> "ClusterSuffStats":
        y = np.atleast_2d(np.asarray(y, dtype=float))
        return cls(count=y.shape[0], sum=y.sum(axis=0), sum_outer=y.T @ y)

    def add(self, y: np.ndarray) -> None:
        y = np.asarray(y, dtype=float).reshape(-1)
        self.count += 1
        self.sum = self.sum + y
        self.sum_outer = self.sum_outer + np.outer(y, y)

    def remove(self, y: np.ndarray) -> None:
        if self.count == 0:
            raise ValueError("Cannot remove an observation from an empty cluster.")
        y = np.asarray(y, dtype=float).reshape(-1)
        self.count -= 1
        self.sum = self.sum - y
        self.sum_outer = self.sum_outer - np.outer(y, y)

    def copy(self) -> "ClusterSuffStats":
        return ClusterSuffStats(self.count, self.sum.copy(), self.sum_outer.copy())


def log_marginal(spec: KernelSpec, suffstats: ClusterSuffStats) -> float:
    """Log marginal likelihood log q(y^(k)) of a cluster, locations integrated out.

    Args:
        spec (KernelSpec): The observation kernel and its conjugate base measure.
        suffstats (ClusterSuffStats): The cluster's sufficient statistics.

    Returns:
        float: The log marginal likelihood, 0 for an empty cluster.
    """
    n = suffstats.count
    if n == 0:
        return 0.0

    if spec.kind == "UnivariateNormal":
        s_e, s_0 = spec.obs_var, spec.prior_var
        total, squares = float(suffstats.sum[0]), float(suffstats.sum_outer[0, 0])
        centred = total - n * spec.mu
        quad = squares - 2 * spec.mu * total + n * spec.mu**2 - s_0 * centred**2 / (s_e + n * s_0)
        return (
            -0.5 * n * math.log(2 * math.pi * s_e)
            - 0.5 * math.log1p(n * s_0 / s_e)
            - 0.5 * quad / s_e
        )

    _, lam, nu, psi = niw_prior(spec)
    _, lam_n, nu_n, psi_n = niw_posterior(spec, n, suffstats.sum, suffstats.sum_outer)
    p = spec.dim
    return float(
        -0.5 * n * p * math.log(math.pi)
        + multigammaln(0.5 * nu_n, p)
        - multigammaln(0.5 * nu, p)
        + 0.5 * nu * np.linalg.slogdet(psi)[1]
        - 0.5 * nu_n * np.linalg.slogdet(psi_n)[1]
        + 0.5 * p * (math.log(lam) - math.log(lam_n))
    )


def log_predictive(spec: KernelSpec, suffstats: ClusterSuffStats, y: np.ndarray) -> np.ndarray:
    """Posterior predictive log density of new observations (one per row)."""
    y = np.asarray(y, dtype=float)
    if spec.kind == "UnivariateNormal":
        mean, var = normal_posterior(spec, suffstats.count, float(suffstats.sum[0]))
        return stats.norm.logpdf(y.reshape(-1), loc=mean, scale=math.sqrt(var + spec.obs_var))

    mu_n, lam_n, nu_n, psi_n = niw_posterior(spec, suffstats.count, suffstats.sum, suffstats.sum_outer)
    p = spec.dim
    df = nu_n - p + 1
    shape = psi_n * (lam_n + 1) / (lam_n * df)
    return np.atleast_1d(stats.multivariate_t.logpdf(y.reshape(-1, p), loc=mu_n, shape=shape, df=df))


def log_predictive_ratio(spec: KernelSpec, suffstats: ClusterSuffStats, y_new: np.ndarray) -> float:
    """log q(y^(k) + y_new) - log q(y^(k)), from the posterior predictive."""
    return float(log_predictive(spec, suffstats, np.asarray(y_new, dtype=float).reshape(1, -1))[0])


def sample_location(spec: KernelSpec, suffstats: ClusterSuffStats, rng: np.random.Generator) -> Location:
    """Draw the cluster location from its conjugate posterior (the prior if empty).

    Returns the mean theta for the univariate kernel and a (mean, covariance)
    pair for the multivariate kernel.
    """
    if spec.kind == "UnivariateNormal":
        mean, var = normal_posterior(spec, suffstats.count, float(suffstats.sum[0]))
        return float(rng.normal(mean, math.sqrt(var)))

    mu_n, lam_n, nu_n, psi_n = niw_posterior(spec, suffstats.count, suffstats.sum, suffstats.sum_outer)
    sigma = np.atleast_2d(stats.invwishart.rvs(df=nu_n, scale=psi_n, random_state=rng))
    mean = rng.multivariate_normal(mu_n, sigma / lam_n)
    return mean, sigma


def sample_observation(spec: KernelSpec, location: Location, rng: np.random.Generator) -> np.ndarray:
    """Draw one observation from q(y | theta)."""
    if spec.kind == "UnivariateNormal":
        return np.array([rng.normal(location, math.sqrt(spec.obs_var))])
    mean, sigma = location
    return rng.multivariate_normal(mean, sigma)
