from typing import Tuple

import numpy as np

from ..datamodel.main import KernelSpec


def normal_posterior(spec: KernelSpec, count: int, total: float) -> Tuple[float, float]:
    """Posterior mean and variance of theta in the univariate normal kernel."""
    precision = 1 / spec.prior_var + count / spec.obs_var
    mean = (spec.mu / spec.prior_var + total / spec.obs_var) / precision
    return mean, 1 / precision


def niw_prior(spec: KernelSpec) -> Tuple[np.ndarray, float, float, np.ndarray]:
    """(mu0, lambda, nu, Psi) of the normal-inverse-Wishart base measure."""
    return (
        np.asarray(spec.mu0, dtype=float),
        spec.lambda_shrink,
        float(spec.nu_df),
        np.asarray(spec.psi, dtype=float),
    )


def niw_posterior(
    spec: KernelSpec, count: int, total: np.ndarray, outer: np.ndarray
) -> Tuple[np.ndarray, float, float, np.ndarray]:
    """Posterior (mu_n, lambda_n, nu_n, Psi_n) given the cluster sums."""
    mu0, lam, nu, psi = niw_prior(spec)
    lam_n = lam + count
    mu_n = (lam * mu0 + total) / lam_n
    psi_n = psi + outer + lam * np.outer(mu0, mu0) - lam_n * np.outer(mu_n, mu_n)
    return mu_n, lam_n, nu + count, 0.5 * (psi_n + psi_n.T)
