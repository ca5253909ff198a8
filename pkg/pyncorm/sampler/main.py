import dataclasses
import logging
import math
from typing import Any, Dict, List, Optional

import numpy as np
import pydantic
from scipy.cluster.vq import kmeans2
from scipy.special import expit, logit

from ..datamodel.main import KernelSpec, LevyMeasureSpec, ObservationSet, RunConfig
from ..errors import DominanceError, NumericalError
from ..estimator.main import PoissonEstimate, estimate_L
from ..kernels.main import ClusterSuffStats, log_marginal, log_predictive_ratio
from ..levy.main import (
    jump_mean_given_scores,
    log_gamma_integral,
    log_levy_density,
    sample_allocated_jump,
    sample_jump_given_scores,
)
from ..scores.main import ScoreModel
from .utils import (
    BLOCK_TARGET,
    SCALAR_TARGET,
    AdaptiveScale,
    ChainContext,
    metropolis_accept,
    sample_log_categorical,
)

logger = logging.getLogger(__name__)


@dataclasses.dataclass
class ChainState:
    """Full state of one chain.

    `c` holds zero-based allocations, `J` the jumps of the active clusters
    and `r` their log-scores at the distinct locations (K x n_loc). `log_L`
    is the stored Laplace-functional estimate, replaced only when a proposal
    that produced a fresh estimate is accepted; `log_L_parts` keeps its
    per-location logs. `estimates` counts estimator invocations.
    """

    context: ChainContext
    c: np.ndarray
    J: np.ndarray
    r: np.ndarray
    v: np.ndarray
    mass: float
    levy: LevyMeasureSpec
    score_model: ScoreModel
    kernel: KernelSpec
    log_L: float
    log_L_parts: np.ndarray
    stats: List[ClusterSuffStats]
    scales: Dict[str, AdaptiveScale] = dataclasses.field(default_factory=dict)
    iteration: int = 0
    estimates: int = 0

    @property
    def K(self) -> int:
        return self.J.size

    @property
    def n(self) -> int:
        return self.c.size

    @property
    def m(self) -> np.ndarray:
        return np.exp(self.r)

    @property
    def counts(self) -> np.ndarray:
        return np.bincount(self.c, minlength=self.K)

    @property
    def V_loc(self) -> np.ndarray:
        """Latents summed over the observations at each location."""
        return np.bincount(self.context.loc_index, weights=self.v, minlength=self.score_model.n)

    def scale(self, name: str, target: float, initial: float = 1.0) -> AdaptiveScale:
        """The adaptive step size of an update block, created on first use."""
        if name not in self.scales:
            self.scales[name] = AdaptiveScale(
                log_scale=math.log(initial),
                target=target,
                exponent=self.context.schedule.adaptation_exponent,
            )
        return self.scales[name]

    def check_invariants(self) -> None:
        """Raise ValueError if the cluster bookkeeping is inconsistent."""
        if self.n and (self.c.min() < 0 or self.c.max() >= self.K):
            raise ValueError("Allocations reference an inactive cluster.")
        if self.K and self.counts.min() < 1:
            raise ValueError("Every active cluster needs at least one observation.")
        if self.r.shape != (self.K, self.score_model.n) or len(self.stats) != self.K:
            raise ValueError("Jumps, scores and cluster statistics disagree on K.")
        if np.any(self.J <= 0) or np.any(self.v <= 0):
            raise ValueError("Jumps and latents must be strictly positive.")
        for k, cached in enumerate(self.stats):
            fresh = ClusterSuffStats.from_data(self.context.y[self.c == k])
            if cached.count != fresh.count or not (
                np.allclose(cached.sum, fresh.sum, atol=1e-10)
                and np.allclose(cached.sum_outer, fresh.sum_outer, atol=1e-10)
            ):
                raise ValueError(f"Cached statistics of cluster {k} are stale.")


def estimate_state(
    state: ChainState,
    rng: np.random.Generator,
    v: Optional[np.ndarray] = None,
    score_model: Optional[ScoreModel] = None,
    levy: Optional[LevyMeasureSpec] = None,
    mass: Optional[float] = None,
) -> PoissonEstimate:
    """Fresh Laplace-functional estimate at the state with some quantities replaced."""
    state.estimates += 1
    score_model = score_model or state.score_model
    v = state.v if v is None else v
    V_loc = np.bincount(state.context.loc_index, weights=v, minlength=score_model.n)
    settings = state.context.estimator
    return estimate_L(
        V_loc,
        score_model,
        levy or state.levy,
        settings.a,
        rng,
        mass=state.mass if mass is None else mass,
        nworkers=settings.nworkers,
        chunk_size=settings.chunk_size,
        max_rate=settings.max_rate,
    )


def try_estimate(state: ChainState, rng: np.random.Generator, **changes: Any) -> Optional[PoissonEstimate]:
    """Fresh estimate for a proposal, or None when the estimator cannot run there.

    A proposal whose Poisson rate exceeds `estimator.max_rate` is rejected,
    which truncates the target to the region where L can be estimated.
    Dominance failures are not proposal-specific and propagate.
    """
    try:
        return estimate_state(state, rng, **changes)
    except DominanceError:
        raise
    except NumericalError as e:
        logger.debug(f"Rejected a proposal at iteration {state.iteration}: {e}")
        return None


def store_estimate(state: ChainState, estimate: PoissonEstimate) -> None:
    state.log_L = estimate.log_value
    state.log_L_parts = np.asarray(estimate.parts or (), dtype=float)


def initialize_state(
    config: RunConfig, data: Optional[ObservationSet], rng: np.random.Generator
) -> ChainState:
    """Starting state of a chain.

    Latents start at 1/n, log-scores at prior draws, jumps at the mean of
    p(J | m) and allocations at a k-means pre-clustering with
    `initial_clusters` groups (capped at n). `data=None` builds the empty
    state used for prior reproduction.
    """
    model = config.model
    if data is None:
        q = 2 if model.scores.kind == "AnovaTwoWay" else 1
        y = np.zeros((0, model.kernel.dim))
        locations, loc_index = np.zeros((0, q)), np.zeros(0, dtype=int)
    else:
        y = data.y
        locations, loc_index = data.locations()

    score_model = ScoreModel(model.scores, locations)
    n = y.shape[0]
    context = ChainContext(
        y=y, loc_index=loc_index, priors=model.priors, estimator=config.estimator, schedule=config.sampler
    )

    # Pre-cluster the responses
    if n:
        n_clusters = min(config.sampler.initial_clusters, n)
        _, labels = kmeans2(y, n_clusters, minit="++", seed=rng)
        _, c = np.unique(labels, return_inverse=True)
        c = np.asarray(c, dtype=int).reshape(-1)
    else:
        c = np.zeros(0, dtype=int)

    K = int(c.max()) + 1 if n else 0
    v = np.full(n, 1 / n) if n else np.zeros(0)
    r = score_model.sample_log_prior(rng, size=K)
    V = np.exp(r) @ np.bincount(loc_index, weights=v, minlength=score_model.n)
    J = np.array([jump_mean_given_scores(model.levy, float(Vk)) for Vk in V])

    state = ChainState(
        context=context,
        c=c,
        J=J,
        r=r,
        v=v,
        mass=model.mass,
        levy=model.levy,
        score_model=score_model,
        kernel=model.kernel,
        log_L=0.0,
        log_L_parts=np.zeros(score_model.n),
        stats=[ClusterSuffStats.from_data(y[c == k]) for k in range(K)],
    )
    store_estimate(state, estimate_state(state, rng))
    logger.debug(f"Initialized a chain with n = {n}, K = {K}, log L = {state.log_L:.4f}")
    return state


def _drop_cluster(state: ChainState, k: int) -> None:
    state.J = np.delete(state.J, k)
    state.r = np.delete(state.r, k, axis=0)
    state.stats.pop(k)
    state.c[state.c > k] -= 1


def update_allocation(
    state: ChainState, i: int, rng: np.random.Generator, V_loc: Optional[np.ndarray] = None
) -> ChainState:
    """Reallocate observation i with one candidate new cluster.

    If i sits alone in its cluster, that cluster's (J, m) is the candidate;
    otherwise the candidate draws m from the score prior and J from p(J | m).
    Existing cluster j has weight J_j m_{j,i} q(y_i | y^(j)) and the candidate
    M m_i gamma(m) q(y_i).
    """
    y_i = state.context.y[i]
    loc = state.context.loc_index[i]
    V_loc = state.V_loc if V_loc is None else V_loc

    k = int(state.c[i])
    state.stats[k].remove(y_i)
    state.c[i] = -1
    if state.stats[k].count == 0:
        r_new, J_new = state.r[k].copy(), float(state.J[k])
        _drop_cluster(state, k)
    else:
        r_new, J_new = state.score_model.sample_log_prior(rng), None

    V_new = float(np.exp(r_new) @ V_loc)
    if J_new is None:
        J_new = sample_jump_given_scores(state.levy, V_new, rng)

    log_weights = np.empty(state.K + 1)
    for j in range(state.K):
        log_weights[j] = (
            math.log(state.J[j]) + state.r[j, loc] + log_predictive_ratio(state.kernel, state.stats[j], y_i)
        )
    log_weights[-1] = (
        math.log(state.mass)
        + r_new[loc]
        + log_gamma_integral(state.levy, V_new)
        + log_predictive_ratio(state.kernel, ClusterSuffStats.empty(y_i.size), y_i)
    )

    choice = sample_log_categorical(log_weights, rng)
    if choice == state.K:
        state.J = np.append(state.J, J_new)
        state.r = np.vstack([state.r, r_new[None, :]])
        state.stats.append(ClusterSuffStats.from_data(y_i))
    else:
        state.stats[choice].add(y_i)
    state.c[i] = choice
    return state


def update_allocations(state: ChainState, rng: np.random.Generator) -> ChainState:
    V_loc = state.V_loc
    for i in range(state.n):
        update_allocation(state, i, rng, V_loc)
    return state


def update_jumps(state: ChainState, rng: np.random.Generator) -> ChainState:
    """Update every active jump against J^n_k exp(-J V_k) nu*(J). L is untouched."""
    V = state.m @ state.V_loc
    counts = state.counts
    scale = state.scale("jumps", SCALAR_TARGET)
    for k in range(state.K):
        new = sample_allocated_jump(
            state.levy, int(counts[k]), float(V[k]), rng, current=float(state.J[k]), step=scale.scale
        )
        if state.levy.is_beta_like:
            scale.update(new != state.J[k])
        state.J[k] = new
    return state


def update_scores(
    state: ChainState, k: int, rng: np.random.Generator, V_loc: Optional[np.ndarray] = None
) -> ChainState:
    """Random-walk Metropolis on the log-scores of cluster k.

    The target is prod_{c_i = k} m_{k,i} exp(-J_k sum_i v_i m_{k,i}) h(m_k);
    proposals are preconditioned by the prior Cholesky factor. L is untouched.
    """
    V_loc = state.V_loc if V_loc is None else V_loc
    n_loc = state.score_model.n
    allocated = np.bincount(state.context.loc_index[state.c == k], minlength=n_loc)
    J_k = state.J[k]

    def log_target(r: np.ndarray) -> float:
        return float(allocated @ r - J_k * (np.exp(r) @ V_loc) + state.score_model.log_density_log(r))

    scale = state.scale("scores", BLOCK_TARGET, initial=2.38 / math.sqrt(max(n_loc, 1)))
    proposal = state.r[k] + scale.scale * (state.score_model.chol @ rng.standard_normal(n_loc))
    accepted = metropolis_accept(log_target(proposal) - log_target(state.r[k]), rng)
    if accepted:
        state.r[k] = proposal
    scale.update(accepted)
    return state


def update_v(state: ChainState, rng: np.random.Generator) -> ChainState:
    """Update the latents, then interweave a joint rescaling of (v, J).

    Each v_i takes a random-walk step on the log scale against
    exp(-v_i sum_k J_k m_{k,i}) L(v), with a fresh estimate of L for the
    proposal. The interweaving step moves v -> g v and J -> J / g, which
    leaves every v_i J_k product unchanged, against
    g^(-K) prod_k nu*(J_k / g) L(g v) on the log g scale.
    """
    if state.n == 0:
        return state

    # Sum of J_k m_{k, x_i} per observation
    rate = (state.J @ state.m)[state.context.loc_index] if state.K else np.zeros(state.n)

    scale = state.scale("v", SCALAR_TARGET)
    for i in range(state.n):
        step = scale.scale * rng.standard_normal()
        proposal = state.v.copy()
        proposal[i] = state.v[i] * math.exp(step)
        estimate = try_estimate(state, rng, v=proposal)
        if estimate is None:
            scale.update(False)
            continue

        log_ratio = -(proposal[i] - state.v[i]) * rate[i] + step + estimate.log_value - state.log_L
        accepted = metropolis_accept(log_ratio, rng)
        if accepted:
            state.v = proposal
            store_estimate(state, estimate)
        scale.update(accepted)

    scale = state.scale("v_interweave", SCALAR_TARGET)
    log_g = scale.scale * rng.standard_normal()
    J_prop = state.J / math.exp(log_g)
    if np.any(J_prop >= state.levy.upper):
        scale.update(False)
        return state

    v_prop = state.v * math.exp(log_g)
    estimate = try_estimate(state, rng, v=v_prop)
    if estimate is None:
        scale.update(False)
        return state
    log_ratio = (
        -state.K * log_g
        + float(np.sum(log_levy_density(state.levy, J_prop) - log_levy_density(state.levy, state.J)))
        + estimate.log_value
        - state.log_L
    )
    accepted = metropolis_accept(log_ratio, rng)
    if accepted:
        state.v, state.J = v_prop, J_prop
        store_estimate(state, estimate)
    scale.update(accepted)
    return state


def update_levy(state: ChainState, rng: np.random.Generator) -> ChainState:
    """Random-walk updates of the free Lévy parameters.

    sigma has a Uniform(0, 1) prior and moves on the logit scale; the Beta
    concentration moves on the log scale under its Gamma prior. The target
    is p(xi) L_xi prod_k nu*_xi(J_k).
    """
    for name, value in state.levy.free_parameters().items():
        # sigma = 0 pins the family to its limit
        if name == "sigma" and value == 0:
            continue
        scale = state.scale(f"levy.{name}", SCALAR_TARGET, initial=0.5)
        step = scale.scale * rng.standard_normal()
        if name == "sigma":
            proposal = float(expit(logit(value) + step))
            if not 0 < proposal < 1:
                scale.update(False)
                continue
            log_correction = math.log(proposal * (1 - proposal)) - math.log(value * (1 - value))
        else:
            proposal = value * math.exp(step)
            prior = state.context.priors.gamma_shape
            log_correction = step + prior.log_density(proposal) - prior.log_density(value)

        try:
            spec = LevyMeasureSpec.model_validate({**state.levy.model_dump(), name: proposal})
        except pydantic.ValidationError:
            scale.update(False)
            continue

        estimate = try_estimate(state, rng, levy=spec)
        if estimate is None:
            scale.update(False)
            continue
        log_ratio = (
            log_correction
            + float(np.sum(log_levy_density(spec, state.J) - log_levy_density(state.levy, state.J)))
            + estimate.log_value
            - state.log_L
        )
        accepted = metropolis_accept(log_ratio, rng)
        if accepted:
            state.levy = spec
            store_estimate(state, estimate)
        scale.update(accepted)
    return state


def update_mass(state: ChainState, rng: np.random.Generator) -> ChainState:
    """Random walk on log M against p(M) M^K L_M, with M scaling the intensity."""
    scale = state.scale("mass", SCALAR_TARGET)
    step = scale.scale * rng.standard_normal()
    proposal = state.mass * math.exp(step)
    prior = state.context.priors.mass

    estimate = try_estimate(state, rng, mass=proposal)
    if estimate is None:
        scale.update(False)
        return state
    log_ratio = (
        prior.log_density(proposal)
        - prior.log_density(state.mass)
        + (state.K + 1) * step
        + estimate.log_value
        - state.log_L
    )
    accepted = metropolis_accept(log_ratio, rng)
    if accepted:
        state.mass = proposal
        store_estimate(state, estimate)
    scale.update(accepted)
    return state


def _log_score_prior(model: ScoreModel, r: np.ndarray) -> float:
    if r.shape[0] == 0:
        return 0.0
    return float(np.sum(model.log_density_log(r)))


def update_tau(state: ChainState, rng: np.random.Generator) -> ChainState:
    """Update the score hyperparameters.

    Each hyperparameter first takes a step with the log-scores held fixed,
    against p(tau) L_tau prod_k h(m_k | tau). For Gaussian-process scores
    the variance then takes an ancillary step that rescales the log-scores by
    sqrt(phi' / phi), against p(phi) L_phi prod_k prod_{c_i = k} m_{k,i}
    exp(-J_k sum_i v_i m_{k,i}).
    """
    priors = state.context.priors
    for name, value in state.score_model.spec.tau.items():
        if value == 0:
            continue
        scale = state.scale(f"tau.{name}", SCALAR_TARGET)
        step = scale.scale * rng.standard_normal()
        proposal = value * math.exp(step)
        try:
            model = state.score_model.with_tau(**{name: proposal})
        except (ValueError, NumericalError):
            scale.update(False)
            continue

        prior = priors.tau_prior(name)
        estimate = try_estimate(state, rng, score_model=model)
        if estimate is None:
            scale.update(False)
            continue
        log_ratio = (
            prior.log_density(proposal)
            - prior.log_density(value)
            + step
            + _log_score_prior(model, state.r)
            - _log_score_prior(state.score_model, state.r)
            + estimate.log_value
            - state.log_L
        )
        accepted = metropolis_accept(log_ratio, rng)
        if accepted:
            state.score_model = model
            store_estimate(state, estimate)
        scale.update(accepted)

    if state.score_model.spec.kind == "GaussianProcess":
        _update_phi_ancillary(state, rng)
    return state


def _update_phi_ancillary(state: ChainState, rng: np.random.Generator) -> None:
    scale = state.scale("tau.phi.ancillary", SCALAR_TARGET)
    step = scale.scale * rng.standard_normal()
    phi = state.score_model.spec.phi
    proposal = phi * math.exp(step)
    try:
        model = state.score_model.with_tau(phi=proposal)
    except (ValueError, NumericalError):
        scale.update(False)
        return

    r_prop = state.r * math.exp(0.5 * step)
    V_loc = state.V_loc
    allocated = np.stack([
        np.bincount(state.context.loc_index[state.c == k], minlength=model.n) for k in range(state.K)
    ]) if state.K else np.zeros((0, model.n))

    def log_lik(r: np.ndarray) -> float:
        return float(np.sum(allocated * r) - state.J @ (np.exp(r) @ V_loc))

    prior = state.context.priors.phi
    estimate = try_estimate(state, rng, score_model=model)
    if estimate is None:
        scale.update(False)
        return
    log_ratio = (
        prior.log_density(proposal)
        - prior.log_density(phi)
        + step
        + log_lik(r_prop)
        - log_lik(state.r)
        + estimate.log_value
        - state.log_L
    )
    accepted = metropolis_accept(log_ratio, rng)
    if accepted:
        state.score_model, state.r = model, r_prop
        store_estimate(state, estimate)
    scale.update(accepted)


def update_kernel(state: ChainState, rng: np.random.Generator) -> ChainState:
    """Block random walk on (logit a, mu, log sigma2) of the univariate kernel.

    Priors: a ~ Uniform(0, 1) and p(mu, sigma2) proportional to 1 / sigma2,
    which is flat on the log sigma2 scale. Skipped while n < 2, where that
    posterior is improper. L is untouched.
    """
    kernel = state.kernel
    if kernel.kind != "UnivariateNormal" or state.n < 2:
        return state

    scale = state.scale("kernel", BLOCK_TARGET, initial=0.1)
    step = scale.scale * rng.standard_normal(3)
    a = float(expit(logit(kernel.mix_fraction) + step[0]))
    try:
        proposal = KernelSpec.model_validate({
            **kernel.model_dump(),
            "mix_fraction": a,
            "mu": kernel.mu + step[1],
            "sigma2": kernel.sigma2 * math.exp(step[2]),
        })
    except pydantic.ValidationError:
        scale.update(False)
        return state

    log_ratio = (
        sum(log_marginal(proposal, stats) for stats in state.stats)
        - sum(log_marginal(kernel, stats) for stats in state.stats)
        + math.log(a * (1 - a))
        - math.log(kernel.mix_fraction * (1 - kernel.mix_fraction))
    )
    accepted = metropolis_accept(log_ratio, rng)
    if accepted:
        state.kernel = proposal
    scale.update(accepted)
    return state


def update_hyperparameters(state: ChainState, rng: np.random.Generator) -> ChainState:
    """The xi, M, tau and kernel blocks, as switched on in the schedule."""
    schedule = state.context.schedule
    if schedule.update_levy:
        update_levy(state, rng)
    if schedule.update_mass:
        update_mass(state, rng)
    if schedule.update_tau:
        update_tau(state, rng)
    if schedule.update_kernel:
        update_kernel(state, rng)
    return state


def sweep(state: ChainState, rng: np.random.Generator) -> ChainState:
    """One Gibbs sweep in the order c, J, m, v, xi, M, tau, kernel."""
    schedule = state.context.schedule
    if schedule.update_allocations:
        update_allocations(state, rng)
    if schedule.update_jumps:
        update_jumps(state, rng)
    if schedule.update_scores:
        V_loc = state.V_loc
        for k in range(state.K):
            update_scores(state, k, rng, V_loc)
    if schedule.update_latents:
        update_v(state, rng)
    update_hyperparameters(state, rng)
    state.iteration += 1
    return state


def trace_record(state: ChainState) -> Dict[str, Any]:
    """Scalar summary of a state: K, M, hyperparameters and acceptance rates."""
    record: Dict[str, Any] = {"iteration": state.iteration, "K": state.K, "M": state.mass}
    record.update({f"tau.{key}": value for key, value in state.score_model.spec.tau.items()})
    record.update({f"xi.{key}": value for key, value in state.levy.free_parameters().items()})
    if state.kernel.kind == "UnivariateNormal":
        record.update({
            "kernel.mu": state.kernel.mu,
            "kernel.sigma2": state.kernel.sigma2,
            "kernel.mix_fraction": state.kernel.mix_fraction,
        })
    record["log_L"] = state.log_L
    record.update({f"acceptance.{key}": scale.acceptance_rate for key, scale in sorted(state.scales.items())})
    return record
