import math
import pathlib
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pydantic
from scipy.special import gammaln

from ..errors import ConfigError
from .utils import DATASET_KINDS, KERNEL_KINDS, LEVY_FAMILIES, SCORE_KINDS, read_config_file


class LevyMeasureSpec(pydantic.BaseModel):
    """Directing Lévy intensity of the compound random measure.

    `sigma` is the stability index, `lam` the tempering rate (written
    `lambda` in config files), `gamma_shape` the concentration of the Beta
    families and `b` the breakpoint of the two-piece tail-mass bound.
    """

    model_config = pydantic.ConfigDict(frozen=True, populate_by_name=True)

    family: LEVY_FAMILIES = "Gamma"
    sigma: float = pydantic.Field(0.0, ge=0.0, lt=1.0)
    lam: float = pydantic.Field(1.0, ge=0.0, alias="lambda")
    gamma_shape: float = pydantic.Field(1.0, gt=0.0)
    b: float = pydantic.Field(0.65, gt=0.0, lt=1.0)

    @pydantic.model_validator(mode="after")
    def check_family(self):
        """Validates the family-specific parameter constraints."""
        if self.lam == 0:
            raise ValueError(
                "lambda = 0 gives a stable process: the tail mass function is infinite."
            )

        if self.family in ("Gamma", "Beta") and (self.sigma != 0 or self.lam != 1):
            raise ValueError(f"The {self.family} family requires sigma = 0 and lambda = 1.")

        # The sigma -> 0 bounds are only available at lambda = 1
        if self.sigma == 0 and self.lam != 1:
            raise ValueError("sigma = 0 is only supported with lambda = 1.")

        if self.is_beta_like:
            if self.b >= 1 / self.lam:
                raise ValueError(f"b = {self.b} must lie inside the support (0, {1 / self.lam}).")
            if self.sigma + self.gamma_shape < 1:
                raise ValueError(
                    "Beta families need sigma + gamma_shape >= 1 for the bound to dominate."
                )

        # Global dominance is equivalent to dominance at the breakpoint
        from ..levy.main import check_dominance

        if not check_dominance(self):
            raise ValueError(
                f"The bound does not dominate the tail mass at b = {self.b}; choose another b."
            )
        return self

    @property
    def is_beta_like(self) -> bool:
        return self.family in ("StableBeta", "Beta")

    @property
    def is_limit(self) -> bool:
        """True for the sigma -> 0 limits (gamma and Beta processes)."""
        return self.sigma == 0

    @property
    def upper(self) -> float:
        """Upper end of the jump support."""
        return 1 / self.lam if self.is_beta_like else math.inf

    def free_parameters(self) -> Dict[str, float]:
        """Parameters that a xi update may move."""
        params = {}
        if self.family in ("GeneralizedGamma", "StableBeta"):
            params["sigma"] = self.sigma
        if self.is_beta_like:
            params["gamma_shape"] = self.gamma_shape
        return params


class ScoreModelSpec(pydantic.BaseModel):
    """Hyperparameters of the score process r_k(x) = log m_k(x).

    The regressor locations are not part of this model; they are bound later by
    `pyncorm.scores.ScoreModel`.
    """

    model_config = pydantic.ConfigDict(frozen=True)

    kind: SCORE_KINDS = "GaussianProcess"

    # Gaussian process: C(x, x') = phi * exp(-||x - x'|| / lengthscale)
    phi: float = pydantic.Field(1.0, gt=0.0)
    lengthscale: float = pydantic.Field(1.0, gt=0.0)

    # Two-way ANOVA with interaction
    levels: Tuple[int, int] = (1, 1)
    sigma2_1: float = pydantic.Field(1.0, ge=0.0)
    sigma2_2: float = pydantic.Field(1.0, ge=0.0)
    sigma2_12: float = pydantic.Field(1.0, gt=0.0)

    @pydantic.field_validator("levels")
    def check_levels(cls, value):
        """Validates that both factors have at least one level."""
        if min(value) < 1:
            raise ValueError(f"Invalid level counts: {value}")
        return value

    @property
    def tau(self) -> Dict[str, float]:
        """The hyperparameters updated by the sampler."""
        if self.kind == "GaussianProcess":
            return {"phi": self.phi, "lengthscale": self.lengthscale}
        return {"sigma2_1": self.sigma2_1, "sigma2_2": self.sigma2_2, "sigma2_12": self.sigma2_12}

    @property
    def marginal_variance(self) -> float:
        """Variance of r_k(x) at a single location."""
        if self.kind == "GaussianProcess":
            return self.phi
        return self.sigma2_1 + self.sigma2_2 + self.sigma2_12


class KernelSpec(pydantic.BaseModel):
    """Observation kernel q(y | theta) and its conjugate base measure.

    UnivariateNormal: y ~ N(theta, mix_fraction * sigma2),
    theta ~ N(mu, (1 - mix_fraction) * sigma2).

    MultivariateNormal: y ~ N(mu_k, Sigma_k), mu_k ~ N(mu0, Sigma_k / lambda_shrink),
    Sigma_k ~ inverse-Wishart(nu_df, psi), so that E[Sigma_k] = psi / (nu_df - p - 1).
    """

    model_config = pydantic.ConfigDict(frozen=True)

    kind: KERNEL_KINDS = "UnivariateNormal"

    mu: float = 0.0
    sigma2: float = pydantic.Field(1.0, gt=0.0)
    mix_fraction: float = pydantic.Field(0.5, gt=0.0, lt=1.0)

    mu0: Optional[List[float]] = None
    lambda_shrink: float = pydantic.Field(0.01, gt=0.0)
    nu_df: Optional[float] = None
    psi: Optional[List[List[float]]] = None

    @pydantic.model_validator(mode="after")
    def check_multivariate(self):
        """Validates the normal-Wishart block when it is used."""
        if self.kind != "MultivariateNormal":
            return self

        if self.mu0 is None or self.psi is None or self.nu_df is None:
            raise ValueError("MultivariateNormal needs mu0, psi and nu_df.")

        p = len(self.mu0)
        psi = np.asarray(self.psi, dtype=float)
        if psi.shape != (p, p):
            raise ValueError(f"psi must be {p}x{p}, got {psi.shape}.")
        if not np.allclose(psi, psi.T):
            raise ValueError("psi must be symmetric.")
        if np.linalg.eigvalsh(psi).min() <= 0:
            raise ValueError("psi must be positive definite.")
        if self.nu_df <= p - 1:
            raise ValueError(f"nu_df = {self.nu_df} must exceed p - 1 = {p - 1}.")
        return self

    @property
    def dim(self) -> int:
        return 1 if self.kind == "UnivariateNormal" else len(self.mu0)

    @property
    def obs_var(self) -> float:
        return self.mix_fraction * self.sigma2

    @property
    def prior_var(self) -> float:
        return (1 - self.mix_fraction) * self.sigma2


class GammaPrior(pydantic.BaseModel):
    """Gamma(shape, rate) prior. With `inverse=True` the Gamma is placed on 1/x."""

    model_config = pydantic.ConfigDict(frozen=True)

    shape: float = pydantic.Field(1.0, gt=0.0)
    rate: float = pydantic.Field(1.0, gt=0.0)
    inverse: bool = False

    def log_density(self, x: float) -> float:
        """Log density of x (including the 1/x Jacobian when inverse)."""
        if x <= 0:
            return -math.inf
        value = 1 / x if self.inverse else x
        logp = (
            self.shape * math.log(self.rate)
            - gammaln(self.shape)
            + (self.shape - 1) * math.log(value)
            - self.rate * value
        )
        if self.inverse:
            logp -= 2 * math.log(x)
        return float(logp)

    def sample(self, rng: np.random.Generator) -> float:
        draw = rng.gamma(self.shape, 1 / self.rate)
        return float(1 / draw if self.inverse else draw)


class PriorSpec(pydantic.BaseModel):
    """Hyperpriors on the mass, the score hyperparameters and the Beta concentration."""

    model_config = pydantic.ConfigDict(frozen=True)

    mass: GammaPrior = GammaPrior(shape=1.0, rate=1.0)
    phi: GammaPrior = GammaPrior(shape=1.0, rate=4.0, inverse=True)
    lengthscale: GammaPrior = GammaPrior(shape=1.0, rate=1.0)
    sigma2_1: GammaPrior = GammaPrior(shape=1.0, rate=2.0)
    sigma2_2: GammaPrior = GammaPrior(shape=1.0, rate=2.0)
    sigma2_12: GammaPrior = GammaPrior(shape=1.0, rate=2.0)
    gamma_shape: GammaPrior = GammaPrior(shape=1.0, rate=1.0)

    def tau_prior(self, name: str) -> GammaPrior:
        return getattr(self, name)


class ModelConfig(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    kernel: KernelSpec = KernelSpec()
    scores: ScoreModelSpec = ScoreModelSpec()
    levy: LevyMeasureSpec = LevyMeasureSpec()
    priors: PriorSpec = PriorSpec()
    mass: float = pydantic.Field(1.0, gt=0.0)


class SamplerConfig(pydantic.BaseModel):
    """Iteration schedule, seeding and per-block update switches."""

    model_config = pydantic.ConfigDict(frozen=True)

    iterations: int = pydantic.Field(35_000, ge=1)
    burn_in: int = pydantic.Field(5_000, ge=0)
    thin: int = pydantic.Field(5, ge=1)
    seed: int = 0
    chains: int = pydantic.Field(1, ge=1)
    initial_clusters: int = pydantic.Field(5, ge=1)
    adaptation_exponent: float = pydantic.Field(0.6, gt=0.5, le=1.0)

    update_allocations: bool = True
    update_jumps: bool = True
    update_scores: bool = True
    update_latents: bool = True
    update_levy: bool = False
    update_mass: bool = True
    update_tau: bool = True
    update_kernel: bool = True

    @property
    def retained(self) -> int:
        """Number of states kept after burn-in and thinning."""
        return (self.iterations - self.burn_in) // self.thin


class EstimatorConfig(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    a: float = pydantic.Field(8.0, gt=1.0)
    nworkers: int = pydantic.Field(1, ge=1)
    chunk_size: int = pydantic.Field(16, ge=1)
    max_rate: float = pydantic.Field(1e4, gt=0.0)


class OutputConfig(pydantic.BaseModel):
    """Where archives go and how predictive grids are laid out."""

    model_config = pydantic.ConfigDict(frozen=True)

    directory: pathlib.Path = pathlib.Path("pyncorm_out")
    grid_x: Optional[List[float]] = None
    grid_y_min: Optional[float] = None
    grid_y_max: Optional[float] = None
    grid_y_size: int = pydantic.Field(200, ge=2)
    remainder_draws: int = pydantic.Field(20, ge=1)
    quiet: bool = False


class DataConfig(pydantic.BaseModel):
    """Which CSV columns hold the responses, the regressors and the folds."""

    model_config = pydantic.ConfigDict(frozen=True)

    response: List[str] = ["y"]
    regressors: List[str] = ["x"]
    categorical: bool = False
    folds: Optional[str] = None

    @pydantic.field_validator("response", "regressors", mode="before")
    def to_list(cls, value):
        return [value] if isinstance(value, str) else value

    @pydantic.model_validator(mode="after")
    def check_columns(self):
        if not self.response or not self.regressors:
            raise ValueError("At least one response and one regressor column are required.")
        overlap = set(self.response) & set(self.regressors)
        if overlap:
            raise ValueError(f"Columns used as both response and regressor: {sorted(overlap)}.")
        return self


class RunConfig(pydantic.BaseModel):
    """Full configuration of a `fit`, `predict` or `cv` run."""

    model_config = pydantic.ConfigDict(frozen=True, extra="forbid")

    model: ModelConfig = ModelConfig()
    sampler: SamplerConfig = SamplerConfig()
    estimator: EstimatorConfig = EstimatorConfig()
    output: OutputConfig = OutputConfig()
    data: DataConfig = DataConfig()

    @pydantic.model_validator(mode="after")
    def check_schedule(self):
        """Validates that some states survive burn-in."""
        if self.sampler.iterations <= self.sampler.burn_in:
            raise ValueError(
                f"iterations ({self.sampler.iterations}) must exceed burn_in ({self.sampler.burn_in})."
            )
        return self

    @classmethod
    def from_file(cls, path: Union[str, pathlib.Path]) -> "RunConfig":
        """Load a key-value config file, raising ConfigError on any problem."""
        try:
            return cls.from_dict(read_config_file(path))
        except (OSError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"Invalid config file {path}: {e}") from e

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "RunConfig":
        try:
            return cls.model_validate(_forbid_extra(values))
        except pydantic.ValidationError as e:
            raise ConfigError(str(e)) from e


def _forbid_extra(values: Dict[str, Any], path: str = "") -> Dict[str, Any]:
    """Reject unknown keys at every nesting level."""
    known = {
        "": RunConfig,
        "model": ModelConfig,
        "model.kernel": KernelSpec,
        "model.scores": ScoreModelSpec,
        "model.levy": LevyMeasureSpec,
        "model.priors": PriorSpec,
        "sampler": SamplerConfig,
        "estimator": EstimatorConfig,
        "output": OutputConfig,
        "data": DataConfig,
    }
    model = known.get(path)
    if model is None:
        return values

    fields = set(model.model_fields)
    fields |= {f.alias for f in model.model_fields.values() if f.alias}
    for key, value in values.items():
        if key not in fields:
            raise ConfigError(f"Unknown config key '{f'{path}.' if path else ''}{key}'.")
        if isinstance(value, dict):
            _forbid_extra(value, f"{path}.{key}" if path else key)
    return values


class SimulationSpec(pydantic.BaseModel):
    """Parameters of the benchmark regression data sets.

    I: two-component mixture with logistic weights (sigma, r). II: four
    components (sigma). III: nonlinear regression with optional jumps and
    heteroscedastic noise (a, b, c, d).
    """

    model_config = pydantic.ConfigDict(frozen=True)

    kind: DATASET_KINDS = "I"
    sigma: float = pydantic.Field(0.5, gt=0.0)
    r: float = 1.0
    a: float = 0.0
    b: float = 1.0
    c: int = pydantic.Field(0, ge=0, le=1)
    d: int = pydantic.Field(0, ge=0, le=1)

    @pydantic.model_validator(mode="after")
    def check_support(self):
        if self.kind == "III" and not 0 <= self.a < self.b <= 1:
            raise ValueError(f"Need 0 <= a < b <= 1, got a = {self.a}, b = {self.b}.")
        return self

    def label(self) -> str:
        """Compact parameter string used in result tables."""
        if self.kind == "I":
            return f"sigma={self.sigma:g},r={self.r:g}"
        if self.kind == "II":
            return f"sigma={self.sigma:g}"
        return f"a={self.a:g},b={self.b:g},c={self.c},d={self.d}"


class ObservationSet(pydantic.BaseModel):
    """Responses y (n x p) observed at regressors x (n x q).

    For categorical regressors `x` holds integer level codes, one column per
    factor. `fold_ids`, when present, assigns each observation to a
    cross-validation fold.
    """

    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True, frozen=True)

    y: np.ndarray
    x: np.ndarray
    fold_ids: Optional[np.ndarray] = None
    categorical: bool = False

    @pydantic.field_validator("y", "x", mode="before")
    def to_matrix(cls, value):
        """Coerces vectors to column matrices of floats."""
        array = np.asarray(value, dtype=float)
        if array.ndim == 1:
            array = array[:, None]
        if array.ndim != 2:
            raise ValueError(f"Expected a vector or matrix, got shape {array.shape}.")
        return array

    @pydantic.model_validator(mode="after")
    def check_values(self):
        """Validates sizes, missing values and the fold partition."""
        n = self.y.shape[0]
        if self.x.shape[0] != n:
            raise ValueError(f"y has {n} rows but x has {self.x.shape[0]}.")
        if n < 2:
            raise ValueError(f"At least two observations are required, got {n}.")
        if not (np.isfinite(self.y).all() and np.isfinite(self.x).all()):
            raise ValueError("Missing or non-finite values are not allowed.")
        if self.categorical and not np.all(self.x == np.round(self.x)):
            raise ValueError("Categorical regressors must be integer level codes.")
        if self.fold_ids is not None:
            folds = np.asarray(self.fold_ids)
            if folds.shape != (n,):
                raise ValueError("fold_ids must have one entry per observation.")
            if set(np.unique(folds)) != set(range(int(folds.max()) + 1)):
                raise ValueError("fold_ids must be 0..F-1 with every fold non-empty.")
        return self

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.y.shape[1]

    def locations(self) -> Tuple[np.ndarray, np.ndarray]:
        """Distinct regressor values and the location index of each observation."""
        unique, index = np.unique(self.x, axis=0, return_inverse=True)
        return unique, np.asarray(index).reshape(-1)

    def subset(self, index: np.ndarray) -> "ObservationSet":
        return ObservationSet(y=self.y[index], x=self.x[index], categorical=self.categorical)
