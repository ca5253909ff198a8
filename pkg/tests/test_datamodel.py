import math

import numpy as np
import pydantic
import pytest

from pyncorm.datamodel import (
    DataConfig,
    GammaPrior,
    ObservationSet,
    RunConfig,
    SamplerConfig,
    ScoreModelSpec,
    SimulationSpec,
)
from pyncorm.datamodel.utils import parse_config_text, parse_value
from pyncorm.errors import ConfigError

CONFIG_TEXT = """
# benchmark run
model.levy.family = GeneralizedGamma
model.levy.sigma = 0.5
model.scores.phi = 2
model.kernel.sigma2 = 4.0
sampler.iterations = 2000
sampler.burn_in = 500
sampler.thin = 3
sampler.seed = 17
estimator.a = 16
data.response = accel
data.regressors = times
output.grid_x = [0.1, 0.5, 0.9]
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(CONFIG_TEXT)
    return path


class TestConfigParser:

    def test_values(self):
        # Test JSON literals and bare strings
        assert parse_value(" 3 ") == 3
        assert parse_value("true") is True
        assert parse_value("[1, 2]") == [1, 2]
        assert parse_value(" Gamma ") == "Gamma"
        assert parse_value("'quoted'") == "quoted"

    def test_nesting(self):
        # Test that dotted keys become nested dictionaries
        parsed = parse_config_text("a.b = 1\na.c = x\n# comment\n\nd = 2.5")
        assert parsed == {"a": {"b": 1, "c": "x"}, "d": 2.5}

    @pytest.mark.parametrize(
        "text, message",
        [
            ("a = 1\na = 2", "duplicated"),
            ("a = 1\na.b = 2", "both a value and a namespace"),
            ("just text", "expected 'key = value'"),
            ("a..b = 1", "invalid key"),
        ],
    )
    def test_malformed(self, text, message):
        # Test that malformed lines name the offending line
        with pytest.raises(ValueError, match=message):
            parse_config_text(text)


class TestRunConfig:

    def test_from_file(self, config_file):
        # Test a complete file round
        config = RunConfig.from_file(config_file)
        assert config.model.levy.family == "GeneralizedGamma"
        assert config.model.levy.sigma == 0.5
        assert config.model.scores.phi == 2.0
        assert config.sampler.retained == 500
        assert config.estimator.a == 16.0
        assert config.data.response == ["accel"]
        assert config.data.regressors == ["times"]
        assert config.output.grid_x == [0.1, 0.5, 0.9]

    def test_defaults(self):
        # Test the default schedule and model
        config = RunConfig()
        assert config.sampler.iterations == 35_000
        assert config.sampler.retained == 6_000
        assert config.model.levy.family == "Gamma"
        assert config.estimator.a == 8.0

    def test_retained_count(self):
        # Test 33,000 iterations, 3,000 burn-in and thinning 3
        assert SamplerConfig(iterations=33_000, burn_in=3_000, thin=3).retained == 10_000

    def test_unknown_key(self):
        # Test that unknown keys are rejected with their full path
        with pytest.raises(ConfigError, match="model.levy.tempering"):
            RunConfig.from_dict({"model": {"levy": {"tempering": 1.0}}})

    def test_lambda_alias(self):
        # Test that lambda is accepted for the tempering rate
        config = RunConfig.from_dict({"model": {"levy": {"family": "GeneralizedGamma", "sigma": 0.3, "lambda": 2.0}}})
        assert config.model.levy.lam == 2.0

    def test_schedule(self):
        # Test that iterations must exceed burn-in
        with pytest.raises(ConfigError, match="must exceed burn_in"):
            RunConfig.from_dict({"sampler": {"iterations": 100, "burn_in": 100}})

    def test_invalid_value(self):
        # Test that a pydantic failure surfaces as a ConfigError
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"estimator": {"a": 0.5}})

    def test_missing_file(self, tmp_path):
        # Test a missing config file
        with pytest.raises(ConfigError, match="Invalid config file"):
            RunConfig.from_file(tmp_path / "absent.cfg")

    def test_malformed_file(self, tmp_path):
        # Test that parse errors become ConfigError
        path = tmp_path / "bad.cfg"
        path.write_text("sampler.seed 3\n")
        with pytest.raises(ConfigError, match="Line 1"):
            RunConfig.from_file(path)

    def test_gamma_family_constraints(self):
        # Test that the Gamma family fixes sigma and lambda
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"model": {"levy": {"family": "Gamma", "sigma": 0.2}}})


class TestDataConfig:

    def test_string_coercion(self):
        # Test that single column names become lists
        config = DataConfig(response="accel", regressors=["times"])
        assert config.response == ["accel"]

    def test_overlap(self):
        # Test that a column cannot be both response and regressor
        with pytest.raises(pydantic.ValidationError, match="both response and regressor"):
            DataConfig(response=["x"], regressors=["x"])

    def test_empty(self):
        # Test that empty column lists are rejected
        with pytest.raises(pydantic.ValidationError):
            DataConfig(response=[])


class TestSimulationSpec:

    def test_labels(self):
        # Test the result-table labels
        assert SimulationSpec(kind="I", sigma=0.5, r=2).label() == "sigma=0.5,r=2"
        assert SimulationSpec(kind="II", sigma=0.25).label() == "sigma=0.25"
        assert SimulationSpec(kind="III", a=0.2, b=0.8, c=1).label() == "a=0.2,b=0.8,c=1,d=0"

    def test_support(self):
        # Test that data set III needs 0 <= a < b <= 1
        with pytest.raises(pydantic.ValidationError):
            SimulationSpec(kind="III", a=0.6, b=0.4)

    def test_indicators(self):
        # Test that c and d are binary
        with pytest.raises(pydantic.ValidationError):
            SimulationSpec(kind="III", c=2)


class TestGammaPrior:

    def test_log_density(self):
        # Test the Gamma(2, 3) density and its inverse form
        prior = GammaPrior(shape=2.0, rate=3.0)
        assert prior.log_density(1.0) == pytest.approx(math.log(9) - 3)
        inverse = GammaPrior(shape=2.0, rate=3.0, inverse=True)
        assert inverse.log_density(2.0) == pytest.approx(prior.log_density(0.5) - 2 * math.log(2.0))
        assert prior.log_density(-1.0) == -math.inf

    def test_sample_support(self):
        # Test that draws are positive
        rng = np.random.default_rng(0)
        assert all(GammaPrior(inverse=True).sample(rng) > 0 for _ in range(100))


class TestObservationSet:

    def test_vectors(self):
        # Test that vectors become column matrices
        data = ObservationSet(y=[1.0, 2.0, 3.0], x=[0.1, 0.2, 0.1])
        assert data.y.shape == (3, 1) and data.x.shape == (3, 1)
        assert data.n == 3 and data.p == 1

    def test_locations(self):
        # Test that repeated regressors share a location
        data = ObservationSet(y=[1.0, 2.0, 3.0], x=[0.1, 0.2, 0.1])
        unique, index = data.locations()
        np.testing.assert_allclose(unique[:, 0], [0.1, 0.2])
        assert index.tolist() == [0, 1, 0]

    def test_row_mismatch(self):
        # Test that y and x must have the same number of rows
        with pytest.raises(pydantic.ValidationError, match="rows"):
            ObservationSet(y=[1.0, 2.0, 3.0], x=[0.1, 0.2])

    def test_too_small(self):
        # Test that one observation is not enough
        with pytest.raises(pydantic.ValidationError, match="At least two"):
            ObservationSet(y=[1.0], x=[0.1])

    def test_non_finite(self):
        # Test that missing values are rejected
        with pytest.raises(pydantic.ValidationError, match="non-finite"):
            ObservationSet(y=[1.0, np.nan], x=[0.1, 0.2])

    def test_categorical_codes(self):
        # Test that categorical regressors must be integers
        with pytest.raises(pydantic.ValidationError, match="integer level codes"):
            ObservationSet(y=[1.0, 2.0], x=[[0, 0.5], [1, 1]], categorical=True)

    def test_fold_ids(self):
        # Test that every fold must be non-empty
        with pytest.raises(pydantic.ValidationError, match="fold_ids"):
            ObservationSet(y=[1.0, 2.0, 3.0], x=[0.1, 0.2, 0.3], fold_ids=np.array([0, 2, 2]))

    def test_subset(self):
        # Test that a subset keeps the categorical flag and drops the folds
        data = ObservationSet(y=[1.0, 2.0, 3.0], x=[[0, 1], [1, 0], [1, 1]], categorical=True, fold_ids=np.array([0, 1, 0]))
        part = data.subset(np.array([0, 2]))
        assert part.categorical and part.fold_ids is None
        assert part.y[:, 0].tolist() == [1.0, 3.0]


class TestScoreModelSpec:

    def test_tau(self):
        # Test the hyperparameters exposed to the sampler
        assert ScoreModelSpec().tau == {"phi": 1.0, "lengthscale": 1.0}
        anova = ScoreModelSpec(kind="AnovaTwoWay", levels=(2, 3), sigma2_1=0.5, sigma2_2=0.25, sigma2_12=1.0)
        assert set(anova.tau) == {"sigma2_1", "sigma2_2", "sigma2_12"}
        assert anova.marginal_variance == pytest.approx(1.75)

    def test_levels(self):
        # Test that each factor needs a level
        with pytest.raises(pydantic.ValidationError):
            ScoreModelSpec(kind="AnovaTwoWay", levels=(0, 2))
