import math

import numpy as np
import pandas as pd
import pytest
from scipy import integrate, stats

from pyncorm.datamodel import ObservationSet, OutputConfig, RunConfig
from pyncorm.errors import DataError
from pyncorm.fit import fit
from pyncorm.kernels import ClusterSuffStats
from pyncorm.kernels.utils import normal_posterior
from pyncorm.load import ArchiveDataFrame, load_archive
from pyncorm.predict import log_predictive_points, predict, predictive_density
from pyncorm.predict.utils import average_log_density, check_grid_locations, default_grid, log_mixture_weights

CONFIG = {"sampler": {"iterations": 10, "burn_in": 4, "thin": 2, "seed": 8}, "output": {"grid_y_size": 20}}


@pytest.fixture
def data():
    rng = np.random.default_rng(2)
    x = rng.random(15)
    return ObservationSet(y=np.where(x < 0.5, -1.0, 1.0) + 0.3 * rng.standard_normal(15), x=x)


@pytest.fixture
def fitted(tmp_path, data):
    config = RunConfig.from_dict(CONFIG)
    return config, load_archive(fit(config, data, tmp_path / "run", quiet=True))


def single_cluster_archive(data: ObservationSet, jump: float) -> ArchiveDataFrame:
    """One state with every observation in one cluster."""
    n_loc = data.locations()[0].shape[0]
    return ArchiveDataFrame([
        {
            "chain": 0,
            "iteration": 1,
            "K": 1,
            "M": 1.0,
            "tau.phi": 1.0,
            "tau.lengthscale": 1.0,
            "kernel.mu": 0.0,
            "kernel.sigma2": 1.0,
            "kernel.mix_fraction": 0.5,
            "log_L": 0.0,
            "c": [0] * data.n,
            "v": [1.0 / data.n] * data.n,
            "J": [jump],
            "r": [0.0] * n_loc,
            "log_L_parts": [0.0] * n_loc,
        }
    ])


class TestPredictiveDensity:

    def test_integrates_to_one(self, fitted, data):
        # Test that every conditional density integrates to one over y
        config, archive = fitted
        y_grid = np.linspace(-15, 15, 1501)
        density = predictive_density(archive, config, data, np.array([0.1, 0.5, 0.9]), y_grid, np.random.default_rng(0))
        assert density.shape == (3, 1501)
        assert np.all(density >= 0)
        np.testing.assert_allclose(integrate.trapezoid(density, y_grid, axis=1), 1.0, atol=1e-3)

    def test_single_cluster(self, data):
        # Test that a dominant cluster gives its conjugate posterior predictive
        config = RunConfig()
        archive = single_cluster_archive(data, jump=1e10)
        y_grid = np.linspace(-3, 3, 7)
        density = predictive_density(archive, config, data, np.array([0.5]), y_grid, np.random.default_rng(1))

        kernel = config.model.kernel
        mean, var = normal_posterior(kernel, data.n, float(data.y.sum()))
        expected = stats.norm.pdf(y_grid, mean, math.sqrt(var + kernel.obs_var))
        np.testing.assert_allclose(density[0], expected, rtol=1e-6)

    def test_weights_normalized(self, fitted, data):
        # Test the cluster and remainder weights at new locations
        config, archive = fitted
        state = archive.read(0, config, data)
        log_weights = log_mixture_weights(state, np.array([[0.2], [0.7]]), np.random.default_rng(2), draws=10)
        assert log_weights.shape == (state.K + 1, 2)
        np.testing.assert_allclose(np.exp(log_weights).sum(axis=0), 1.0)

    def test_points_match_grid(self, data):
        # Test that pointwise scores agree with the lattice for a single state
        config = RunConfig()
        archive = single_cluster_archive(data, jump=1e10)
        points = log_predictive_points(
            archive, config, data, np.array([[0.5], [0.5]]), np.array([0.0, 1.0]), np.random.default_rng(3)
        )
        grid = predictive_density(archive, config, data, np.array([0.5]), np.array([0.0, 1.0]), np.random.default_rng(3))
        np.testing.assert_allclose(np.exp(points), grid[0], rtol=1e-6)

    def test_categorical_out_of_range(self):
        # Test that unknown factor levels are rejected
        config = RunConfig.from_dict({"model": {"scores": {"kind": "AnovaTwoWay", "levels": [2, 2]}}})
        data = ObservationSet(y=[0.0, 1.0, 2.0], x=[[0, 0], [1, 0], [1, 1]], categorical=True)
        with pytest.raises(DataError, match="codes must lie"):
            check_grid_locations(data, np.array([[2, 0]]), config.model.scores)

    def test_wrong_width(self, data):
        # Test grid locations with the wrong number of columns
        with pytest.raises(DataError, match="columns"):
            check_grid_locations(data, np.zeros((3, 2)), RunConfig().model.scores)


class TestGrid:

    def test_default_grid(self, data):
        # Test the data-range grid
        x_grid, y_grid = default_grid(data, OutputConfig(grid_y_size=11))
        assert x_grid.size == 50
        assert x_grid[0] == pytest.approx(data.x.min()) and x_grid[-1] == pytest.approx(data.x.max())
        span = np.ptp(data.y)
        assert y_grid[0] == pytest.approx(data.y.min() - 0.1 * span)
        assert y_grid.size == 11

    def test_configured_grid(self, data):
        # Test grid_x and the y bounds from the output block
        x_grid, y_grid = default_grid(data, OutputConfig(grid_x=[0.25, 0.75], grid_y_min=-4, grid_y_max=4, grid_y_size=9))
        np.testing.assert_allclose(x_grid, [0.25, 0.75])
        np.testing.assert_allclose(y_grid, np.linspace(-4, 4, 9))

    def test_multivariate_response(self):
        # Test that lattices need a univariate response
        data = ObservationSet(y=np.zeros((3, 2)), x=[0.1, 0.2, 0.3])
        with pytest.raises(DataError, match="univariate"):
            default_grid(data, OutputConfig())

    def test_average_log_density(self):
        # Test the log of the mean density
        values = np.log(np.array([[0.2, 0.5], [0.4, 0.1]]))
        np.testing.assert_allclose(np.exp(average_log_density(values)), [0.3, 0.3])


class TestPredict:

    def test_writes_csv(self, tmp_path, fitted, data):
        # Test the long-format output
        config, archive = fitted
        output = predict(archive, config, data, tmp_path / "predictive.csv", quiet=True)
        frame = pd.read_csv(output)
        assert list(frame.columns) == ["x", "y", "density"]
        assert len(frame) == 50 * 20
        assert (frame["density"] >= 0).all()

    def test_deterministic(self, tmp_path, fitted, data):
        # Test that predictions depend on the seed only
        config, archive = fitted
        first = pd.read_csv(predict(archive, config, data, tmp_path / "a.csv", quiet=True))
        second = pd.read_csv(predict(archive, config, data, tmp_path / "b.csv", quiet=True))
        pd.testing.assert_frame_equal(first, second)
