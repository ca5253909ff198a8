import importlib
from unittest.mock import patch

import numpy as np
import pandas as pd
import pytest

from pyncorm.datamodel import ObservationSet, RunConfig
from pyncorm.fit import fit, run_chain
from pyncorm.fit.utils import acceptance_summary, state_record
from pyncorm.sampler import initialize_state


@pytest.fixture
def data():
    rng = np.random.default_rng(1)
    x = rng.random(20)
    return ObservationSet(y=np.where(x < 0.5, -1.0, 1.0) + 0.3 * rng.standard_normal(20), x=x)


class TestRunChain:

    def test_thinned_records(self, data):
        # Test that 100 iterations with thinning 5 keep 20 states
        config = RunConfig.from_dict({"sampler": {"iterations": 100, "burn_in": 0, "thin": 5}})
        run = run_chain(config, data, np.random.default_rng(0), quiet=True)
        assert len(run.samples) == 20 and len(run.trace) == 20
        assert run.samples["iteration"].tolist() == list(range(5, 101, 5))
        assert all(0 <= rate <= 1 for rate in run.acceptance.values())

    def test_schedule_count(self, data):
        # Test 33,000 iterations, 3,000 burn-in and thinning 3 with the sweep stubbed out
        config = RunConfig.from_dict({"sampler": {"iterations": 33_000, "burn_in": 3_000, "thin": 3}})
        with patch.object(importlib.import_module("pyncorm.fit.main"), "sweep", side_effect=lambda state, rng: state):
            run = run_chain(config, data, np.random.default_rng(0), quiet=True)
        assert len(run.samples) == 10_000

    def test_record_columns(self, data):
        # Test the nested columns of an archive row
        state = initialize_state(RunConfig(), data, np.random.default_rng(2))
        record = state_record(state, chain=3)
        assert record["chain"] == 3
        assert len(record["c"]) == data.n and len(record["v"]) == data.n
        assert len(record["r"]) == state.K * state.score_model.n
        assert not any(key.startswith("acceptance.") for key in record)


class TestFit:

    @pytest.fixture
    def config(self):
        return RunConfig.from_dict({"sampler": {"iterations": 12, "burn_in": 2, "thin": 2, "seed": 5, "chains": 2}})

    def test_outputs(self, tmp_path, config, data):
        # Test the archive layout
        output = fit(config, data, tmp_path / "run", quiet=True)
        samples = pd.read_parquet(output / "samples.parquet")
        assert len(samples) == 2 * config.sampler.retained
        assert sorted(samples["chain"].unique()) == [0, 1]
        for chain in range(2):
            trace = pd.read_csv(output / f"trace_chain{chain}.csv")
            assert {"iteration", "K", "M", "tau.phi", "log_L"} <= set(trace.columns)
            assert any(column.startswith("acceptance.") for column in trace.columns)
        report = (output / "report.txt").read_text()
        assert "seed: 5" in report and "retained states: 10" in report

    def test_default_priors(self, tmp_path, data):
        # Test that a chain under the default hyperpriors runs to the end
        config = RunConfig.from_dict({"sampler": {"iterations": 300, "burn_in": 100, "thin": 2, "seed": 3}})
        output = fit(config, data, tmp_path / "run", quiet=True)
        trace = pd.read_csv(output / "trace_chain0.csv")
        assert len(trace) == 100
        assert np.isfinite(trace["log_L"]).all() and (trace["log_L"] <= 0).all()
        assert (trace["tau.phi"] > 0).all()

    def test_reproducible(self, tmp_path, config, data):
        # Test that the same seed writes a byte-identical archive
        first = fit(config, data, tmp_path / "a", quiet=True)
        second = fit(config, data, tmp_path / "b", quiet=True)
        assert (first / "samples.parquet").read_bytes() == (second / "samples.parquet").read_bytes()

    def test_seed_matters(self, tmp_path, config, data):
        # Test that another seed gives another chain
        first = pd.read_parquet(fit(config, data, tmp_path / "a", quiet=True) / "samples.parquet")
        other = config.model_copy(update={"sampler": config.sampler.model_copy(update={"seed": 6})})
        second = pd.read_parquet(fit(other, data, tmp_path / "b", quiet=True) / "samples.parquet")
        assert not np.array_equal(first["log_L"].to_numpy(), second["log_L"].to_numpy())

    def test_default_directory(self, tmp_path, data):
        # Test that output.directory is used when no output is given
        config = RunConfig.from_dict({
            "sampler": {"iterations": 3, "burn_in": 1, "thin": 1},
            "output": {"directory": str(tmp_path / "out"), "quiet": True},
        })
        assert fit(config, data) == tmp_path / "out"
        assert (tmp_path / "out" / "samples.parquet").exists()


class TestUtils:

    def test_acceptance_summary(self):
        # Test the per-block mean over chains
        summary = acceptance_summary([{"v": 0.4, "mass": 0.2}, {"v": 0.6, "mass": float("nan")}])
        assert summary == {"v": pytest.approx(0.5), "mass": pytest.approx(0.2)}
