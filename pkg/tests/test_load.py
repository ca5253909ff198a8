import pathlib

import numpy as np
import pandas as pd
import pytest

from pyncorm.datamodel import DataConfig, ObservationSet, RunConfig
from pyncorm.errors import DataError
from pyncorm.fit import fit
from pyncorm.load import ArchiveDataFrame, ingest_csv, load_archive
from pyncorm.load.utils import pack_matrix, to_codes

MCYCLE = pathlib.Path(__file__).parent / "data" / "mcycle_style.csv"


def write_csv(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestIngestCsv:

    def test_three_rows(self, tmp_path):
        # Test a minimal well-formed file
        data = ingest_csv(write_csv(tmp_path, "x,y\n0.1,1.0\n0.2,2.0\n0.3,-1\n"))
        assert data.n == 3 and data.p == 1
        np.testing.assert_allclose(data.y[:, 0], [1.0, 2.0, -1.0])
        np.testing.assert_allclose(data.x[:, 0], [0.1, 0.2, 0.3])

    def test_missing_cell(self, tmp_path):
        # Test that an empty cell names its line and column
        path = write_csv(tmp_path, "x,y\n0.1,1.0\n0.2,\n0.3,2.0\n")
        with pytest.raises(DataError, match="line 3: missing value in column 'y'"):
            ingest_csv(path)

    def test_non_numeric(self, tmp_path):
        # Test that a non-numeric cell names its line and column
        path = write_csv(tmp_path, "x,y\n0.1,1.0\n0.2,abc\n")
        with pytest.raises(DataError, match="line 3: non-numeric value 'abc' in column 'y'"):
            ingest_csv(path)

    def test_missing_column(self, tmp_path):
        # Test a header without the configured response
        path = write_csv(tmp_path, "x,z\n0.1,1.0\n0.2,2.0\n")
        with pytest.raises(DataError, match="missing column"):
            ingest_csv(path)

    def test_ragged_row(self, tmp_path):
        # Test that parser errors keep the line number
        path = write_csv(tmp_path, "x,y\n0.1,1.0\n0.2,2.0,3.0\n")
        with pytest.raises(DataError, match="line 3"):
            ingest_csv(path)

    def test_missing_file(self, tmp_path):
        # Test a path that does not exist
        with pytest.raises(DataError, match="does not exist"):
            ingest_csv(tmp_path / "absent.csv")

    def test_single_row(self, tmp_path):
        # Test that one observation is rejected as data
        with pytest.raises(DataError, match="At least two"):
            ingest_csv(write_csv(tmp_path, "x,y\n0.1,1.0\n"))

    def test_mcycle_style(self):
        # Test the motorcycle-style fixture with named columns
        data = ingest_csv(MCYCLE, DataConfig(response="accel", regressors="times"))
        assert data.p == 1 and data.x.shape[1] == 1
        assert data.n == 60
        assert not data.categorical

    def test_multivariate(self, tmp_path):
        # Test several responses and regressors
        path = write_csv(tmp_path, "a,b,u,v\n1,2,0.1,0.2\n3,4,0.3,0.4\n5,6,0.5,0.6\n")
        data = ingest_csv(path, DataConfig(response=["a", "b"], regressors=["u", "v"]))
        assert data.y.shape == (3, 2) and data.x.shape == (3, 2)

    def test_categorical(self, tmp_path):
        # Test that string levels become sorted codes
        path = write_csv(tmp_path, "f1,f2,y\nlow,x,1\nhigh,x,2\nlow,z,3\n")
        data = ingest_csv(path, DataConfig(regressors=["f1", "f2"], categorical=True))
        assert data.categorical
        np.testing.assert_array_equal(data.x, [[1, 0], [0, 0], [1, 1]])

    def test_fold_column(self, tmp_path):
        # Test that a fold column is factorized into 0..F-1
        path = write_csv(tmp_path, "x,y,fold\n0.1,1,b\n0.2,2,a\n0.3,3,b\n")
        data = ingest_csv(path, DataConfig(folds="fold"))
        assert data.fold_ids.tolist() == [1, 0, 1]


class TestUtils:

    def test_integer_codes(self):
        # Test that integer level codes are kept
        codes, levels = to_codes(pd.DataFrame({"f": ["0", "2", "1"]}), ["f"])
        np.testing.assert_array_equal(codes[:, 0], [0, 2, 1])
        assert levels == [["0", "1", "2"]]

    def test_pack_matrix(self):
        # Test the row-major flattening
        assert pack_matrix(np.array([[1, 2], [3, 4]])) == [1.0, 2.0, 3.0, 4.0]


class TestArchive:

    @pytest.fixture
    def data(self):
        rng = np.random.default_rng(0)
        x = rng.random(12)
        return ObservationSet(y=np.sin(6 * x) + 0.2 * rng.standard_normal(12), x=x)

    @pytest.fixture
    def config(self):
        return RunConfig.from_dict({"sampler": {"iterations": 8, "burn_in": 2, "thin": 2, "seed": 3}})

    def test_round_trip(self, tmp_path, config, data):
        # Test that every archived row rebuilds a consistent state
        archive = load_archive(fit(config, data, tmp_path / "run", quiet=True))
        assert isinstance(archive, ArchiveDataFrame)
        assert len(archive) == 3
        for idx in range(len(archive)):
            state = archive.read(idx, config, data)
            state.check_invariants()
            assert state.K == archive.iloc[idx]["K"]
            assert state.log_L == pytest.approx(state.log_L_parts.sum())

    def test_slice_keeps_type(self, tmp_path, config, data):
        # Test that slicing an archive keeps the subclass
        archive = load_archive(fit(config, data, tmp_path / "run", quiet=True) / "samples.parquet")
        assert isinstance(archive.iloc[1:], ArchiveDataFrame)

    def test_wrong_data(self, tmp_path, config, data):
        # Test that a state cannot be rebuilt on other locations
        archive = load_archive(fit(config, data, tmp_path / "run", quiet=True))
        other = ObservationSet(y=[0.0, 1.0], x=[0.5, 0.6])
        with pytest.raises(DataError, match="locations"):
            archive.read(0, config, other)

    def test_missing_archive(self, tmp_path):
        # Test a directory without samples
        with pytest.raises(DataError, match="No sample archive"):
            load_archive(tmp_path)
