import numpy as np
import pandas as pd
import pytest

from pq_sparse import io_utils
from pq_sparse.exceptions import DatasetError, ValidationError
from pq_sparse.representation.atoms import DictionaryConfig, build_dictionary
from pq_sparse.representation.encoding import (
    SPARSE_MODES,
    coefficients_frame,
    encode_dataset,
    read_encoded,
    sparse_entries,
    summary_frame,
    write_encoded,
)
from pq_sparse.representation.group_lasso import SolverConfig, group_lasso_shooting, least_squares_fit
from pq_sparse.signals.disturbances import SamplingGrid

SOLVER = SolverConfig(lam=1e-3, max_sweeps=300, tol=1e-10)


@pytest.fixture(scope="module")
def dictionary(small_grid):
    config = DictionaryConfig(kinds=("harmonics", "gt"), harmonics_k=5, gabor_k=3, location_step=0.05)
    return build_dictionary(config, small_grid)


def test_dense_mode_matches_least_squares(tiny_dataset, dictionary):
    encoded = encode_dataset(tiny_dataset, dictionary, "none", dictionary_name="GT")
    assert encoded.coefficients.shape == (28, 52)
    np.testing.assert_allclose(encoded.coefficients[3], least_squares_fit(dictionary, tiny_dataset.signals[3]).values,
                               atol=1e-9)
    assert np.all(encoded.sweeps == 0)
    assert encoded.converged.all()
    np.testing.assert_array_equal(encoded.labels, tiny_dataset.labels)


def test_group_lasso_mode_matches_single_solves(tiny_dataset, dictionary):
    encoded = encode_dataset(tiny_dataset, dictionary, "group_lasso", SOLVER, dictionary_name="GT")
    beta, report = group_lasso_shooting(dictionary, tiny_dataset.signals[10], SOLVER)
    np.testing.assert_array_equal(encoded.coefficients[10], beta.values)
    assert encoded.rmse[10] == report.reconstruction_rmse
    assert encoded.group_sparsity.shape == (28, 2)
    assert encoded.group_names == ("harmonics", "gt")
    assert np.all((encoded.overall_sparsity >= 0) & (encoded.overall_sparsity <= 1))


def test_lasso_mode_uses_singleton_groups(tiny_dataset, dictionary):
    encoded = encode_dataset(tiny_dataset, dictionary, "lasso", SOLVER)
    # singletons still report sparsity over the dictionary groups
    assert encoded.group_sparsity.shape == (28, 2)
    assert encoded.header['sparse_mode'] == "lasso"


def test_workers_do_not_change_results(tiny_dataset, dictionary):
    serial = encode_dataset(tiny_dataset, dictionary, "group_lasso", SOLVER, jobs=1)
    parallel = encode_dataset(tiny_dataset, dictionary, "group_lasso", SOLVER, jobs=2)
    np.testing.assert_array_equal(serial.coefficients, parallel.coefficients)
    np.testing.assert_array_equal(serial.sweeps, parallel.sweeps)


def test_rejects_unknown_mode_and_grid_mismatch(tiny_dataset, dictionary):
    assert "group_lasso" in SPARSE_MODES
    with pytest.raises(ValidationError):
        encode_dataset(tiny_dataset, dictionary, "omp")
    other = build_dictionary(DictionaryConfig(kinds=("harmonics",), harmonics_k=2), SamplingGrid(n_samples=101))
    with pytest.raises(ValidationError):
        encode_dataset(tiny_dataset, other, "none")


def test_flagged_follows_rmse_target(tiny_dataset, dictionary):
    encoded = encode_dataset(tiny_dataset, dictionary, "none")
    np.testing.assert_array_equal(encoded.flagged, encoded.rmse >= 1e-3)


def test_coefficients_frame_labels_atoms(dictionary):
    beta = np.zeros(dictionary.n_atoms)
    beta[11] = 2.0
    frame = coefficients_frame(dictionary, beta)
    assert len(frame) == 52
    row = frame.iloc[11]
    assert row['group'] == "gt"
    assert row['kind'] == "gt"
    assert row['k'] == 1 and row['l'] == 2
    assert row['value'] == 2.0
    assert frame.iloc[0]['phase'] == "cos"


def test_write_and_read_encoded(tmp_path, tiny_dataset, dictionary):
    encoded = encode_dataset(tiny_dataset, dictionary, "group_lasso", SOLVER, dictionary_name="GT")
    header_path = write_encoded(encoded, tmp_path, config_hash="feed")
    assert (tmp_path / "sparse_coefficients.csv").exists()

    loaded = read_encoded(tmp_path)
    np.testing.assert_array_equal(loaded.coefficients, encoded.coefficients)
    np.testing.assert_array_equal(loaded.rmse, encoded.rmse)
    assert loaded.signal_ids == encoded.signal_ids
    assert loaded.group_names == encoded.group_names
    assert loaded.header['config_hash'] == "feed"
    assert header_path.name == "header.json"

    summary = pd.read_csv(tmp_path / "summary.csv")
    assert list(summary.columns[:3]) == ['signal_id', 'label', 'rmse']
    assert "sparsity_gt" in summary.columns
    entries = pd.read_csv(tmp_path / "sparse_coefficients.csv")
    assert len(entries) == len(sparse_entries(encoded))


def test_dense_mode_writes_no_sparse_file(tmp_path, tiny_dataset, dictionary):
    write_encoded(encode_dataset(tiny_dataset, dictionary, "none"), tmp_path)
    assert not (tmp_path / "sparse_coefficients.csv").exists()


def test_summary_frame_columns(tiny_dataset, dictionary):
    frame = summary_frame(encode_dataset(tiny_dataset, dictionary, "none"))
    assert len(frame) == 28
    assert {"sparsity_harmonics", "sparsity_gt", "flagged"} <= set(frame.columns)


def test_read_missing_encoded(tmp_path):
    with pytest.raises(DatasetError):
        read_encoded(tmp_path)


def test_interrupted_rewrite_keeps_previous_coefficients(tmp_path, tiny_dataset, dictionary, monkeypatch):
    encoded = encode_dataset(tiny_dataset, dictionary, "none")
    write_encoded(encoded, tmp_path)
    before = (tmp_path / "coefficients.npz").read_bytes()
    sparse = encode_dataset(tiny_dataset, dictionary, "group_lasso", SOLVER)

    def refuse(src, dst):
        raise OSError("disk full")

    monkeypatch.setattr(io_utils.os, "replace", refuse)
    with pytest.raises(OSError):
        write_encoded(sparse, tmp_path)
    monkeypatch.undo()

    assert (tmp_path / "coefficients.npz").read_bytes() == before
    assert not [p for p in tmp_path.iterdir() if p.name.endswith(".tmp")]
    np.testing.assert_array_equal(read_encoded(tmp_path).coefficients, encoded.coefficients)
