import numpy as np
import pytest

from pq_sparse.exceptions import DatasetError, ValidationError
from pq_sparse.io_utils import load_json
from pq_sparse.signals.dataset import (
    Dataset,
    DatasetConfig,
    add_noise_to_dataset,
    generate_dataset,
    read_dataset,
    snr_tag,
    write_dataset,
)


def test_exact_class_counts(tiny_dataset):
    assert len(tiny_dataset) == 28
    assert tiny_dataset.class_counts() == {f"C{k}": 4 for k in range(1, 8)}
    assert list(tiny_dataset.labels[:4]) == [1, 1, 1, 1]
    assert tiny_dataset.signals[0].signal_id == "C1-0000"
    assert tiny_dataset.matrix.shape == (28, 211)


def test_generation_is_deterministic(tiny_dataset_config, tiny_dataset):
    again = generate_dataset(tiny_dataset_config, seed=3)
    np.testing.assert_array_equal(again.matrix, tiny_dataset.matrix)
    other = generate_dataset(tiny_dataset_config, seed=4)
    assert not np.array_equal(other.matrix, tiny_dataset.matrix)


def test_signal_does_not_depend_on_class_size(small_grid):
    # each signal has its own substream, so growing the dataset keeps earlier signals
    small = generate_dataset(DatasetConfig(grid=small_grid, per_class=2), seed=5)
    large = generate_dataset(DatasetConfig(grid=small_grid, per_class=3), seed=5)
    np.testing.assert_array_equal(small.signals[0].values, large.signals[0].values)
    np.testing.assert_array_equal(small.signals[2].values, large.signals[3].values)


@pytest.mark.parametrize("per_class", [0, -3, 2.5])
def test_per_class_must_be_positive_integer(per_class):
    with pytest.raises(ValidationError):
        DatasetConfig(per_class=per_class)


def test_snr_tag():
    assert snr_tag(None) == "clean"
    assert snr_tag(float("inf")) == "clean"
    assert snr_tag(30) == "30"
    assert snr_tag(12.5) == "12.5"


def test_noise_streams_are_per_level(tiny_dataset):
    clean = add_noise_to_dataset(tiny_dataset, None, seed=3)
    np.testing.assert_array_equal(clean.matrix, tiny_dataset.matrix)
    assert clean.snr_db is None

    a = add_noise_to_dataset(tiny_dataset, 20.0, seed=3)
    b = add_noise_to_dataset(tiny_dataset, 20.0, seed=3)
    c = add_noise_to_dataset(tiny_dataset, 30.0, seed=3)
    np.testing.assert_array_equal(a.matrix, b.matrix)
    assert a.snr_db == 20.0
    residual_20 = np.mean((a.matrix - tiny_dataset.matrix) ** 2)
    residual_30 = np.mean((c.matrix - tiny_dataset.matrix) ** 2)
    assert residual_30 < residual_20


def test_write_and_read_dataset(tmp_path, tiny_dataset):
    manifest_path = write_dataset(tiny_dataset, tmp_path / "dataset", config_hash="abc")
    manifest = load_json(manifest_path)
    assert manifest['n_signals'] == 28
    assert manifest['config_hash'] == "abc"
    assert manifest['per_class']['C4'] == 4

    loaded = read_dataset(tmp_path / "dataset")
    np.testing.assert_array_equal(loaded.matrix, tiny_dataset.matrix)
    np.testing.assert_array_equal(loaded.labels, tiny_dataset.labels)
    assert loaded.signals[4].params == tiny_dataset.signals[4].params
    assert loaded.signals[4].seed_trace == "3/dataset/2/0"
    assert loaded.grid == tiny_dataset.grid


def test_written_files_are_reproducible(tmp_path, tiny_dataset_config):
    first = load_json(write_dataset(generate_dataset(tiny_dataset_config, 8), tmp_path / "a"))
    second = load_json(write_dataset(generate_dataset(tiny_dataset_config, 8), tmp_path / "b"))
    assert first['signals_sha256'] == second['signals_sha256']


def test_read_missing_dataset(tmp_path):
    with pytest.raises(DatasetError):
        read_dataset(tmp_path / "nowhere")


def test_read_detects_truncated_file(tmp_path, tiny_dataset):
    write_dataset(tiny_dataset, tmp_path)
    signals = tmp_path / "signals.csv"
    lines = signals.read_text().splitlines()
    signals.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(DatasetError):
        read_dataset(tmp_path)


def test_refuses_empty_dataset(tmp_path, small_grid):
    with pytest.raises(DatasetError):
        write_dataset(Dataset(grid=small_grid, fundamental_hz=60.0, seed=0, signals=[]), tmp_path)
