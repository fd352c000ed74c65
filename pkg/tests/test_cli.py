import json

import pandas as pd
import pytest

from pq_sparse.cli import main, parse_arguments
from pq_sparse.evaluation.reports import load_result

TINY = {
    "grid": {"n_samples": 211, "duration": 0.7},
    "signal": {"per_class": 4},
    "dictionaries": {"harmonics_k": 5, "gabor_k": 3, "mhwt_v": 2, "stockwell_k": 2, "stockwell_v": 2,
                     "location_step": 0.05, "scale_step": 0.005},
    "solver": {"max_sweeps": 100, "tol": 1e-10},
    "classifiers": {"names": ["1-NN", "3-NN", "LDC"]},
    "experiment": {"dictionaries": ["ST", "GWST"], "sparse_modes": ["none", "group_lasso"],
                   "repetitions": 2, "seed": 11},
}


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("PQ_SPARSE_OUT_DIR", "PQ_SPARSE_DATASET", "PQ_SPARSE_CACHE_DIR"):
        monkeypatch.delenv(name, raising=False)


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(TINY), encoding="utf-8")
    return str(path)


def run_cli(*argv):
    return main([str(a) for a in argv])


def test_generate_writes_manifest(tmp_path, config_path):
    assert run_cli("generate", "--config", config_path, "--out", tmp_path / "a") == 0
    manifest = json.loads((tmp_path / "a" / "dataset" / "manifest.json").read_text())
    assert manifest['n_signals'] == 28
    assert manifest['seed'] == 11
    assert manifest['per_class'] == {f"C{k}": 4 for k in range(1, 8)}
    assert list((tmp_path / "a").glob("pq_sparse_generate_*.log"))


def test_same_seed_same_signals(tmp_path, config_path):
    for name in ("a", "b"):
        run_cli("generate", "--config", config_path, "--out", tmp_path / name)
    run_cli("generate", "--config", config_path, "--seed", 12, "--out", tmp_path / "c")

    def sha(name):
        return json.loads((tmp_path / name / "dataset" / "manifest.json").read_text())['signals_sha256']

    assert sha("a") == sha("b")
    assert sha("a") != sha("c")


def test_generate_noisy_copy(tmp_path, config_path):
    run_cli("generate", "--config", config_path, "--snr", "30", "--out", tmp_path)
    manifest = json.loads((tmp_path / "dataset_snr_30" / "manifest.json").read_text())
    assert manifest['snr_db'] == 30.0


def test_missing_dataset_exits_with_error(tmp_path, config_path):
    with pytest.raises(SystemExit) as info:
        run_cli("run", "--config", config_path, "--dataset", tmp_path / "nowhere", "--out", tmp_path)
    assert info.value.code == 1


def test_bad_config_exits_with_error(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"solver": {"rho": 1}}), encoding="utf-8")
    with pytest.raises(SystemExit) as info:
        run_cli("generate", "--config", path, "--out", tmp_path)
    assert info.value.code == 1


def test_jobs_must_be_positive():
    with pytest.raises(SystemExit) as info:
        parse_arguments(["run", "--jobs", "0"])
    assert info.value.code == 2


def test_dictionary_choice_is_case_insensitive():
    args = parse_arguments(["encode", "--dictionary", "gwst", "--mode", "lasso"])
    assert args.dictionary == "GWST" and args.mode == "lasso"


def test_encode_writes_coefficients_and_features(tmp_path, config_path):
    run_cli("generate", "--config", config_path, "--out", tmp_path)
    run_cli("encode", "--config", config_path, "--dataset", tmp_path / "dataset", "--dictionary", "ST",
            "--mode", "group_lasso", "--out", tmp_path)
    out = tmp_path / "encoded" / "ST_group_lasso"
    header = json.loads((out / "header.json").read_text())
    assert len(header['signal_ids']) == 28
    assert header['group_names'] == ["harmonics", "st"]
    features = pd.read_csv(out / "features.csv")
    assert len(features) == 28


def test_run_then_report(tmp_path, config_path):
    run_cli("generate", "--config", config_path, "--out", tmp_path)
    assert run_cli("run", "--config", config_path, "--dataset", tmp_path / "dataset",
                   "--out", tmp_path / "run") == 0
    result = load_result(tmp_path / "run")
    assert len(result.cells) == 12
    assert "io" not in result.config
    assert result.config['experiment']['seed'] == 11
    assert (tmp_path / "run" / "results.xlsx").exists()

    assert run_cli("report", "--result", tmp_path / "run" / "result.json", "--out", tmp_path / "tables") == 0
    rebuilt = pd.read_csv(tmp_path / "tables" / "accuracy.csv")
    original = pd.read_csv(tmp_path / "run" / "accuracy.csv")
    pd.testing.assert_frame_equal(rebuilt, original)


def test_sweep_writes_one_result_per_level(tmp_path, config_path):
    assert run_cli("sweep", "--config", config_path, "--snr", "clean", "30", "--out", tmp_path) == 0
    sweep = pd.read_csv(tmp_path / "sweep.csv")
    assert len(sweep) == 2 * 12
    assert (tmp_path / "snr_clean" / "result.json").exists()
    assert load_result(tmp_path / "snr_30").snr_db == 30.0


def test_sweep_needs_levels(tmp_path, config_path):
    with pytest.raises(SystemExit) as info:
        run_cli("sweep", "--config", config_path, "--out", tmp_path)
    assert info.value.code == 1
