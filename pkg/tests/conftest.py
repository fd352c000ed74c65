import numpy as np
import pytest

from pq_sparse.classification.registry import ClassifierSettings
from pq_sparse.evaluation.experiment import ExperimentConfig
from pq_sparse.representation.atoms import DictionaryConfig
from pq_sparse.representation.group_lasso import SolverConfig
from pq_sparse.signals.dataset import DatasetConfig, generate_dataset
from pq_sparse.signals.disturbances import SamplingGrid


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run full-profile acceptance tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_grid():
    # 300 Hz sampling over the standard 0.7 s window
    return SamplingGrid(n_samples=211, duration=0.7)


@pytest.fixture(scope="session")
def tiny_dictionary_config():
    return DictionaryConfig(harmonics_k=5, gabor_k=3, mhwt_v=2, stockwell_k=2, stockwell_v=2,
                            location_step=0.05, scale_step=0.005)


@pytest.fixture(scope="session")
def tiny_dataset_config(small_grid):
    return DatasetConfig(grid=small_grid, per_class=4)


@pytest.fixture(scope="session")
def tiny_dataset(tiny_dataset_config):
    return generate_dataset(tiny_dataset_config, seed=3)


@pytest.fixture(scope="session")
def tiny_experiment_config(tiny_dataset_config, tiny_dictionary_config):
    return ExperimentConfig(
        dataset=tiny_dataset_config,
        dictionary=tiny_dictionary_config,
        dictionaries=("ST", "GWST"),
        sparse_modes=("none", "group_lasso"),
        solver=SolverConfig(max_sweeps=200, tol=1e-10),
        classifiers=ClassifierSettings(names=("1-NN", "3-NN", "LDC")),
        repetitions=2,
        seed=11,
    )

