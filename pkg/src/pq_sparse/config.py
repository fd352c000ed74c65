"""
Pipeline configuration: one JSON document with the sections grid, signal,
dictionaries, solver, features, classifiers, experiment and io.

Resolution order: built-in profile, then an optional config file overlay,
then path variables from the environment (.env supported), then CLI flags.
"""

import copy
import logging
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from dotenv import load_dotenv

from .classification.registry import ClassifierSettings
from .evaluation.experiment import DEFAULT_DICTIONARIES, DEFAULT_SPARSE_MODES, ExperimentConfig, parse_snr
from .exceptions import ConfigurationError
from .io_utils import load_json, sha256_of
from .representation.atoms import DictionaryConfig
from .representation.group_lasso import SolverConfig
from .signals.dataset import DatasetConfig, snr_tag
from .signals.disturbances import DEFAULT_FUNDAMENTAL_HZ, DisturbanceRanges, SamplingGrid

logger = logging.getLogger(__name__)

SECTIONS = ("grid", "signal", "dictionaries", "solver", "features", "classifiers", "experiment", "io")

PROFILES: Dict[str, dict] = {
    "full": {},
    "desk": {
        "signal": {"per_class": 40},
        "dictionaries": {"location_step": 0.01},
        "solver": {"max_sweeps": 2000},
        "classifiers": {"svm_cv_folds": 3, "mlp_epochs": 200},
        "experiment": {"repetitions": 5},
    },
}


def _check_keys(section: str, data: Any, known) -> dict:
    if not isinstance(data, dict):
        raise ConfigurationError(f"{section}: expected an object, got {type(data).__name__}")
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigurationError(f"{section}: unknown keys {sorted(unknown)}")
    return data


# ===== SECTIONS =====

@dataclass(frozen=True)
class SignalSection:
    fundamental_hz: float = DEFAULT_FUNDAMENTAL_HZ
    per_class: int = 190
    ranges: DisturbanceRanges = field(default_factory=DisturbanceRanges)

    def to_dict(self) -> dict:
        return {'fundamental_hz': self.fundamental_hz, 'per_class': self.per_class, 'ranges': self.ranges.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "SignalSection":
        _check_keys("signal", data, ('fundamental_hz', 'per_class', 'ranges'))
        values = dict(data)
        if 'ranges' in values:
            values['ranges'] = DisturbanceRanges.from_dict(values['ranges'])
        return cls(**values)


@dataclass(frozen=True)
class FeaturesConfig:
    per_group: bool = False

    def to_dict(self) -> dict:
        return {'per_group': self.per_group}

    @classmethod
    def from_dict(cls, data: dict) -> "FeaturesConfig":
        _check_keys("features", data, ('per_group',))
        return cls(**data)


@dataclass(frozen=True)
class ExperimentSection:
    dictionaries: Tuple[str, ...] = DEFAULT_DICTIONARIES
    sparse_modes: Tuple[str, ...] = DEFAULT_SPARSE_MODES
    repetitions: int = 20
    train_fraction: float = 0.7
    seed: int = 0
    snr_db: Tuple[Optional[float], ...] = ()
    compare: Tuple[str, str] = ("ST", "GWST")

    def to_dict(self) -> dict:
        return {
            'dictionaries': list(self.dictionaries), 'sparse_modes': list(self.sparse_modes),
            'repetitions': self.repetitions, 'train_fraction': self.train_fraction, 'seed': self.seed,
            'snr_db': [snr_tag(s) for s in self.snr_db], 'compare': list(self.compare),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSection":
        _check_keys("experiment", data, [f.name for f in fields(cls)])
        values = dict(data)
        for key in ('dictionaries', 'sparse_modes', 'compare'):
            if key in values:
                values[key] = tuple(values[key])
        if 'snr_db' in values:
            values['snr_db'] = tuple(parse_snr(s) for s in values['snr_db'])
        if 'compare' in values and len(values['compare']) != 2:
            raise ConfigurationError(f"experiment.compare must name two dictionaries, got {list(values['compare'])}")
        if 'seed' in values and (not isinstance(values['seed'], int) or values['seed'] < 0):
            raise ConfigurationError(f"experiment.seed must be a nonnegative integer, got {values['seed']}")
        return cls(**values)


@dataclass(frozen=True)
class IOConfig:
    out_dir: str = "results"
    dataset: Optional[str] = None
    cache_dir: Optional[str] = None

    def to_dict(self) -> dict:
        return {'out_dir': self.out_dir, 'dataset': self.dataset, 'cache_dir': self.cache_dir}

    @classmethod
    def from_dict(cls, data: dict) -> "IOConfig":
        _check_keys("io", data, ('out_dir', 'dataset', 'cache_dir'))
        return cls(**data)

    @classmethod
    def from_env(cls, base: Optional["IOConfig"] = None) -> "IOConfig":
        """Overlay PQ_SPARSE_OUT_DIR, PQ_SPARSE_DATASET and PQ_SPARSE_CACHE_DIR on base"""
        load_dotenv()
        base = base or cls()
        return cls(
            out_dir=os.getenv('PQ_SPARSE_OUT_DIR', base.out_dir),
            dataset=os.getenv('PQ_SPARSE_DATASET', base.dataset),
            cache_dir=os.getenv('PQ_SPARSE_CACHE_DIR', base.cache_dir),
        )


# ===== DOCUMENT =====

@dataclass(frozen=True)
class PipelineConfig:
    grid: SamplingGrid = field(default_factory=SamplingGrid)
    signal: SignalSection = field(default_factory=SignalSection)
    dictionaries: DictionaryConfig = field(default_factory=DictionaryConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    features: FeaturesConfig = field(default_factory=FeaturesConfig)
    classifiers: ClassifierSettings = field(default_factory=ClassifierSettings)
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    io: IOConfig = field(default_factory=IOConfig)

    @property
    def seed(self) -> int:
        return self.experiment.seed

    def to_dict(self) -> dict:
        return {name: getattr(self, name).to_dict() for name in SECTIONS}

    def config_hash(self) -> str:
        """SHA-256 of the resolved document without the io paths"""
        document = self.to_dict()
        del document['io']
        return sha256_of(document)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        _check_keys("config", data, SECTIONS)
        grid = data.get('grid', {})
        _check_keys("grid", grid, ('n_samples', 'duration'))
        config = cls(
            grid=SamplingGrid(**grid),
            signal=SignalSection.from_dict(data.get('signal', {})),
            dictionaries=DictionaryConfig.from_dict(data.get('dictionaries', {})),
            solver=SolverConfig.from_dict(data.get('solver', {})),
            features=FeaturesConfig.from_dict(data.get('features', {})),
            classifiers=ClassifierSettings.from_dict(data.get('classifiers', {})),
            experiment=ExperimentSection.from_dict(data.get('experiment', {})),
            io=IOConfig.from_dict(data.get('io', {})),
        )
        config.experiment_config()
        return config

    def dataset_config(self) -> DatasetConfig:
        return DatasetConfig(grid=self.grid, fundamental_hz=self.signal.fundamental_hz,
                             per_class=self.signal.per_class, ranges=self.signal.ranges)

    def experiment_config(self) -> ExperimentConfig:
        section = self.experiment
        return ExperimentConfig(
            dataset=self.dataset_config(),
            dictionary=self.dictionaries,
            dictionaries=section.dictionaries,
            sparse_modes=section.sparse_modes,
            solver=self.solver,
            classifiers=self.classifiers,
            per_group_features=self.features.per_group,
            repetitions=section.repetitions,
            train_fraction=section.train_fraction,
            seed=section.seed,
            snr_db=section.snr_db,
            compare=section.compare,
        )

    def with_overrides(self, seed: Optional[int] = None, out_dir: Optional[str] = None,
                       dataset: Optional[str] = None) -> "PipelineConfig":
        config = self
        if seed is not None:
            if seed < 0:
                raise ConfigurationError(f"--seed must be nonnegative, got {seed}")
            config = replace(config, experiment=replace(config.experiment, seed=seed))
        if out_dir is not None:
            config = replace(config, io=replace(config.io, out_dir=out_dir))
        if dataset is not None:
            config = replace(config, io=replace(config.io, dataset=dataset))
        return config


def merge_documents(base: dict, overlay: dict) -> dict:
    """Recursive merge; overlay wins, nested objects merge key by key"""
    merged = copy.deepcopy(base)
    for key, value in overlay.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_documents(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def load_config(profile: str = "full", path: Optional[Union[str, Path]] = None,
                use_env: bool = True) -> PipelineConfig:
    """
    Resolve a PipelineConfig from a profile and an optional overlay file.

    Args:
        profile: Built-in profile name ('full' or 'desk')
        path: JSON document overlaid on the profile
        use_env: Apply path variables from the environment

    Returns:
        Validated PipelineConfig
    """
    if profile not in PROFILES:
        raise ConfigurationError(f"unknown profile '{profile}' (expected one of {sorted(PROFILES)})")
    document = PROFILES[profile]
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigurationError(f"config file not found: {path}")
        try:
            overlay = load_json(path)
        except ValueError as e:
            raise ConfigurationError(f"{path}: invalid JSON ({e})") from e
        document = merge_documents(document, overlay)
        logger.debug(f"Config overlay loaded from {path}")
    try:
        config = PipelineConfig.from_dict(document)
    except TypeError as e:
        raise ConfigurationError(f"invalid config value: {e}") from e
    if use_env:
        config = replace(config, io=IOConfig.from_env(config.io))
    return config
