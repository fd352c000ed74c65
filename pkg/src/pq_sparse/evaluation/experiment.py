"""
Repeated train/test experiments over dictionaries, sparse modes and classifiers.

Every signal is encoded once per (dictionary, sparse mode); repetitions only
redraw the stratified split, so a repetition uses the same train/test rows for
every dictionary, mode and classifier.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..classification.features import extract_feature_matrix, zscore_fit
from ..classification.models import LabeledFeatureSet
from ..classification.registry import SEEDED, ClassifierSettings, make_classifier
from ..exceptions import ConfigurationError, ExperimentError, PQSparseError
from ..io_utils import sha256_of
from ..representation.atoms import PRESETS, Dictionary, DictionaryConfig, load_or_build
from ..representation.encoding import SPARSE_MODES, encode_dataset
from ..representation.group_lasso import SolverConfig
from ..signals.dataset import Dataset, DatasetConfig, add_noise_to_dataset, generate_dataset, snr_tag
from ..signals.disturbances import DisturbanceClass
from ..streams import derive_seed, substream
from .statistics import (
    ConfusionMatrix,
    accuracy,
    confusion,
    mean_std,
    pooled_confusion,
    split_stratified,
    wilcoxon_rank_sum,
)

logger = logging.getLogger(__name__)

DEFAULT_DICTIONARIES: Tuple[str, ...] = ("GT", "MHWT", "ST", "GWST")
DEFAULT_SPARSE_MODES: Tuple[str, ...] = ("none", "group_lasso")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    dictionary: DictionaryConfig = field(default_factory=DictionaryConfig)
    dictionaries: Tuple[str, ...] = DEFAULT_DICTIONARIES
    sparse_modes: Tuple[str, ...] = DEFAULT_SPARSE_MODES
    solver: SolverConfig = field(default_factory=SolverConfig)
    classifiers: ClassifierSettings = field(default_factory=ClassifierSettings)
    per_group_features: bool = False
    repetitions: int = 20
    train_fraction: float = 0.7
    seed: int = 0
    snr_db: Tuple[Optional[float], ...] = ()
    compare: Tuple[str, str] = ("ST", "GWST")

    def __post_init__(self):
        if int(self.repetitions) != self.repetitions or self.repetitions < 1:
            raise ConfigurationError(f"experiment.repetitions must be a positive integer, got {self.repetitions}")
        if not (0.0 < self.train_fraction < 1.0):
            raise ConfigurationError(f"experiment.train_fraction must be in (0, 1), got {self.train_fraction}")
        unknown = [d for d in self.dictionaries if d.upper() not in PRESETS]
        if unknown or not self.dictionaries:
            raise ConfigurationError(f"experiment.dictionaries: unknown {unknown} (expected {sorted(PRESETS)})")
        bad_modes = [m for m in self.sparse_modes if m not in SPARSE_MODES]
        if bad_modes or not self.sparse_modes:
            raise ConfigurationError(f"experiment.sparse_modes: unknown {bad_modes} (expected {list(SPARSE_MODES)})")

    def to_dict(self) -> dict:
        return {
            'dataset': {
                'grid': self.dataset.grid.to_dict(),
                'fundamental_hz': self.dataset.fundamental_hz,
                'per_class': self.dataset.per_class,
                'ranges': self.dataset.ranges.to_dict(),
            },
            'dictionary': self.dictionary.to_dict(),
            'dictionaries': list(self.dictionaries),
            'sparse_modes': list(self.sparse_modes),
            'solver': self.solver.to_dict(),
            'classifiers': self.classifiers.to_dict(),
            'per_group_features': self.per_group_features,
            'repetitions': self.repetitions,
            'train_fraction': self.train_fraction,
            'seed': self.seed,
            'snr_db': [snr_tag(s) for s in self.snr_db],
            'compare': list(self.compare),
        }

    def config_hash(self) -> str:
        return sha256_of(self.to_dict())


class DictionaryStore:
    """Builds each preset dictionary once and keeps it for later runs"""

    def __init__(self, base: DictionaryConfig, dataset_config: DatasetConfig, cache_dir: Optional[str] = None):
        self.base = base
        self.dataset_config = dataset_config
        self.cache_dir = cache_dir
        self._built: Dict[str, Dictionary] = {}

    def get(self, name: str) -> Dictionary:
        key = name.upper()
        if key not in self._built:
            config = replace(self.base, kinds=PRESETS[key])
            self._built[key] = load_or_build(config, self.dataset_config.grid,
                                             self.dataset_config.fundamental_hz, self.cache_dir)
        return self._built[key]


# =============================================================================
# RESULT TYPES
# =============================================================================

@dataclass
class CellResult:
    dictionary: str
    sparse_mode: str
    classifier: str
    accuracies: List[float]
    mean: float
    std: float
    confusion_first: ConfusionMatrix
    confusion_pooled: ConfusionMatrix

    def to_dict(self) -> dict:
        return {
            'dictionary': self.dictionary,
            'sparse_mode': self.sparse_mode,
            'classifier': self.classifier,
            'accuracies': [float(a) for a in self.accuracies],
            'mean': self.mean,
            'std': self.std,
            'confusion_first': self.confusion_first.to_list(),
            'confusion_pooled': self.confusion_pooled.to_list(),
            'classes': list(self.confusion_first.classes),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CellResult":
        classes = tuple(data['classes'])
        return cls(
            dictionary=data['dictionary'], sparse_mode=data['sparse_mode'], classifier=data['classifier'],
            accuracies=list(data['accuracies']), mean=data['mean'], std=data['std'],
            confusion_first=ConfusionMatrix(np.asarray(data['confusion_first'], dtype=int), classes),
            confusion_pooled=ConfusionMatrix(np.asarray(data['confusion_pooled'], dtype=int), classes),
        )


@dataclass
class SparsitySummary:
    """Mean sparsity percentages per class, per group and overall, for one encoding"""
    dictionary: str
    sparse_mode: str
    group_names: List[str]
    per_class: Dict[str, Dict[str, float]]
    overall_per_class: Dict[str, float]
    max_rmse: float
    flagged: int
    unconverged: int

    def to_dict(self) -> dict:
        return {
            'dictionary': self.dictionary, 'sparse_mode': self.sparse_mode, 'group_names': list(self.group_names),
            'per_class': self.per_class, 'overall_per_class': self.overall_per_class,
            'max_rmse': self.max_rmse, 'flagged': self.flagged, 'unconverged': self.unconverged,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SparsitySummary":
        return cls(**data)


@dataclass
class ExperimentResult:
    config: dict
    config_hash: str
    seed: int
    snr_db: Optional[float]
    cells: List[CellResult]
    sparsity: List[SparsitySummary]
    wilcoxon: List[dict]
    test_counts: Dict[str, int]

    def cell(self, dictionary: str, sparse_mode: str, classifier: str) -> CellResult:
        for cell in self.cells:
            if (cell.dictionary, cell.sparse_mode, cell.classifier) == (dictionary, sparse_mode, classifier):
                return cell
        raise KeyError((dictionary, sparse_mode, classifier))

    def to_dict(self) -> dict:
        return {
            'config': self.config,
            'config_hash': self.config_hash,
            'seed': self.seed,
            'snr_db': snr_tag(self.snr_db),
            'cells': [c.to_dict() for c in self.cells],
            'sparsity': [s.to_dict() for s in self.sparsity],
            'wilcoxon': self.wilcoxon,
            'test_counts': self.test_counts,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentResult":
        snr = data.get('snr_db', 'clean')
        return cls(
            config=data['config'], config_hash=data['config_hash'], seed=data['seed'],
            snr_db=None if snr == 'clean' else float(snr),
            cells=[CellResult.from_dict(c) for c in data['cells']],
            sparsity=[SparsitySummary.from_dict(s) for s in data['sparsity']],
            wilcoxon=list(data['wilcoxon']), test_counts=dict(data['test_counts']),
        )


# =============================================================================
# PIPELINE
# =============================================================================

def _sparsity_summary(name: str, mode: str, encoded, labels: np.ndarray) -> SparsitySummary:
    per_class, overall = {}, {}
    for label in np.unique(labels):
        rows = labels == label
        code = DisturbanceClass(int(label)).code
        per_class[code] = {g: float(100.0 * np.mean(encoded.group_sparsity[rows, j]))
                           for j, g in enumerate(encoded.group_names)}
        overall[code] = float(100.0 * np.mean(encoded.overall_sparsity[rows]))
    return SparsitySummary(
        dictionary=name, sparse_mode=mode, group_names=list(encoded.group_names), per_class=per_class,
        overall_per_class=overall, max_rmse=float(np.max(encoded.rmse)),
        flagged=int(np.sum(encoded.flagged)) if mode != "none" else 0,
        unconverged=int(np.sum(~encoded.converged)),
    )


def encode_features(config: ExperimentConfig, dataset: Dataset, store: DictionaryStore, jobs: int = 1,
                    show_progress: bool = False) -> Tuple[Dict[Tuple[str, str], np.ndarray], List[SparsitySummary]]:
    """Feature matrix for every (dictionary, sparse mode), each signal encoded exactly once"""
    features: Dict[Tuple[str, str], np.ndarray] = {}
    summaries: List[SparsitySummary] = []
    for name in config.dictionaries:
        dictionary = store.get(name)
        group_slices = [g.columns for g in dictionary.groups]
        for mode in config.sparse_modes:
            try:
                encoded = encode_dataset(dataset, dictionary, mode, config.solver, jobs=jobs,
                                         dictionary_name=name, show_progress=show_progress)
                features[(name, mode)] = extract_feature_matrix(encoded.coefficients, config.per_group_features,
                                                                group_slices)
            except PQSparseError as e:
                raise ExperimentError(f"encoding {name}/{mode} failed: {e}") from e
            summaries.append(_sparsity_summary(name, mode, encoded, dataset.labels))
    return features, summaries


def run_experiment(config: ExperimentConfig, dataset: Optional[Dataset] = None, jobs: int = 1,
                   store: Optional[DictionaryStore] = None, cache_dir: Optional[str] = None,
                   show_progress: bool = False) -> ExperimentResult:
    """
    Run the repetition protocol for every configured dictionary, sparse mode and classifier.

    Args:
        config: Experiment settings
        dataset: Signals to use; generated from config.dataset and config.seed when omitted
        jobs: Worker processes for encoding
        store: Prebuilt dictionaries to reuse
        cache_dir: Directory for the dictionary cache when no store is given
        show_progress: Draw progress bars while encoding

    Returns:
        ExperimentResult with one cell per (dictionary, sparse mode, classifier)
    """
    if dataset is None:
        dataset = generate_dataset(config.dataset, config.seed)
    store = store or DictionaryStore(config.dictionary, config.dataset, cache_dir)
    labels = dataset.labels
    classes = tuple(int(c) for c in np.unique(labels))

    features, sparsity = encode_features(config, dataset, store, jobs, show_progress)

    names = config.classifiers.names
    keys = [(d, m) for d in config.dictionaries for m in config.sparse_modes]
    accuracies = {(d, m, c): [] for d, m in keys for c in names}
    matrices = {(d, m, c): [] for d, m in keys for c in names}
    test_counts: Dict[str, int] = {}

    for rep in range(config.repetitions):
        train_rows, test_rows = split_stratified(labels, config.train_fraction, substream(config.seed, "split", rep))
        if rep == 0:
            test_counts = {DisturbanceClass(int(c)).code: int(np.sum(labels[test_rows] == c)) for c in classes}
        for dictionary_name, mode in keys:
            matrix = features[(dictionary_name, mode)]
            try:
                normalizer = zscore_fit(matrix[train_rows])
            except PQSparseError as e:
                raise ExperimentError(f"{dictionary_name}/{mode}: {e}", rep) from e
            train = LabeledFeatureSet(normalizer.apply(matrix[train_rows]), labels[train_rows])
            queries = normalizer.apply(matrix[test_rows])
            for classifier_name in names:
                try:
                    seed = (derive_seed(config.seed, classifier_name.lower(), rep, dictionary_name, mode)
                            if classifier_name in SEEDED else 0)
                    model = make_classifier(classifier_name, config.classifiers, seed).fit(train)
                    predictions = model.predict(queries)
                except PQSparseError as e:
                    raise ExperimentError(f"{dictionary_name}/{mode}: {e}", rep, classifier_name) from e
                key = (dictionary_name, mode, classifier_name)
                accuracies[key].append(accuracy(predictions, labels[test_rows]))
                matrices[key].append(confusion(predictions, labels[test_rows], classes))
                logger.debug(f"rep {rep} {dictionary_name}/{mode}/{classifier_name}: {accuracies[key][-1]:.4f}")
        logger.info(f"Repetition {rep + 1}/{config.repetitions} done")

    cells = []
    for key in accuracies:
        mean, std = mean_std(accuracies[key])
        cells.append(CellResult(*key, accuracies=accuracies[key], mean=mean, std=std,
                                confusion_first=matrices[key][0], confusion_pooled=pooled_confusion(matrices[key])))

    return ExperimentResult(
        config=config.to_dict(),
        config_hash=config.config_hash(),
        seed=config.seed,
        snr_db=dataset.snr_db,
        cells=cells,
        sparsity=sparsity,
        wilcoxon=_compare_dictionaries(config, accuracies),
        test_counts=test_counts,
    )


def _compare_dictionaries(config: ExperimentConfig, accuracies: Dict[Tuple[str, str, str], List[float]]) -> List[dict]:
    first, second = config.compare
    if first not in config.dictionaries or second not in config.dictionaries:
        return []
    rows = []
    for mode in config.sparse_modes:
        for classifier_name in config.classifiers.names:
            test = wilcoxon_rank_sum(accuracies[(first, mode, classifier_name)],
                                     accuracies[(second, mode, classifier_name)])
            rows.append({'sparse_mode': mode, 'classifier': classifier_name, 'a': first, 'b': second,
                         **test.to_dict()})
    return rows


# =============================================================================
# NOISE SWEEP
# =============================================================================

SnrValue = Union[None, float, str]


def parse_snr(value: SnrValue) -> Optional[float]:
    """None, 'clean' or +inf mean no noise"""
    if value is None:
        return None
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("clean", "none", "inf", "+inf"):
            return None
        try:
            value = float(text)
        except ValueError:
            raise ConfigurationError(f"invalid SNR value '{value}'") from None
    value = float(value)
    return None if value == float("inf") else value


@dataclass
class SweepResult:
    rows: List[dict]
    results: Dict[str, ExperimentResult]


def snr_sweep(config: ExperimentConfig, snr_list: Sequence[SnrValue], dataset: Optional[Dataset] = None,
              jobs: int = 1, store: Optional[DictionaryStore] = None, cache_dir: Optional[str] = None,
              show_progress: bool = False) -> SweepResult:
    """
    Re-run the experiment on noisy copies of the dataset, one per SNR.

    Rows carry (snr_db, dictionary, sparse_mode, classifier, mean_accuracy);
    the clean sentinel reproduces run_experiment exactly.
    """
    if not snr_list:
        raise ConfigurationError("snr_list must not be empty")
    if dataset is None:
        dataset = generate_dataset(config.dataset, config.seed)
    store = store or DictionaryStore(config.dictionary, config.dataset, cache_dir)

    rows, results = [], {}
    for value in snr_list:
        snr = parse_snr(value)
        tag = snr_tag(snr)
        noisy = add_noise_to_dataset(dataset, snr, config.seed)
        logger.info(f"SNR {tag}: running {config.repetitions} repetitions")
        result = run_experiment(config, noisy, jobs=jobs, store=store, show_progress=show_progress)
        results[tag] = result
        for cell in result.cells:
            rows.append({'snr_db': tag, 'dictionary': cell.dictionary, 'sparse_mode': cell.sparse_mode,
                         'classifier': cell.classifier, 'mean_accuracy': cell.mean})
    return SweepResult(rows=rows, results=results)
