"""
Labeled datasets of synthetic disturbances and their CSV / JSON manifest files.

CSV layout, one row per signal:
    signal_id, label, params (key=value;...), seed_trace, y0, y1, ..., y{N-1}
Floats are written with repr() so a write/read cycle is bit-exact.
"""

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np

from ..exceptions import DatasetError, ValidationError
from ..io_utils import atomic_write_json, atomic_write_text, file_sha256, load_json
from ..streams import seed_trace, substream
from .disturbances import (
    DEFAULT_FUNDAMENTAL_HZ,
    DEFAULT_RANGES,
    LABELED_CLASSES,
    DisturbanceClass,
    DisturbanceParams,
    DisturbanceRanges,
    SamplingGrid,
    Signal,
    add_awgn,
    generate_disturbance,
    sample_params,
)

logger = logging.getLogger(__name__)

SIGNALS_FILE = "signals.csv"
MANIFEST_FILE = "manifest.json"


@dataclass(frozen=True)
class DatasetConfig:
    grid: SamplingGrid = field(default_factory=SamplingGrid)
    fundamental_hz: float = DEFAULT_FUNDAMENTAL_HZ
    per_class: int = 190
    ranges: DisturbanceRanges = DEFAULT_RANGES

    def __post_init__(self):
        if int(self.per_class) != self.per_class or self.per_class < 1:
            raise ValidationError("per_class", f"must be a positive integer, got {self.per_class}")


@dataclass
class Dataset:
    grid: SamplingGrid
    fundamental_hz: float
    seed: Optional[int]
    signals: List[Signal]
    snr_db: Optional[float] = None

    def __len__(self):
        return len(self.signals)

    @property
    def labels(self) -> np.ndarray:
        return np.array([int(s.label) for s in self.signals], dtype=int)

    @property
    def matrix(self) -> np.ndarray:
        """Signals stacked as rows, shape (P, N)"""
        if not self.signals:
            return np.zeros((0, self.grid.n_samples))
        return np.vstack([s.values for s in self.signals])

    def class_counts(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for s in self.signals:
            counts[s.label.code] = counts.get(s.label.code, 0) + 1
        return counts


def generate_dataset(config: DatasetConfig, seed: int) -> Dataset:
    """Exactly ``per_class`` signals for each of the seven classes, deterministic given seed"""
    signals = []
    for disturbance in LABELED_CLASSES:
        for index in range(config.per_class):
            names = ("dataset", int(disturbance), index)
            rng = substream(seed, *names)
            params = sample_params(disturbance, rng, config.grid, config.fundamental_hz, config.ranges)
            signals.append(generate_disturbance(
                disturbance, params, config.grid, config.fundamental_hz, config.ranges,
                seed_trace=seed_trace(seed, *names),
                signal_id=f"{disturbance.code}-{index:04d}",
            ))
    logger.info(f"Generated {len(signals)} signals ({config.per_class} per class, seed {seed})")
    return Dataset(grid=config.grid, fundamental_hz=config.fundamental_hz, seed=seed, signals=signals)


def snr_tag(snr_db: Optional[float]) -> str:
    return "clean" if snr_db is None or snr_db == float("inf") else f"{float(snr_db):g}"


def add_noise_to_dataset(dataset: Dataset, snr_db: Optional[float], seed: int) -> Dataset:
    """Corrupt every signal at one SNR using one noise substream per signal"""
    tag = snr_tag(snr_db)
    noisy = [add_awgn(signal, snr_db, substream(seed, "noise", tag, index))
             for index, signal in enumerate(dataset.signals)]
    return Dataset(grid=dataset.grid, fundamental_hz=dataset.fundamental_hz, seed=dataset.seed,
                   signals=noisy, snr_db=None if tag == "clean" else float(snr_db))


# =============================================================================
# CSV / MANIFEST
# =============================================================================

def dataset_to_csv(dataset: Dataset) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    header = ['signal_id', 'label', 'params', 'seed_trace']
    header += [f"y{n}" for n in range(dataset.grid.n_samples)]
    writer.writerow(header)
    for signal in dataset.signals:
        params = signal.params.to_pairs() if signal.params is not None else ""
        row = [signal.signal_id, signal.label.code if signal.label is not None else "",
               params, signal.seed_trace or ""]
        row += [repr(float(v)) for v in signal.values]
        writer.writerow(row)
    return buffer.getvalue()


def write_dataset(dataset: Dataset, out_dir: Union[str, Path], config_hash: Optional[str] = None) -> Path:
    """Write signals.csv and manifest.json into out_dir; returns the manifest path"""
    if not dataset.signals:
        raise DatasetError("refusing to write an empty dataset")
    out_dir = Path(out_dir)
    csv_path = atomic_write_text(out_dir / SIGNALS_FILE, dataset_to_csv(dataset))
    manifest = {
        'grid': dataset.grid.to_dict(),
        'fundamental_hz': dataset.fundamental_hz,
        'seed': dataset.seed,
        'snr_db': dataset.snr_db,
        'per_class': dataset.class_counts(),
        'n_signals': len(dataset),
        'files': {'signals': SIGNALS_FILE},
        'signals_sha256': file_sha256(csv_path),
        'config_hash': config_hash,
    }
    manifest_path = atomic_write_json(out_dir / MANIFEST_FILE, manifest)
    logger.info(f"Dataset written: {csv_path} ({len(dataset)} signals)")
    return manifest_path


def read_dataset(path: Union[str, Path]) -> Dataset:
    """Load a dataset from its manifest (or the directory holding it)"""
    path = Path(path)
    manifest_path = path / MANIFEST_FILE if path.is_dir() else path
    if not manifest_path.exists():
        raise DatasetError(f"dataset manifest not found: {manifest_path}")
    manifest = load_json(manifest_path)
    grid = SamplingGrid(**manifest['grid'])
    csv_path = manifest_path.parent / manifest['files']['signals']
    if not csv_path.exists():
        raise DatasetError(f"signals file not found: {csv_path}")

    signals = []
    with open(csv_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:4] != ['signal_id', 'label', 'params', 'seed_trace']:
            raise DatasetError(f"{csv_path}: unexpected header")
        for line_number, row in enumerate(reader, start=2):
            if len(row) != 4 + grid.n_samples:
                raise DatasetError(f"{csv_path}:{line_number}: expected {4 + grid.n_samples} columns, got {len(row)}")
            signal_id, label, params, trace = row[:4]
            try:
                signals.append(Signal(
                    grid=grid,
                    values=np.array([float(v) for v in row[4:]]),
                    label=DisturbanceClass.from_code(label) if label else None,
                    params=DisturbanceParams.from_pairs(params) if params else None,
                    seed_trace=trace or None,
                    signal_id=signal_id,
                ))
            except ValueError as e:
                raise DatasetError(f"{csv_path}:{line_number}: {e}") from e

    if len(signals) != manifest.get('n_signals', len(signals)):
        raise DatasetError(f"{csv_path}: manifest lists {manifest['n_signals']} signals, file has {len(signals)}")
    logger.info(f"Read {len(signals)} signals from {csv_path}")
    return Dataset(grid=grid, fundamental_hz=manifest['fundamental_hz'], seed=manifest.get('seed'),
                   signals=signals, snr_db=manifest.get('snr_db'))
