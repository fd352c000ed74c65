"""
Encode whole datasets over a dictionary and export coefficient files.

Sparse modes:
    none         minimum-norm least squares (dense baseline)
    group_lasso  shooting solver over the dictionary groups
    lasso        shooting solver with one group per atom

Per-signal solves are independent; with ``jobs > 1`` they run in worker
processes and come back in dataset order, so results do not depend on the
number of workers.
"""

import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from rich.progress import Progress

from ..exceptions import DatasetError, ValidationError
from ..io_utils import atomic_write_bytes, atomic_write_json, atomic_write_text, load_json
from ..logging_setup import console
from ..signals.dataset import Dataset
from .atoms import Dictionary
from .group_lasso import (
    Coefficients,
    GroupLassoSolver,
    SolverConfig,
    least_squares_fit_many,
    singleton_groups,
)

logger = logging.getLogger(__name__)

SPARSE_MODES = ("none", "group_lasso", "lasso")
RMSE_TARGET = 1e-3

COEFFICIENTS_FILE = "coefficients.npz"
SUMMARY_FILE = "summary.csv"
SPARSE_FILE = "sparse_coefficients.csv"
HEADER_FILE = "header.json"


@dataclass
class EncodedDataset:
    dictionary_name: str
    sparse_mode: str
    coefficients: np.ndarray
    labels: np.ndarray
    signal_ids: List[str]
    rmse: np.ndarray
    sweeps: np.ndarray
    converged: np.ndarray
    group_names: Tuple[str, ...]
    group_sparsity: np.ndarray
    header: Dict = field(default_factory=dict)

    def __len__(self):
        return self.coefficients.shape[0]

    @property
    def flagged(self) -> np.ndarray:
        """Signals whose reconstruction misses the RMSE target"""
        return self.rmse >= RMSE_TARGET

    @property
    def overall_sparsity(self) -> np.ndarray:
        threshold = self.header.get('sparsity_threshold', 1e-4)
        return np.mean(np.abs(self.coefficients) < threshold, axis=1)

    def coefficient_vector(self, index: int) -> Coefficients:
        return Coefficients(self.coefficients[index], self.header.get('dictionary_hash'))


def _group_sparsity(dictionary: Dictionary, coefficients: np.ndarray, threshold: float) -> np.ndarray:
    small = np.abs(coefficients) < threshold
    return np.column_stack([small[:, g.columns].mean(axis=1) for g in dictionary.groups])


def encode_dataset(dataset: Dataset, dictionary: Dictionary, sparse_mode: str = "group_lasso",
                   solver_config: Optional[SolverConfig] = None, jobs: int = 1,
                   dictionary_name: str = "", show_progress: bool = False) -> EncodedDataset:
    """
    Compute β for every signal in the dataset.

    Args:
        dataset: Signals on the dictionary's grid
        dictionary: Grouped dictionary
        sparse_mode: One of SPARSE_MODES
        solver_config: Shooting settings (also supplies the sparsity threshold)
        jobs: Worker processes for the shooting modes
        dictionary_name: Label recorded with the result
        show_progress: Draw a rich progress bar

    Returns:
        EncodedDataset with rows in dataset order
    """
    if sparse_mode not in SPARSE_MODES:
        raise ValidationError("sparse_mode", f"must be one of {SPARSE_MODES}, got '{sparse_mode}'")
    if dataset.grid != dictionary.grid:
        raise ValidationError("grid", f"dataset grid {dataset.grid} differs from dictionary grid {dictionary.grid}")
    if len(dataset) == 0:
        raise ValidationError("dataset", "no signals to encode")
    config = solver_config or SolverConfig()
    signals = dataset.matrix
    n_signals = signals.shape[0]

    if sparse_mode == "none":
        coefficients = least_squares_fit_many(dictionary, signals)
        residual = signals - coefficients @ dictionary.matrix.T
        rmse = np.linalg.norm(residual, axis=1) / math.sqrt(signals.shape[1])
        sweeps = np.zeros(n_signals, dtype=int)
        converged = np.ones(n_signals, dtype=bool)
    else:
        groups = singleton_groups(dictionary) if sparse_mode == "lasso" else None
        solver = GroupLassoSolver(dictionary, config, groups=groups)
        results = _run_solver(solver, signals, jobs, show_progress, f"{dictionary_name or 'dictionary'}/{sparse_mode}")
        coefficients = np.vstack([r[0] for r in results])
        rmse = np.array([r[1] for r in results])
        sweeps = np.array([r[2] for r in results], dtype=int)
        converged = np.array([r[3] for r in results], dtype=bool)

    encoded = EncodedDataset(
        dictionary_name=dictionary_name,
        sparse_mode=sparse_mode,
        coefficients=coefficients,
        labels=dataset.labels,
        signal_ids=[s.signal_id for s in dataset.signals],
        rmse=rmse,
        sweeps=sweeps,
        converged=converged,
        group_names=tuple(g.name for g in dictionary.groups),
        group_sparsity=_group_sparsity(dictionary, coefficients, config.sparsity_threshold),
        header={
            'dictionary': dictionary_name,
            'dictionary_hash': dictionary.config_hash,
            'normalized': dictionary.normalized,
            'sparse_mode': sparse_mode,
            'solver': config.to_dict(),
            'sparsity_threshold': config.sparsity_threshold,
            'n_atoms': dictionary.n_atoms,
            'groups': [[g.name, g.start, g.stop] for g in dictionary.groups],
            'snr_db': dataset.snr_db,
        },
    )
    n_flagged = int(np.sum(encoded.flagged))
    if sparse_mode != "none" and n_flagged:
        logger.warning(f"{n_flagged} of {n_signals} signals reconstruct with RMSE >= {RMSE_TARGET:g}")
    logger.info(f"Encoded {n_signals} signals ({dictionary_name or 'dictionary'}, {sparse_mode}): "
                f"max RMSE {float(np.max(rmse)):.3e}, mean sparsity {float(np.mean(encoded.overall_sparsity)):.4f}")
    return encoded


def _solve_batch(solver: GroupLassoSolver, batch: np.ndarray) -> List[Tuple[np.ndarray, float, int, bool]]:
    results = []
    for values in batch:
        beta, report = solver.solve(values)
        results.append((beta.values, report.reconstruction_rmse, report.sweeps_used, report.converged))
    return results


def _run_solver(solver: GroupLassoSolver, signals: np.ndarray, jobs: int, show_progress: bool,
                description: str) -> List[Tuple[np.ndarray, float, int, bool]]:
    n_signals = signals.shape[0]
    # solver and dictionary are pickled once per batch
    n_batches = min(n_signals, 4 * jobs) if jobs > 1 else n_signals
    batches = np.array_split(signals, n_batches)
    results = []
    with Progress(console=console, disable=not show_progress, transient=True) as progress:
        task = progress.add_task(f"Encoding {description}", total=n_signals)
        if jobs > 1:
            parallel = Parallel(n_jobs=jobs, return_as="generator")
            for batch_results in parallel(delayed(_solve_batch)(solver, batch) for batch in batches):
                results.extend(batch_results)
                progress.advance(task, len(batch_results))
        else:
            for batch in batches:
                results.extend(_solve_batch(solver, batch))
                progress.advance(task, len(batch))
    return results


# =============================================================================
# EXPORT
# =============================================================================

def coefficients_frame(dictionary: Dictionary, beta: Union[Coefficients, np.ndarray]) -> pd.DataFrame:
    """One row per atom: column, group, atom index fields and value"""
    values = beta.values if isinstance(beta, Coefficients) else np.asarray(beta, dtype=float)
    if values.shape != (dictionary.n_atoms,):
        raise ValidationError("beta", f"expected {dictionary.n_atoms} coefficients, got shape {values.shape}")
    owner = dictionary.group_of_column()
    atoms = dictionary.atom_indices
    rows = []
    for j in range(dictionary.n_atoms):
        atom = atoms[j] if atoms else None
        rows.append({
            'column': j,
            'group': dictionary.groups[owner[j]].name,
            'kind': atom.kind.value if atom else None,
            'k': atom.harmonic_k if atom else None,
            'l': atom.location_l if atom else None,
            'v': atom.scale_v if atom else None,
            'phase': atom.phase if atom else None,
            'value': values[j],
        })
    return pd.DataFrame(rows)


def sparse_entries(encoded: EncodedDataset, threshold: Optional[float] = None) -> pd.DataFrame:
    """(signal_id, index, value) for every |β_i| >= threshold"""
    threshold = encoded.header.get('sparsity_threshold', 1e-4) if threshold is None else threshold
    rows, cols = np.nonzero(np.abs(encoded.coefficients) >= threshold)
    return pd.DataFrame({
        'signal_id': [encoded.signal_ids[i] for i in rows],
        'index': cols,
        'value': encoded.coefficients[rows, cols],
    })


def summary_frame(encoded: EncodedDataset) -> pd.DataFrame:
    frame = pd.DataFrame({
        'signal_id': encoded.signal_ids,
        'label': encoded.labels,
        'rmse': encoded.rmse,
        'flagged': encoded.flagged,
        'sweeps': encoded.sweeps,
        'converged': encoded.converged,
        'sparsity': encoded.overall_sparsity,
    })
    for g, name in enumerate(encoded.group_names):
        frame[f"sparsity_{name}"] = encoded.group_sparsity[:, g]
    return frame


def write_encoded(encoded: EncodedDataset, out_dir: Union[str, Path], config_hash: Optional[str] = None) -> Path:
    """Write header.json, summary.csv, coefficients.npz and (sparse modes) sparse_coefficients.csv"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    buffer = io.BytesIO()
    np.savez(buffer, coefficients=encoded.coefficients, labels=encoded.labels,
             rmse=encoded.rmse, sweeps=encoded.sweeps, converged=encoded.converged,
             group_sparsity=encoded.group_sparsity)
    atomic_write_bytes(out_dir / COEFFICIENTS_FILE, buffer.getvalue())
    atomic_write_text(out_dir / SUMMARY_FILE, summary_frame(encoded).to_csv(index=False, float_format="%.10g"))
    files = {'coefficients': COEFFICIENTS_FILE, 'summary': SUMMARY_FILE}
    if encoded.sparse_mode != "none":
        atomic_write_text(out_dir / SPARSE_FILE, sparse_entries(encoded).to_csv(index=False, float_format="%.17g"))
        files['sparse'] = SPARSE_FILE
    header = dict(encoded.header, config_hash=config_hash, files=files,
                  signal_ids=list(encoded.signal_ids), group_names=list(encoded.group_names))
    path = atomic_write_json(out_dir / HEADER_FILE, header)
    logger.info(f"Coefficients written to {out_dir}")
    return path


def read_encoded(path: Union[str, Path]) -> EncodedDataset:
    path = Path(path)
    header_path = path / HEADER_FILE if path.is_dir() else path
    if not header_path.exists():
        raise DatasetError(f"coefficient header not found: {header_path}")
    header = load_json(header_path)
    data_path = header_path.parent / header['files']['coefficients']
    if not data_path.exists():
        raise DatasetError(f"coefficient file not found: {data_path}")
    with np.load(data_path, allow_pickle=False) as data:
        arrays = {name: data[name] for name in data.files}
    signal_ids = header.pop('signal_ids')
    group_names = tuple(header.pop('group_names'))
    if arrays['coefficients'].shape[0] != len(signal_ids):
        raise DatasetError(f"{data_path}: {arrays['coefficients'].shape[0]} rows for {len(signal_ids)} signal ids")
    return EncodedDataset(
        dictionary_name=header.get('dictionary', ""),
        sparse_mode=header['sparse_mode'],
        coefficients=arrays['coefficients'],
        labels=arrays['labels'],
        signal_ids=signal_ids,
        rmse=arrays['rmse'],
        sweeps=arrays['sweeps'],
        converged=arrays['converged'],
        group_names=group_names,
        group_sparsity=arrays['group_sparsity'],
        header=header,
    )
