"""
Time-frequency and time-scale atom dictionaries.

Atoms are evaluated on the physical sample times t_n of a SamplingGrid:

    Harmonics  cos(2π k f_o t), sin(2π k f_o t)                        k = 1..K
    Gabor      g(t - m_l; σ) cos(2π f_k (t - m_l))                     (k, l)
    Mexican    2/(sqrt(3 σ_ν) π^(1/4)) [1 - d²/σ_ν²] exp(-d²/2σ_ν²)    (l, ν)
    Stockwell  g(t - m_l; σ_ν) cos(2π f_k (t - m_l))                   (k, l, ν)

with g(d; σ) = exp(-d²/2σ²) / sqrt(2πσ²), f_k = k f_o, m_l = l m_o (l = 1..L,
L = floor(duration / m_o)) and σ_ν = ν σ_o. Blocks are stacked into a grouped
Dictionary whose matrix is Fortran-ordered so every group is a contiguous
column slice.
"""

import hashlib
import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass, fields, replace
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..exceptions import ConfigurationError, NumericalError, ValidationError
from ..io_utils import sha256_of
from ..signals.disturbances import DEFAULT_FUNDAMENTAL_HZ, SamplingGrid

logger = logging.getLogger(__name__)


class DictionaryKind(str, Enum):
    HARMONICS = "harmonics"
    GT = "gt"
    MHWT = "mhwt"
    ST = "st"


_KIND_CODES = {DictionaryKind.HARMONICS: 0, DictionaryKind.GT: 1, DictionaryKind.MHWT: 2, DictionaryKind.ST: 3}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}


@dataclass(frozen=True)
class AtomIndex:
    kind: DictionaryKind
    harmonic_k: Optional[int] = None
    location_l: Optional[int] = None
    scale_v: Optional[int] = None
    phase: Optional[str] = None

    def __post_init__(self):
        required = {
            DictionaryKind.HARMONICS: ('harmonic_k', 'phase'),
            DictionaryKind.GT: ('harmonic_k', 'location_l'),
            DictionaryKind.MHWT: ('location_l', 'scale_v'),
            DictionaryKind.ST: ('harmonic_k', 'location_l', 'scale_v'),
        }[self.kind]
        for name in ('harmonic_k', 'location_l', 'scale_v', 'phase'):
            present = getattr(self, name) is not None
            if present != (name in required):
                raise ValidationError(name, f"{'required' if name in required else 'not allowed'} for {self.kind.value} atoms")
        if self.phase is not None and self.phase not in ('cos', 'sin'):
            raise ValidationError('phase', f"must be 'cos' or 'sin', got {self.phase}")

    def to_row(self) -> Tuple[int, int, int, int, int]:
        phase = -1 if self.phase is None else (0 if self.phase == 'cos' else 1)
        return (_KIND_CODES[self.kind],
                -1 if self.harmonic_k is None else self.harmonic_k,
                -1 if self.location_l is None else self.location_l,
                -1 if self.scale_v is None else self.scale_v,
                phase)

    @classmethod
    def from_row(cls, row) -> "AtomIndex":
        kind, k, l, v, phase = (int(x) for x in row)
        return cls(kind=_CODE_KINDS[kind],
                   harmonic_k=None if k < 0 else k,
                   location_l=None if l < 0 else l,
                   scale_v=None if v < 0 else v,
                   phase=None if phase < 0 else ('cos', 'sin')[phase])

    def label(self) -> str:
        parts = [self.kind.value]
        if self.harmonic_k is not None:
            parts.append(f"k={self.harmonic_k}")
        if self.location_l is not None:
            parts.append(f"l={self.location_l}")
        if self.scale_v is not None:
            parts.append(f"v={self.scale_v}")
        if self.phase is not None:
            parts.append(self.phase)
        return ":".join(parts)


@dataclass(frozen=True, eq=False)
class DictionaryBlock:
    kind: DictionaryKind
    grid: SamplingGrid
    matrix: np.ndarray
    atom_indices: Tuple[AtomIndex, ...]
    column_scales: np.ndarray
    warnings: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.grid.n_samples:
            raise ValidationError("matrix", f"expected {self.grid.n_samples} rows, got shape {self.matrix.shape}")
        if self.matrix.shape[1] != len(self.atom_indices) or self.column_scales.shape != (self.matrix.shape[1],):
            raise ValidationError("atom_indices", "one atom index and one scale per column required")
        if not np.all(np.isfinite(self.matrix)):
            raise NumericalError(f"{self.kind.value} block has non-finite entries")

    @property
    def width(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class GroupSlice:
    name: str
    start: int
    stop: int

    @property
    def size(self) -> int:
        return self.stop - self.start

    @property
    def columns(self) -> slice:
        return slice(self.start, self.stop)


@dataclass(frozen=True, eq=False)
class Dictionary:
    grid: SamplingGrid
    blocks: Tuple[DictionaryBlock, ...]
    matrix: np.ndarray
    groups: Tuple[GroupSlice, ...]
    column_scales: np.ndarray
    normalized: bool = False
    config_hash: Optional[str] = None

    @property
    def n_atoms(self) -> int:
        return self.matrix.shape[1]

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @property
    def group_sizes(self) -> Tuple[int, ...]:
        return tuple(g.size for g in self.groups)

    @property
    def is_overcomplete(self) -> bool:
        return self.n_atoms > self.grid.n_samples

    def group_matrix(self, g: int) -> np.ndarray:
        return self.matrix[:, self.groups[g].columns]

    @cached_property
    def atom_indices(self) -> Tuple[AtomIndex, ...]:
        return tuple(atom for block in self.blocks for atom in block.atom_indices)

    @cached_property
    def _column_lookup(self) -> Dict[AtomIndex, int]:
        return {atom: j for j, atom in enumerate(self.atom_indices)}

    def column_of(self, atom: AtomIndex) -> int:
        try:
            return self._column_lookup[atom]
        except KeyError:
            raise ValidationError("atom", f"{atom.label()} is not in this dictionary") from None

    def group_of_column(self) -> np.ndarray:
        owner = np.empty(self.n_atoms, dtype=int)
        for g, group in enumerate(self.groups):
            owner[group.columns] = g
        return owner


# =============================================================================
# ATOM BUILDERS
# =============================================================================

def _locations(grid: SamplingGrid, m_o: float) -> np.ndarray:
    if not (m_o > 0):
        raise ConfigurationError(f"location step m_o must be positive, got {m_o}")
    n_locations = int(math.floor(grid.duration / m_o + 1e-9))
    if n_locations < 1:
        raise ConfigurationError(f"location step {m_o} s leaves no atom inside {grid.duration} s")
    return np.arange(1, n_locations + 1) * m_o


def _frequencies(fundamental_hz: float, n_harmonics: int) -> np.ndarray:
    if n_harmonics < 1:
        raise ConfigurationError(f"number of harmonics must be >= 1, got {n_harmonics}")
    return np.arange(1, n_harmonics + 1) * fundamental_hz


def _nyquist_warnings(kind: DictionaryKind, grid: SamplingGrid, freqs: np.ndarray) -> Tuple[str, ...]:
    nyquist = grid.sample_rate / 2.0
    aliased = freqs[freqs > nyquist]
    if aliased.size == 0:
        return ()
    message = (f"{kind.value}: {aliased.size} of {freqs.size} frequencies exceed Nyquist "
               f"({nyquist:g} Hz, first {aliased[0]:g} Hz); atoms built anyway and will alias")
    logger.warning(message)
    return (message,)


def _gaussian_cosine(t: np.ndarray, centers: np.ndarray, freqs: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian-windowed cosines, shape (N, K, L)"""
    offset = t[:, None, None] - centers[None, None, :]
    envelope = np.exp(-offset ** 2 / (2.0 * sigma ** 2)) / math.sqrt(2.0 * math.pi * sigma ** 2)
    return envelope * np.cos(2.0 * np.pi * freqs[None, :, None] * offset)


def build_harmonics(grid: SamplingGrid, fundamental_hz: float, n_harmonics: int) -> DictionaryBlock:
    """2K columns: cos and sin of each of the first K harmonics"""
    freqs = _frequencies(fundamental_hz, n_harmonics)
    phase = 2.0 * np.pi * grid.times[:, None] * freqs[None, :]
    matrix = np.empty((grid.n_samples, 2 * n_harmonics))
    matrix[:, 0::2] = np.cos(phase)
    matrix[:, 1::2] = np.sin(phase)
    atoms = tuple(AtomIndex(DictionaryKind.HARMONICS, harmonic_k=k, phase=p)
                  for k in range(1, n_harmonics + 1) for p in ('cos', 'sin'))
    return DictionaryBlock(DictionaryKind.HARMONICS, grid, matrix, atoms, np.ones(matrix.shape[1]),
                           _nyquist_warnings(DictionaryKind.HARMONICS, grid, freqs))


def build_gabor(grid: SamplingGrid, fundamental_hz: float, n_harmonics: int, m_o: float, sigma: float) -> DictionaryBlock:
    """K*L Gabor atoms, column (k, l) at index (k-1)*L + (l-1)"""
    if not (sigma > 0):
        raise ConfigurationError(f"Gabor sigma must be positive, got {sigma}")
    centers = _locations(grid, m_o)
    freqs = _frequencies(fundamental_hz, n_harmonics)
    matrix = _gaussian_cosine(grid.times, centers, freqs, sigma).reshape(grid.n_samples, -1)
    atoms = tuple(AtomIndex(DictionaryKind.GT, harmonic_k=k, location_l=l)
                  for k in range(1, n_harmonics + 1) for l in range(1, centers.size + 1))
    return DictionaryBlock(DictionaryKind.GT, grid, matrix, atoms, np.ones(matrix.shape[1]),
                           _nyquist_warnings(DictionaryKind.GT, grid, freqs))


def build_mhwt(grid: SamplingGrid, n_scales: int, m_o: float, sigma_o: float) -> DictionaryBlock:
    """V*L Mexican-hat wavelets, column (l, ν) at index (ν-1)*L + (l-1)"""
    if n_scales < 1 or not (sigma_o > 0):
        raise ConfigurationError(f"MHWT needs V >= 1 and sigma_o > 0, got V={n_scales}, sigma_o={sigma_o}")
    centers = _locations(grid, m_o)
    offset = grid.times[:, None] - centers[None, :]
    columns = []
    for v in range(1, n_scales + 1):
        sigma_v = v * sigma_o
        amplitude = 2.0 / (math.sqrt(3.0 * sigma_v) * math.pi ** 0.25)
        ratio = offset ** 2 / sigma_v ** 2
        columns.append(amplitude * (1.0 - ratio) * np.exp(-ratio / 2.0))
    matrix = np.hstack(columns)
    atoms = tuple(AtomIndex(DictionaryKind.MHWT, location_l=l, scale_v=v)
                  for v in range(1, n_scales + 1) for l in range(1, centers.size + 1))
    return DictionaryBlock(DictionaryKind.MHWT, grid, matrix, atoms, np.ones(matrix.shape[1]))


def build_stockwell(grid: SamplingGrid, fundamental_hz: float, n_harmonics: int, n_scales: int,
                    m_o: float, sigma_o: float) -> DictionaryBlock:
    """K*V*L Stockwell atoms, column (k, l, ν) at index ((k-1)*V + (ν-1))*L + (l-1)"""
    if n_scales < 1 or not (sigma_o > 0):
        raise ConfigurationError(f"ST needs V >= 1 and sigma_o > 0, got V={n_scales}, sigma_o={sigma_o}")
    centers = _locations(grid, m_o)
    freqs = _frequencies(fundamental_hz, n_harmonics)
    # (N, K, V, L); each scale uses the same helper as the Gabor block
    cube = np.stack([_gaussian_cosine(grid.times, centers, freqs, v * sigma_o)
                     for v in range(1, n_scales + 1)], axis=2)
    matrix = cube.reshape(grid.n_samples, -1)
    atoms = tuple(AtomIndex(DictionaryKind.ST, harmonic_k=k, location_l=l, scale_v=v)
                  for k in range(1, n_harmonics + 1)
                  for v in range(1, n_scales + 1)
                  for l in range(1, centers.size + 1))
    return DictionaryBlock(DictionaryKind.ST, grid, matrix, atoms, np.ones(matrix.shape[1]),
                           _nyquist_warnings(DictionaryKind.ST, grid, freqs))


# =============================================================================
# GROUPED DICTIONARIES
# =============================================================================

def _assemble(grid: SamplingGrid, blocks: Sequence[DictionaryBlock], matrix: np.ndarray,
              scales: np.ndarray, normalized: bool, config_hash: Optional[str]) -> Dictionary:
    groups, views, start = [], [], 0
    seen: Dict[str, int] = {}
    for block in blocks:
        stop = start + block.width
        name = block.kind.value
        seen[name] = seen.get(name, 0) + 1
        if seen[name] > 1:
            name = f"{name}{seen[name]}"
        groups.append(GroupSlice(name, start, stop))
        views.append(replace(block, matrix=matrix[:, start:stop], column_scales=scales[start:stop]))
        start = stop
    return Dictionary(grid=grid, blocks=tuple(views), matrix=matrix, groups=tuple(groups),
                      column_scales=scales, normalized=normalized, config_hash=config_hash)


def concat(blocks: Sequence[DictionaryBlock], config_hash: Optional[str] = None) -> Dictionary:
    """Stack blocks column-wise, one group per block"""
    if not blocks:
        raise ValidationError("blocks", "at least one dictionary block is required")
    grid = blocks[0].grid
    for block in blocks[1:]:
        if block.grid != grid:
            raise ValidationError("grid", f"{block.kind.value} block grid {block.grid} differs from {grid}")
    matrix = np.asfortranarray(np.hstack([b.matrix for b in blocks]))
    scales = np.concatenate([b.column_scales for b in blocks]).astype(float)
    normalized = all(np.allclose(np.linalg.norm(b.matrix, axis=0), 1.0, atol=1e-10) for b in blocks)
    return _assemble(grid, blocks, matrix, scales, normalized, config_hash)


def normalize_columns(dictionary: Dictionary) -> Dictionary:
    """Scale every column to unit l2-norm and fold the norms into column_scales"""
    norms = np.linalg.norm(dictionary.matrix, axis=0)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        label = dictionary.atom_indices[zero[0]].label() if dictionary.atom_indices else "unlabeled"
        raise NumericalError(f"cannot normalize zero column {zero[0]} ({label})")
    matrix = np.asfortranarray(dictionary.matrix / norms[None, :])
    scales = dictionary.column_scales * norms
    if not dictionary.blocks:
        return replace(dictionary, matrix=matrix, column_scales=scales, normalized=True)
    return _assemble(dictionary.grid, dictionary.blocks, matrix, scales, True, dictionary.config_hash)


def from_matrix(matrix: np.ndarray, group_sizes: Sequence[int], duration: float = 1.0,
                normalized: bool = False) -> Dictionary:
    """
    Wrap an arbitrary matrix as a grouped dictionary without atom labels.

    Args:
        matrix: (N, M) atom matrix, N >= 2
        group_sizes: Consecutive group widths summing to M
        duration: Duration assigned to the synthetic grid
        normalized: Whether columns are already unit norm
    """
    matrix = np.asfortranarray(np.asarray(matrix, dtype=float))
    if matrix.ndim != 2:
        raise ValidationError("matrix", f"expected a 2-D array, got shape {matrix.shape}")
    if any(int(p) < 1 for p in group_sizes) or sum(group_sizes) != matrix.shape[1]:
        raise ValidationError("group_sizes", f"{list(group_sizes)} does not partition {matrix.shape[1]} columns")
    groups, start = [], 0
    for g, size in enumerate(group_sizes, start=1):
        groups.append(GroupSlice(f"g{g}", start, start + int(size)))
        start += int(size)
    return Dictionary(grid=SamplingGrid(n_samples=matrix.shape[0], duration=duration), blocks=(),
                      matrix=matrix, groups=tuple(groups), column_scales=np.ones(matrix.shape[1]),
                      normalized=normalized, config_hash=sha256_of({'adhoc': hashlib.sha256(matrix.tobytes()).hexdigest(),
                                                                     'groups': [int(p) for p in group_sizes]}))


def original_columns(dictionary: Dictionary) -> np.ndarray:
    """Atoms as first built, undoing any normalization"""
    return dictionary.matrix * dictionary.column_scales[None, :]


# =============================================================================
# CONFIGURATION AND PRESETS
# =============================================================================

PRESETS: Dict[str, Tuple[str, ...]] = {
    "GT": ("harmonics", "gt"),
    "MHWT": ("harmonics", "mhwt"),
    "ST": ("harmonics", "st"),
    "GWST": ("harmonics", "gt", "mhwt", "st"),
}


@dataclass(frozen=True)
class DictionaryConfig:
    kinds: Tuple[str, ...] = PRESETS["GWST"]
    harmonics_k: int = 40
    gabor_k: int = 40
    gabor_sigma: float = 0.005
    mhwt_v: int = 10
    stockwell_k: int = 6
    stockwell_v: int = 6
    location_step: float = 0.005
    scale_step: float = 0.005
    normalize: bool = True

    def __post_init__(self):
        valid = {k.value for k in DictionaryKind}
        for kind in self.kinds:
            if kind not in valid:
                raise ConfigurationError(f"dictionaries: unknown kind '{kind}' (expected one of {sorted(valid)})")
        if not self.kinds:
            raise ConfigurationError("dictionaries: kinds must not be empty")

    @classmethod
    def preset(cls, name: str, **overrides) -> "DictionaryConfig":
        try:
            kinds = PRESETS[name.upper()]
        except KeyError:
            raise ConfigurationError(f"unknown dictionary preset '{name}' (expected {sorted(PRESETS)})") from None
        return cls(kinds=kinds, **overrides)

    def to_dict(self) -> dict:
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data['kinds'] = list(self.kinds)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "DictionaryConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"dictionaries: unknown keys {sorted(unknown)}")
        values = dict(data)
        if 'kinds' in values:
            values['kinds'] = tuple(values['kinds'])
        return cls(**values)


def dictionary_hash(config: DictionaryConfig, grid: SamplingGrid, fundamental_hz: float) -> str:
    return sha256_of({'dictionary': config.to_dict(), 'grid': grid.to_dict(), 'fundamental_hz': fundamental_hz})


def build_dictionary(config: DictionaryConfig, grid: SamplingGrid,
                     fundamental_hz: float = DEFAULT_FUNDAMENTAL_HZ) -> Dictionary:
    """Build, concatenate and (optionally) normalize the configured blocks"""
    blocks: List[DictionaryBlock] = []
    for kind in config.kinds:
        kind = DictionaryKind(kind)
        if kind is DictionaryKind.HARMONICS:
            block = build_harmonics(grid, fundamental_hz, config.harmonics_k)
        elif kind is DictionaryKind.GT:
            block = build_gabor(grid, fundamental_hz, config.gabor_k, config.location_step, config.gabor_sigma)
        elif kind is DictionaryKind.MHWT:
            block = build_mhwt(grid, config.mhwt_v, config.location_step, config.scale_step)
        else:
            block = build_stockwell(grid, fundamental_hz, config.stockwell_k, config.stockwell_v,
                                    config.location_step, config.scale_step)
        logger.info(f"Built {kind.value} block: {block.width} atoms")
        blocks.append(block)

    dictionary = concat(blocks, config_hash=dictionary_hash(config, grid, fundamental_hz))
    if config.normalize:
        dictionary = normalize_columns(dictionary)
    logger.info(f"Dictionary {'+'.join(config.kinds)}: M={dictionary.n_atoms}, N={grid.n_samples}, "
                f"G={dictionary.n_groups}, overcomplete={dictionary.is_overcomplete}")
    return dictionary


# =============================================================================
# BINARY CACHE
# =============================================================================

def save_dictionary(dictionary: Dictionary, path: Union[str, Path]) -> Path:
    """Write the atom matrix with a header recording grid and config hash"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        'grid': dictionary.grid.to_dict(),
        'config_hash': dictionary.config_hash,
        'normalized': dictionary.normalized,
        'groups': [[g.name, g.start, g.stop] for g in dictionary.groups],
        'kinds': [b.kind.value for b in dictionary.blocks],
        'warnings': [list(b.warnings) for b in dictionary.blocks],
    }
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.stem}.", suffix=".npz")
    os.close(fd)
    try:
        np.savez(tmp_name, header=np.array(json.dumps(header)), matrix=dictionary.matrix,
                 column_scales=dictionary.column_scales,
                 atoms=np.array([a.to_row() for a in dictionary.atom_indices], dtype=np.int64))
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    logger.info(f"Dictionary cached at {path}")
    return path


def load_dictionary(path: Union[str, Path], expected_hash: Optional[str] = None,
                    grid: Optional[SamplingGrid] = None) -> Optional[Dictionary]:
    """Load a cached dictionary; None when missing or its header does not match"""
    path = Path(path)
    if not path.exists():
        return None
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data['header']))
        cached_grid = SamplingGrid(**header['grid'])
        if (expected_hash is not None and header['config_hash'] != expected_hash) or \
                (grid is not None and cached_grid != grid):
            logger.info(f"Dictionary cache {path} is stale; rebuilding")
            return None
        matrix = np.asfortranarray(data['matrix'])
        scales = data['column_scales'].astype(float)
        atoms = [AtomIndex.from_row(row) for row in data['atoms']]

    blocks = []
    for (name, start, stop), kind, warnings in zip(header['groups'], header['kinds'], header['warnings']):
        blocks.append(DictionaryBlock(DictionaryKind(kind), cached_grid, matrix[:, start:stop],
                                      tuple(atoms[start:stop]), scales[start:stop], tuple(warnings)))
    return _assemble(cached_grid, blocks, matrix, scales, header['normalized'], header['config_hash'])


def load_or_build(config: DictionaryConfig, grid: SamplingGrid, fundamental_hz: float = DEFAULT_FUNDAMENTAL_HZ,
                  cache_dir: Optional[Union[str, Path]] = None) -> Dictionary:
    if cache_dir is None:
        return build_dictionary(config, grid, fundamental_hz)
    expected = dictionary_hash(config, grid, fundamental_hz)
    path = Path(cache_dir) / f"dictionary_{expected[:16]}.npz"
    cached = load_dictionary(path, expected_hash=expected, grid=grid)
    if cached is not None:
        logger.info(f"Loaded cached dictionary {path}")
        return cached
    dictionary = build_dictionary(config, grid, fundamental_hz)
    save_dictionary(dictionary, path)
    return dictionary
