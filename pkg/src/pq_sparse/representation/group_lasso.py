"""
Group Lasso representation of signals over a grouped dictionary.

Minimizes

    ½ ||y - Φβ||² + λ Σ_g sqrt(p_g) ||β_g||

by cyclic block coordinate descent ("shooting"): for g = 1..G the block is
replaced by a group soft-threshold of

    S_g = Φ_g^T (y - Φ β_{-g})

Blocks of the time-frequency dictionaries are far from orthonormal, so the
default update rescales each block by L_g = ||Φ_g||² (a block proximal step),
which is the plain update whenever Φ_g^T Φ_g = I and never increases the cost.
``block_step="unit"`` applies the plain update unchanged.
"""

import logging
import math
import weakref
from dataclasses import dataclass, field, fields
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from ..exceptions import ConfigurationError, NumericalError, ValidationError
from ..signals.disturbances import Signal
from .atoms import Dictionary, GroupSlice

logger = logging.getLogger(__name__)

BLOCK_STEPS = ("lipschitz", "unit")
CONVERGENCE_MODES = ("coefficients", "objective")

# exact SVD below this many columns, power iteration above
_SVD_MAX_COLUMNS = 1500
_POWER_MARGIN = 1.0 + 1e-6
# residual is recomputed from scratch this often to stop drift
_RESIDUAL_REFRESH = 50


@dataclass(frozen=True)
class SolverConfig:
    """
    Shooting solver settings.

    block_step:
        "lipschitz" (default) replaces block g by
        soft(L_g β_g + Φ_g^T r, λ sqrt(p_g)) / L_g with L_g = ||Φ_g||², which
        never raises the cost; an increase beyond round-off raises
        NumericalError. "unit" applies the plain update
        β_g ← soft(S_g, λ sqrt(p_g)) exactly as written, which only agrees
        with the default when Φ_g^T Φ_g = I; increases are logged once per solve.
    convergence:
        "coefficients" stops when no coefficient moved more than ``tol`` in a
        sweep, "objective" on the relative change of the cost.
    """
    lam: float = 1e-3
    tol: float = 1e-15
    max_sweeps: int = 10000
    sparsity_threshold: float = 1e-4
    block_step: str = "lipschitz"
    convergence: str = "coefficients"
    record_history: bool = False

    def __post_init__(self):
        if not (self.lam >= 0) or not math.isfinite(self.lam):
            raise ConfigurationError(f"solver.lambda must be a nonnegative number, got {self.lam}")
        if not (self.tol > 0):
            raise ConfigurationError(f"solver.tol must be positive, got {self.tol}")
        if int(self.max_sweeps) != self.max_sweeps or self.max_sweeps < 1:
            raise ConfigurationError(f"solver.max_sweeps must be a positive integer, got {self.max_sweeps}")
        if not (self.sparsity_threshold > 0):
            raise ConfigurationError(f"solver.sparsity_threshold must be positive, got {self.sparsity_threshold}")
        if self.block_step not in BLOCK_STEPS:
            raise ConfigurationError(f"solver.block_step must be one of {BLOCK_STEPS}, got '{self.block_step}'")
        if self.convergence not in CONVERGENCE_MODES:
            raise ConfigurationError(f"solver.convergence must be one of {CONVERGENCE_MODES}, got '{self.convergence}'")

    def to_dict(self) -> dict:
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data['lambda'] = data.pop('lam')
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "SolverConfig":
        values = dict(data)
        if 'lambda' in values:
            values['lam'] = values.pop('lambda')
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigurationError(f"solver: unknown keys {sorted(unknown)}")
        return cls(**values)


@dataclass(frozen=True, eq=False)
class Coefficients:
    """β bound to the dictionary (by config hash) that defines its layout"""
    values: np.ndarray
    dictionary_ref: Optional[str] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise ValidationError("values", f"coefficients must be a vector, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("values", "coefficients contain non-finite entries")
        object.__setattr__(self, 'values', values)

    def __len__(self):
        return self.values.shape[0]

    @classmethod
    def zeros(cls, dictionary: Dictionary) -> "Coefficients":
        return cls(np.zeros(dictionary.n_atoms), dictionary.config_hash)

    def group(self, dictionary: Dictionary, g: int) -> np.ndarray:
        return _bind(dictionary, self)[dictionary.groups[g].columns]


@dataclass(frozen=True)
class SparsityProfile:
    overall: float
    per_group: Dict[str, float]


@dataclass(frozen=True)
class SolveReport:
    sweeps_used: int
    final_objective: float
    reconstruction_rmse: float
    converged: bool
    per_group_sparsity: Dict[str, float]
    overall_sparsity: float
    block_step: str = "lipschitz"
    objective_history: Tuple[float, ...] = field(default_factory=tuple)

    def is_monotone(self, tol: float = 1e-10) -> bool:
        """Objective nonincreasing across the recorded sweeps, up to rounding"""
        history = self.objective_history
        return all(b <= a + tol * max(1.0, abs(a)) for a, b in zip(history, history[1:]))

    def to_dict(self) -> dict:
        return {
            'sweeps_used': self.sweeps_used,
            'final_objective': self.final_objective,
            'reconstruction_rmse': self.reconstruction_rmse,
            'converged': self.converged,
            'per_group_sparsity': dict(self.per_group_sparsity),
            'overall_sparsity': self.overall_sparsity,
            'block_step': self.block_step,
        }


# =============================================================================
# BINDING HELPERS
# =============================================================================

BetaLike = Union[Coefficients, np.ndarray, Sequence[float]]
SignalLike = Union[Signal, np.ndarray, Sequence[float]]


def _bind(dictionary: Dictionary, beta: BetaLike) -> np.ndarray:
    if isinstance(beta, Coefficients):
        if beta.dictionary_ref is not None and dictionary.config_hash is not None \
                and beta.dictionary_ref != dictionary.config_hash:
            raise ValidationError("beta", "coefficients are bound to a different dictionary")
        values = beta.values
    else:
        values = np.asarray(beta, dtype=float)
    if values.shape != (dictionary.n_atoms,):
        raise ValidationError("beta", f"expected {dictionary.n_atoms} coefficients, got shape {values.shape}")
    return values


def _signal_values(dictionary: Dictionary, y: SignalLike) -> np.ndarray:
    if isinstance(y, Signal):
        if dictionary.blocks and y.grid != dictionary.grid:
            raise ValidationError("grid", f"signal grid {y.grid} differs from dictionary grid {dictionary.grid}")
        values = y.values
    else:
        values = np.asarray(y, dtype=float)
    if values.shape != (dictionary.grid.n_samples,):
        raise ValidationError("y", f"expected {dictionary.grid.n_samples} samples, got shape {values.shape}")
    return values


# =============================================================================
# CORE OPERATIONS
# =============================================================================

def group_soft_threshold(s_g: np.ndarray, lam: float, p_g: int) -> np.ndarray:
    """[1 - λ sqrt(p_g) / ||S_g||]_+ S_g"""
    s_g = np.asarray(s_g, dtype=float)
    norm = float(np.linalg.norm(s_g))
    threshold = lam * math.sqrt(p_g)
    if norm <= threshold:
        return np.zeros_like(s_g)
    return (1.0 - threshold / norm) * s_g


def compute_s_g(dictionary: Dictionary, y: SignalLike, beta: BetaLike, g: int) -> np.ndarray:
    """S_g = Φ_g^T (y - Φ β_{-g}), evaluated through the full residual"""
    values = _bind(dictionary, beta)
    cols = dictionary.groups[g].columns
    phi_g = dictionary.matrix[:, cols]
    residual = _signal_values(dictionary, y) - dictionary.matrix @ values + phi_g @ values[cols]
    return phi_g.T @ residual


def objective(dictionary: Dictionary, y: SignalLike, beta: BetaLike, lam: float) -> float:
    values = _bind(dictionary, beta)
    residual = _signal_values(dictionary, y) - dictionary.matrix @ values
    penalty = sum(math.sqrt(g.size) * np.linalg.norm(values[g.columns]) for g in dictionary.groups)
    return float(0.5 * residual @ residual + lam * penalty)


def reconstruct(dictionary: Dictionary, beta: BetaLike, original_basis: bool = False) -> Signal:
    """
    Synthesis y = Φβ.

    With ``original_basis`` the un-normalized atoms are used with β divided by
    the column scales; the result is the same signal.
    """
    values = _bind(dictionary, beta)
    if original_basis:
        scales = dictionary.column_scales
        y = (dictionary.matrix * scales[None, :]) @ (values / scales)
    else:
        y = dictionary.matrix @ values
    return Signal(grid=dictionary.grid, values=y, signal_id="reconstruction")


def reconstruction_rmse(dictionary: Dictionary, y: SignalLike, beta: BetaLike) -> float:
    residual = _signal_values(dictionary, y) - dictionary.matrix @ _bind(dictionary, beta)
    return float(np.linalg.norm(residual) / math.sqrt(residual.shape[0]))


def sparsity_fraction(beta: BetaLike, threshold: float = 1e-4,
                      dictionary: Optional[Dictionary] = None) -> SparsityProfile:
    """Share of |β_i| < threshold overall and, given a dictionary, per group"""
    if not (threshold > 0):
        raise ValidationError("threshold", f"must be positive, got {threshold}")
    if dictionary is not None:
        values = _bind(dictionary, beta)
    else:
        values = beta.values if isinstance(beta, Coefficients) else np.asarray(beta, dtype=float)
    small = np.abs(values) < threshold
    overall = float(np.mean(small)) if small.size else 1.0
    per_group = {}
    if dictionary is not None:
        per_group = {g.name: float(np.mean(small[g.columns])) for g in dictionary.groups}
    return SparsityProfile(overall=overall, per_group=per_group)


def check_kkt(dictionary: Dictionary, y: SignalLike, beta: BetaLike, lam: float, atol: float = 1e-8) -> Tuple[int, ...]:
    """
    Groups violating the optimality conditions at β.

    Zero groups need ||S_g|| <= λ sqrt(p_g); active groups need
    Φ_g^T r = λ sqrt(p_g) β_g / ||β_g||.
    """
    values = _bind(dictionary, beta)
    residual = _signal_values(dictionary, y) - dictionary.matrix @ values
    violating = []
    for g, group in enumerate(dictionary.groups):
        beta_g = values[group.columns]
        correlation = dictionary.matrix[:, group.columns].T @ residual
        threshold = lam * math.sqrt(group.size)
        norm = np.linalg.norm(beta_g)
        if norm == 0.0:
            ok = np.linalg.norm(correlation) <= threshold + atol
        else:
            ok = np.allclose(correlation, threshold * beta_g / norm, atol=atol, rtol=0.0)
        if not ok:
            violating.append(g)
    return tuple(violating)


# =============================================================================
# STEP SIZES
# =============================================================================

def spectral_norm_squared(matrix: np.ndarray, max_iterations: int = 500, rtol: float = 1e-10) -> float:
    """Largest squared singular value; exact for narrow blocks, power iteration otherwise"""
    if matrix.size == 0:
        return 0.0
    if min(matrix.shape) <= _SVD_MAX_COLUMNS:
        return float(linalg.svdvals(matrix, check_finite=False)[0] ** 2)
    v = np.full(matrix.shape[1], 1.0 / math.sqrt(matrix.shape[1]))
    estimate = 0.0
    for _ in range(max_iterations):
        u = matrix.T @ (matrix @ v)
        new_estimate = float(np.linalg.norm(u))
        if not math.isfinite(new_estimate):
            raise NumericalError("power iteration produced a non-finite step-size estimate")
        if new_estimate == 0.0:
            return 0.0
        v = u / new_estimate
        if abs(new_estimate - estimate) <= rtol * new_estimate:
            estimate = new_estimate
            break
        estimate = new_estimate
    return estimate * _POWER_MARGIN


_STEP_CACHE: "weakref.WeakKeyDictionary[Dictionary, Dict[Tuple[int, int], float]]" = weakref.WeakKeyDictionary()


def block_lipschitz_constants(dictionary: Dictionary, groups: Optional[Sequence[GroupSlice]] = None) -> np.ndarray:
    """L_g = ||Φ_g||² for each group, cached per dictionary"""
    groups = dictionary.groups if groups is None else groups
    cache = _STEP_CACHE.setdefault(dictionary, {})
    constants = np.empty(len(groups))
    for g, group in enumerate(groups):
        key = (group.start, group.stop)
        if key not in cache:
            block = dictionary.matrix[:, group.columns]
            if group.size == 1:
                cache[key] = float(block[:, 0] @ block[:, 0])
            else:
                cache[key] = spectral_norm_squared(block)
        constants[g] = cache[key]
    return constants


def singleton_groups(dictionary: Dictionary) -> Tuple[GroupSlice, ...]:
    """Every column its own group (plain Lasso)"""
    return tuple(GroupSlice(f"a{j}", j, j + 1) for j in range(dictionary.n_atoms))


# =============================================================================
# SHOOTING SOLVER
# =============================================================================

class GroupLassoSolver:
    """
    Shooting solver bound to one dictionary.

    Block step constants are computed once, so a solver instance can be reused
    (and pickled to worker processes) for a whole dataset.
    """

    def __init__(self, dictionary: Dictionary, config: Optional[SolverConfig] = None,
                 groups: Optional[Sequence[GroupSlice]] = None):
        self.dictionary = dictionary
        self.config = config or SolverConfig()
        self.groups = tuple(groups) if groups is not None else dictionary.groups
        covered = sum(g.size for g in self.groups)
        if covered != dictionary.n_atoms:
            raise ValidationError("groups", f"groups cover {covered} of {dictionary.n_atoms} columns")
        if self.config.block_step == "lipschitz":
            self.steps = block_lipschitz_constants(dictionary, self.groups)
        else:
            self.steps = np.ones(len(self.groups))
        if not dictionary.normalized:
            logger.warning("Dictionary columns are not normalized; shooting may converge slowly")

    def __getstate__(self):
        return {'dictionary': self.dictionary, 'config': self.config, 'groups': self.groups, 'steps': self.steps}

    def __setstate__(self, state):
        self.__dict__.update(state)

    def _objective(self, residual: np.ndarray, beta: np.ndarray) -> float:
        penalty = sum(math.sqrt(g.size) * np.linalg.norm(beta[g.columns]) for g in self.groups)
        return float(0.5 * residual @ residual + self.config.lam * penalty)

    def solve(self, y: SignalLike) -> Tuple[Coefficients, SolveReport]:
        config = self.config
        phi = self.dictionary.matrix
        target = _signal_values(self.dictionary, y)
        lam = config.lam
        unit = config.block_step == "unit"

        beta = np.zeros(self.dictionary.n_atoms)
        residual = target.copy()
        previous = self._objective(residual, beta)
        history = []
        converged = False
        increase_warned = False
        sweep = 0

        for sweep in range(1, config.max_sweeps + 1):
            max_change = 0.0
            for g, group in enumerate(self.groups):
                cols = group.columns
                phi_g = phi[:, cols]
                old = beta[cols].copy()
                if unit:
                    partial = residual + phi_g @ old if old.any() else residual
                    new = group_soft_threshold(phi_g.T @ partial, lam, group.size)
                else:
                    step = self.steps[g]
                    if step == 0.0:
                        continue
                    new = group_soft_threshold(step * old + phi_g.T @ residual, lam, group.size) / step
                if not np.all(np.isfinite(new)):
                    raise NumericalError(f"non-finite coefficients in group {group.name}", sweep=sweep)
                delta = new - old
                if delta.any():
                    residual -= phi_g @ delta
                    beta[cols] = new
                    max_change = max(max_change, float(np.max(np.abs(delta))))

            if sweep % _RESIDUAL_REFRESH == 0:
                residual = target - phi @ beta
            current = self._objective(residual, beta)
            if not math.isfinite(current):
                raise NumericalError("objective became non-finite", sweep=sweep)
            if current > previous + 1e-10 * max(1.0, abs(previous)):
                if not unit:
                    raise NumericalError(f"objective increased from {previous:.6e} to {current:.6e}", sweep=sweep)
                if not increase_warned:
                    logger.warning(f"Objective increased at sweep {sweep} under the unit block step: "
                                   f"{previous:.6e} -> {current:.6e}")
                    increase_warned = True
            if config.record_history:
                history.append(current)

            if config.convergence == "coefficients":
                done = max_change < config.tol
            else:
                done = abs(previous - current) <= config.tol * max(abs(previous), np.finfo(float).tiny)
            previous = current
            if done:
                converged = True
                break

        if not converged:
            logger.warning(f"Group Lasso stopped without converging after {sweep} sweeps (tol {config.tol:g})")

        coefficients = Coefficients(beta, self.dictionary.config_hash)
        sparsity = sparsity_fraction(coefficients, config.sparsity_threshold, self.dictionary)
        report = SolveReport(
            sweeps_used=sweep,
            final_objective=previous,
            reconstruction_rmse=reconstruction_rmse(self.dictionary, target, beta),
            converged=converged,
            per_group_sparsity=sparsity.per_group,
            overall_sparsity=sparsity.overall,
            block_step=config.block_step,
            objective_history=tuple(history),
        )
        return coefficients, report


def group_lasso_shooting(dictionary: Dictionary, y: SignalLike,
                         config: Optional[SolverConfig] = None) -> Tuple[Coefficients, SolveReport]:
    return GroupLassoSolver(dictionary, config).solve(y)


def lasso_shooting(dictionary: Dictionary, y: SignalLike,
                   config: Optional[SolverConfig] = None) -> Tuple[Coefficients, SolveReport]:
    """Shooting with singleton groups, i.e. the plain Lasso"""
    return GroupLassoSolver(dictionary, config, groups=singleton_groups(dictionary)).solve(y)


# =============================================================================
# REFERENCE AND BASELINE SOLVERS
# =============================================================================

def group_lasso_reference(dictionary: Dictionary, y: SignalLike, config: Optional[SolverConfig] = None,
                          tol: float = 1e-12, max_iterations: int = 200000) -> Coefficients:
    """
    Proximal gradient descent (ISTA) on the same cost, step 1/L with L = ||Φ||².

    Stops when the objective changes by less than ``tol``. Meant for small
    instances.
    """
    config = config or SolverConfig()
    phi = dictionary.matrix
    target = _signal_values(dictionary, y)
    lipschitz = spectral_norm_squared(phi)
    if not (lipschitz > 0) or not math.isfinite(lipschitz):
        raise NumericalError(f"could not estimate a step size (L = {lipschitz})")
    step = 1.0 / lipschitz
    thresholds = [(g.columns, config.lam * step * math.sqrt(g.size)) for g in dictionary.groups]

    beta = np.zeros(dictionary.n_atoms)
    previous = objective(dictionary, target, beta, config.lam)
    for iteration in range(1, max_iterations + 1):
        z = beta + step * (phi.T @ (target - phi @ beta))
        for cols, threshold in thresholds:
            norm = np.linalg.norm(z[cols])
            z[cols] = 0.0 if norm <= threshold else (1.0 - threshold / norm) * z[cols]
        if not np.all(np.isfinite(z)):
            raise NumericalError("reference solver diverged", sweep=iteration)
        beta = z
        current = objective(dictionary, target, beta, config.lam)
        if abs(previous - current) < tol:
            break
        previous = current
    return Coefficients(beta, dictionary.config_hash)


def least_squares_fit(dictionary: Dictionary, y: SignalLike) -> Coefficients:
    """Minimum-norm least squares β (the dense "without sparsity" representation)"""
    target = _signal_values(dictionary, y)
    beta, _, rank, _ = linalg.lstsq(dictionary.matrix, target, lapack_driver="gelsd", check_finite=False)
    logger.debug(f"Least squares fit: rank {rank} of {dictionary.n_atoms} atoms")
    return Coefficients(beta, dictionary.config_hash)


def least_squares_fit_many(dictionary: Dictionary, signals: np.ndarray) -> np.ndarray:
    """Minimum-norm least squares for many signals at once; rows in, rows out"""
    signals = np.asarray(signals, dtype=float)
    if signals.ndim != 2 or signals.shape[1] != dictionary.grid.n_samples:
        raise ValidationError("signals", f"expected shape (P, {dictionary.grid.n_samples}), got {signals.shape}")
    beta, _, _, _ = linalg.lstsq(dictionary.matrix, signals.T, lapack_driver="gelsd", check_finite=False)
    return np.ascontiguousarray(beta.T)
