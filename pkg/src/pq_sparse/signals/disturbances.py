"""
Synthetic power-quality disturbance waveforms.

Each disturbance class has a parametric equation evaluated on a uniform
sampling grid. Parameters are drawn uniformly from per-class ranges; event
windows are read as the indicator of t in [t1, t2).
"""

import logging
import math
from dataclasses import dataclass, fields, replace
from enum import IntEnum
from functools import cached_property
from typing import Dict, Optional, Tuple

import numpy as np

from ..exceptions import ConfigurationError, NumericalError, ValidationError

logger = logging.getLogger(__name__)

DEFAULT_FUNDAMENTAL_HZ = 60.0
DEFAULT_N_SAMPLES = 2101
DEFAULT_DURATION = 0.7


@dataclass(frozen=True)
class SamplingGrid:
    """Uniform grid t_n = n * duration / (n_samples - 1), n = 0..n_samples-1"""
    n_samples: int = DEFAULT_N_SAMPLES
    duration: float = DEFAULT_DURATION

    def __post_init__(self):
        if int(self.n_samples) != self.n_samples or self.n_samples < 2:
            raise ConfigurationError(f"grid.n_samples must be an integer >= 2, got {self.n_samples}")
        if not (self.duration > 0) or not math.isfinite(self.duration):
            raise ConfigurationError(f"grid.duration must be a positive number of seconds, got {self.duration}")

    @cached_property
    def times(self) -> np.ndarray:
        t = np.arange(self.n_samples) * self.duration / (self.n_samples - 1)
        t.flags.writeable = False
        return t

    @property
    def step(self) -> float:
        return self.duration / (self.n_samples - 1)

    @property
    def sample_rate(self) -> float:
        return (self.n_samples - 1) / self.duration

    def to_dict(self) -> dict:
        return {'n_samples': int(self.n_samples), 'duration': float(self.duration)}


class DisturbanceClass(IntEnum):
    PURE = 0
    HARMONIC = 1
    SWELL = 2
    SAG = 3
    FLICKER = 4
    NOTCH = 5
    IMPULSIVE = 6
    OSCILLATORY = 7

    @property
    def code(self) -> str:
        return f"C{self.value}"

    @property
    def display_name(self) -> str:
        return _DISPLAY_NAMES[self]

    @classmethod
    def from_code(cls, code: str) -> "DisturbanceClass":
        text = str(code).strip()
        for member in cls:
            if text in (member.code, member.name, member.display_name):
                return member
        raise ValidationError("label", f"unknown disturbance class '{code}'")


_DISPLAY_NAMES = {
    DisturbanceClass.PURE: "Pure",
    DisturbanceClass.HARMONIC: "Harmonic",
    DisturbanceClass.SWELL: "Swell",
    DisturbanceClass.SAG: "Sag",
    DisturbanceClass.FLICKER: "Flicker",
    DisturbanceClass.NOTCH: "Notch",
    DisturbanceClass.IMPULSIVE: "Impulsive",
    DisturbanceClass.OSCILLATORY: "Oscillatory",
}

# The seven classes that take part in classification, in label order
LABELED_CLASSES: Tuple[DisturbanceClass, ...] = tuple(c for c in DisturbanceClass if c is not DisturbanceClass.PURE)


@dataclass(frozen=True)
class DisturbanceRanges:
    """Controlling-parameter intervals. Durations and widths are in fundamental periods T."""
    harmonic_orders: Tuple[int, ...] = (3, 5, 7, 9)
    harmonic_amplitude: Tuple[float, float] = (0.05, 0.15)
    swell_alpha: Tuple[float, float] = (0.1, 0.8)
    sag_alpha: Tuple[float, float] = (0.1, 0.8)
    # both bounds in cycles: 6T to 10T
    event_cycles: Tuple[float, float] = (6.0, 10.0)
    flicker_alpha: Tuple[float, float] = (0.1, 0.2)
    flicker_hz: Tuple[float, float] = (5.0, 25.0)
    notch_alpha: Tuple[float, float] = (0.1, 0.4)
    notch_width_cycles: Tuple[float, float] = (0.01, 0.05)
    notch_count: Tuple[int, int] = (1, 6)
    impulse_alpha: Tuple[float, float] = (1.5, 2.5)
    impulse_cycles: Tuple[float, float] = (0.01, 0.02)
    oscillatory_alpha: Tuple[float, float] = (0.1, 0.9)
    oscillatory_cycles: Tuple[float, float] = (0.01, 0.03)
    oscillatory_decay: Tuple[float, float] = (0.1, 0.2)
    oscillatory_order: Tuple[int, int] = (5, 80)
    margin_cycles: float = 1.0

    def to_dict(self) -> dict:
        return {f.name: list(getattr(self, f.name)) if isinstance(getattr(self, f.name), tuple)
                else getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "DisturbanceRanges":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"signal.ranges: unknown keys {sorted(unknown)}")
        values = {k: tuple(v) if isinstance(v, (list, tuple)) else v for k, v in data.items()}
        return cls(**values)


DEFAULT_RANGES = DisturbanceRanges()


@dataclass(frozen=True)
class DisturbanceParams:
    """Class-specific parameter record; fields not used by a class stay None / empty"""
    disturbance: DisturbanceClass
    alpha: Optional[float] = None
    t1: Optional[float] = None
    t2: Optional[float] = None
    flicker_hz: Optional[float] = None
    harmonic_amplitudes: Tuple[float, ...] = ()
    notch_amplitudes: Tuple[float, ...] = ()
    notch_centers: Tuple[float, ...] = ()
    notch_widths: Tuple[float, ...] = ()
    decay: Optional[float] = None
    order: Optional[int] = None

    def to_pairs(self) -> str:
        """Serialize as ``key=value;key=value`` with tuples joined by ``|``"""
        parts = [f"class={self.disturbance.code}"]
        for f in fields(self):
            if f.name == 'disturbance':
                continue
            value = getattr(self, f.name)
            if value is None or value == ():
                continue
            if isinstance(value, tuple):
                parts.append(f"{f.name}=" + "|".join(repr(float(v)) for v in value))
            elif f.name == 'order':
                parts.append(f"{f.name}={int(value)}")
            else:
                parts.append(f"{f.name}={float(value)!r}")
        return ";".join(parts)

    @classmethod
    def from_pairs(cls, text: str) -> "DisturbanceParams":
        values: Dict[str, object] = {}
        tuple_fields = {'harmonic_amplitudes', 'notch_amplitudes', 'notch_centers', 'notch_widths'}
        known = {f.name for f in fields(cls)}
        for item in filter(None, text.split(";")):
            key, _, raw = item.partition("=")
            if key == 'class':
                values['disturbance'] = DisturbanceClass.from_code(raw)
            elif key not in known:
                raise ValidationError("params", f"unknown parameter '{key}'")
            elif key in tuple_fields:
                values[key] = tuple(float(v) for v in raw.split("|"))
            elif key == 'order':
                values[key] = int(raw)
            else:
                values[key] = float(raw)
        if 'disturbance' not in values:
            raise ValidationError("params", "missing class entry")
        return cls(**values)


@dataclass(frozen=True, eq=False)
class Signal:
    grid: SamplingGrid
    values: np.ndarray
    label: Optional[DisturbanceClass] = None
    params: Optional[DisturbanceParams] = None
    seed_trace: Optional[str] = None
    signal_id: str = ""

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.shape[0] != self.grid.n_samples:
            raise ValidationError("values", f"expected {self.grid.n_samples} samples, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("values", "signal contains non-finite samples")
        object.__setattr__(self, 'values', values)

    @property
    def power(self) -> float:
        return float(np.mean(self.values ** 2))


def _omega(fundamental_hz: float) -> float:
    if not (fundamental_hz > 0) or not math.isfinite(fundamental_hz):
        raise ConfigurationError(f"fundamental_hz must be positive, got {fundamental_hz}")
    return 2.0 * np.pi * fundamental_hz


def _window(t: np.ndarray, start: float, stop: float) -> np.ndarray:
    """Indicator of t in [start, stop)"""
    return ((t >= start) & (t < stop)).astype(float)


def generate_pure(grid: SamplingGrid, fundamental_hz: float = DEFAULT_FUNDAMENTAL_HZ) -> Signal:
    omega = _omega(fundamental_hz)
    return Signal(grid=grid, values=np.sin(omega * grid.times), label=DisturbanceClass.PURE,
                  signal_id="pure")


def _uniform(rng: np.random.Generator, bounds: Tuple[float, float]) -> float:
    return float(rng.uniform(bounds[0], bounds[1]))


def _snap_to_sample(grid: SamplingGrid, t: float) -> float:
    """Move t forward to the next sample instant"""
    index = int(np.searchsorted(grid.times, t - 1e-12 * grid.step, side='left'))
    return float(grid.times[min(index, grid.n_samples - 1)])


def _place_window(rng, grid: SamplingGrid, width: float, margin: float) -> Tuple[float, float]:
    low = margin
    high = grid.duration - margin - width
    if high < low:
        # grid too short for the margin; fall back to the whole signal
        low, high = 0.0, max(grid.duration - width, 0.0)
    t1 = _snap_to_sample(grid, float(rng.uniform(low, high)))
    t1 = min(t1, grid.duration - width)
    return t1, t1 + width


def sample_params(disturbance: DisturbanceClass, rng: np.random.Generator,
                  grid: SamplingGrid = SamplingGrid(),
                  fundamental_hz: float = DEFAULT_FUNDAMENTAL_HZ,
                  ranges: DisturbanceRanges = DEFAULT_RANGES) -> DisturbanceParams:
    """Draw every parameter of a class uniformly from its interval"""
    disturbance = DisturbanceClass(disturbance)
    period = 1.0 / fundamental_hz
    margin = ranges.margin_cycles * period

    if disturbance is DisturbanceClass.HARMONIC:
        raw = rng.uniform(*ranges.harmonic_amplitude, size=len(ranges.harmonic_orders))
        amplitudes = raw / np.sqrt(np.sum(raw ** 2))
        return DisturbanceParams(disturbance, harmonic_amplitudes=tuple(float(a) for a in amplitudes))

    if disturbance in (DisturbanceClass.SWELL, DisturbanceClass.SAG):
        bounds = ranges.swell_alpha if disturbance is DisturbanceClass.SWELL else ranges.sag_alpha
        alpha = _uniform(rng, bounds)
        width = _uniform(rng, ranges.event_cycles) * period
        t1, t2 = _place_window(rng, grid, width, margin)
        return DisturbanceParams(disturbance, alpha=alpha, t1=t1, t2=t2)

    if disturbance is DisturbanceClass.FLICKER:
        return DisturbanceParams(disturbance, alpha=_uniform(rng, ranges.flicker_alpha),
                                 flicker_hz=_uniform(rng, ranges.flicker_hz))

    if disturbance is DisturbanceClass.NOTCH:
        count = int(rng.integers(ranges.notch_count[0], ranges.notch_count[1] + 1))
        amplitudes = rng.uniform(*ranges.notch_alpha, size=count)
        widths = rng.uniform(*ranges.notch_width_cycles, size=count) * period
        centers = [_snap_to_sample(grid, float(c))
                   for c in rng.uniform(margin, grid.duration - margin, size=count)]
        return DisturbanceParams(disturbance,
                                 notch_amplitudes=tuple(float(a) for a in amplitudes),
                                 notch_centers=tuple(centers),
                                 notch_widths=tuple(float(w) for w in widths))

    if disturbance is DisturbanceClass.IMPULSIVE:
        alpha = _uniform(rng, ranges.impulse_alpha)
        width = _uniform(rng, ranges.impulse_cycles) * period
        t1, t2 = _place_window(rng, grid, width, margin)
        return DisturbanceParams(disturbance, alpha=alpha, t1=t1, t2=t2)

    if disturbance is DisturbanceClass.OSCILLATORY:
        alpha = _uniform(rng, ranges.oscillatory_alpha)
        width = _uniform(rng, ranges.oscillatory_cycles) * period
        t1, t2 = _place_window(rng, grid, width, margin)
        decay = _uniform(rng, ranges.oscillatory_decay)
        order = int(rng.integers(ranges.oscillatory_order[0], ranges.oscillatory_order[1] + 1))
        return DisturbanceParams(disturbance, alpha=alpha, t1=t1, t2=t2, decay=decay, order=order)

    raise ValidationError("disturbance", f"{disturbance.name} has no controlling parameters")


def _check_range(name: str, value: Optional[float], bounds, slack: float = 1e-9):
    if value is None:
        raise ValidationError(name, "missing")
    low, high = bounds
    if not (low - slack <= value <= high + slack):
        raise ValidationError(name, f"{value} outside [{low}, {high}]")


def _check_window(params: DisturbanceParams, grid: SamplingGrid, bounds, period: float):
    if params.t1 is None or params.t2 is None:
        raise ValidationError("t1", "event window missing")
    if not (0.0 <= params.t1 < params.t2 <= grid.duration + 1e-12):
        raise ValidationError("t1", f"window [{params.t1}, {params.t2}) not inside [0, {grid.duration}]")
    _check_range("t2-t1", (params.t2 - params.t1) / period, bounds)


def validate_params(params: DisturbanceParams, grid: SamplingGrid,
                    fundamental_hz: float = DEFAULT_FUNDAMENTAL_HZ,
                    ranges: DisturbanceRanges = DEFAULT_RANGES) -> None:
    """Raise ValidationError naming the first field outside its range"""
    period = 1.0 / fundamental_hz
    kind = params.disturbance

    if kind is DisturbanceClass.HARMONIC:
        amplitudes = np.asarray(params.harmonic_amplitudes, dtype=float)
        if amplitudes.shape != (len(ranges.harmonic_orders),):
            raise ValidationError("harmonic_amplitudes", f"expected {len(ranges.harmonic_orders)} amplitudes")
        if np.any(amplitudes <= 0):
            raise ValidationError("harmonic_amplitudes", "amplitudes must be positive")
        if abs(float(np.sum(amplitudes ** 2)) - 1.0) > 1e-9:
            raise ValidationError("harmonic_amplitudes", "sum of squared amplitudes must equal 1")
    elif kind in (DisturbanceClass.SWELL, DisturbanceClass.SAG):
        bounds = ranges.swell_alpha if kind is DisturbanceClass.SWELL else ranges.sag_alpha
        _check_range("alpha", params.alpha, bounds)
        _check_window(params, grid, ranges.event_cycles, period)
    elif kind is DisturbanceClass.FLICKER:
        _check_range("alpha", params.alpha, ranges.flicker_alpha)
        _check_range("flicker_hz", params.flicker_hz, ranges.flicker_hz)
    elif kind is DisturbanceClass.NOTCH:
        count = len(params.notch_amplitudes)
        if not (ranges.notch_count[0] <= count <= ranges.notch_count[1]):
            raise ValidationError("notch_amplitudes", f"{count} notches outside {ranges.notch_count}")
        if len(params.notch_centers) != count or len(params.notch_widths) != count:
            raise ValidationError("notch_centers", "notch amplitude, center and width counts differ")
        for a in params.notch_amplitudes:
            _check_range("notch_amplitudes", a, ranges.notch_alpha)
        for w in params.notch_widths:
            _check_range("notch_widths", w / period, ranges.notch_width_cycles)
        for c in params.notch_centers:
            _check_range("notch_centers", c, (0.0, grid.duration))
    elif kind is DisturbanceClass.IMPULSIVE:
        _check_range("alpha", params.alpha, ranges.impulse_alpha)
        _check_window(params, grid, ranges.impulse_cycles, period)
    elif kind is DisturbanceClass.OSCILLATORY:
        _check_range("alpha", params.alpha, ranges.oscillatory_alpha)
        _check_window(params, grid, ranges.oscillatory_cycles, period)
        _check_range("decay", params.decay, ranges.oscillatory_decay)
        _check_range("order", params.order, ranges.oscillatory_order, slack=0.0)
    else:
        raise ValidationError("disturbance", f"{kind.name} is not a disturbance class")


def generate_disturbance(disturbance: DisturbanceClass, params: DisturbanceParams, grid: SamplingGrid,
                         fundamental_hz: float = DEFAULT_FUNDAMENTAL_HZ,
                         ranges: DisturbanceRanges = DEFAULT_RANGES,
                         seed_trace: Optional[str] = None, signal_id: str = "") -> Signal:
    """Evaluate the class's parametric equation on the grid"""
    disturbance = DisturbanceClass(disturbance)
    if params.disturbance is not disturbance:
        raise ValidationError("disturbance", f"params are for {params.disturbance.name}, not {disturbance.name}")
    validate_params(params, grid, fundamental_hz, ranges)

    omega = _omega(fundamental_hz)
    t = grid.times
    base = np.sin(omega * t)

    if disturbance is DisturbanceClass.HARMONIC:
        values = np.zeros_like(t)
        for order, amplitude in zip(ranges.harmonic_orders, params.harmonic_amplitudes):
            values += amplitude * np.sin(order * omega * t)
    elif disturbance is DisturbanceClass.SWELL:
        values = (1.0 + params.alpha * _window(t, params.t1, params.t2)) * base
    elif disturbance is DisturbanceClass.SAG:
        values = (1.0 - params.alpha * _window(t, params.t1, params.t2)) * base
    elif disturbance is DisturbanceClass.FLICKER:
        values = (1.0 + params.alpha * np.sin(2.0 * np.pi * params.flicker_hz * t)) * base
    elif disturbance is DisturbanceClass.NOTCH:
        notches = np.zeros_like(t)
        for amplitude, center, width in zip(params.notch_amplitudes, params.notch_centers, params.notch_widths):
            notches += amplitude * _window(t, center - width / 2.0, center + width / 2.0)
        values = base - np.sign(base) * notches
    elif disturbance is DisturbanceClass.IMPULSIVE:
        values = base + params.alpha * np.sign(base) * _window(t, params.t1, params.t2)
    else:
        values = base + (params.alpha * np.exp(-t / params.decay) * np.sin(params.order * omega * t)
                         * _window(t, params.t1, params.t2))

    return Signal(grid=grid, values=values, label=disturbance, params=params,
                  seed_trace=seed_trace, signal_id=signal_id)


def add_awgn(signal: Signal, snr_db: Optional[float], rng: np.random.Generator) -> Signal:
    """
    Add white Gaussian noise at the requested signal-to-noise ratio.

    ``snr_db`` of None or +inf means no noise; the signal comes back unchanged.
    """
    if snr_db is None or (math.isinf(snr_db) and snr_db > 0):
        return replace(signal, values=signal.values.copy())
    power = signal.power
    if power <= 0.0:
        raise NumericalError(f"signal '{signal.signal_id}' has zero power; SNR is undefined")
    noise_variance = power / (10.0 ** (snr_db / 10.0))
    noise = rng.normal(0.0, math.sqrt(noise_variance), size=signal.values.shape[0])
    return replace(signal, values=signal.values + noise)
