import math

import numpy as np
import pytest

from pq_sparse.exceptions import ConfigurationError, NumericalError, ValidationError
from pq_sparse.signals.disturbances import (
    LABELED_CLASSES,
    DisturbanceClass,
    DisturbanceParams,
    DisturbanceRanges,
    SamplingGrid,
    Signal,
    add_awgn,
    generate_disturbance,
    generate_pure,
    sample_params,
    validate_params,
)

GRID = SamplingGrid()
OMEGA = 2 * np.pi * 60.0


def test_default_grid():
    assert GRID.n_samples == 2101
    assert GRID.times[0] == 0.0
    assert GRID.times[-1] == pytest.approx(0.7, abs=1e-12)
    assert GRID.sample_rate == pytest.approx(3000.0)


@pytest.mark.parametrize("n_samples, duration", [(1, 0.7), (100, 0.0), (100, -1.0), (10.5, 0.7)])
def test_grid_rejects_bad_values(n_samples, duration):
    with pytest.raises(ConfigurationError):
        SamplingGrid(n_samples=n_samples, duration=duration)


def test_pure_sinusoid_values():
    signal = generate_pure(GRID)
    assert signal.values[0] == 0.0
    assert signal.values[-1] == pytest.approx(np.sin(OMEGA * 0.7), abs=1e-9)

    # one sample every quarter period of 60 Hz
    quarter = generate_pure(SamplingGrid(n_samples=241, duration=1.0))
    assert quarter.values[1] == pytest.approx(1.0, abs=1e-12)


def test_class_codes():
    assert DisturbanceClass.HARMONIC.code == "C1"
    assert DisturbanceClass.from_code("C7") is DisturbanceClass.OSCILLATORY
    assert DisturbanceClass.from_code("Sag") is DisturbanceClass.SAG
    assert len(LABELED_CLASSES) == 7
    with pytest.raises(ValidationError):
        DisturbanceClass.from_code("C9")


@pytest.mark.parametrize("disturbance", LABELED_CLASSES)
def test_sampled_params_validate_and_generate_finite(disturbance):
    for seed in range(5):
        params = sample_params(disturbance, np.random.default_rng(seed), GRID)
        validate_params(params, GRID)
        signal = generate_disturbance(disturbance, params, GRID)
        assert signal.values.shape == (2101,)
        assert np.all(np.isfinite(signal.values))
        assert signal.label is disturbance


def test_same_stream_gives_same_params():
    a = sample_params(DisturbanceClass.NOTCH, np.random.default_rng(9), GRID)
    b = sample_params(DisturbanceClass.NOTCH, np.random.default_rng(9), GRID)
    assert a == b


def test_swell_alpha_within_range():
    ranges = DisturbanceRanges()
    for seed in range(20):
        params = sample_params(DisturbanceClass.SWELL, np.random.default_rng(seed), GRID)
        assert ranges.swell_alpha[0] <= params.alpha <= ranges.swell_alpha[1]
        cycles = (params.t2 - params.t1) * 60.0
        assert 6.0 - 1e-9 <= cycles <= 10.0 + 1e-9


def test_harmonic_amplitudes_have_unit_energy():
    for seed in range(10):
        params = sample_params(DisturbanceClass.HARMONIC, np.random.default_rng(seed), GRID)
        assert sum(a ** 2 for a in params.harmonic_amplitudes) == pytest.approx(1.0, abs=1e-12)


def test_swell_scales_inside_window_only():
    t1 = float(GRID.times[600])
    params = DisturbanceParams(DisturbanceClass.SWELL, alpha=0.5, t1=t1, t2=t1 + 8 / 60.0)
    signal = generate_disturbance(DisturbanceClass.SWELL, params, GRID)
    base = np.sin(OMEGA * GRID.times)

    np.testing.assert_allclose(signal.values[601:1000], 1.5 * base[601:1000], rtol=0, atol=1e-12)
    np.testing.assert_allclose(signal.values[:600], base[:600], rtol=0, atol=1e-12)
    np.testing.assert_allclose(signal.values[1002:], base[1002:], rtol=0, atol=1e-12)


def test_sag_leaves_outside_untouched():
    t1 = float(GRID.times[300])
    params = DisturbanceParams(DisturbanceClass.SAG, alpha=0.3, t1=t1, t2=t1 + 7 / 60.0)
    signal = generate_disturbance(DisturbanceClass.SAG, params, GRID)
    base = np.sin(OMEGA * GRID.times)
    np.testing.assert_array_equal(signal.values[:300], base[:300])
    np.testing.assert_allclose(signal.values[301:640], 0.7 * base[301:640], atol=1e-12)


def test_oscillatory_formula_at_window_start():
    t1 = float(GRID.times[600])
    params = DisturbanceParams(DisturbanceClass.OSCILLATORY, alpha=0.5, t1=t1, t2=t1 + 0.02 / 60.0,
                               decay=0.15, order=10)
    signal = generate_disturbance(DisturbanceClass.OSCILLATORY, params, GRID)
    expected = np.sin(OMEGA * t1) + 0.5 * math.exp(-t1 / 0.15) * np.sin(10 * OMEGA * t1)
    assert signal.values[600] == pytest.approx(expected, abs=1e-12)
    assert signal.values[100] == pytest.approx(np.sin(OMEGA * GRID.times[100]), abs=1e-12)


def test_validate_rejects_alpha_out_of_range():
    params = DisturbanceParams(DisturbanceClass.SWELL, alpha=0.95, t1=0.2, t2=0.2 + 8 / 60.0)
    with pytest.raises(ValidationError) as info:
        validate_params(params, GRID)
    assert info.value.field == "alpha"


def test_validate_rejects_short_event():
    params = DisturbanceParams(DisturbanceClass.SAG, alpha=0.5, t1=0.2, t2=0.2 + 2 / 60.0)
    with pytest.raises(ValidationError):
        validate_params(params, GRID)


def test_generate_rejects_mismatched_params():
    params = sample_params(DisturbanceClass.FLICKER, np.random.default_rng(0), GRID)
    with pytest.raises(ValidationError):
        generate_disturbance(DisturbanceClass.SAG, params, GRID)


def test_params_text_form():
    params = sample_params(DisturbanceClass.OSCILLATORY, np.random.default_rng(4), GRID)
    text = params.to_pairs()
    assert text.startswith("class=C7;")
    assert DisturbanceParams.from_pairs(text) == params


def test_signal_rejects_wrong_length_and_nan():
    with pytest.raises(ValidationError):
        Signal(grid=GRID, values=np.zeros(10))
    values = np.zeros(GRID.n_samples)
    values[3] = np.nan
    with pytest.raises(ValidationError):
        Signal(grid=GRID, values=values)


@pytest.mark.parametrize("snr", [None, float("inf")])
def test_awgn_without_noise_returns_copy(snr):
    signal = generate_pure(GRID)
    noisy = add_awgn(signal, snr, np.random.default_rng(0))
    np.testing.assert_array_equal(noisy.values, signal.values)
    assert noisy.values is not signal.values


@pytest.mark.parametrize("snr", [0.0, 30.0])
def test_awgn_reaches_requested_snr(snr):
    signal = generate_pure(GRID)
    noisy = add_awgn(signal, snr, np.random.default_rng(1))
    noise_power = np.mean((noisy.values - signal.values) ** 2)
    measured = 10 * np.log10(signal.power / noise_power)
    assert measured == pytest.approx(snr, abs=1.0)


def test_awgn_zero_power_signal():
    silent = Signal(grid=GRID, values=np.zeros(GRID.n_samples))
    with pytest.raises(NumericalError):
        add_awgn(silent, 20.0, np.random.default_rng(0))


def test_notch_only_touches_its_windows():
    pure = generate_pure(GRID).values
    t = GRID.times
    for seed in range(10):
        params = sample_params(DisturbanceClass.NOTCH, np.random.default_rng(seed), GRID)
        values = generate_disturbance(DisturbanceClass.NOTCH, params, GRID).values
        depth = np.zeros_like(t)
        for amplitude, center, width in zip(params.notch_amplitudes, params.notch_centers, params.notch_widths):
            depth += amplitude * ((t >= center - width / 2.0) & (t < center + width / 2.0))
        outside = depth == 0.0
        assert not outside.all()
        np.testing.assert_array_equal(values[outside], pure[outside])
        np.testing.assert_allclose(pure[~outside] - values[~outside], np.sign(pure[~outside]) * depth[~outside],
                                   atol=1e-12)


def test_awgn_is_zero_mean_white_at_requested_variance():
    signal = generate_pure(GRID)
    expected = signal.power / 10.0 ** (20.0 / 10.0)
    n = GRID.n_samples
    for seed in range(5):
        noise = add_awgn(signal, 20.0, np.random.default_rng(seed)).values - signal.values
        assert abs(noise.mean()) < 4.0 * math.sqrt(expected / n)
        assert noise.var() == pytest.approx(expected, rel=0.12)
        lag_one = np.corrcoef(noise[:-1], noise[1:])[0, 1]
        assert abs(lag_one) < 4.0 / math.sqrt(n)
