import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from pytest import approx, mark, raises

from kedro_speedmeter.model import ParameterError, derive_rates, observable_H
from kedro_speedmeter.synth import (
    AsdSegment,
    FrequencyGrid,
    MeasurementNoiseModel,
    make_grid,
    scale_segments,
    segments_rms,
    synth_noise_timeseries,
    synth_tf,
)


class TestFrequencyGrid:
    def test_log_endpoints(self):
        """Log grids include both ends of the sweep"""
        freqs = make_grid(FrequencyGrid(4e3, 2e6, 200, "log"))
        assert len(freqs) == 200
        assert freqs[0] == approx(4e3)
        assert freqs[-1] == approx(2e6)
        assert np.diff(np.log(freqs)) == approx(np.full(199, math.log(500) / 199))

    def test_linear_from_zero(self):
        """Linear grids may start at DC"""
        freqs = make_grid(FrequencyGrid(0.0, 10.0, 11, "linear"))
        assert list(freqs) == approx(list(range(11)))

    @mark.parametrize(
        "kwargs, pattern",
        [
            (dict(n_points=1), "at least 2"),
            (dict(f_min=0.0), "f_min > 0"),
            (dict(f_min=3e6), "f_min < f_max"),
            (dict(spacing="octave"), "spacing"),
        ],
    )
    def test_invalid(self, kwargs, pattern):
        """Empty or malformed sweeps are rejected"""
        with raises(ParameterError, match=pattern):
            FrequencyGrid(**kwargs)


class TestSynthTf:
    def test_noiseless_matches_model(self, consts, cav, pcc):
        """Without noise the data are the model"""
        data = synth_tf(consts, cav, pcc, FrequencyGrid(), MeasurementNoiseModel())
        expected = observable_H(derive_rates(consts, cav, pcc), data.freqs)
        assert np.allclose(data.values, expected, rtol=1e-14, atol=0.0)

    def test_gain(self, consts, cav, pcc):
        """The overall gain multiplies every point"""
        plain = synth_tf(consts, cav, pcc, FrequencyGrid(), MeasurementNoiseModel())
        scaled = synth_tf(
            consts, cav, pcc, FrequencyGrid(), MeasurementNoiseModel(), gain=2j
        )
        assert np.allclose(scaled.values, 2j * plain.values)

    def test_seeded(self, consts, cav, pcc):
        """The same seed reproduces the same noise, another seed does not"""
        noise = MeasurementNoiseModel(
            rel_amplitude_sigma=0.02, phase_sigma=0.01, seed=42
        )
        first = synth_tf(consts, cav, pcc, FrequencyGrid(), noise)
        second = synth_tf(consts, cav, pcc, FrequencyGrid(), noise)
        other = synth_tf(
            consts,
            cav,
            pcc,
            FrequencyGrid(),
            MeasurementNoiseModel(rel_amplitude_sigma=0.02, phase_sigma=0.01, seed=43),
        )
        assert np.array_equal(first.values, second.values)
        assert not np.array_equal(first.values, other.values)

    def test_noise_level(self, consts, cav, pcc):
        """Relative amplitude noise has the requested spread"""
        grid = FrequencyGrid(n_points=5000)
        clean = synth_tf(consts, cav, pcc, grid, MeasurementNoiseModel())
        noisy = synth_tf(
            consts, cav, pcc, grid, MeasurementNoiseModel(rel_amplitude_sigma=0.02)
        )
        spread = np.std(np.abs(noisy.values) / np.abs(clean.values) - 1.0)
        assert spread == approx(0.02, rel=0.1)

    def test_exact_ratio_mode(self, consts, cav, pcc):
        """The exact ratio is sampled on the same grid"""
        first = synth_tf(consts, cav, pcc, FrequencyGrid(), MeasurementNoiseModel())
        exact = synth_tf(
            consts,
            cav,
            pcc,
            FrequencyGrid(),
            MeasurementNoiseModel(),
            mode="exact_ratio",
        )
        assert np.array_equal(first.freqs, exact.freqs)
        assert np.all(np.isfinite(exact.values))

    def test_unknown_mode(self, consts, cav, pcc):
        """Unknown modes are rejected"""
        with raises(ParameterError, match="Unknown response mode"):
            synth_tf(
                consts, cav, pcc, FrequencyGrid(), MeasurementNoiseModel(), mode="x"
            )


class TestAsdSegments:
    def test_flat_mean_square(self):
        """A flat segment integrates to ASD squared times its width"""
        assert AsdSegment(0.0, 100.0, 2.0).mean_square() == approx(400.0)

    def test_inverse_frequency_mean_square(self):
        """A 1/f segment integrates analytically"""
        segment = AsdSegment(1.0, 10.0, 1.0, -1.0)
        assert segment.mean_square() == approx(1.0 - 0.1)

    def test_half_power_mean_square(self):
        """An exponent of -1/2 gives a logarithm"""
        segment = AsdSegment(1.0, math.e, 1.0, -0.5)
        assert segment.mean_square() == approx(1.0)

    def test_scale(self):
        """Rescaling hits the requested RMS and keeps the shape"""
        segments = (AsdSegment(0.0, 10.0, 1.0), AsdSegment(10.0, 100.0, 1.0, -1.0))
        scaled = scale_segments(segments, 1e-10)
        assert segments_rms(scaled) == approx(1e-10)
        assert scaled[1].asd / scaled[0].asd == approx(1.0)

    def test_scale_zero(self):
        """An all-zero description cannot be rescaled"""
        with raises(ParameterError, match="all-zero"):
            scale_segments((AsdSegment(0.0, 1.0, 0.0),), 1.0)

    @mark.parametrize(
        "args, pattern",
        [
            ((0.0, 1.0, 1.0, -1.0), "exponent 0"),
            ((2.0, 1.0, 1.0), "f_lo < f_hi"),
            ((0.0, 1.0, -1.0), "non-negative"),
        ],
    )
    def test_invalid(self, args, pattern):
        """Malformed segments are rejected"""
        with raises(ParameterError, match=pattern):
            AsdSegment(*args)


class TestSynthNoiseTimeseries:
    @mark.parametrize("target", [1e-10, 7e-10])
    def test_rms(self, target):
        """The realized RMS matches the description"""
        segments = scale_segments((AsdSegment(0.0, 128.0, 1.0),), target)
        series = synth_noise_timeseries(segments, 512.0, 256.0, seed=0)
        assert len(series) == 131072
        assert np.std(series) == approx(target, rel=0.05)

    def test_shaped_rms(self):
        """A coloured spectrum keeps its analytic RMS"""
        segments = scale_segments(
            (AsdSegment(0.0, 10.0, 1.0), AsdSegment(10.0, 128.0, 1.0, -1.0)), 1e-10
        )
        series = synth_noise_timeseries(segments, 512.0, 256.0, seed=3)
        assert np.std(series) == approx(1e-10, rel=0.1)

    def test_seeded(self):
        """Series are reproducible from their seed"""
        segments = (AsdSegment(0.0, 50.0, 1.0),)
        first = synth_noise_timeseries(segments, 4.0, 100.0, seed=7)
        second = synth_noise_timeseries(segments, 4.0, 100.0, seed=7)
        assert np.array_equal(first, second)

    def test_no_dc(self):
        """The mean is removed"""
        series = synth_noise_timeseries((AsdSegment(0.0, 50.0, 1.0),), 10.0, 100.0, 1)
        assert abs(np.mean(series)) < 1e-12

    def test_band_not_covered(self):
        """The description must reach the Nyquist frequency"""
        with raises(ParameterError, match="must reach 128"):
            synth_noise_timeseries((AsdSegment(0.0, 10.0, 1.0),), 10.0, 256.0, 0)

    def test_too_short(self):
        """At least two samples are needed"""
        with raises(ParameterError, match="at least 2 samples"):
            synth_noise_timeseries((AsdSegment(0.0, 1.0, 1.0),), 0.001, 2.0, 0)

    def test_empty(self):
        """An empty description is rejected"""
        with raises(ParameterError, match="empty"):
            synth_noise_timeseries((), 1.0, 2.0, 0)


@settings(max_examples=100, deadline=None)
@given(
    f_min=st.floats(min_value=1.0, max_value=1e5),
    ratio=st.floats(min_value=1.01, max_value=1e4),
    n_points=st.integers(min_value=2, max_value=500),
    spacing=st.sampled_from(["log", "linear"]),
)
def test_grid_strictly_increasing(f_min, ratio, n_points, spacing):
    """Every valid sweep is strictly increasing and spans the range"""
    grid = FrequencyGrid(f_min, f_min * ratio, n_points, spacing)
    freqs = make_grid(grid)
    assert len(freqs) == n_points
    assert np.all(np.diff(freqs) > 0)
    assert freqs[0] == approx(f_min)
    assert freqs[-1] == approx(f_min * ratio)
