import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from pytest import approx, mark, raises

from kedro_speedmeter.model import PhaseConvention
from kedro_speedmeter.noise import (
    SpectrumConfig,
    SpectrumError,
    accumulate_rms,
    estimate_asd,
    project_detuning,
    summarize,
)
from kedro_speedmeter.synth import AsdSegment, scale_segments, synth_noise_timeseries


TWO_PI = 2.0 * np.pi


def _series(target, seed=0, segments=(AsdSegment(0.0, 128.0, 1.0),)):
    return synth_noise_timeseries(scale_segments(segments, target), 512.0, 256.0, seed)


class TestSpectrumConfig:
    @mark.parametrize(
        "kwargs, pattern",
        [
            (dict(segment_length=7), "segment_length"),
            (dict(segment_length=101), "segment_length"),
            (dict(overlap=1.0), "overlap"),
            (dict(window="blackman"), "window"),
            (dict(readout_frequency=-1.0), "readout_frequency"),
        ],
    )
    def test_invalid(self, kwargs, pattern):
        """Unsupported estimator settings are rejected"""
        with raises(SpectrumError, match=pattern):
            SpectrumConfig(**kwargs)


class TestEstimateAsd:
    @mark.parametrize("target", [1e-10, 7e-10])
    def test_total_rms(self, target):
        """The accumulated RMS recovers the engineered RMS"""
        result = estimate_asd(_series(target), 256.0, SpectrumConfig())
        assert result.total_rms == approx(target, rel=0.1)

    def test_parseval(self):
        """Integrated ASD matches the time-domain variance"""
        series = _series(
            1e-10,
            seed=5,
            segments=(AsdSegment(0.0, 1.0, 1.0), AsdSegment(1.0, 128.0, 1.0, -1.0)),
        )
        result = estimate_asd(series, 256.0, SpectrumConfig())
        assert result.total_rms == approx(np.std(series), rel=0.1)

    def test_flat_level(self):
        """A flat spectrum is estimated at its level"""
        result = estimate_asd(_series(1e-10), 256.0, SpectrumConfig())
        level = 1e-10 / np.sqrt(128.0)
        assert np.median(result.asd[1:-1]) == approx(level, rel=0.1)

    def test_zero_input(self):
        """An all-zero series has no spectrum"""
        result = estimate_asd(np.zeros(8192), 256.0, SpectrumConfig())
        assert np.all(result.asd == 0.0)
        assert result.total_rms == 0.0

    def test_too_short(self):
        """The error names the minimum length"""
        with raises(SpectrumError, match="at least 4096"):
            estimate_asd(np.zeros(100), 256.0, SpectrumConfig())

    @mark.parametrize("window", ["hann", "rectangular"])
    def test_grid(self, window):
        """Bins are spaced by rate over segment length"""
        cfg = SpectrumConfig(segment_length=256, window=window, detrend=False)
        result = estimate_asd(np.ones(1024), 64.0, cfg)
        assert len(result.freqs) == 129
        assert result.freqs[1] == approx(0.25)
        assert result.freqs[-1] == approx(32.0)

    def test_rms_at(self):
        """RMS at a frequency accumulates the bins at and above it"""
        result = estimate_asd(_series(1e-10), 256.0, SpectrumConfig())
        assert result.rms_at(0.0) == result.total_rms
        assert result.rms_at(0.02) == result.cum_rms[1]
        assert result.rms_at(1e3) == 0.0
        assert result.rms_at(64.0) == approx(1e-10 / np.sqrt(2.0), rel=0.1)

    def test_sinusoid_rms(self):
        """A sinusoid of amplitude A has a total RMS of A / sqrt(2)"""
        t = np.arange(65536) / 256.0
        series = 3e-10 * np.sin(TWO_PI * 10.3 * t)
        result = estimate_asd(series, 256.0, SpectrumConfig())
        assert result.total_rms == approx(3e-10 / np.sqrt(2.0), rel=0.02)

    def test_rectangular_window_bin_centred(self):
        """Without a taper a bin-centred sinusoid stays in its bin"""
        t = np.arange(65536) / 256.0
        series = np.sin(TWO_PI * 40 * 256.0 / 4096 * t)
        result = estimate_asd(series, 256.0, SpectrumConfig(window="rectangular"))
        power = result.asd ** 2
        assert np.argmax(power) == 40
        assert power[40] >= 0.99 * power.sum()


class TestAccumulateRms:
    def test_flat(self):
        """A flat ASD accumulates as the square root of the bandwidth"""
        freqs = np.arange(1.0, 101.0)
        cum = accumulate_rms(np.ones(100), freqs)
        assert cum[0] == approx(10.0)
        assert cum[-1] == approx(1.0)

    def test_single_bin(self):
        """A single bin needs an explicit bin width"""
        with raises(SpectrumError, match="Bin width"):
            accumulate_rms(np.ones(1), np.ones(1))
        assert accumulate_rms(np.ones(1), np.ones(1), df=4.0)[0] == approx(2.0)

    def test_shape_mismatch(self):
        """ASD and frequencies must match"""
        with raises(SpectrumError, match="differ"):
            accumulate_rms(np.ones(3), np.ones(4))


class TestProjectDetuning:
    def test_single_pass(self, consts, rates):
        """0.7 nm of single-pass length noise is about 700 Hz"""
        detuning = project_detuning(7e-10, consts, rates, PhaseConvention.SINGLE_PASS)
        assert detuning == approx(700.0, rel=0.1)

    def test_round_trip_doubles(self, consts, rates):
        """The round-trip convention doubles the projection"""
        single = project_detuning(1e-10, consts, rates, PhaseConvention.SINGLE_PASS)
        double = project_detuning(1e-10, consts, rates, PhaseConvention.ROUND_TRIP)
        assert double == approx(2.0 * single)

    def test_negative(self, consts, rates):
        """RMS values cannot be negative"""
        with raises(SpectrumError, match="non-negative"):
            project_detuning(-1.0, consts, rates, PhaseConvention.SINGLE_PASS)

    def test_summary(self, consts, rates):
        """The summary carries both projections of both RMS values"""
        result = estimate_asd(_series(1e-10), 256.0, SpectrumConfig())
        summary = summarize(result, consts, rates, 0.02)
        assert summary["total_rms"] == result.total_rms
        assert summary["readout_rms"] == result.rms_at(0.02)
        assert summary["detuning_total_round_trip_hz"] == approx(
            2.0 * summary["detuning_total_single_pass_hz"]
        )
        assert set(summary) == {
            "total_rms",
            "readout_frequency",
            "readout_rms",
            "detuning_total_single_pass_hz",
            "detuning_total_round_trip_hz",
            "detuning_readout_single_pass_hz",
            "detuning_readout_round_trip_hz",
        }


@settings(max_examples=100, deadline=None)
@given(asd=arrays(float, st.integers(2, 200), elements=st.floats(0.0, 1e3)))
def test_cum_rms_monotonic(asd):
    """The accumulated RMS never increases with frequency"""
    freqs = np.arange(asd.size, dtype=float)
    cum = accumulate_rms(asd, freqs)
    assert np.all(np.diff(cum) <= 1e-9 * max(cum[0], 1.0))
    assert cum[0] == approx(np.sqrt(np.sum(asd ** 2)))
