""" Synthetic transfer-function data and noise time series with known
ground truth """

import logging
import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .model import (
    ComplexResponse,
    MainCavityParams,
    ParameterError,
    PccParams,
    PhysicalConstants,
    derive_rates,
    observable_H,
    observable_H_exact,
)

logger = logging.getLogger(__name__)

TF_MODES = ("ratio", "exact_ratio")


@dataclass(frozen=True)
class FrequencyGrid:
    """Frequency sweep [Hz]; ``spacing`` is ``log`` or ``linear``."""

    f_min: float = 4e3
    f_max: float = 2e6
    n_points: int = 200
    spacing: str = "log"

    def __post_init__(self):
        if self.spacing not in ("log", "linear"):
            raise ParameterError(
                "Grid spacing must be `log` or `linear`, got {!r}".format(self.spacing)
            )
        if self.n_points < 2:
            raise ParameterError(
                "Grid needs at least 2 points, got {!r}".format(self.n_points)
            )
        if self.spacing == "log" and not self.f_min > 0:
            raise ParameterError(
                "Log-spaced grid needs f_min > 0, got {!r}".format(self.f_min)
            )
        if not 0 <= self.f_min < self.f_max:
            raise ParameterError(
                "Grid needs 0 <= f_min < f_max, got {0!r}, {1!r}".format(
                    self.f_min, self.f_max
                )
            )


@dataclass(frozen=True)
class MeasurementNoiseModel:
    """Multiplicative amplitude and additive phase noise of an analyzer."""

    rel_amplitude_sigma: float = 0.0
    phase_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.rel_amplitude_sigma < 0 or self.phase_sigma < 0:
            raise ParameterError("Measurement noise sigmas must be non-negative")


@dataclass(frozen=True)
class AsdSegment:
    """Power-law piece of a one-sided ASD on ``(f_lo, f_hi]``.

    ``ASD(f) = asd * (f / f_lo) ** exponent``; a segment starting at 0 Hz
    must be flat.
    """

    f_lo: float
    f_hi: float
    asd: float
    exponent: float = 0.0

    def __post_init__(self):
        if not 0 <= self.f_lo < self.f_hi:
            raise ParameterError(
                "Segment needs 0 <= f_lo < f_hi, got ({0!r}, {1!r})".format(
                    self.f_lo, self.f_hi
                )
            )
        if self.asd < 0:
            raise ParameterError("Segment ASD must be non-negative")
        if self.f_lo == 0 and self.exponent != 0:
            raise ParameterError("A segment starting at 0 Hz must have exponent 0")

    def evaluate(self, freqs: np.ndarray) -> np.ndarray:
        if self.exponent == 0:
            return np.full_like(freqs, self.asd, dtype=float)
        return self.asd * (freqs / self.f_lo) ** self.exponent

    def mean_square(self) -> float:
        """Integral of ``ASD**2`` over the segment."""
        power = 2.0 * self.exponent + 1.0
        if self.exponent == 0:
            return self.asd ** 2 * (self.f_hi - self.f_lo)
        if power == 0:
            return self.asd ** 2 * self.f_lo * math.log(self.f_hi / self.f_lo)
        return (
            self.asd ** 2
            * self.f_lo
            / power
            * ((self.f_hi / self.f_lo) ** power - 1.0)
        )


def make_grid(spec: FrequencyGrid) -> np.ndarray:
    """
    Sample the frequency sweep described by ``spec``.

    Args:
        spec: Grid description.

    Returns:
        Strictly increasing frequencies including both endpoints.
    """
    if spec.spacing == "log":
        return np.geomspace(spec.f_min, spec.f_max, spec.n_points)
    return np.linspace(spec.f_min, spec.f_max, spec.n_points)


# pylint: disable=too-many-arguments
def synth_tf(
    consts: PhysicalConstants,
    cav: MainCavityParams,
    pcc: PccParams,
    grid: FrequencyGrid,
    noise: MeasurementNoiseModel,
    mode: str = "ratio",
    include_detuning: bool = False,
    gain: complex = 1.0,
) -> ComplexResponse:
    """
    Synthesize a measured speed meter / position meter ratio.

    Args:
        consts: Physical constants.
        cav: Main cavity parameters.
        pcc: PCC parameters.
        grid: Frequency sweep.
        noise: Measurement noise and its seed.
        mode: ``ratio`` for the first-order observable, ``exact_ratio``
            for the ratio of exact quadrature responses.
        include_detuning: Keep the detuning term of the first-order
            observable.
        gain: Overall complex gain applied before noise.

    Raises:
        ParameterError: If ``mode`` is unknown.

    Returns:
        Synthetic response.
    """
    if mode not in TF_MODES:
        raise ParameterError(
            "Unknown response mode {0!r}, expected one of {1}".format(mode, TF_MODES)
        )
    freqs = make_grid(grid)
    rates = derive_rates(consts, cav, pcc)
    if mode == "ratio":
        model = observable_H(rates, freqs, include_detuning)
    else:
        model = observable_H_exact(rates, pcc, pcc.dphi_ret + pcc.dphi_pcc, freqs)

    rng = np.random.default_rng(noise.seed)
    amplitude = rng.normal(0.0, noise.rel_amplitude_sigma, freqs.size)
    phase = rng.normal(0.0, noise.phase_sigma, freqs.size)
    values = gain * model * (1.0 + amplitude) * np.exp(1j * phase)
    return ComplexResponse(freqs, values)


def segments_rms(segments: Sequence[AsdSegment]) -> float:
    """Analytic RMS of the process described by ``segments``."""
    return math.sqrt(sum(seg.mean_square() for seg in segments))


def scale_segments(
    segments: Sequence[AsdSegment], target_rms: float
) -> Tuple[AsdSegment, ...]:
    """Rescale an ASD description so that its RMS equals ``target_rms``."""
    current = segments_rms(segments)
    if current == 0:
        raise ParameterError("Cannot rescale an all-zero ASD description")
    factor = target_rms / current
    return tuple(
        AsdSegment(seg.f_lo, seg.f_hi, seg.asd * factor, seg.exponent)
        for seg in segments
    )


def _evaluate_segments(segments: Sequence[AsdSegment], freqs: np.ndarray) -> np.ndarray:
    asd = np.zeros_like(freqs)
    for seg in segments:
        mask = (freqs > seg.f_lo) & (freqs <= seg.f_hi)
        asd[mask] = seg.evaluate(freqs[mask])
    return asd


def synth_noise_timeseries(
    segments: Sequence[AsdSegment], duration: float, rate: float, seed: int
) -> np.ndarray:
    """
    Gaussian PCC length series [m] with a prescribed one-sided ASD.

    White noise is shaped in the frequency domain; the DC bin is removed.

    Args:
        segments: Power-law pieces covering ``(0, rate/2]``.
        duration: Length of the series [s].
        rate: Sample rate [Hz].
        seed: Seed of the random generator.

    Raises:
        ParameterError: If the description is empty, does not cover the
            band or yields fewer than 2 samples.

    Returns:
        Time series of ``round(duration * rate)`` samples.
    """
    if not segments:
        raise ParameterError("ASD description is empty")
    if not rate > 0:
        raise ParameterError("Sample rate must be positive, got {!r}".format(rate))
    n_samples = int(round(duration * rate))
    if n_samples < 2:
        raise ParameterError(
            "duration * rate must give at least 2 samples, got {}".format(n_samples)
        )
    nyquist = rate / 2.0
    ordered = sorted(segments, key=lambda seg: seg.f_lo)
    reach = 0.0
    for seg in ordered:
        if seg.f_lo > reach:
            break
        reach = max(reach, seg.f_hi)
    if reach < nyquist:
        raise ParameterError(
            "ASD description covers (0, {0:g}] Hz but must reach {1:g} Hz".format(
                reach, nyquist
            )
        )

    rng = np.random.default_rng(seed)
    white = rng.standard_normal(n_samples)
    spectrum = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n_samples, 1.0 / rate)
    # unit-variance white noise has a one-sided PSD of 2 / rate
    shaping = _evaluate_segments(ordered, freqs) * math.sqrt(rate / 2.0)
    shaping[0] = 0.0
    series = np.fft.irfft(spectrum * shaping, n=n_samples)
    logger.debug(
        "Synthesized %d samples, target RMS %g, realized %g",
        n_samples,
        segments_rms(ordered),
        float(np.std(series)),
    )
    return series
