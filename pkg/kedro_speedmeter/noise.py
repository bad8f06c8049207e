""" Spectral analysis of PCC length time series """

import logging
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
from scipy.signal import welch

from .model import DerivedRates, PhaseConvention, PhysicalConstants, length_to_phase

logger = logging.getLogger(__name__)

_WINDOWS = {"hann": "hann", "rectangular": "boxcar"}


class SpectrumError(ValueError):
    """Raised when a series cannot be analysed with the given settings."""


@dataclass(frozen=True)
class SpectrumConfig:
    """Welch estimator settings and the RMS readout frequency [Hz]."""

    segment_length: int = 4096
    overlap: float = 0.5
    window: str = "hann"
    detrend: bool = True
    readout_frequency: float = 0.02

    def __post_init__(self):
        if self.segment_length < 8 or self.segment_length % 2:
            raise SpectrumError(
                "segment_length must be even and >= 8, got {!r}".format(
                    self.segment_length
                )
            )
        if not 0.0 <= self.overlap < 1.0:
            raise SpectrumError(
                "overlap must lie in [0, 1), got {!r}".format(self.overlap)
            )
        if self.window not in _WINDOWS:
            raise SpectrumError(
                "window must be one of {0}, got {1!r}".format(
                    sorted(_WINDOWS), self.window
                )
            )
        if self.readout_frequency < 0:
            raise SpectrumError("readout_frequency must be non-negative")


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    """One-sided ASD [m/rtHz] with the RMS accumulated from the top down."""

    freqs: np.ndarray
    asd: np.ndarray
    cum_rms: np.ndarray
    total_rms: float

    def rms_at(self, frequency: float) -> float:
        """Accumulated RMS at the first bin at or above ``frequency``."""
        index = int(np.searchsorted(self.freqs, frequency, side="left"))
        if index >= len(self.freqs):
            return 0.0
        return float(self.cum_rms[index])


def accumulate_rms(
    asd: np.ndarray, freqs: np.ndarray, df: Optional[float] = None
) -> np.ndarray:
    """
    Integrate ``asd**2`` from the highest frequency downward.

    Args:
        asd: One-sided amplitude spectral density.
        freqs: Bin frequencies, same length as ``asd``.
        df: Bin width. Derived from ``freqs`` when omitted.

    Raises:
        SpectrumError: If the grids do not match or the bin width cannot
            be derived.

    Returns:
        ``sqrt(sum_{f' >= f} asd(f')**2 df')`` for every bin.
    """
    asd = np.asarray(asd, dtype=float)
    freqs = np.asarray(freqs, dtype=float)
    if asd.shape != freqs.shape:
        raise SpectrumError(
            "ASD and frequency grids differ: {0} vs {1}".format(asd.shape, freqs.shape)
        )
    if df is None:
        if freqs.size < 2:
            raise SpectrumError("Bin width is needed for a single-bin spectrum")
        widths = np.diff(freqs)
        widths = np.append(widths, widths[-1])
    else:
        widths = np.full_like(freqs, df)
    power = asd ** 2 * widths
    return np.sqrt(np.cumsum(power[::-1])[::-1])


def estimate_asd(
    series: np.ndarray, rate: float, cfg: SpectrumConfig
) -> SpectrumResult:
    """
    Averaged, windowed one-sided ASD of a length series.

    Args:
        series: PCC length samples [m].
        rate: Sample rate [Hz].
        cfg: Estimator settings.

    Raises:
        SpectrumError: If the series is shorter than one segment.

    Returns:
        Spectrum with its accumulated RMS.
    """
    series = np.asarray(series, dtype=float)
    if series.size < cfg.segment_length:
        raise SpectrumError(
            "Series has {0} samples but at least {1} (one segment) are "
            "required".format(series.size, cfg.segment_length)
        )
    if not rate > 0:
        raise SpectrumError("Sample rate must be positive, got {!r}".format(rate))

    freqs, psd = welch(
        series,
        fs=rate,
        window=_WINDOWS[cfg.window],
        nperseg=cfg.segment_length,
        noverlap=int(cfg.overlap * cfg.segment_length),
        detrend="constant" if cfg.detrend else False,
        scaling="density",
        return_onesided=True,
    )
    asd = np.sqrt(psd)
    cum_rms = accumulate_rms(asd, freqs, df=rate / cfg.segment_length)
    result = SpectrumResult(freqs, asd, cum_rms, float(cum_rms[0]))
    logger.info(
        "Estimated ASD from %d samples at %g Hz, total RMS %g m",
        series.size,
        rate,
        result.total_rms,
    )
    return result


def project_detuning(
    rms_length: float,
    consts: PhysicalConstants,
    rates: DerivedRates,
    convention: PhaseConvention,
) -> float:
    """
    Detuning [Hz] caused by an RMS PCC length fluctuation.

    Args:
        rms_length: RMS length fluctuation [m].
        consts: Physical constants.
        rates: Derived rates supplying ``gamma1``.
        convention: Length to phase conversion.

    Returns:
        ``gamma1 * dphi / 2`` expressed in Hz.
    """
    if rms_length < 0:
        raise SpectrumError("RMS length must be non-negative")
    dphi = length_to_phase(rms_length, consts, convention)
    return float(rates.gamma1 * dphi / 2.0 / (2.0 * np.pi))


def summarize(
    result: SpectrumResult,
    consts: PhysicalConstants,
    rates: DerivedRates,
    readout_frequency: float,
) -> Dict[str, float]:
    """Key figures of a spectrum: RMS values and their detuning projections."""
    readout_rms = result.rms_at(readout_frequency)
    summary = {
        "total_rms": result.total_rms,
        "readout_frequency": readout_frequency,
        "readout_rms": readout_rms,
    }
    for name, rms in (("total", result.total_rms), ("readout", readout_rms)):
        for convention in PhaseConvention:
            key = "detuning_{0}_{1}_hz".format(name, convention.value)
            summary[key] = project_detuning(rms, consts, rates, convention)
    return summary
