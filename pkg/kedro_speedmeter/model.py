""" Closed-form optical response of the single-cavity polarization
circulation speed meter """

import logging
import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

TWO_PI = 2.0 * math.pi


class ParameterError(ValueError):
    """Raised when optical parameters violate their invariants."""


class OpticsWarning(UserWarning):
    """Issued for parameter sets that are computable but physically suspect."""


class PhaseConvention(str, Enum):
    """How a PCC length fluctuation is turned into a round-trip phase."""

    SINGLE_PASS = "single_pass"
    ROUND_TRIP = "round_trip"

    @property
    def factor(self) -> float:
        return TWO_PI if self is PhaseConvention.SINGLE_PASS else 2.0 * TWO_PI


def _check_fraction(name: str, value: float):
    if not 0.0 <= value < 1.0:
        raise ParameterError(
            "`{0}` must lie in [0, 1), got {1!r}".format(name, value)
        )


def _check_positive(name: str, value: float):
    if not value > 0.0:
        raise ParameterError("`{0}` must be positive, got {1!r}".format(name, value))


def _check_nonnegative(name: str, value: float):
    if not value >= 0.0:
        raise ParameterError(
            "`{0}` must be non-negative, got {1!r}".format(name, value)
        )


@dataclass(frozen=True)
class PhysicalConstants:
    """Speed of light [m/s] and main laser wavelength [m]."""

    c: float = 299792458.0
    lambda0: float = 1064e-9

    def __post_init__(self):
        _check_positive("c", self.c)
        _check_positive("lambda0", self.lambda0)


@dataclass(frozen=True)
class MainCavityParams:
    """Static parameters of the main (ITM/ETM) cavity.

    Attributes:
        t_itm: ITM power transmissivity.
        t_etm: ETM power transmissivity.
        loss_cav: Round-trip power loss of the main cavity.
        l_cav: Cavity length [m].
    """

    t_itm: float = 4000e-6
    t_etm: float = 35e-6
    loss_cav: float = 85e-6
    l_cav: float = 0.15

    def __post_init__(self):
        _check_fraction("t_itm", self.t_itm)
        _check_fraction("t_etm", self.t_etm)
        _check_fraction("loss_cav", self.loss_cav)
        _check_positive("l_cav", self.l_cav)
        if self.t_itm <= self.loss_cav:
            warnings.warn(
                "Main cavity is not over-coupled: t_itm={0:g} <= loss_cav={1:g}".format(
                    self.t_itm, self.loss_cav
                ),
                OpticsWarning,
            )


@dataclass(frozen=True)
class PccParams:
    """Static parameters of the polarization circulation cavity.

    Attributes:
        t_pcm: PCM power transmissivity.
        loss_qwp: Wave plate loss per pass.
        t_spbs: PBS transmissivity for s-polarization.
        r_ppbs: PBS reflectivity for p-polarization.
        loss_align: Alignment loss.
        loss_mis: Mode mismatch loss.
        dphi_ret: Wave plate retardation error [rad].
        dphi_pcc: RMS phase fluctuation of the PCC [rad].
        l_pcc: Mean PCC length [m].
        loss_pcc_override: Directly measured total PCC loss, used instead
            of the component sum when set.
        phase_convention: Length to phase conversion for PCC fluctuations.
    """

    t_pcm: float = 0.01
    loss_qwp: float = 0.0
    t_spbs: float = 0.0
    r_ppbs: float = 0.0
    loss_align: float = 0.0
    loss_mis: float = 0.0
    dphi_ret: float = TWO_PI * 7e-3
    dphi_pcc: float = 0.0
    l_pcc: float = 0.38
    loss_pcc_override: Optional[float] = 0.03
    phase_convention: PhaseConvention = PhaseConvention.ROUND_TRIP

    def __post_init__(self):
        for name in ("t_pcm", "loss_qwp", "t_spbs", "r_ppbs", "loss_align", "loss_mis"):
            _check_fraction(name, getattr(self, name))
        if self.loss_pcc_override is not None:
            _check_fraction("loss_pcc_override", self.loss_pcc_override)
        _check_nonnegative("dphi_ret", self.dphi_ret)
        _check_nonnegative("dphi_pcc", self.dphi_pcc)
        _check_positive("l_pcc", self.l_pcc)
        # accept plain strings coming from configuration files
        object.__setattr__(
            self, "phase_convention", PhaseConvention(self.phase_convention)
        )


@dataclass(frozen=True)
class DerivedRates:
    """Bandwidths, detunings and figures of merit derived from parameters.

    Rates are angular [rad/s]; ``f_c`` is in Hz and ``tau`` in seconds.
    """

    gamma1: float
    gamma2: float
    gamma_cut: float
    delta_ret: float
    delta_pcc: float
    finesse: float
    tau: float
    f_c: float
    loss_pcc: float = 0.0

    @property
    def gamma_cut_pcc(self) -> float:
        """Share of the cutoff contributed by the PCC loss."""
        return self.gamma_cut - self.gamma2

    @property
    def detuning(self) -> float:
        """Total detuning of the second circulation."""
        return self.delta_ret + self.delta_pcc


@dataclass(frozen=True, eq=False)
class ComplexResponse:
    """Complex transfer function sampled on a strictly increasing grid [Hz]."""

    freqs: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        freqs = np.asarray(self.freqs, dtype=float)
        values = np.asarray(self.values, dtype=complex)
        if freqs.ndim != 1 or freqs.shape != values.shape:
            raise ParameterError(
                "Frequencies and values must be 1-d arrays of equal length, "
                "got shapes {0} and {1}".format(freqs.shape, values.shape)
            )
        if np.any(np.diff(freqs) <= 0):
            raise ParameterError("Frequencies must be strictly increasing")
        if not (np.all(np.isfinite(freqs)) and np.all(np.isfinite(values))):
            raise ParameterError("Response contains NaN or Inf")
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.freqs)

    @property
    def mag(self) -> np.ndarray:
        return np.abs(self.values)

    @property
    def phase_deg(self) -> np.ndarray:
        return np.degrees(np.angle(self.values))

    def restrict(self, f_lo: float, f_hi: float) -> "ComplexResponse":
        """Return the part of the response with ``f_lo <= f <= f_hi``."""
        mask = (self.freqs >= f_lo) & (self.freqs <= f_hi)
        return ComplexResponse(self.freqs[mask], self.values[mask])


def length_to_phase(
    length: ArrayLike, consts: PhysicalConstants, convention: PhaseConvention
) -> ArrayLike:
    """Convert a PCC length excursion [m] into a phase [rad]."""
    return PhaseConvention(convention).factor * np.asarray(length) / consts.lambda0


def effective_pcc_loss(pcc: PccParams) -> float:
    """
    Effective loss of the polarization circulation cavity.

    Args:
        pcc: PCC parameters.

    Returns:
        The measured override when present, otherwise
        ``2 (loss_qwp + t_spbs + r_ppbs) + t_pcm + loss_align + loss_mis``,
        clamped to ``[0, 1)``.
    """
    if pcc.loss_pcc_override is not None:
        return pcc.loss_pcc_override

    loss = (
        2.0 * (pcc.loss_qwp + pcc.t_spbs + pcc.r_ppbs)
        + pcc.t_pcm
        + pcc.loss_align
        + pcc.loss_mis
    )
    if loss >= 1.0:
        clamped = np.nextafter(1.0, 0.0)
        warnings.warn(
            "Effective PCC loss {0:g} clamped to {1!r}".format(loss, clamped),
            OpticsWarning,
        )
        return float(clamped)
    return loss


def derive_rates(
    consts: PhysicalConstants, cav: MainCavityParams, pcc: PccParams
) -> DerivedRates:
    """
    Compute bandwidths, detunings and figures of merit.

    Args:
        consts: Physical constants.
        cav: Main cavity parameters.
        pcc: PCC parameters.

    Raises:
        ParameterError: If the cavity is degenerate (``l_cav <= 0`` or
            ``t_itm == 0``).

    Returns:
        Derived rates.
    """
    if not cav.l_cav > 0.0:
        raise ParameterError(
            "Cavity length must be positive, got {!r}".format(cav.l_cav)
        )
    if cav.t_itm == 0.0:
        raise ParameterError("ITM transmissivity of 0 gives a degenerate cavity")

    scale = consts.c / (4.0 * cav.l_cav)
    gamma1 = scale * cav.t_itm
    gamma2 = scale * cav.loss_cav
    loss_pcc = effective_pcc_loss(pcc)
    gamma_cut = gamma2 + loss_pcc * gamma1 / 2.0
    if gamma_cut > gamma1:
        warnings.warn(
            "Overdamped regime: gamma_cut={0:g} exceeds gamma1={1:g}".format(
                gamma_cut, gamma1
            ),
            OpticsWarning,
        )

    rates = DerivedRates(
        gamma1=gamma1,
        gamma2=gamma2,
        gamma_cut=gamma_cut,
        delta_ret=gamma1 * pcc.dphi_ret / 2.0,
        delta_pcc=gamma1 * pcc.dphi_pcc / 2.0,
        finesse=TWO_PI / (cav.t_itm + cav.loss_cav),
        tau=TWO_PI / gamma1,
        f_c=gamma1 / TWO_PI,
        loss_pcc=loss_pcc,
    )
    logger.debug("Derived rates: %s", rates)
    return rates


def reflectivity(rates: DerivedRates, omega: ArrayLike) -> ArrayLike:
    """Sideband amplitude reflectivity of the main cavity."""
    omega = np.asarray(omega, dtype=float)
    return (rates.gamma1 - rates.gamma2 + 1j * omega) / (
        rates.gamma1 + rates.gamma2 - 1j * omega
    )


def position_response(rates: DerivedRates, omega: ArrayLike) -> ArrayLike:
    """Single-pole position meter response, normalized to 1 at DC."""
    omega = np.asarray(omega, dtype=float)
    return rates.gamma1 / (rates.gamma1 - 1j * omega)


def circulation_factor(
    rates: DerivedRates, pcc: PccParams, phi_offset: float, omega: ArrayLike
) -> ArrayLike:
    """Factor picked up by the field on its second circulation."""
    loss = effective_pcc_loss(pcc)
    return np.exp(1j * phi_offset) * (1.0 - loss) * reflectivity(rates, omega)


def speed_response_exact(
    rates: DerivedRates, pcc: PccParams, phi_offset: float, omega: ArrayLike
) -> ArrayLike:
    """Speed meter response without small-parameter expansion.

    ``phi_offset`` is the total deviation of the PCC round-trip phase
    from the pi operating point.
    """
    rho = circulation_factor(rates, pcc, phi_offset, omega)
    return (1.0 - rho) / 2.0 * position_response(rates, omega)


def speed_response_firstorder(rates: DerivedRates, omega: ArrayLike) -> ArrayLike:
    """Speed meter response to first order in losses and phase errors."""
    omega = np.asarray(omega, dtype=float)
    numerator = rates.gamma_cut - 1j * (rates.detuning + omega)
    return numerator / (rates.gamma1 - 1j * omega) * position_response(rates, omega)


def quadrature_map(f_pos: ArrayLike, f_neg: ArrayLike) -> ArrayLike:
    """
    Phase-quadrature projection of a two-sided sideband response.

    Args:
        f_pos: Response evaluated at ``+omega``.
        f_neg: Response evaluated at ``-omega``.

    Returns:
        ``(f(+omega) - conj(f(-omega))) / 2i``.
    """
    return (np.asarray(f_pos) - np.conj(f_neg)) / 2j


def observable_H(
    rates: DerivedRates, f: ArrayLike, include_detuning: bool = False
) -> ArrayLike:
    """
    Ratio of the speed meter response to the position meter response.

    Args:
        rates: Derived rates.
        f: Frequencies [Hz], non-negative.
        include_detuning: Add the retardation and PCC detunings to the
            numerator.

    Returns:
        ``(gamma_cut/2pi - i (Delta/2pi + f)) / (gamma1/2pi - i f)``
        with ``Delta = 0`` unless ``include_detuning`` is set.
    """
    f = np.asarray(f, dtype=float)
    detuning = rates.detuning / TWO_PI if include_detuning else 0.0
    return (rates.gamma_cut / TWO_PI - 1j * (detuning + f)) / (
        rates.gamma1 / TWO_PI - 1j * f
    )


def observable_H_exact(
    rates: DerivedRates, pcc: PccParams, phi_offset: float, f: ArrayLike
) -> ArrayLike:
    """Ratio of phase-quadrature readouts of the exact speed and position
    responses."""
    omega = TWO_PI * np.asarray(f, dtype=float)

    def _readout(response, *args):
        # the injected signal appears in the phase quadrature
        return quadrature_map(1j * response(*args, omega), 1j * response(*args, -omega))

    return _readout(speed_response_exact, rates, pcc, phi_offset) / _readout(
        position_response, rates
    )
