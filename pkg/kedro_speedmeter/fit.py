""" Recovery of the main cavity loss and overall gain from a measured
speed meter / position meter ratio """

import logging
import warnings
from dataclasses import dataclass, replace
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from .model import (
    ComplexResponse,
    MainCavityParams,
    PccParams,
    PhysicalConstants,
    derive_rates,
    observable_H,
)

logger = logging.getLogger(__name__)

WEIGHTINGS = ("uniform", "relative")

_COST_FLOOR = np.finfo(float).eps ** 2


class FitError(ValueError):
    """Raised when a fit cannot be set up."""


class FitBoundaryWarning(UserWarning):
    """Issued when the recovered loss sits on a bound of the search."""


@dataclass(frozen=True)
class FitConfig:
    """Settings of the loss fit.

    Attributes:
        anchor_band: Band [Hz] over which the gain is calibrated.
        init_loss: Starting loss.
        loss_bounds: Search interval for the loss.
        tol: Relative cost change that ends the iteration.
        max_iters: Maximum number of calibrate/minimize rounds.
        xatol: Absolute loss tolerance of the 1-d search.
        fit_band: Optional band [Hz] the fit is restricted to.
        weighting: ``uniform`` or ``relative`` (1 / |data|^2).
        joint: Fit the gain at every trial loss instead of alternating.
        include_detuning: Keep the configured detuning in the model.
        pcc_loss_in_model: Let the PCC loss contribute to the model cutoff.
    """

    anchor_band: Tuple[float, float] = (1.5e6, 2.0e6)
    init_loss: float = 100e-6
    loss_bounds: Tuple[float, float] = (0.0, 1e-3)
    tol: float = 1e-10
    max_iters: int = 50
    xatol: float = 1e-15
    fit_band: Optional[Tuple[float, float]] = None
    weighting: str = "uniform"
    joint: bool = False
    include_detuning: bool = False
    pcc_loss_in_model: bool = False

    def __post_init__(self):
        lo, hi = self.loss_bounds
        if not 0.0 <= lo < hi < 1.0:
            raise FitError(
                "loss_bounds must satisfy 0 <= lo < hi < 1, got {!r}".format(
                    self.loss_bounds
                )
            )
        if not self.anchor_band[0] <= self.anchor_band[1]:
            raise FitError(
                "anchor_band must be ordered, got {!r}".format(self.anchor_band)
            )
        if self.fit_band is not None and not self.fit_band[0] < self.fit_band[1]:
            raise FitError("fit_band must be ordered, got {!r}".format(self.fit_band))
        if not self.tol > 0:
            raise FitError("tol must be positive, got {!r}".format(self.tol))
        if not self.xatol > 0:
            raise FitError("xatol must be positive, got {!r}".format(self.xatol))
        if self.max_iters < 1:
            raise FitError("max_iters must be at least 1")
        if self.weighting not in WEIGHTINGS:
            raise FitError(
                "weighting must be one of {0}, got {1!r}".format(
                    WEIGHTINGS, self.weighting
                )
            )
        # configuration files deliver lists
        object.__setattr__(self, "anchor_band", tuple(self.anchor_band))
        object.__setattr__(self, "loss_bounds", tuple(self.loss_bounds))
        if self.fit_band is not None:
            object.__setattr__(self, "fit_band", tuple(self.fit_band))


@dataclass(frozen=True, eq=False)
class FitResult:
    """Outcome of a loss fit."""

    loss_cav_hat: float
    gain_hat: complex
    final_cost: float
    n_iters: int
    converged: bool
    residuals: np.ndarray
    freqs: np.ndarray
    at_bound: bool = False

    def to_report(self) -> Dict[str, object]:
        """Flat key-value form of the result."""
        return {
            "loss_cav_hat_ppm": self.loss_cav_hat * 1e6,
            "gain_re": float(np.real(self.gain_hat)),
            "gain_im": float(np.imag(self.gain_hat)),
            "final_cost": self.final_cost,
            "converged": self.converged,
            "n_iters": self.n_iters,
            "at_bound": self.at_bound,
        }


@dataclass(frozen=True, eq=False)
class TransferModel:
    """The observable on a fixed grid with every parameter but the loss fixed."""

    consts: PhysicalConstants
    cav: MainCavityParams
    pcc: PccParams
    freqs: np.ndarray
    include_detuning: bool = False
    pcc_loss_in_model: bool = False

    def __call__(self, loss_cav: float) -> np.ndarray:
        with warnings.catch_warnings():
            # trial losses may well exceed t_itm during the search
            warnings.simplefilter("ignore")
            cav = replace(self.cav, loss_cav=loss_cav)
            pcc = model_pcc(self.pcc, self.pcc_loss_in_model)
            rates = derive_rates(self.consts, cav, pcc)
        return observable_H(rates, self.freqs, self.include_detuning)


def model_pcc(pcc: PccParams, pcc_loss_in_model: bool) -> PccParams:
    """PCC parameters as seen by the fit model.

    Unless ``pcc_loss_in_model`` is set, the model attributes the whole
    low-frequency cutoff to the main cavity loss.
    """
    if pcc_loss_in_model:
        return pcc
    return replace(pcc, loss_pcc_override=0.0)


def _band_mask(freqs: np.ndarray, band: Tuple[float, float]) -> np.ndarray:
    return (freqs >= band[0]) & (freqs <= band[1])


def calibrate_gain(
    data: ComplexResponse, model_eval: np.ndarray, band: Tuple[float, float]
) -> complex:
    """
    Overall gain from the mean data to model ratio within ``band``.

    Args:
        data: Measured response.
        model_eval: Model values on the data grid.
        band: Calibration band [Hz], inclusive.

    Raises:
        FitError: If no data point falls inside the band.

    Returns:
        Complex gain.
    """
    mask = _band_mask(data.freqs, band)
    if not mask.any():
        raise FitError(
            "No data points in the gain calibration band [{0:g}, {1:g}] Hz".format(
                *band
            )
        )
    return complex(np.mean(data.values[mask] / np.asarray(model_eval)[mask]))


def _weights(data: ComplexResponse, weighting: str) -> Optional[np.ndarray]:
    if weighting == "relative":
        return 1.0 / np.maximum(np.abs(data.values), np.finfo(float).tiny) ** 2
    return None


def cost(
    data: ComplexResponse,
    gain: complex,
    loss_cav: float,
    model: TransferModel,
    weights: Optional[np.ndarray] = None,
) -> float:
    """
    Sum over the grid of ``|H_m - g H(loss_cav)|**2``.

    Args:
        data: Measured response.
        gain: Overall complex gain.
        loss_cav: Trial main cavity loss.
        model: Model bound to the data grid.
        weights: Optional per-point weights.

    Raises:
        FitError: If the model grid differs from the data grid.

    Returns:
        Non-negative cost.
    """
    if model.freqs.shape != data.freqs.shape or not np.allclose(
        model.freqs, data.freqs, rtol=1e-12, atol=0.0
    ):
        raise FitError("Model grid does not match the data grid")
    residual = np.abs(data.values - gain * model(loss_cav)) ** 2
    if weights is not None:
        residual = residual * weights
    return float(np.sum(residual))


def _optimal_gain(data: ComplexResponse, model_values: np.ndarray, weights) -> complex:
    weights = np.ones(len(data)) if weights is None else weights
    numerator = np.sum(weights * np.conj(model_values) * data.values)
    return complex(numerator / np.sum(weights * np.abs(model_values) ** 2))


# pylint: disable=too-many-locals
def fit_loss(
    data: ComplexResponse,
    config: FitConfig,
    consts: PhysicalConstants,
    cav: MainCavityParams,
    pcc: PccParams,
) -> FitResult:
    """
    Fit the main cavity loss by alternating gain calibration and a bounded
    one-dimensional search over the loss.

    Args:
        data: Measured response.
        config: Fit settings.
        consts: Physical constants.
        cav: Main cavity parameters, ``loss_cav`` is ignored.
        pcc: PCC parameters.

    Raises:
        FitError: If the data are empty or the calibration band holds no
            points.

    Returns:
        The fit result. ``converged`` is false when ``max_iters`` rounds
        were used up.
    """
    if config.fit_band is not None:
        data = data.restrict(*config.fit_band)
    if not len(data):
        raise FitError("No data points to fit")
    if not _band_mask(data.freqs, config.anchor_band).any():
        raise FitError(
            "Gain calibration band [{0:g}, {1:g}] Hz lies outside the data "
            "range [{2:g}, {3:g}] Hz".format(
                *config.anchor_band, data.freqs[0], data.freqs[-1]
            )
        )

    model = TransferModel(
        consts,
        cav,
        pcc,
        data.freqs,
        include_detuning=config.include_detuning,
        pcc_loss_in_model=config.pcc_loss_in_model,
    )
    weights = _weights(data, config.weighting)
    floor = _COST_FLOOR * float(np.sum(np.abs(data.values) ** 2))
    lo, hi = config.loss_bounds

    def gain_for(trial: float) -> complex:
        if config.joint:
            return _optimal_gain(data, model(trial), weights)
        return calibrate_gain(data, model(trial), config.anchor_band)

    loss = float(np.clip(config.init_loss, lo, hi))
    gain = gain_for(loss)
    prev_cost = cost(data, gain, loss, model, weights)
    converged = False
    n_iters = 0

    for n_iters in range(1, config.max_iters + 1):
        center, fixed_gain = loss, gain

        def objective(step: float) -> float:  # pylint: disable=cell-var-from-loop
            trial = center + step
            trial_gain = gain_for(trial) if config.joint else fixed_gain
            return cost(data, trial_gain, trial, model, weights)

        # searching around the current estimate keeps the tolerance absolute
        res = minimize_scalar(
            objective,
            bounds=(lo - center, hi - center),
            method="bounded",
            options={"xatol": config.xatol},
        )
        loss = float(np.clip(center + res.x, lo, hi))
        gain = gain_for(loss)
        new_cost = cost(data, gain, loss, model, weights)
        logger.debug(
            "Iteration %d: loss=%.6g ppm gain=%s cost=%.6g",
            n_iters,
            loss * 1e6,
            gain,
            new_cost,
        )

        small_cost_change = abs(prev_cost - new_cost) <= config.tol * prev_cost
        small_step = abs(loss - center) <= config.xatol
        prev_cost = new_cost
        if small_cost_change or small_step or new_cost <= floor:
            converged = True
            break

    at_bound = min(loss - lo, hi - loss) <= (hi - lo) * 1e-6
    if at_bound:
        warnings.warn(
            "Recovered loss {0:g} lies on the search bound [{1:g}, {2:g}]".format(
                loss, lo, hi
            ),
            FitBoundaryWarning,
        )
    if not converged:
        logger.warning("Loss fit did not converge within %d iterations", n_iters)

    residuals = data.values - gain * model(loss)
    logger.info(
        "Fitted loss_cav=%.6g ppm after %d iterations (converged=%s)",
        loss * 1e6,
        n_iters,
        converged,
    )
    return FitResult(
        loss_cav_hat=loss,
        gain_hat=gain,
        final_cost=prev_cost,
        n_iters=n_iters,
        converged=converged,
        residuals=residuals,
        freqs=data.freqs,
        at_bound=at_bound,
    )
