""" Discrete-time simulation of the four control loops and the green-locking
acquisition sequence of the speed meter

Loops: (A) main laser frequency to main cavity length, (B) PCC length to the
GR frequency, (C) the main/GR phase-locked loop whose LO offset is tuned
during acquisition, (D) signal beam phase, taken as ideal. The plant is
quasi-static and every servo is a single integrator.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from .model import MainCavityParams, PccParams, PhysicalConstants, derive_rates
from .synth import AsdSegment, scale_segments, synth_noise_timeseries

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


class LockAcquisitionError(RuntimeError):
    """Raised when the simulated plant leaves the finite domain."""


class LockState(Enum):
    """Acquisition phases, in the order they are passed."""

    IDLE = "Idle"
    MAIN_LOCKED = "MainLocked"
    PCC_SCANNING = "PccScanning"
    PCC_GR_LOCKED = "PccGrLocked"
    PLL_TUNING = "PllTuning"
    SPEED_METER = "SpeedMeter"

    @property
    def rank(self) -> int:
        return _SEQUENCE.index(self)


_SEQUENCE = tuple(LockState)


def is_allowed_transition(old: LockState, new: LockState) -> bool:
    """Only one step forward along the sequence, or back to Idle."""
    return new is LockState.IDLE or new.rank == old.rank + 1


def airy_transmission(round_trip_phase, finesse: float):
    """Normalized transmission ``1 / (1 + (2F/pi)^2 sin^2(phi/2))``."""
    coefficient = (2.0 * finesse / math.pi) ** 2
    return 1.0 / (1.0 + coefficient * np.sin(np.asarray(round_trip_phase) / 2.0) ** 2)


def pdh_error(detuning, linewidth: float):
    """Dispersion-shaped error signal with unit slope at resonance."""
    detuning = np.asarray(detuning)
    return detuning / (1.0 + (detuning / linewidth) ** 2)


def wrap_phase(phase):
    """Map a phase onto ``[-pi, pi)``."""
    return (phase + math.pi) % TWO_PI - math.pi


def _check_positive(name: str, value: float):
    if not value > 0:
        raise ValueError("`{0}` must be positive, got {1!r}".format(name, value))


@dataclass(frozen=True)
class LoopConfig:
    """Trigger and servo settings of one loop.

    Attributes:
        gain: Integrator gain [1/s].
        threshold: Normalized transmission above which the lock is claimed.
        capture_range: Largest phase error [rad] the servo is engaged at.
        hold_time: Time [s] the trigger must hold before the lock is declared.
        release: Transmission below which a claimed lock counts as lost.
    """

    gain: float = 2000.0
    threshold: float = 0.5
    capture_range: float = 0.06
    hold_time: float = 0.02
    release: float = 0.25

    def __post_init__(self):
        _check_positive("gain", self.gain)
        _check_positive("capture_range", self.capture_range)
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(
                "`threshold` must lie in (0, 1), got {!r}".format(self.threshold)
            )
        if not 0.0 <= self.release < self.threshold:
            raise ValueError("`release` must lie in [0, threshold)")
        if self.hold_time < 0:
            raise ValueError("`hold_time` must be non-negative")


@dataclass(frozen=True)
class ScanConfig:
    """Scan ramps and the LO hill-climb.

    Attributes:
        main_rate: Main laser sweep [rad/s of main round-trip phase].
        pcc_rate: PCC length sweep [m/s].
        pcc_span: Length range [m] the PCC sweep covers.
        pll_rate: Initial LO slew [Hz/s].
        pll_min_rate: LO slew [Hz/s] below which the climb ends.
        pll_interval: Time [s] between IR transmission comparisons.
        pll_shrink: Factor applied to the slew on each overshoot.
        dwell: Time [s] spent in MainLocked and PccGrLocked before moving on.
    """

    main_rate: float = 0.1
    pcc_rate: float = 1e-6
    pcc_span: float = 6e-7
    pll_rate: float = 3e8
    pll_min_rate: float = 1e6
    pll_interval: float = 0.02
    pll_shrink: float = 0.5
    dwell: float = 0.05

    def __post_init__(self):
        for name in ("main_rate", "pcc_rate", "pcc_span", "pll_rate",
                     "pll_min_rate", "pll_interval"):
            _check_positive(name, getattr(self, name))
        if not 0.0 < self.pll_shrink < 1.0:
            raise ValueError("`pll_shrink` must lie in (0, 1)")
        if self.pll_min_rate >= self.pll_rate:
            raise ValueError("`pll_min_rate` must be below `pll_rate`")
        if self.dwell < 0:
            raise ValueError("`dwell` must be non-negative")


@dataclass(frozen=True)
class ServoConfig:
    """Loops (A) main, (B) GR and the final IR lock of the PCC, plus scans."""

    main: LoopConfig = field(
        default_factory=lambda: LoopConfig(gain=2000.0, capture_range=3e-3)
    )
    gr: LoopConfig = field(
        default_factory=lambda: LoopConfig(gain=2000.0, capture_range=0.06)
    )
    ir: LoopConfig = field(
        default_factory=lambda: LoopConfig(gain=2000.0, capture_range=0.3)
    )
    scan: ScanConfig = field(default_factory=ScanConfig)


@dataclass(frozen=True)
class PlantConfig:
    """GR optics, IR readout model and initial conditions.

    ``pcc_length0`` defaults to the mean PCC length and ``gr_freq_offset0``
    to ``-c / (4 l_pcc)``.
    """

    lambda_gr: float = 532e-9
    finesse_gr: float = 50.0
    ir_finesse: float = 10.0
    ir_visibility: float = 0.9
    crosstalk: float = 0.05
    main_detuning0: float = -0.03
    pcc_length0: Optional[float] = None
    gr_freq_offset0: Optional[float] = None

    def __post_init__(self):
        _check_positive("lambda_gr", self.lambda_gr)
        _check_positive("finesse_gr", self.finesse_gr)
        _check_positive("ir_finesse", self.ir_finesse)
        if not 0.0 <= self.ir_visibility <= 1.0:
            raise ValueError("`ir_visibility` must lie in [0, 1]")
        if not 0.0 <= self.crosstalk < 1.0:
            raise ValueError("`crosstalk` must lie in [0, 1)")


@dataclass(frozen=True)
class DisturbanceSpec:
    """Band-limited PCC length noise [m RMS] and detector noise."""

    pcc_rms: float = 1e-11
    corner: float = 10.0
    detector_noise: float = 0.0

    def __post_init__(self):
        if self.pcc_rms < 0 or self.detector_noise < 0:
            raise ValueError("Disturbance amplitudes must be non-negative")
        _check_positive("corner", self.corner)


@dataclass(frozen=True)
class Disturbance:
    """Disturbance inputs of a single step."""

    length: float = 0.0
    ir_noise: float = 0.0
    gr_noise: float = 0.0


@dataclass(frozen=True)
class PlantState:
    """Instantaneous actuator positions and detector readings."""

    main_detuning: float
    pcc_length: float
    gr_freq_offset: float
    ir_trans: float
    gr_trans: float
    dcpd1: float
    t: float = 0.0


@dataclass(frozen=True)
class ControllerState:
    """Memory of the acquisition logic between steps."""

    hold: float = 0.0
    timer: float = 0.0
    scan_origin: Optional[float] = None
    scan_dir: float = 1.0
    pll_rate: float = 0.0
    pll_dir: float = 1.0
    pll_clock: float = 0.0
    pll_last_ir: float = 0.0
    pll_improved: bool = False
    handover: bool = False


@dataclass(frozen=True)
class Plant:
    """Resolved plant model used by the simulation."""

    c: float
    lambda0: float
    lambda_gr: float
    finesse_main: float
    finesse_gr: float
    finesse_ir: float
    visibility: float
    crosstalk: float
    main_detuning0: float
    pcc_length0: float
    gr_freq_offset0: float

    @classmethod
    def from_config(
        cls,
        cfg: PlantConfig,
        consts: PhysicalConstants,
        cav: MainCavityParams,
        pcc: PccParams,
    ) -> "Plant":
        rates = derive_rates(consts, cav, pcc)
        offset = cfg.gr_freq_offset0
        if offset is None:
            offset = -consts.c / (4.0 * pcc.l_pcc)
        return cls(
            c=consts.c,
            lambda0=consts.lambda0,
            lambda_gr=cfg.lambda_gr,
            finesse_main=rates.finesse,
            finesse_gr=cfg.finesse_gr,
            finesse_ir=cfg.ir_finesse,
            visibility=cfg.ir_visibility,
            crosstalk=cfg.crosstalk,
            main_detuning0=cfg.main_detuning0,
            pcc_length0=pcc.l_pcc if cfg.pcc_length0 is None else cfg.pcc_length0,
            gr_freq_offset0=offset,
        )

    def ir_phase(self, pcc_length: float) -> float:
        return TWO_PI * pcc_length / self.lambda0

    def gr_phase(self, pcc_length: float, offset: float) -> float:
        return 2.0 * TWO_PI * pcc_length * (1.0 / self.lambda_gr + offset / self.c)

    def gr_phase_gain(self, offset: float) -> float:
        """Derivative of the GR round-trip phase with respect to length."""
        return 2.0 * TWO_PI * (1.0 / self.lambda_gr + offset / self.c)

    def gr_resonance_spacing(self, offset: float) -> float:
        """PCC length change between neighbouring GR resonances."""
        return TWO_PI / self.gr_phase_gain(offset)

    def nearest_gr_resonance(self, pcc_length: float, offset: float) -> float:
        spacing = self.gr_resonance_spacing(offset)
        return round(pcc_length / spacing) * spacing

    def evaluate(
        self,
        main_detuning: float,
        pcc_length: float,
        offset: float,
        t: float = 0.0,
        disturbance: Disturbance = Disturbance(),
    ) -> PlantState:
        """Detector readings for the given actuator positions."""
        main = float(airy_transmission(main_detuning, self.finesse_main))
        phi_ir = self.ir_phase(pcc_length)
        pcc_ir = float(airy_transmission(phi_ir - math.pi, self.finesse_ir))
        gr_cavity = float(
            airy_transmission(self.gr_phase(pcc_length, offset), self.finesse_gr)
        )
        return PlantState(
            main_detuning=main_detuning,
            pcc_length=pcc_length,
            gr_freq_offset=offset,
            ir_trans=main * (1.0 - self.visibility + self.visibility * pcc_ir)
            + disturbance.ir_noise,
            gr_trans=gr_cavity * (1.0 - self.crosstalk * main) + disturbance.gr_noise,
            dcpd1=main * math.cos(phi_ir / 2.0) ** 2,
            t=t,
        )

    def initial_state(self) -> PlantState:
        return self.evaluate(
            self.main_detuning0, self.pcc_length0, self.gr_freq_offset0
        )


@dataclass(frozen=True, eq=False)
class LockTrace:
    """Uniformly sampled acquisition record."""

    t: np.ndarray
    main_detuning: np.ndarray
    pcc_length: np.ndarray
    gr_freq_offset: np.ndarray
    ir_trans: np.ndarray
    gr_trans: np.ndarray
    dcpd1: np.ndarray
    lock_state: Tuple[LockState, ...]
    transitions: Tuple[Tuple[float, LockState, LockState], ...]
    success: bool
    diagnostic: str = ""

    def __post_init__(self):
        lengths = {
            len(self.t),
            len(self.main_detuning),
            len(self.pcc_length),
            len(self.gr_freq_offset),
            len(self.ir_trans),
            len(self.gr_trans),
            len(self.dcpd1),
            len(self.lock_state),
        }
        if len(lengths) != 1:
            raise ValueError("Trace columns differ in length")

    def __len__(self) -> int:
        return len(self.t)

    @property
    def final_state(self) -> LockState:
        return self.lock_state[-1]

    @property
    def state_sequence(self) -> Tuple[LockState, ...]:
        """States in the order they were visited, repeats collapsed."""
        return (self.lock_state[0],) + tuple(new for _, _, new in self.transitions)

    def during(self, state: LockState) -> np.ndarray:
        """Mask of samples taken in ``state``."""
        return np.array([s is state for s in self.lock_state])


def _servo(loop: LoopConfig, dt: float, error: float, linewidth: float) -> float:
    return -loop.gain * dt * float(pdh_error(error, linewidth))


def _claimed(loop: LoopConfig, transmission: float, error: float) -> bool:
    return transmission >= loop.threshold and abs(error) <= loop.capture_range


def _check_finite(state: PlantState, where: str):
    for name in ("main_detuning", "pcc_length", "gr_freq_offset", "ir_trans",
                 "gr_trans", "dcpd1", "t"):
        value = getattr(state, name)
        if not math.isfinite(value):
            raise LockAcquisitionError(
                "Non-finite `{0}`={1!r} {2} at t={3!r}".format(
                    name, value, where, state.t
                )
            )


# pylint: disable=too-many-arguments,too-many-locals
# pylint: disable=too-many-branches,too-many-statements
def step(
    state: PlantState,
    lock: LockState,
    ctrl: ControllerState,
    servos: ServoConfig,
    plant: Plant,
    dt: float,
    disturbance: Disturbance = Disturbance(),
) -> Tuple[PlantState, LockState, ControllerState]:
    """
    Advance the plant and the acquisition logic by one sample.

    Args:
        state: Current plant state.
        lock: Current acquisition phase.
        ctrl: Memory of the acquisition logic.
        servos: Loop and scan settings.
        plant: Plant model.
        dt: Sample interval [s].
        disturbance: External length increment and detector noise.

    Raises:
        ValueError: If ``dt`` is not positive.
        LockAcquisitionError: If any state field becomes NaN or infinite.

    Returns:
        New plant state, acquisition phase and controller memory.
    """
    if not dt > 0:
        raise ValueError("Time step must be positive, got {!r}".format(dt))
    _check_finite(state, "on input")

    scan = servos.scan
    main_det = state.main_detuning
    length = state.pcc_length + disturbance.length
    offset = state.gr_freq_offset
    seen = plant.evaluate(main_det, length, offset, state.t, disturbance)
    main_trans = float(airy_transmission(main_det, plant.finesse_main))

    main_lw = math.pi / plant.finesse_main
    gr_lw = math.pi / plant.finesse_gr
    ir_lw = math.pi / plant.finesse_ir
    gr_error = wrap_phase(plant.gr_phase(length, offset))
    ir_error = wrap_phase(plant.ir_phase(length) - math.pi)
    gr_gain = plant.gr_phase_gain(offset)
    ir_gain = TWO_PI / plant.lambda0

    new_lock = lock
    hold, timer = ctrl.hold, ctrl.timer + dt
    updates = {}

    # loop (A): the main cavity trigger uses the main airy term alone
    if lock is LockState.IDLE:
        if _claimed(servos.main, main_trans, main_det):
            main_det += _servo(servos.main, dt, main_det, main_lw)
            hold += dt
            if hold >= servos.main.hold_time:
                new_lock = LockState.MAIN_LOCKED
        else:
            main_det += scan.main_rate * dt
            hold = 0.0
    else:
        main_det += _servo(servos.main, dt, main_det, main_lw)

    def _gr_servo() -> float:
        return _servo(servos.gr, dt, gr_error, gr_lw) / gr_gain

    def _ir_servo() -> float:
        return _servo(servos.ir, dt, ir_error, ir_lw) / ir_gain

    if lock is LockState.MAIN_LOCKED:
        if timer >= scan.dwell:
            new_lock = LockState.PCC_SCANNING

    elif lock is LockState.PCC_SCANNING:
        origin = length if ctrl.scan_origin is None else ctrl.scan_origin
        updates["scan_origin"] = origin
        if _claimed(servos.gr, seen.gr_trans, gr_error):
            length += _gr_servo()
            hold += dt
            if hold >= servos.gr.hold_time:
                new_lock = LockState.PCC_GR_LOCKED
        else:
            hold = 0.0
            direction = ctrl.scan_dir
            length += direction * scan.pcc_rate * dt
            if length >= origin + scan.pcc_span:
                direction = -1.0
            elif length <= origin:
                direction = 1.0
            updates["scan_dir"] = direction

    elif lock is LockState.PCC_GR_LOCKED:
        length += _gr_servo()
        if timer >= scan.dwell:
            new_lock = LockState.PLL_TUNING
            updates.update(
                pll_rate=scan.pll_rate,
                pll_dir=1.0,
                pll_clock=0.0,
                pll_last_ir=seen.ir_trans,
                pll_improved=False,
                handover=False,
            )

    elif lock is LockState.PLL_TUNING and not ctrl.handover:
        length += _gr_servo()
        offset += ctrl.pll_dir * ctrl.pll_rate * dt
        clock = ctrl.pll_clock + dt
        if clock >= scan.pll_interval:
            rate, direction, improved = ctrl.pll_rate, ctrl.pll_dir, ctrl.pll_improved
            if seen.ir_trans < ctrl.pll_last_ir:
                # overshoot only counts once the transmission has risen
                if improved:
                    rate *= scan.pll_shrink
                direction, improved = -direction, False
            else:
                improved = True
            updates.update(
                pll_rate=rate,
                pll_dir=direction,
                pll_last_ir=seen.ir_trans,
                pll_improved=improved,
                handover=rate < scan.pll_min_rate,
            )
            clock = 0.0
        updates["pll_clock"] = clock

    elif lock is LockState.PLL_TUNING:
        if _claimed(servos.ir, seen.ir_trans, ir_error):
            length += _ir_servo()
            hold += dt
            if hold >= servos.ir.hold_time:
                new_lock = LockState.SPEED_METER
        else:
            # the IR fringe is out of reach, climb again from the start
            length += _gr_servo()
            hold = 0.0
            updates.update(handover=False, pll_rate=scan.pll_rate, pll_improved=False)

    elif lock is LockState.SPEED_METER:
        length += _ir_servo()

    # lock loss sends every claimed state back to Idle
    if lock is not LockState.IDLE and main_trans < servos.main.release:
        new_lock = LockState.IDLE
    elif lock in (LockState.PCC_GR_LOCKED, LockState.PLL_TUNING) and not ctrl.handover:
        if seen.gr_trans < servos.gr.release:
            new_lock = LockState.IDLE
    elif lock is LockState.SPEED_METER and seen.ir_trans < servos.ir.release:
        new_lock = LockState.IDLE

    if new_lock is not lock:
        if not is_allowed_transition(lock, new_lock):
            raise LockAcquisitionError(
                "Illegal transition {0} -> {1}".format(lock.value, new_lock.value)
            )
        keep = {k: v for k, v in updates.items() if k.startswith("pll_")}
        new_ctrl = ControllerState(**keep) if new_lock is not LockState.IDLE else (
            ControllerState()
        )
    else:
        new_ctrl = replace(ctrl, hold=hold, timer=timer, **updates)

    new_state = plant.evaluate(main_det, length, offset, state.t + dt, disturbance)
    _check_finite(new_state, "after update")
    return new_state, new_lock, new_ctrl


def disturbance_series(
    spec: DisturbanceSpec, n_samples: int, dt: float, seed: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Per-step length increments and detector noise samples.

    The length noise is flat below ``spec.corner`` and falls as 1/f above.

    Returns:
        Length increments [m], IR and GR detector noise.
    """
    rate = 1.0 / dt
    nyquist = rate / 2.0
    if spec.pcc_rms > 0 and n_samples >= 2:
        if spec.corner >= nyquist:
            segments = (AsdSegment(0.0, nyquist, 1.0),)
        else:
            segments = (
                AsdSegment(0.0, spec.corner, 1.0),
                AsdSegment(spec.corner, nyquist, 1.0, -1.0),
            )
        segments = scale_segments(segments, spec.pcc_rms)
        displacement = synth_noise_timeseries(segments, n_samples * dt, rate, seed)
        increments = np.diff(displacement, prepend=displacement[0])
    else:
        increments = np.zeros(n_samples)

    rng = np.random.default_rng([seed, 1])
    ir_noise = rng.normal(0.0, spec.detector_noise, n_samples)
    gr_noise = rng.normal(0.0, spec.detector_noise, n_samples)
    return increments, ir_noise, gr_noise


# pylint: disable=too-many-arguments
def run_acquisition(
    servos: ServoConfig,
    plant: Plant,
    duration: float,
    dt: float,
    disturbance: DisturbanceSpec,
    seed: int,
    settle_time: float = 0.2,
) -> LockTrace:
    """
    Run the acquisition sequence from Idle.

    The run ends ``settle_time`` after SpeedMeter is reached, or at
    ``duration``.

    Args:
        servos: Loop and scan settings.
        plant: Plant model with its initial conditions.
        duration: Longest simulated time [s].
        dt: Sample interval [s].
        disturbance: Disturbance description.
        seed: Seed for the disturbance generators.
        settle_time: Time [s] recorded after reaching SpeedMeter.

    Raises:
        ValueError: If ``duration`` or ``dt`` are not positive.

    Returns:
        The trace. ``success`` is false, with a diagnostic, unless the run
        ends in SpeedMeter.
    """
    _check_positive("duration", duration)
    _check_positive("dt", dt)
    n_steps = int(round(duration / dt))
    increments, ir_noise, gr_noise = disturbance_series(disturbance, n_steps, dt, seed)

    state = plant.initial_state()
    lock = LockState.IDLE
    ctrl = ControllerState()
    states = [state]
    locks = [lock]
    transitions = []
    stop_at = None

    for index in range(n_steps):
        kick = Disturbance(increments[index], ir_noise[index], gr_noise[index])
        state, new_lock, ctrl = step(state, lock, ctrl, servos, plant, dt, kick)
        if new_lock is not lock:
            transitions.append((state.t, lock, new_lock))
            logger.info("t=%.4f s: %s -> %s", state.t, lock.value, new_lock.value)
            stop_at = (
                state.t + settle_time if new_lock is LockState.SPEED_METER else None
            )
        lock = new_lock
        states.append(state)
        locks.append(lock)
        if stop_at is not None and state.t >= stop_at:
            break

    success = lock is LockState.SPEED_METER
    diagnostic = ""
    if not success:
        diagnostic = "Acquisition stopped in {0} at t={1:.4f} s".format(
            lock.value, state.t
        )
        logger.warning(diagnostic)

    columns = {
        name: np.array([getattr(s, name) for s in states])
        for name in ("t", "main_detuning", "pcc_length", "gr_freq_offset",
                     "ir_trans", "gr_trans", "dcpd1")
    }
    return LockTrace(
        lock_state=tuple(locks),
        transitions=tuple(transitions),
        success=success,
        diagnostic=diagnostic,
        **columns
    )
