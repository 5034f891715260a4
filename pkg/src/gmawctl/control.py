"""Switched PID current controller with ramp references and phase detection.

The controller tracks a ramp reference I_o + alpha*t restarted at every
metal-transfer switch, where I_o is the current measured at the switch.
Two gain sets are scheduled, one per phase.  The derivative action is
low-pass filtered; integrator and filter are discretized trapezoidally at
the controller period.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import ActuatorMap, parse_kv_text
from .simulator import Phase

__all__ = [
    "PidGains",
    "ReferenceSpec",
    "DetectorConfig",
    "ControllerState",
    "reference",
    "pid_step",
    "detect_phase",
    "controller_callback",
    "load_gains",
    "table2",
    "table3",
]


@dataclass(frozen=True)
class PidGains:
    """Per-phase PID settings in standard (ISA) form, gains in V/A.

    Parallel-form gains follow as k_p = K_p, k_i = K_p/T_i, k_d = K_p*T_d.
    ``T_f`` is the derivative low-pass time constant; when not given it
    defaults to T_d/2, which keeps the one-period derivative loop gain
    k_d/(T_f + dt) * dt/L below one on this plant at the 10 us controller
    period (a sharper filter sustains period-two actuator chatter).
    """

    K_p: float
    T_i: float
    T_d: float
    T_f: float | None = None

    def __post_init__(self) -> None:
        if self.K_p <= 0.0 or self.T_i <= 0.0 or self.T_d < 0.0:
            raise ValueError("require K_p > 0, T_i > 0, T_d >= 0")
        if self.T_f is None:
            object.__setattr__(self, "T_f", self.T_d / 2.0 if self.T_d > 0.0 else 1e-6)
        if self.T_f <= 0.0:
            raise ValueError("T_f must be positive")

    @property
    def k_p(self) -> float:
        return self.K_p

    @property
    def k_i(self) -> float:
        return self.K_p / self.T_i

    @property
    def k_d(self) -> float:
        return self.K_p * self.T_d


@dataclass(frozen=True)
class ReferenceSpec:
    """Desired current rate of change per phase (A/s)."""

    alpha_sc: float = 60e3
    alpha_ea: float = -20e3

    def __post_init__(self) -> None:
        if not (self.alpha_sc > 0.0 > self.alpha_ea):
            raise ValueError("require alpha_sc > 0 > alpha_ea")

    def alpha(self, phase: Phase) -> float:
        return self.alpha_sc if phase is Phase.SC else self.alpha_ea


@dataclass(frozen=True)
class DetectorConfig:
    """Online phase-detection settings."""

    v_threshold: float = 14.4       # arc voltage below this admits a short circuit (V)
    slope_threshold: float = 5e3    # current gradient above this admits a short circuit (A/s)
    gradient_window: float = 50e-6  # span of the least-squares gradient estimate (s)
    debounce_periods: int = 3       # refractory period after a switch event
    startup_blanking: int = 30      # periods with detection disarmed while the loop engages

    def validate(self, control_dt: float) -> None:
        if self.v_threshold <= 0.0:
            raise ValueError("v_threshold must be positive")
        if self.gradient_window < 2.0 * control_dt:
            raise ValueError("gradient_window must span at least 2 controller periods")


@dataclass
class ControllerState:
    """Mutable state owned by one controller loop."""

    detected_phase: Phase = Phase.SC   # metal-transfer cycles open with a short circuit
    I_o: float = 0.0                 # current captured at the last switch (A)
    time_in_phase: float = 0.0
    integrator: float = 0.0          # integral action, volts
    d_state: float = 0.0             # filtered derivative action, volts
    prev_error: float = 0.0
    last_command_v: float = 0.0      # realized (post-saturation) voltage command
    samples_since_switch: int = 10**9
    window: deque = field(default_factory=deque)   # recent current samples for the gradient
    primed: bool = False


def reference(state: ControllerState, spec: ReferenceSpec, t_in_phase: float) -> float:
    """Ramp reference restarted from the switch-time current."""
    return state.I_o + spec.alpha(state.detected_phase) * t_in_phase


def pid_step(state: ControllerState, gains: PidGains, e: float, dt: float,
             actuator: ActuatorMap | None = None) -> float:
    """One discrete PID update; returns the duty command.

    The voltage command is P + I + filtered D, mapped to duty through the
    actuator.  While the actuator is saturated and the error pushes further
    into saturation the integrator is frozen (conditional anti-windup).
    """
    act = actuator if actuator is not None else ActuatorMap()
    # bilinear update of the filtered derivative k_d s / (1 + T_f s)
    if gains.k_d > 0.0:
        tf2 = 2.0 * gains.T_f
        state.d_state = ((tf2 - dt) / (tf2 + dt)) * state.d_state \
            + (2.0 * gains.k_d / (tf2 + dt)) * (e - state.prev_error)
    v_cmd = gains.k_p * e + state.integrator + state.d_state
    duty, saturated = act.volts_to_duty(v_cmd)
    pushing_deeper = saturated and (
        (duty >= act.duty_max and e > 0.0) or (duty <= act.duty_min and e < 0.0)
    )
    increment = gains.k_i * dt * 0.5 * (e + state.prev_error)
    if not pushing_deeper and math.isfinite(increment):
        state.integrator += increment
        # windup bound: never beyond full-scale actuation plus one increment
        bound = act.duty_max * act.volts_per_unit_duty + abs(increment)
        state.integrator = min(max(state.integrator, -bound), bound)
    state.prev_error = e
    state.last_command_v = act.volts_per_unit_duty * duty
    return duty


def _ls_slope(samples: deque, dt: float) -> float:
    n = len(samples)
    if n < 2:
        return 0.0
    y = np.asarray(samples, dtype=float)
    x = np.arange(n, dtype=float)
    sxx = n * (n * n - 1.0) / 12.0
    return float(((x - (n - 1) / 2.0) @ (y - y.mean())) / (sxx * dt))


def detect_phase(state: ControllerState, I_W: float, U_arc: float,
                 config: DetectorConfig, dt: float) -> tuple[Phase, bool]:
    """Streaming phase detection from current gradient and arc voltage.

    A short circuit is declared when the smoothed current gradient exceeds
    the slope threshold while the arc voltage sits below the voltage
    threshold; the arc phase is declared back when the gradient turns
    negative.  Events are debounced so two switches can never be emitted
    on consecutive controller periods.
    """
    n_win = max(2, int(round(config.gradient_window / dt)))
    state.window.append(I_W)
    while len(state.window) > n_win:
        state.window.popleft()
    state.samples_since_switch += 1
    if not state.primed:
        state.primed = True
        state.I_o = I_W
        state.samples_since_switch = -config.startup_blanking
        return state.detected_phase, False
    if state.samples_since_switch < config.debounce_periods or len(state.window) < 2:
        return state.detected_phase, False

    grad = _ls_slope(state.window, dt)
    switched = False
    if state.detected_phase is Phase.EA:
        if grad > config.slope_threshold and U_arc < config.v_threshold:
            state.detected_phase = Phase.SC
            switched = True
    else:
        if grad < 0.0:
            state.detected_phase = Phase.EA
            switched = True
    if switched:
        state.I_o = I_W
        state.time_in_phase = 0.0
        state.samples_since_switch = 0
    return state.detected_phase, switched


def controller_callback(gains_sc: PidGains, gains_ea: PidGains,
                        spec: ReferenceSpec | None = None,
                        detector: DetectorConfig | None = None,
                        actuator: ActuatorMap | None = None,
                        control_dt: float = 1e-5,
                        state: ControllerState | None = None):
    """Compose detection, reference generation and PID into one callback.

    The returned callable maps (I_W, U_arc, t) -> duty and is directly
    usable by the closed-loop runner.  On each detected switch the gains
    are swapped, the derivative filter is cleared and the integrator is
    re-seeded so the voltage command is continuous (bumpless transfer).
    """
    ref_spec = spec if spec is not None else ReferenceSpec()
    # in closed loop the controller masks the plant's phase transients within
    # a few periods, so by default the gradient window is the shortest allowed
    det = detector if detector is not None else DetectorConfig(gradient_window=2.0 * control_dt)
    det.validate(control_dt)
    act = actuator if actuator is not None else ActuatorMap()
    st = state if state is not None else ControllerState()

    def callback(i_meas: float, u_meas: float, t: float) -> float:
        phase, switched = detect_phase(st, i_meas, u_meas, det, control_dt)
        gains = gains_sc if phase is Phase.SC else gains_ea
        if not switched:
            st.time_in_phase += control_dt
        ref = reference(st, ref_spec, st.time_in_phase)
        e = ref - i_meas
        if switched:
            st.d_state = 0.0
            st.prev_error = e
            st.integrator = st.last_command_v - gains.k_p * e
        return pid_step(st, gains, e, control_dt, act)

    callback.state = st
    return callback


# --- gain files -------------------------------------------------------------

def load_gains(path: str | Path) -> tuple[PidGains, PidGains]:
    """Load per-phase gains (``*_sc`` / ``*_ea`` keys) from a flat config."""
    values = parse_kv_text(Path(path).read_text())

    def pick(suffix: str) -> PidGains:
        try:
            return PidGains(
                K_p=values[f"K_p_{suffix}"],
                T_i=values[f"T_i_{suffix}"],
                T_d=values[f"T_d_{suffix}"],
                T_f=values.get(f"T_f_{suffix}"),
            )
        except KeyError as exc:
            raise ValueError(f"missing gain key {exc.args[0]} in {path}") from exc

    return pick("sc"), pick("ea")


def _data_file(name: str) -> Path:
    return Path(__file__).resolve().parent / "data" / name


def table2() -> tuple[PidGains, PidGains]:
    """Original tuning (5% settling criterion), fixture ``table2.gains``."""
    return load_gains(_data_file("table2.gains"))


def table3() -> tuple[PidGains, PidGains]:
    """Retuned, smoother setting (10% criterion), fixture ``table3.gains``."""
    return load_gains(_data_file("table3.gains"))
