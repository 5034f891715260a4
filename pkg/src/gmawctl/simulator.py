"""Fixed-step switched simulation of the welding current loop.

Each sub-circuit is discretized exactly (matrix exponential, computed once
per run), so the integration step only controls how finely switching and
control instants are quantized.  Phase alternation is driven by the metal
transfer itself: a timer with optional jitter, never by the controller.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Union

import numpy as np
from scipy.linalg import expm

from .model import ActuatorMap, CircuitParams, LinearSystem, ea_transfer, sc_transfer

__all__ = [
    "Phase",
    "PlantState",
    "SimConfig",
    "Waveform",
    "SimulationDivergedError",
    "discretize",
    "step",
    "switch_phase",
    "run_open_loop",
    "run_closed_loop",
]

# Controller callback: (I_W measured, U_arc measured, t) -> duty fraction
ControllerCallback = Callable[[float, float, float], float]


class SimulationDivergedError(RuntimeError):
    """State left the finite range during simulation."""


class Phase(str, enum.Enum):
    SC = "SC"   # short-circuit: molten bridge closed, current rising
    EA = "EA"   # electric arc: open arc, current decaying

    def other(self) -> "Phase":
        return Phase.EA if self is Phase.SC else Phase.SC


@dataclass
class PlantState:
    """Continuous state of the active sub-circuit plus phase bookkeeping."""

    x: np.ndarray
    phase: Phase
    phase_clock: float = 0.0

    @property
    def i_L(self) -> float:
        return float(self.x[0])


@dataclass(frozen=True)
class SimConfig:
    duration: float               # simulated time span (s)
    dt_sim: float = 1e-6          # integration step (s)
    control_dt: float = 1e-5      # controller update period (s)
    noise_std_I: float = 0.0      # current measurement noise std (A)
    noise_std_V: float = 0.0      # arc-voltage measurement noise std (V)
    jitter: float = 0.0           # relative std of phase durations
    seed: int = 0
    i_init: float = 0.0           # inductor current at t = 0 (A)

    def __post_init__(self) -> None:
        if self.dt_sim <= 0.0:
            raise ValueError("dt_sim must be positive")
        if self.duration < self.dt_sim:
            raise ValueError("duration must cover at least one step")
        if self.noise_std_I < 0.0 or self.noise_std_V < 0.0 or self.jitter < 0.0:
            raise ValueError("noise and jitter levels must be non-negative")
        n_ctrl = self.control_dt / self.dt_sim
        if abs(n_ctrl - round(n_ctrl)) > 1e-9 or round(n_ctrl) < 1:
            raise ValueError("control_dt must be a positive integer multiple of dt_sim")


_CSV_HEADER = ["t_s", "I_W_A", "U_arc_V", "E_W_V", "phase"]


@dataclass
class Waveform:
    """Uniformly sampled record of one simulation or measurement run."""

    t: np.ndarray
    I_W: np.ndarray
    U_arc: np.ndarray
    E_W: np.ndarray
    phase: np.ndarray   # per-sample labels 'SC' / 'EA'

    def __post_init__(self) -> None:
        n = len(self.t)
        if not all(len(a) == n for a in (self.I_W, self.U_arc, self.E_W, self.phase)):
            raise ValueError("waveform channels must have equal length")
        if n >= 2:
            steps = np.diff(self.t)
            if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-6, atol=0.0):
                raise ValueError("time axis must be strictly increasing with constant step")

    def __len__(self) -> int:
        return len(self.t)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_CSV_HEADER)
            for row in zip(self.t, self.I_W, self.U_arc, self.E_W, self.phase):
                writer.writerow([repr(float(row[0])), repr(float(row[1])),
                                 repr(float(row[2])), repr(float(row[3])), row[4]])

    @classmethod
    def from_csv(cls, path: str | Path) -> "Waveform":
        text = Path(path).read_text()
        delimiter = ";" if ";" in text.splitlines()[0] else ","
        rows = list(csv.reader(text.splitlines(), delimiter=delimiter))
        if not rows or [h.strip() for h in rows[0]] != _CSV_HEADER:
            raise ValueError(f"bad waveform header in {path}: expected {','.join(_CSV_HEADER)}")
        body = [r for r in rows[1:] if r]
        if not body:
            raise ValueError(f"waveform file {path} has no samples")

        def num(s: str) -> float:
            return float(s.strip().replace(",", "."))

        cols = list(zip(*body))
        return cls(
            t=np.array([num(v) for v in cols[0]]),
            I_W=np.array([num(v) for v in cols[1]]),
            U_arc=np.array([num(v) for v in cols[2]]),
            E_W=np.array([num(v) for v in cols[3]]),
            phase=np.array([v.strip() for v in cols[4]], dtype="U2"),
        )


def discretize(sys: LinearSystem, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact zero-order-hold discretization of a LinearSystem at step dt."""
    n = sys.order
    m = np.zeros((n + 1, n + 1))
    m[:n, :n] = sys.a
    m[:n, n] = sys.b
    phi = expm(m * dt)
    return phi[:n, :n], phi[:n, n]


def switch_phase(state: PlantState, new_phase: Phase) -> PlantState:
    """Hand the state over to the other sub-circuit.

    The inductor current is carried over continuously; the capacitor
    voltage of a freshly formed molten bridge starts at zero.
    """
    if new_phase == state.phase:
        raise ValueError("switch_phase requires a different phase")
    i_l = state.i_L
    if new_phase is Phase.SC:
        x = np.array([i_l, 0.0])
    else:
        x = np.array([i_l])
    return PlantState(x=x, phase=new_phase, phase_clock=0.0)


def _plant_matrices(params: CircuitParams, dt: float):
    sc = sc_transfer(params)
    ea = ea_transfer(params)
    ad_sc, bd_sc = discretize(sc, dt)
    ad_ea, bd_ea = discretize(ea, dt)
    return sc, ea, ad_sc, bd_sc, ad_ea, bd_ea


def step(state: PlantState, params: CircuitParams, E_W: float, dt: float) -> tuple[PlantState, float, float]:
    """Advance the active sub-circuit one step; returns (state, I_W, U_arc).

    The arc voltage is reconstructed from the series-source circuit law
    U_arc = E_W - R_L I_W - L dI_L/dt, with the state derivative taken at
    the step start.  The output rectifier cannot conduct backwards, so a
    current that would go negative is clamped at zero.
    """
    sys = sc_transfer(params) if state.phase is Phase.SC else ea_transfer(params)
    ad, bd = discretize(sys, dt)
    i = state.i_L
    dx = sys.derivative(state.x, E_W)
    didt = float(dx[0])
    clamped = i <= 0.0 and didt < 0.0
    u_arc = E_W - params.R_L * i - (0.0 if clamped else params.L * didt)
    x_new = ad @ state.x + bd * (E_W + sys.u0)
    if x_new[0] < 0.0:
        x_new[0] = 0.0
    if not np.all(np.isfinite(x_new)):
        raise SimulationDivergedError(f"non-finite state at phase_clock={state.phase_clock}")
    new_state = PlantState(x=x_new, phase=state.phase, phase_clock=state.phase_clock + dt)
    return new_state, i, u_arc


def _draw_duration(nominal: float, jitter: float, rng: np.random.Generator) -> float:
    if jitter == 0.0:
        return nominal
    g = rng.normal(0.0, jitter)
    g = min(max(g, -3.0 * jitter), 3.0 * jitter)
    return max(nominal * (1.0 + g), 0.1 * nominal)


EwSource = Union[float, Callable[[float], float]]


def _run(params: CircuitParams, config: SimConfig,
         ew_command: Callable[[float, float, float], float]) -> Waveform:
    """Shared fixed-step runner; ew_command(I_meas, U_meas, t) -> E_W volts."""
    dt = config.dt_sim
    n = int(round(config.duration / dt))
    n_ctrl = int(round(config.control_dt / dt))

    ss_jitter, ss_noise = np.random.SeedSequence(config.seed).spawn(2)
    rng_jitter = np.random.default_rng(ss_jitter)
    rng_noise = np.random.default_rng(ss_noise)
    noise_i = (rng_noise.normal(0.0, config.noise_std_I, n)
               if config.noise_std_I > 0.0 else np.zeros(n))
    noise_v = (rng_noise.normal(0.0, config.noise_std_V, n)
               if config.noise_std_V > 0.0 else np.zeros(n))

    sc_sys, ea_sys, ad_sc, bd_sc, ad_ea, bd_ea = _plant_matrices(params, dt)
    # unpack to scalars: the inner loop dominates runtime
    a11, a12 = ad_sc[0]
    a21, a22 = ad_sc[1]
    b1, b2 = bd_sc
    ae = float(ad_ea[0, 0])
    be = float(bd_ea[0])
    r_l, l_ind = params.R_L, params.L
    r_l1 = params.R_L + params.R_1
    r_ea = params.R_L + params.R_rea + params.R_reg
    e_ac = params.E_ac

    t_arr = np.arange(n) * dt
    i_rec = np.empty(n)
    u_rec = np.empty(n)
    e_rec = np.empty(n)
    ph_rec = np.empty(n, dtype="U2")

    phase = Phase.SC
    i = float(config.i_init)
    v = 0.0                      # capacitor voltage, SC phase only
    remaining = _draw_duration(params.t_cc, config.jitter, rng_jitter)
    e_w = ew_command(i + noise_i[0], 0.0, 0.0)

    for k in range(n):
        if phase is Phase.SC:
            didt = (e_w - r_l1 * i - v) / l_ind
        else:
            didt = (e_w - e_ac - r_ea * i) / l_ind
        if i <= 0.0 and didt < 0.0:
            didt = 0.0           # rectifier blocks reverse current
        u_arc = e_w - r_l * i - l_ind * didt

        i_rec[k] = i + noise_i[k]
        u_rec[k] = u_arc + noise_v[k]
        e_rec[k] = e_w
        ph_rec[k] = phase.value

        if phase is Phase.SC:
            i_new = a11 * i + a12 * v + b1 * e_w
            v = a21 * i + a22 * v + b2 * e_w
            i = i_new
        else:
            i = ae * i + be * (e_w - e_ac)
        if i < 0.0:
            i = 0.0
        if not (abs(i) < 1e15):
            raise SimulationDivergedError(f"current diverged near t={k * dt:.6g} s")

        remaining -= dt
        if remaining <= 0.5 * dt:
            # timer fires: metal transfer switches phase; inductor current
            # carries over, a fresh bridge has no stored charge
            phase = phase.other()
            v = 0.0
            nominal = params.t_cc if phase is Phase.SC else params.t_ae
            remaining = _draw_duration(nominal, config.jitter, rng_jitter)

        if (k + 1) % n_ctrl == 0 and k + 1 < n:
            e_w = ew_command(i_rec[k], u_rec[k], t_arr[k] + dt)

    return Waveform(t=t_arr, I_W=i_rec, U_arc=u_rec, E_W=e_rec, phase=ph_rec)


def run_open_loop(params: CircuitParams, config: SimConfig, ew_profile: EwSource) -> Waveform:
    """Simulate with a prescribed source voltage profile (V or callable of t)."""
    if callable(ew_profile):
        profile = ew_profile
    else:
        const = float(ew_profile)
        profile = lambda t: const
    return _run(params, config, lambda i, u, t: profile(t))


def run_closed_loop(params: CircuitParams, config: SimConfig,
                    controller: ControllerCallback,
                    actuator: ActuatorMap | None = None) -> Waveform:
    """Simulate with a controller commanding duty cycle each control period.

    The controller observes noisy measurements of I_W and U_arc; its duty
    command passes through the actuator saturation.  Phase switching stays
    plant-driven, exactly as in the open-loop runner.
    """
    act = actuator if actuator is not None else ActuatorMap()

    def command(i_meas: float, u_meas: float, t: float) -> float:
        duty = controller(i_meas, u_meas, t)
        duty = min(max(duty, act.duty_min), act.duty_max)
        return act.volts_per_unit_duty * duty

    return _run(params, config, command)
