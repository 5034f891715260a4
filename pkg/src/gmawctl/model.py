"""Switched equivalent-circuit model of the welding electrical loop.

The welding current loop alternates between two passive sub-circuits:
a second-order short-circuit branch (series R-L source feeding a resistor
plus an R||C bridge) and a first-order electric-arc branch (series R-L
against a constant arc counter-voltage).  This module holds the circuit
constants, realizes both branches as continuous-time state-space systems
and maps converter duty cycle to average source voltage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

__all__ = [
    "DegenerateParameterError",
    "CircuitParams",
    "LinearSystem",
    "ActuatorMap",
    "sc_transfer",
    "ea_transfer",
    "sc_polynomials",
    "ea_polynomials",
    "load_params",
    "save_params",
    "table1",
]


class DegenerateParameterError(ValueError):
    """Raised when circuit constants make a transfer function ill-posed."""


@dataclass(frozen=True)
class CircuitParams:
    """Electrical constants of the switched welding circuit (SI units)."""

    L: float          # source inductance (H)
    R_L: float        # source resistance (ohm)
    C: float          # short-circuit capacitance (F)
    R_c: float        # capacitor series resistance (ohm); stored, not used by the transfer functions
    R_1: float        # short-circuit resistance 1 (ohm)
    R_2: float        # short-circuit resistance 2 (ohm)
    R_rea: float      # arc resistance (ohm)
    R_reg: float      # re-ignition resistance (ohm)
    E_ac: float       # constant arc counter-voltage (V)
    t_cc: float       # nominal short-circuit duration (s)
    t_ae: float       # nominal electric-arc duration (s)

    def __post_init__(self) -> None:
        positive = {
            "L": self.L, "R_L": self.R_L, "C": self.C, "R_c": self.R_c,
            "R_1": self.R_1, "R_2": self.R_2, "R_rea": self.R_rea,
            "R_reg": self.R_reg, "t_cc": self.t_cc, "t_ae": self.t_ae,
        }
        for name, value in positive.items():
            if not (math.isfinite(value) and value > 0.0):
                raise DegenerateParameterError(f"{name} must be strictly positive, got {value!r}")
        if not (math.isfinite(self.E_ac) and self.E_ac >= 0.0):
            raise DegenerateParameterError(f"E_ac must be non-negative, got {self.E_ac!r}")


@dataclass(frozen=True)
class LinearSystem:
    """Continuous-time SISO state-space system y = c x + d u, dx = A x + b (u + u0).

    ``u0`` is a constant offset added to the input before the input matrix;
    it carries the arc counter-voltage subtraction of the arc branch.
    For systems built from :class:`CircuitParams`, state 0 is the inductor
    current, which is what makes switching continuity possible.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: float = 0.0
    u0: float = 0.0

    def __post_init__(self) -> None:
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        c = np.asarray(self.c, dtype=float).reshape(-1)
        n = a.shape[0]
        if a.shape != (n, n) or b.shape != (n,) or c.shape != (n,):
            raise ValueError(f"inconsistent system dimensions: A {a.shape}, b {b.shape}, c {c.shape}")
        for arr in (a, b, c):
            arr.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def order(self) -> int:
        return self.a.shape[0]

    def poles(self) -> np.ndarray:
        return np.linalg.eigvals(self.a)

    def dc_gain(self) -> float:
        return float(self.c @ np.linalg.solve(-self.a, self.b) + self.d)

    def derivative(self, x: np.ndarray, u: float) -> np.ndarray:
        return self.a @ x + self.b * (u + self.u0)

    def freq_response(self, w: np.ndarray) -> np.ndarray:
        """Frequency response at angular frequencies ``w`` (rad/s)."""
        w = np.atleast_1d(np.asarray(w, dtype=float))
        n = self.order
        eye = np.eye(n)
        out = np.empty(w.shape, dtype=complex)
        for k, wk in enumerate(w):
            out[k] = self.c @ np.linalg.solve(1j * wk * eye - self.a, self.b) + self.d
        return out

    def transfer_polynomials(self) -> tuple[np.ndarray, np.ndarray]:
        """Numerator/denominator of c (sI - A)^-1 b + d, highest power first."""
        den = np.poly(self.a)
        num = np.poly(self.a - np.outer(self.b, self.c)) - den + self.d * den
        return num, den


@dataclass(frozen=True)
class ActuatorMap:
    """Linear duty-cycle to average-source-voltage map of the converter."""

    volts_per_unit_duty: float = 200.0
    duty_min: float = 0.0
    duty_max: float = 0.5

    def __post_init__(self) -> None:
        if not (0.0 <= self.duty_min < self.duty_max <= 0.5):
            raise ValueError(
                f"duty range must satisfy 0 <= duty_min < duty_max <= 0.5, "
                f"got [{self.duty_min}, {self.duty_max}]"
            )
        if self.volts_per_unit_duty <= 0.0:
            raise ValueError("volts_per_unit_duty must be positive")

    def duty_to_volts(self, duty: float) -> float:
        if not (self.duty_min <= duty <= self.duty_max):
            raise ValueError(f"duty {duty} outside [{self.duty_min}, {self.duty_max}]")
        return self.volts_per_unit_duty * duty

    def volts_to_duty(self, volts: float) -> tuple[float, bool]:
        """Inverse map; the duty is clamped to the valid range.

        Returns (duty, saturated).
        """
        duty = volts / self.volts_per_unit_duty
        if duty < self.duty_min:
            return self.duty_min, True
        if duty > self.duty_max:
            return self.duty_max, True
        return duty, False


def sc_polynomials(params: CircuitParams) -> tuple[np.ndarray, np.ndarray]:
    """Short-circuit branch transfer function I/E as (num, den) coefficients."""
    num = np.array([params.C * params.R_2, 1.0])
    den = np.array([
        params.C * params.L * params.R_2,
        params.L + params.C * params.R_L * params.R_2 + params.C * params.R_1 * params.R_2,
        params.R_1 + params.R_2 + params.R_L,
    ])
    return num, den


def ea_polynomials(params: CircuitParams) -> tuple[np.ndarray, np.ndarray]:
    """Arc branch transfer function I/(E - E_ac) as (num, den) coefficients."""
    num = np.array([1.0])
    den = np.array([params.L, params.R_L + params.R_rea + params.R_reg])
    return num, den


def sc_transfer(params: CircuitParams) -> LinearSystem:
    """State-space realization of the short-circuit branch.

    States are [inductor current, capacitor voltage]; output is the weld
    current.  The loop equations are

        L di/dt = E - (R_L + R_1) i - v
        C dv/dt = i - v / R_2

    whose transfer function is (s C R_2 + 1) over
    s^2 C L R_2 + s (L + C R_L R_2 + C R_1 R_2) + (R_1 + R_2 + R_L).
    """
    _, den = sc_polynomials(params)
    if den[0] <= 0.0:
        raise DegenerateParameterError(f"leading denominator coefficient {den[0]} <= 0")
    a = np.array([
        [-(params.R_L + params.R_1) / params.L, -1.0 / params.L],
        [1.0 / params.C, -1.0 / (params.R_2 * params.C)],
    ])
    b = np.array([1.0 / params.L, 0.0])
    c = np.array([1.0, 0.0])
    return LinearSystem(a=a, b=b, c=c, d=0.0, u0=0.0)


def ea_transfer(params: CircuitParams) -> LinearSystem:
    """State-space realization of the electric-arc branch.

    Single state (inductor current); the constant arc counter-voltage
    enters as the input offset u0 = -E_ac.
    """
    if params.L <= 0.0:
        raise DegenerateParameterError(f"L must be positive, got {params.L}")
    r_sum = params.R_L + params.R_rea + params.R_reg
    a = np.array([[-r_sum / params.L]])
    b = np.array([1.0 / params.L])
    c = np.array([1.0])
    return LinearSystem(a=a, b=b, c=c, d=0.0, u0=-params.E_ac)


# --- flat key = value config files -----------------------------------------

_PARAM_KEYS = ("L", "R_L", "C", "R_c", "R_1", "R_2", "R_rea", "R_reg", "E_ac", "t_cc", "t_ae")


def parse_kv_text(text: str) -> dict[str, float]:
    """Parse ``key = value`` lines; '#' starts a comment.

    Decimal commas (as printed in the source data tables) are normalized
    to decimal points.
    """
    values: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        try:
            values[key.strip()] = float(val.strip().replace(",", "."))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad number {val.strip()!r}") from exc
    return values


def load_params(path: str | Path) -> tuple[CircuitParams, ActuatorMap]:
    """Load circuit parameters and actuator map from a flat config file."""
    values = parse_kv_text(Path(path).read_text())
    missing = [k for k in _PARAM_KEYS if k not in values]
    if missing:
        raise ValueError(f"missing keys in {path}: {', '.join(missing)}")
    params = CircuitParams(**{k: values[k] for k in _PARAM_KEYS})
    actuator = ActuatorMap(
        volts_per_unit_duty=values.get("duty_volts_gain", 200.0),
        duty_min=values.get("duty_min", 0.0),
        duty_max=values.get("duty_max", 0.5),
    )
    return params, actuator


def save_params(path: str | Path, params: CircuitParams, actuator: ActuatorMap | None = None) -> None:
    lines = [f"{k} = {getattr(params, k)!r}" for k in _PARAM_KEYS]
    if actuator is not None:
        lines.append(f"duty_volts_gain = {actuator.volts_per_unit_duty!r}")
        lines.append(f"duty_min = {actuator.duty_min!r}")
        lines.append(f"duty_max = {actuator.duty_max!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def _data_file(name: str) -> Path:
    return Path(__file__).resolve().parent / "data" / name


def table1() -> tuple[CircuitParams, ActuatorMap]:
    """The shipped canonical parameter set (fixture ``table1.params``)."""
    return load_params(_data_file("table1.params"))
