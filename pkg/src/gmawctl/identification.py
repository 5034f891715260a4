"""Prediction-error identification of the switched circuit parameters.

Each phase is fitted separately, as an independent system: the predictor
is the simulated phase model driven by the recorded source voltage, and
the cost is the mean squared difference between predicted and measured
current over all segments of that phase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import lfilter, savgol_filter

from .model import CircuitParams, LinearSystem, ea_transfer, sc_transfer
from .simulator import Phase, Waveform, discretize

__all__ = [
    "ThetaSc",
    "ThetaEa",
    "FitReport",
    "Segment",
    "NoSegmentsError",
    "segment",
    "segments_from_labels",
    "predict",
    "fit",
]


class NoSegmentsError(RuntimeError):
    """No usable phase segments were found in the record."""


@dataclass(frozen=True)
class ThetaSc:
    """Short-circuit branch parameters estimated from data."""

    R_1: float
    R_2: float
    C: float

    def __post_init__(self) -> None:
        if min(self.R_1, self.R_2, self.C) <= 0.0:
            raise ValueError("R_1, R_2, C must be strictly positive")

    def as_array(self) -> np.ndarray:
        return np.array([self.R_1, self.R_2, self.C])


@dataclass(frozen=True)
class ThetaEa:
    """Electric-arc branch parameters: lumped resistance and arc voltage."""

    R_sum: float
    E_ac: float

    def __post_init__(self) -> None:
        if self.R_sum <= 0.0 or self.E_ac < 0.0:
            raise ValueError("require R_sum > 0 and E_ac >= 0")

    def as_array(self) -> np.ndarray:
        return np.array([self.R_sum, self.E_ac])


@dataclass(frozen=True)
class FitReport:
    theta_hat: ThetaSc | ThetaEa
    J_N: float                # mean squared prediction error (A^2)
    iterations: int
    converged: bool
    segments_used: int


@dataclass(frozen=True)
class Segment:
    start: int        # first sample index (inclusive)
    stop: int         # last sample index (exclusive)
    phase: Phase

    def __len__(self) -> int:
        return self.stop - self.start

    @property
    def interior(self) -> bool:
        """False when the segment touches a record boundary (possibly cut short)."""
        return self.start > 0

    def touches_end(self, n: int) -> bool:
        return self.stop >= n


def segment(w: Waveform, v_threshold: float = 14.4, slope_threshold: float = 5e3,
            smooth_window: float = 50e-6, min_duration: float = 0.3e-3) -> list[Segment]:
    """Label contiguous short-circuit / arc stretches of a record.

    Reuses the online switching logic offline: a short circuit starts where
    the smoothed current gradient exceeds ``slope_threshold`` while the arc
    voltage sits below ``v_threshold``, and ends where the gradient turns
    negative.  Segments shorter than ``min_duration`` are discarded.
    """
    if len(w) < 4:
        raise NoSegmentsError("record too short to segment")
    dt = w.dt
    n_win = max(3, int(round(smooth_window / dt)) | 1)   # odd, centered
    kernel = np.ones(n_win) / n_win
    u_smooth = np.convolve(w.U_arc, kernel, mode="same")
    # least-squares slope over the centered window (far lower variance on
    # noisy data than differencing a smoothed signal)
    grad = savgol_filter(w.I_W, n_win, polyorder=1, deriv=1, delta=dt)

    in_sc = bool(grad[0] > slope_threshold and u_smooth[0] < v_threshold)
    labels = np.empty(len(w), dtype=bool)
    for k in range(len(w)):
        if in_sc:
            if grad[k] < 0.0:
                in_sc = False
        else:
            if grad[k] > slope_threshold and u_smooth[k] < v_threshold:
                in_sc = True
        labels[k] = in_sc

    bounds = [0, *(np.nonzero(labels[1:] != labels[:-1])[0] + 1).tolist(), len(w)]
    run_is_sc = [bool(labels[b]) for b in bounds[:-1]]
    # the gradient estimate lags the true switch by up to the smoothing
    # window; a short circuit opens at a local current minimum and the arc
    # at a local maximum, so snap each boundary to that extremum
    half = n_win
    for j in range(1, len(bounds) - 1):
        b = bounds[j]
        lo = max(bounds[j - 1] + 1, b - half)
        hi = min(bounds[j + 1] - 1, b + half)
        if hi <= lo:
            continue
        piece = w.I_W[lo:hi + 1]
        b_new = lo + int(np.argmin(piece) if run_is_sc[j] else np.argmax(piece))
        bounds[j] = b_new

    segments: list[Segment] = []
    for (start, stop), is_sc in zip(zip(bounds[:-1], bounds[1:]), run_is_sc):
        if stop <= start:
            continue
        phase = Phase.SC if is_sc else Phase.EA
        if (stop - start) * dt >= min_duration:
            segments.append(Segment(start=start, stop=stop, phase=phase))
    if not segments:
        raise NoSegmentsError("no segment longer than the minimum duration")
    return segments


def segments_from_labels(w: Waveform, min_duration: float = 0.0) -> list[Segment]:
    """Segments taken directly from the record's phase labels.

    For synthetic data and instrumented rigs the per-sample phase column is
    authoritative; the threshold-based ``segment`` estimator is only needed
    when the labels are absent or untrusted.
    """
    if len(w) == 0:
        raise NoSegmentsError("empty record")
    ph = np.asarray(w.phase)
    edges = np.nonzero(ph[1:] != ph[:-1])[0] + 1
    bounds = [0, *edges.tolist(), len(w)]
    out = []
    for start, stop in zip(bounds[:-1], bounds[1:]):
        if (stop - start) * w.dt >= min_duration:
            out.append(Segment(start=start, stop=stop,
                               phase=Phase.SC if ph[start] == Phase.SC.value else Phase.EA))
    if not out:
        raise NoSegmentsError("no segment longer than the minimum duration")
    return out


def _phase_system(theta: ThetaSc | ThetaEa, phase: Phase, known: dict[str, float]) -> LinearSystem:
    l_ind, r_l = known["L"], known["R_L"]
    if phase is Phase.SC:
        assert isinstance(theta, ThetaSc)
        params = CircuitParams(L=l_ind, R_L=r_l, C=theta.C, R_c=1.0, R_1=theta.R_1,
                               R_2=theta.R_2, R_rea=1.0, R_reg=1.0, E_ac=0.0,
                               t_cc=1.0, t_ae=1.0)
        return sc_transfer(params)
    assert isinstance(theta, ThetaEa)
    # split of R_sum between the two arc resistances is immaterial here
    params = CircuitParams(L=l_ind, R_L=r_l, C=1.0, R_c=1.0, R_1=1.0, R_2=1.0,
                           R_rea=theta.R_sum / 2.0, R_reg=theta.R_sum / 2.0,
                           E_ac=theta.E_ac, t_cc=1.0, t_ae=1.0)
    return ea_transfer(params)


class _DiscretePredictor:
    """Discretized phase model split into forced and natural output parts."""

    def __init__(self, sys: LinearSystem, dt: float):
        self.sys = sys
        ad, bd = discretize(sys, dt)
        self.den = np.poly(ad)
        self.num = np.poly(ad - np.outer(bd, sys.c)) - self.den
        self.lam, self.vec = np.linalg.eig(ad)

    def forced(self, u: np.ndarray) -> np.ndarray:
        return lfilter(self.num, self.den, u + self.sys.u0)

    def natural(self, x0: np.ndarray, n: int) -> np.ndarray:
        coeff = (self.sys.c @ self.vec) * np.linalg.solve(self.vec, x0)
        powers = self.lam[None, :] ** np.arange(n)[:, None]
        return (powers @ coeff).real


def _simulate_output(sys: LinearSystem, x0: np.ndarray, u: np.ndarray, dt: float) -> np.ndarray:
    """Output of the discretized system along input u, vectorized.

    Forced response via the discrete transfer function (lfilter), natural
    response via the eigendecomposition of the discrete state matrix.
    """
    n = len(u)
    if n == 0:
        return np.zeros(0)
    pred = _DiscretePredictor(sys, dt)
    return pred.forced(u) + pred.natural(x0, n)


def predict(theta: ThetaSc | ThetaEa, phase: Phase, e_w: np.ndarray, dt: float,
            known: dict[str, float], i0: float) -> np.ndarray:
    """Predicted current along a segment, simulating the phase model.

    The state starts from the measured current ``i0``; the capacitor of a
    fresh short circuit starts discharged.
    """
    e_w = np.asarray(e_w, dtype=float)
    if len(e_w) == 0:
        return np.zeros(0)
    sys = _phase_system(theta, phase, known)
    x0 = np.array([i0, 0.0]) if phase is Phase.SC else np.array([i0])
    return _simulate_output(sys, x0, e_w, dt)


def _theta_from_array(values: np.ndarray, phase: Phase) -> ThetaSc | ThetaEa:
    if phase is Phase.SC:
        return ThetaSc(R_1=values[0], R_2=values[1], C=values[2])
    return ThetaEa(R_sum=values[0], E_ac=values[1])


def fit(w: Waveform, phase: Phase, theta0: ThetaSc | ThetaEa, known: dict[str, float],
        segments: Sequence[Segment] | None = None, exclude_frac: float = 0.05,
        max_iterations: int = 500) -> FitReport:
    """Minimize the mean squared prediction error over all same-phase segments.

    Levenberg-Marquardt (damped Gauss-Newton) on log-transformed parameters,
    which keeps them strictly positive; the Jacobian is numerically
    differenced.  The first ``exclude_frac`` of each segment is left out of
    the cost to reduce sensitivity to switch-instant transients.
    """
    t0 = theta0.as_array()
    if not np.all(np.isfinite(t0)) or np.any(t0 <= 0.0):
        raise ValueError(f"theta0 must be strictly positive and finite, got {theta0}")
    if segments is None:
        segments = segment(w)
    own = [s for s in segments if s.phase is phase]
    if not own:
        raise NoSegmentsError(f"no {phase.value} segments in the record")
    dt = w.dt

    pieces = []
    for s in own:
        skip = int(math.ceil(exclude_frac * len(s)))
        pieces.append((s.start, s.stop, skip))
    n_res = sum(stop - start - skip for start, stop, skip in pieces)

    n_max = max(stop - start for start, stop, _ in pieces)
    u_pad = np.zeros((len(pieces), n_max))
    for row, (start, stop, _) in enumerate(pieces):
        u_pad[row, :stop - start] = w.E_W[start:stop]

    def residuals(log_theta: np.ndarray) -> np.ndarray:
        # extreme trial parameters can overflow the matrix exponential; a
        # large finite penalty steers the search back instead of crashing
        try:
            theta = _theta_from_array(np.exp(log_theta), phase)
            sys = _phase_system(theta, phase, known)
            pred = _DiscretePredictor(sys, dt)
            e1 = np.zeros(sys.order)
            e1[0] = 1.0
            # the unit natural response is shared by every segment, and the
            # forced responses batch into a single filtering call
            g_full = pred.natural(e1, n_max)
            forced = lfilter(pred.num, pred.den, u_pad + pred.sys.u0, axis=1)
            out = []
            for row, (start, stop, skip) in enumerate(pieces):
                n = stop - start
                y_forced = forced[row, :n]
                g = g_full[:n]
                # the switch-instant current is a nuisance quantity; the
                # output is linear in it, so profile it out per segment
                r0 = w.I_W[start:stop] - y_forced
                gg = float(g[skip:] @ g[skip:])
                i0_hat = float(g[skip:] @ r0[skip:]) / gg if gg > 0.0 else 0.0
                out.append(y_forced[skip:] + i0_hat * g[skip:] - w.I_W[start + skip:stop])
            res = np.concatenate(out)
        except (np.linalg.LinAlgError, ValueError, OverflowError):
            return np.full(n_res, 1e9)
        if not np.all(np.isfinite(res)):
            return np.full(n_res, 1e9)
        return res

    result = least_squares(
        residuals, np.log(t0), method="lm",
        ftol=1e-10, gtol=1e-8, xtol=1e-12, max_nfev=max_iterations * (len(t0) + 1),
    )
    theta_hat = _theta_from_array(np.exp(result.x), phase)
    j_n = float(np.mean(result.fun ** 2))
    converged = bool(result.status > 0)
    return FitReport(theta_hat=theta_hat, J_N=j_n, iterations=int(result.nfev),
                     converged=converged, segments_used=len(own))
