"""Performance measures of a welding current record.

Slopes are linear-regression estimates over the last 70% of each phase
segment, which excludes the commanded transient at the phase onset; RMS
values cover the full record; peaks and durations are per-cycle statistics
over complete short-circuit + arc cycles.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .simulator import Phase, Waveform

__all__ = [
    "MetricsReport",
    "InsufficientCyclesError",
    "effective_value",
    "segment_slope",
    "compute_metrics",
    "compare_reports",
    "format_report",
    "report_to_csv",
]


class InsufficientCyclesError(RuntimeError):
    """The record does not contain a complete metal-transfer cycle."""


@dataclass(frozen=True)
class MetricsReport:
    didt_s: float        # mean short-circuit slope (A/ms)
    didt_d: float        # mean arc decay slope magnitude (A/ms)
    i_eff: float         # RMS current (A)
    v_eff: float         # RMS arc voltage (V)
    i_peak_avg: float    # mean per-cycle peak current (A)
    v_peak_avg: float    # mean per-cycle peak arc voltage (V)
    dt_ae_avg: float     # mean arc-phase duration (ms)
    dt_ae_std: float
    dt_cc_avg: float     # mean short-circuit duration (ms)
    dt_cc_std: float
    cycle_count: int


def effective_value(x: np.ndarray) -> float:
    """RMS of a sampled signal."""
    x = np.asarray(x, dtype=float)
    return float(np.sqrt(np.mean(x * x)))


def segment_slope(t: np.ndarray, y: np.ndarray, tail_frac: float = 0.7) -> float:
    """Least-squares slope over the trailing fraction of a segment (per second)."""
    n = len(t)
    start = n - max(2, int(round(tail_frac * n)))
    tt = t[start:] - t[start]
    yy = y[start:]
    return float(np.polyfit(tt, yy, 1)[0])


def _runs(phase: np.ndarray) -> list[tuple[int, int, str]]:
    edges = np.nonzero(phase[1:] != phase[:-1])[0] + 1
    bounds = [0, *edges.tolist(), len(phase)]
    return [(bounds[i], bounds[i + 1], str(phase[bounds[i]])) for i in range(len(bounds) - 1)]


def compute_metrics(w: Waveform, tail_frac: float = 0.7) -> MetricsReport:
    """Summarize a record into the standard performance measures.

    Requires at least one complete cycle (a short circuit followed by an
    arc phase, neither cut off by a record boundary); truncated boundary
    segments are excluded from the cycle statistics.
    """
    runs = _runs(w.phase)
    n = len(w)
    interior = [r for r in runs if r[0] > 0 and r[1] < n]

    cycles = []
    for a, b in zip(runs[:-1], runs[1:]):
        if a[2] == Phase.SC.value and b[2] == Phase.EA.value and a[0] > 0 and b[1] < n:
            cycles.append((a, b))
    if not cycles:
        raise InsufficientCyclesError(
            "record holds no complete short-circuit + arc cycle")

    slopes_sc = [segment_slope(w.t[a:b], w.I_W[a:b], tail_frac)
                 for a, b, ph in interior if ph == Phase.SC.value]
    slopes_ea = [segment_slope(w.t[a:b], w.I_W[a:b], tail_frac)
                 for a, b, ph in interior if ph == Phase.EA.value]

    i_peaks = [float(w.I_W[a[0]:b[1]].max()) for a, b in cycles]
    v_peaks = [float(w.U_arc[a[0]:b[1]].max()) for a, b in cycles]
    dur_cc = [(stop - start) * w.dt for start, stop, ph in interior if ph == Phase.SC.value]
    dur_ae = [(stop - start) * w.dt for start, stop, ph in interior if ph == Phase.EA.value]

    def std_ms(durations: list[float]) -> float:
        if len(durations) < 2:
            return 0.0
        return float(np.std(durations, ddof=1) * 1e3)

    return MetricsReport(
        didt_s=float(np.mean(slopes_sc)) * 1e-3 if slopes_sc else 0.0,
        didt_d=abs(float(np.mean(slopes_ea))) * 1e-3 if slopes_ea else 0.0,
        i_eff=effective_value(w.I_W),
        v_eff=effective_value(w.U_arc),
        i_peak_avg=float(np.mean(i_peaks)),
        v_peak_avg=float(np.mean(v_peaks)),
        dt_ae_avg=float(np.mean(dur_ae)) * 1e3 if dur_ae else 0.0,
        dt_ae_std=std_ms(dur_ae),
        dt_cc_avg=float(np.mean(dur_cc)) * 1e3 if dur_cc else 0.0,
        dt_cc_std=std_ms(dur_cc),
        cycle_count=len(cycles),
    )


SLOPE_FIELDS = ("didt_s", "didt_d")
SLOPE_CRITERION = 0.05


@dataclass(frozen=True)
class FieldDelta:
    field: str
    a: float
    b: float
    abs_delta: float
    rel_delta: float
    slope_flag: bool | None   # pass/fail at the 5% criterion; None for non-slope fields


def compare_reports(a: MetricsReport, b: MetricsReport) -> list[FieldDelta]:
    """Per-field differences; slope fields are flagged at the 5% criterion."""
    out = []
    for f in fields(MetricsReport):
        va = float(getattr(a, f.name))
        vb = float(getattr(b, f.name))
        delta = vb - va
        denom = max(abs(va), abs(vb))
        rel = abs(delta) / denom if denom > 0 else 0.0
        flag = (rel <= SLOPE_CRITERION) if f.name in SLOPE_FIELDS else None
        out.append(FieldDelta(field=f.name, a=va, b=vb, abs_delta=delta,
                              rel_delta=rel, slope_flag=flag))
    return out


def format_report(r: MetricsReport) -> str:
    lines = [f"{'field':<12} {'value':>12}"]
    for f in fields(MetricsReport):
        v = getattr(r, f.name)
        lines.append(f"{f.name:<12} {v:>12}" if isinstance(v, int)
                     else f"{f.name:<12} {v:>12.4f}")
    return "\n".join(lines)


def report_to_csv(r: MetricsReport, path: str | Path) -> None:
    names = [f.name for f in fields(MetricsReport)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        writer.writerow([getattr(r, n) for n in names])
