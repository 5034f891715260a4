"""Root-locus sweep and settling verification for the shipped gain sets.

Sweeps the proportional gain of each phase loop over two decades, plots
how the closed-loop poles migrate, marks the poles at the shipped gain,
and prints the full tuning report (stability, settling inside a 5 % band,
steady-state ramp error) for both shipped tables.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from gmawctl import (SettlingSpec, closed_loop_poles, ea_transfer, gain_sweep,
                     sc_transfer, table1, table2, table3, verify_tuning)

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)


def main() -> None:
    params, actuator = table1()
    gains_sc, gains_ea = table2()

    fig, axes = plt.subplots(1, 2, figsize=(11, 4.5))
    for ax, sys, gains, label in (
            (axes[0], sc_transfer(params), gains_sc, "short-circuit loop"),
            (axes[1], ea_transfer(params), gains_ea, "arc loop")):
        span = np.array([gains.K_p / 10.0, gains.K_p * 10.0])
        kp, locus = gain_sweep(sys, gains, span, n_points=200)
        for branch in range(locus.shape[1]):
            ax.plot(locus[:, branch].real, locus[:, branch].imag, lw=1.0)
        shipped = closed_loop_poles(sys, gains)
        ax.plot(shipped.real, shipped.imag, "kx", ms=9, mew=2,
                label=f"shipped K_p = {gains.K_p}")
        ax.axvline(0.0, color="gray", lw=0.7)
        ax.set_title(label)
        ax.set_xlabel("real (1/s)")
        ax.set_ylabel("imag (1/s)")
        ax.grid(alpha=0.3)
        ax.legend(loc="best")
        print(f"{label}: poles at shipped gain "
              + ", ".join(f"{p:.0f}" for p in shipped))
    fig.suptitle("closed-loop pole migration over a 100x proportional-gain sweep")
    fig.tight_layout()
    fig.savefig(OUT / "root_locus_sweep.png", dpi=130)
    print(f"figure written to {OUT / 'root_locus_sweep.png'}\n")

    for name, gains, band in (("table2", table2(), 0.05), ("table3", table3(), 0.10)):
        report = verify_tuning(params, *gains, SettlingSpec(band=band), actuator)
        print(f"=== {name} gains, {band:.0%} band ===")
        print(report.format())
        print()


if __name__ == "__main__":
    main()
