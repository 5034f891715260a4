"""Closed-loop slope tracking with the shipped per-phase PID gains.

The controller ramps the current reference at +60 A/ms during each short
circuit and -20 A/ms during each arc phase, switching gain sets (with
bumpless transfer) whenever its detector sees a phase change.  The run
starts from 400 A so the sawtooth has room to drain.  Measured slopes land
within a few percent of the targets.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from gmawctl import (SimConfig, compute_metrics, controller_callback,
                     run_closed_loop, run_open_loop, table1, table2)

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)


def main() -> None:
    params, actuator = table1()
    gains_sc, gains_ea = table2()
    config = SimConfig(duration=0.1, dt_sim=1e-6, control_dt=1e-5, i_init=400.0)

    cb = controller_callback(gains_sc, gains_ea, actuator=actuator)
    closed = run_closed_loop(params, config, cb, actuator)
    open_ = run_open_loop(params, config, 21.1)

    for label, wave in (("closed loop", closed), ("open loop ", open_)):
        m = compute_metrics(wave)
        print(f"{label}: SC slope {m.didt_s:+6.2f} A/ms, "
              f"arc slope {-m.didt_d:+6.2f} A/ms, I_eff {m.i_eff:6.1f} A")
    print("targets    : SC slope +60.00 A/ms, arc slope -20.00 A/ms")

    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(8, 6))
    ax1.plot(closed.t * 1e3, closed.I_W, lw=0.8, label="closed loop")
    ax1.plot(open_.t * 1e3, open_.I_W, lw=0.8, alpha=0.6, label="open loop")
    ax1.set_ylabel("welding current (A)")
    ax1.legend(loc="upper right")
    ax2.plot(closed.t * 1e3, closed.E_W, lw=0.8, color="tab:green")
    ax2.set_ylabel("commanded source voltage (V)")
    ax2.set_xlabel("time (ms)")
    for ax in (ax1, ax2):
        ax.grid(alpha=0.3)
    fig.suptitle("per-phase PID keeps the current on the +60 / -20 A/ms profile")
    fig.savefig(OUT / "closed_loop_tracking.png", dpi=130)
    print(f"figure written to {OUT / 'closed_loop_tracking.png'}")


if __name__ == "__main__":
    main()
