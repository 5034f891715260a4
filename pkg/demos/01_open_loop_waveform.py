"""Open-loop baseline: the switched circuit driven by a constant source.

Runs the plant at a fixed 21.1 V source voltage and shows why that is not
good enough: the short-circuit current ramps far too fast (~81 A/ms versus
the +60 A/ms target) and the arc-phase current decays exponentially instead
of falling at a controlled -20 A/ms.  The figure shows two full
short-circuit/arc cycles with the phase shading.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from gmawctl import SimConfig, compute_metrics, run_open_loop, table1

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)


def main() -> None:
    params, _ = table1()
    config = SimConfig(duration=0.05, dt_sim=1e-6, control_dt=1e-5)
    wave = run_open_loop(params, config, 21.1)

    m = compute_metrics(wave)
    print("open loop at constant 21.1 V source")
    print(f"  short-circuit slope : {m.didt_s:+7.2f} A/ms   (target +60)")
    print(f"  arc-phase slope     : {-m.didt_d:+7.2f} A/ms   (target -20)")
    print(f"  effective current   : {m.i_eff:7.1f} A over {m.cycle_count} cycles")

    # two full cycles, starting at the first short-circuit onset
    edges = np.nonzero(wave.phase[1:] != wave.phase[:-1])[0] + 1
    start = next(e for e in edges if wave.phase[e] == "SC")
    span = slice(start, start + int(2 * (params.t_cc + params.t_ae) / wave.dt))

    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(8, 6))
    t_ms = (wave.t[span] - wave.t[span][0]) * 1e3
    ax1.plot(t_ms, wave.I_W[span], lw=1.0)
    ax1.set_ylabel("welding current (A)")
    ax2.plot(t_ms, wave.U_arc[span], lw=1.0, color="tab:orange")
    ax2.set_ylabel("arc voltage (V)")
    ax2.set_xlabel("time (ms)")
    in_sc = wave.phase[span] == "SC"
    for ax in (ax1, ax2):
        ax.fill_between(t_ms, 0, 1, where=in_sc, transform=ax.get_xaxis_transform(),
                        alpha=0.15, color="tab:red", label="short circuit")
        ax.grid(alpha=0.3)
    ax1.legend(loc="upper right")
    fig.suptitle("uncontrolled switched circuit, constant source voltage")
    fig.savefig(OUT / "open_loop_waveform.png", dpi=130)
    print(f"figure written to {OUT / 'open_loop_waveform.png'}")


if __name__ == "__main__":
    main()
