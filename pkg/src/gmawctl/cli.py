"""Command-line front end: simulate, identify, verify-tuning, metrics.

Every run writes a manifest (command, inputs with content hashes, seed,
tool version) into its output directory so results can be replayed
bit-exactly.  Exit codes: 0 ok, 2 validation, 3 convergence, 4 data shape.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import verify_tuning, SettlingSpec
from .control import DetectorConfig, controller_callback, load_gains
from .identification import (NoSegmentsError, ThetaEa, ThetaSc, fit, segment)
from .metrics import (InsufficientCyclesError, compare_reports, compute_metrics,
                      format_report, report_to_csv)
from .model import load_params
from .simulator import Phase, SimConfig, SimulationDivergedError, Waveform, \
    run_closed_loop, run_open_loop

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CONVERGENCE = 3
EXIT_DATA = 4


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code = code
        self.kind = kind


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out_dir: Path, command: str, args: argparse.Namespace,
                    inputs: list[Path], outputs: list[str]) -> None:
    manifest = {
        "tool": "gmawctl",
        "version": __version__,
        "command": command,
        "options": {k: (str(v) if isinstance(v, Path) else v)
                    for k, v in vars(args).items() if k != "func"},
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": outputs,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    params_path = Path(args.params)
    try:
        params, actuator = load_params(params_path)
        config = SimConfig(duration=args.duration, dt_sim=args.dt, control_dt=args.control_dt,
                           noise_std_I=args.noise_i, noise_std_V=args.noise_v,
                           jitter=args.jitter, seed=args.seed, i_init=args.i_init)
    except (ValueError, OSError) as exc:
        raise CliError(EXIT_VALIDATION, "validation", str(exc))

    inputs = [params_path]
    try:
        if args.mode == "open":
            wave = run_open_loop(params, config, args.ew)
        else:
            if args.gains is None:
                raise CliError(EXIT_VALIDATION, "validation", "closed mode requires --gains")
            gains_path = Path(args.gains)
            try:
                gains_sc, gains_ea = load_gains(gains_path)
            except (ValueError, OSError) as exc:
                raise CliError(EXIT_VALIDATION, "validation", str(exc))
            inputs.append(gains_path)
            cb = controller_callback(gains_sc, gains_ea, actuator=actuator,
                                     control_dt=config.control_dt)
            wave = run_closed_loop(params, config, cb, actuator)
    except SimulationDivergedError as exc:
        raise CliError(EXIT_CONVERGENCE, "convergence", str(exc))

    out = _out_dir(args)
    wave.to_csv(out / "waveform.csv")
    summary = (f"mode = {args.mode}\nsamples = {len(wave)}\nduration_s = {args.duration}\n"
               f"I_min_A = {wave.I_W.min():.3f}\nI_max_A = {wave.I_W.max():.3f}\n"
               f"U_arc_mean_V = {wave.U_arc.mean():.3f}\n")
    (out / "summary.txt").write_text(summary)
    _write_manifest(out, "simulate", args, inputs, ["waveform.csv", "summary.txt"])
    return EXIT_OK


def _load_waveform(path: str) -> Waveform:
    try:
        return Waveform.from_csv(path)
    except OSError as exc:
        raise CliError(EXIT_VALIDATION, "validation", str(exc))
    except ValueError as exc:
        raise CliError(EXIT_DATA, "data", str(exc))


def cmd_identify(args) -> int:
    wave = _load_waveform(args.waveform)
    params_path = Path(args.params)
    try:
        params, _ = load_params(params_path)
    except (ValueError, OSError) as exc:
        raise CliError(EXIT_VALIDATION, "validation", str(exc))
    known = {"L": params.L, "R_L": params.R_L}
    phases = [Phase.SC, Phase.EA] if args.phase == "both" else \
        [Phase.SC if args.phase == "sc" else Phase.EA]

    try:
        segments = segment(wave)
    except NoSegmentsError as exc:
        raise CliError(EXIT_DATA, "data", str(exc))

    out = _out_dir(args)
    outputs = []
    worst_converged = True
    for phase in phases:
        if phase is Phase.SC:
            theta0 = ThetaSc(R_1=2.0 * params.R_1, R_2=2.0 * params.R_2, C=2.0 * params.C)
        else:
            theta0 = ThetaEa(R_sum=2.0 * (params.R_rea + params.R_reg), E_ac=2.0 * params.E_ac)
        try:
            report = fit(wave, phase, theta0, known, segments=segments)
        except NoSegmentsError as exc:
            raise CliError(EXIT_DATA, "data", str(exc))
        worst_converged &= report.converged

        tag = phase.value.lower()
        lines = [f"phase = {phase.value}", f"converged = {report.converged}",
                 f"J_N_A2 = {report.J_N!r}", f"iterations = {report.iterations}",
                 f"segments_used = {report.segments_used}"]
        for key, value in asdict(report.theta_hat).items():
            lines.append(f"{key} = {float(value)!r}")
        (out / f"fit_{tag}.txt").write_text("\n".join(lines) + "\n")
        outputs.append(f"fit_{tag}.txt")

        # residual trace over the fitted segments
        with open(out / f"residuals_{tag}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t_s", "I_meas", "I_pred", "residual"])
            from .identification import predict
            for s in segments:
                if s.phase is not phase:
                    continue
                pred = predict(report.theta_hat, phase, wave.E_W[s.start:s.stop],
                               wave.dt, known, i0=wave.I_W[s.start])
                for k in range(len(pred)):
                    i_meas = wave.I_W[s.start + k]
                    writer.writerow([repr(float(wave.t[s.start + k])), repr(float(i_meas)),
                                     repr(float(pred[k])), repr(float(pred[k] - i_meas))])
        outputs.append(f"residuals_{tag}.csv")

    _write_manifest(out, "identify", args, [Path(args.waveform), params_path], outputs)
    if not worst_converged:
        raise CliError(EXIT_CONVERGENCE, "convergence", "fit did not converge (report written)")
    return EXIT_OK


def cmd_verify_tuning(args) -> int:
    params_path, gains_path = Path(args.params), Path(args.gains)
    try:
        params, actuator = load_params(params_path)
        gains_sc, gains_ea = load_gains(gains_path)
        spec = SettlingSpec(band=args.band)
    except (ValueError, OSError) as exc:
        raise CliError(EXIT_VALIDATION, "validation", str(exc))
    report = verify_tuning(params, gains_sc, gains_ea, spec, actuator)
    out = _out_dir(args)
    (out / "tuning_report.txt").write_text(report.format() + "\n")
    with open(out / "poles.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["loop", "real", "imag"])
        for label, poles in (("sc", report.poles_sc), ("ea", report.poles_ea)):
            for p in poles:
                writer.writerow([label, repr(p.real), repr(p.imag)])
    _write_manifest(out, "verify-tuning", args, [params_path, gains_path],
                    ["tuning_report.txt", "poles.csv"])
    print(report.format())
    return EXIT_OK


def cmd_metrics(args) -> int:
    out = _out_dir(args)
    reports = []
    outputs = []
    for idx, path in enumerate(args.waveforms):
        wave = _load_waveform(path)
        try:
            report = compute_metrics(wave)
        except InsufficientCyclesError as exc:
            raise CliError(EXIT_DATA, "data", f"{path}: {exc}")
        reports.append((path, report))
        stem = f"metrics_{idx:02d}_{Path(path).stem}"
        (out / f"{stem}.txt").write_text(format_report(report) + "\n")
        report_to_csv(report, out / f"{stem}.csv")
        outputs += [f"{stem}.txt", f"{stem}.csv"]

    if len(reports) >= 2:
        lines = []
        base_path, base = reports[0]
        for other_path, other in reports[1:]:
            lines.append(f"# {base_path} vs {other_path}")
            lines.append(f"{'field':<12} {'a':>12} {'b':>12} {'abs':>12} {'rel':>8}  slope@5%")
            for d in compare_reports(base, other):
                flag = "-" if d.slope_flag is None else ("pass" if d.slope_flag else "FAIL")
                lines.append(f"{d.field:<12} {d.a:>12.4f} {d.b:>12.4f} "
                             f"{d.abs_delta:>12.4f} {d.rel_delta:>8.2%}  {flag}")
        (out / "comparison.txt").write_text("\n".join(lines) + "\n")
        outputs.append("comparison.txt")

    _write_manifest(out, "metrics", args, [Path(p) for p in args.waveforms], outputs)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gmawctl",
                                     description="welding-current simulation, identification and tuning toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run the switched plant open or closed loop")
    p_sim.add_argument("--mode", choices=["open", "closed"], required=True)
    p_sim.add_argument("--params", required=True, help="circuit parameter file")
    p_sim.add_argument("--gains", help="PID gain file (closed mode)")
    p_sim.add_argument("--ew", type=float, default=21.1, help="source voltage, open mode (V)")
    p_sim.add_argument("--duration", type=float, required=True, help="simulated span (s)")
    p_sim.add_argument("--dt", type=float, default=1e-6)
    p_sim.add_argument("--control-dt", type=float, default=1e-5)
    p_sim.add_argument("--noise-i", type=float, default=0.0)
    p_sim.add_argument("--noise-v", type=float, default=0.0)
    p_sim.add_argument("--jitter", type=float, default=0.0)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--i-init", type=float, default=0.0)
    p_sim.add_argument("--out", default="out")
    p_sim.set_defaults(func=cmd_simulate)

    p_id = sub.add_parser("identify", help="fit circuit parameters from a waveform CSV")
    p_id.add_argument("--waveform", required=True)
    p_id.add_argument("--phase", choices=["sc", "ea", "both"], default="both")
    p_id.add_argument("--params", required=True,
                      help="parameter file providing known L, R_L and initial guesses")
    p_id.add_argument("--out", default="out")
    p_id.set_defaults(func=cmd_identify)

    p_vt = sub.add_parser("verify-tuning", help="check settling and stability of a gain set")
    p_vt.add_argument("--params", required=True)
    p_vt.add_argument("--gains", required=True)
    p_vt.add_argument("--band", type=float, default=0.05)
    p_vt.add_argument("--out", default="out")
    p_vt.set_defaults(func=cmd_verify_tuning)

    p_m = sub.add_parser("metrics", help="performance measures of one or more waveforms")
    p_m.add_argument("waveforms", nargs="+")
    p_m.add_argument("--out", default="out")
    p_m.set_defaults(func=cmd_metrics)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except CliError as exc:
        print(f"ERROR {exc.kind}: {exc}", file=sys.stderr)
        return exc.code
    except (ValueError,) as exc:
        print(f"ERROR validation: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
