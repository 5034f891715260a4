"""Command-line front end: subcommands, exit codes, manifests."""

import json

import pytest

from gmawctl.cli import EXIT_DATA, EXIT_OK, EXIT_VALIDATION, main
from gmawctl.model import _data_file


@pytest.fixture()
def params_file():
    return str(_data_file("table1.params"))


@pytest.fixture()
def gains_file():
    return str(_data_file("table2.gains"))


def _simulate(out_dir, params_file, *extra):
    return main(["simulate", "--mode", "open", "--params", params_file,
                 "--duration", "0.03", "--dt", "1e-5", "--control-dt", "1e-5",
                 "--out", str(out_dir), *extra])


def test_simulate_open_loop_writes_waveform_and_manifest(tmp_path, params_file):
    out = tmp_path / "run"
    assert _simulate(out, params_file) == EXIT_OK
    assert (out / "waveform.csv").exists()
    assert (out / "summary.txt").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "simulate"
    assert params_file in manifest["inputs"]
    assert len(manifest["inputs"][params_file]) == 64     # sha256 hex digest
    assert "waveform.csv" in manifest["outputs"]


def test_manifest_is_deterministic(tmp_path, params_file):
    a, b = tmp_path / "a", tmp_path / "b"
    _simulate(a, params_file)
    _simulate(b, params_file)
    ma = json.loads((a / "manifest.json").read_text())
    mb = json.loads((b / "manifest.json").read_text())
    ma["options"]["out"] = mb["options"]["out"] = ""
    assert ma == mb
    assert (a / "waveform.csv").read_bytes() == (b / "waveform.csv").read_bytes()


def test_simulate_closed_loop(tmp_path, params_file, gains_file):
    out = tmp_path / "closed"
    code = main(["simulate", "--mode", "closed", "--params", params_file,
                 "--gains", gains_file, "--duration", "0.03",
                 "--i-init", "400", "--out", str(out)])
    assert code == EXIT_OK
    assert (out / "waveform.csv").exists()


def test_simulate_closed_loop_requires_gains(tmp_path, params_file):
    code = main(["simulate", "--mode", "closed", "--params", params_file,
                 "--duration", "0.01", "--out", str(tmp_path / "x")])
    assert code == EXIT_VALIDATION


def test_simulate_missing_params_file(tmp_path):
    code = main(["simulate", "--mode", "open", "--params",
                 str(tmp_path / "nope.params"), "--duration", "0.01",
                 "--out", str(tmp_path / "x")])
    assert code == EXIT_VALIDATION


def test_identify_round_trips_from_csv(tmp_path, params_file):
    run = tmp_path / "sim"
    assert _simulate(run, params_file, "--duration", "0.1") == EXIT_OK
    out = tmp_path / "fit"
    code = main(["identify", "--waveform", str(run / "waveform.csv"),
                 "--params", params_file, "--out", str(out)])
    assert code == EXIT_OK
    fit_sc = dict(line.split(" = ") for line in
                  (out / "fit_sc.txt").read_text().strip().splitlines())
    assert fit_sc["converged"] == "True"
    assert float(fit_sc["R_1"]) == pytest.approx(0.010, rel=0.01)
    fit_ea = dict(line.split(" = ") for line in
                  (out / "fit_ea.txt").read_text().strip().splitlines())
    assert float(fit_ea["R_sum"]) == pytest.approx(0.088, rel=0.01)
    assert float(fit_ea["E_ac"]) == pytest.approx(11.0, rel=0.01)
    assert (out / "residuals_sc.csv").exists()
    header = (out / "residuals_ea.csv").read_text().splitlines()[0]
    assert header == "t_s,I_meas,I_pred,residual"


def test_identify_rejects_malformed_waveform(tmp_path, params_file):
    bad = tmp_path / "bad.csv"
    bad.write_text("time,current\n0,1\n")
    code = main(["identify", "--waveform", str(bad), "--params", params_file,
                 "--out", str(tmp_path / "x")])
    assert code == EXIT_DATA


def test_verify_tuning_command(tmp_path, params_file, gains_file, capsys):
    out = tmp_path / "tuning"
    code = main(["verify-tuning", "--params", params_file,
                 "--gains", gains_file, "--band", "0.05", "--out", str(out)])
    assert code == EXIT_OK
    report = (out / "tuning_report.txt").read_text()
    assert "settling_ea" in report and "FAIL" not in report
    poles = (out / "poles.csv").read_text().splitlines()
    assert poles[0] == "loop,real,imag"
    assert len(poles) == 1 + 4 + 3      # header + SC + EA closed-loop poles
    assert "settling_sc" in capsys.readouterr().out


def test_metrics_command_compares_two_records(tmp_path, params_file):
    run = tmp_path / "sim"
    _simulate(run, params_file, "--duration", "0.05")
    out = tmp_path / "metrics"
    wave = str(run / "waveform.csv")
    code = main(["metrics", wave, wave, "--out", str(out)])
    assert code == EXIT_OK
    assert (out / "comparison.txt").exists()
    assert any(p.name.endswith(".csv") and p.name.startswith("metrics_")
               for p in out.iterdir())


def test_metrics_rejects_record_without_cycles(tmp_path):
    path = tmp_path / "flat.csv"
    lines = ["t_s,I_W_A,U_arc_V,E_W_V,phase"]
    lines += [f"{k * 1e-5},100.0,20.0,21.1,EA" for k in range(100)]
    path.write_text("\n".join(lines) + "\n")
    code = main(["metrics", str(path), "--out", str(tmp_path / "x")])
    assert code == EXIT_DATA


def test_unknown_arguments_exit_with_validation_code():
    assert main(["simulate", "--mode", "sideways"]) == EXIT_VALIDATION
