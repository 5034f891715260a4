"""Circuit model: transfer functions, analytic anchors, parameter files."""

import math

import numpy as np
import pytest

from gmawctl import (ActuatorMap, CircuitParams, DegenerateParameterError,
                     LinearSystem, ea_transfer, load_params, save_params,
                     sc_transfer)
from gmawctl.model import ea_polynomials, parse_kv_text, sc_polynomials

# Oracle values computed by hand from the canonical constants:
#   L = 180 uH, R_L = 16 mOhm, C = 2 F, R_1 = R_2 = 10 mOhm,
#   R_rea = 43 mOhm, R_reg = 45 mOhm, E_ac = 11 V.
SC_DEN = np.array([3.6e-6, 7.0e-4, 0.036])   # C L R2, L + C R2 (R_L + R_1), R_1+R_2+R_L
SC_NUM = np.array([0.02, 1.0])               # C R_2, 1
SC_DC_GAIN = 1.0 / 0.036                     # 27.7778 A/V
EA_POLE = -0.104 / 180e-6                    # -577.78 1/s
EA_SS_21V1 = (21.1 - 11.0) / 0.104           # 97.115 A


def test_sc_polynomials_match_hand_derivation(plant):
    params, _ = plant
    num, den = sc_polynomials(params)
    assert np.allclose(num, SC_NUM, rtol=1e-12)
    assert np.allclose(den, SC_DEN, rtol=1e-12)


def test_ea_polynomials_match_hand_derivation(plant):
    params, _ = plant
    num, den = ea_polynomials(params)
    assert np.allclose(num, [1.0], rtol=1e-12)
    assert np.allclose(den, [180e-6, 0.104], rtol=1e-12)


def test_sc_dc_gain_anchor(plant):
    params, _ = plant
    assert sc_transfer(params).dc_gain() == pytest.approx(SC_DC_GAIN, rel=1e-9)


def test_sc_poles_match_polynomial_roots(plant):
    params, _ = plant
    poles = np.sort_complex(sc_transfer(params).poles())
    expected = np.sort_complex(np.roots(SC_DEN))
    assert np.allclose(poles, expected, rtol=1e-9)
    # complex pair around -97.2 +/- 23.4j
    assert poles[0].real == pytest.approx(-97.2222, rel=1e-4)
    assert abs(poles[0].imag) == pytest.approx(23.4061, rel=1e-3)


def test_ea_pole_and_steady_state_anchors(plant):
    params, _ = plant
    sys = ea_transfer(params)
    assert float(sys.poles()[0].real) == pytest.approx(EA_POLE, rel=1e-9)
    # steady state at E_W = 21.1 V: dc_gain * (E_W + u0)
    assert sys.dc_gain() * (21.1 + sys.u0) == pytest.approx(EA_SS_21V1, rel=1e-9)
    assert sys.u0 == -11.0


def test_transfer_polynomials_agree_with_circuit_polynomials(plant):
    params, _ = plant
    for sys, (num_ref, den_ref) in (
        (sc_transfer(params), sc_polynomials(params)),
        (ea_transfer(params), ea_polynomials(params)),
    ):
        num, den = sys.transfer_polynomials()
        # state-space denominators are monic; rescale the circuit form and
        # pad the numerator with leading zeros to the state-space length
        scale = den_ref[0]
        num_ref = np.atleast_1d(num_ref) / scale
        num_ref = np.concatenate([np.zeros(len(num) - len(num_ref)), num_ref])
        assert np.allclose(den, den_ref / scale, rtol=1e-9)
        assert np.allclose(num, num_ref, rtol=1e-9, atol=1e-6)


def test_freq_response_matches_polynomial_evaluation(plant):
    params, _ = plant
    sys = sc_transfer(params)
    num, den = sc_polynomials(params)
    w = np.array([0.0, 10.0, 1e3, 1e5])
    ref = np.polyval(num, 1j * w) / np.polyval(den, 1j * w)
    assert np.allclose(sys.freq_response(w), ref, rtol=1e-9)
    assert sys.freq_response(np.array([0.0]))[0] == pytest.approx(sys.dc_gain())


def test_linear_system_rejects_inconsistent_dimensions():
    with pytest.raises(ValueError):
        LinearSystem(a=np.eye(2), b=np.array([1.0]), c=np.array([1.0, 0.0]))


def test_degenerate_parameters_rejected(plant):
    params, _ = plant
    with pytest.raises(DegenerateParameterError):
        CircuitParams(L=0.0, R_L=params.R_L, C=params.C, R_c=params.R_c,
                      R_1=params.R_1, R_2=params.R_2, R_rea=params.R_rea,
                      R_reg=params.R_reg, E_ac=params.E_ac,
                      t_cc=params.t_cc, t_ae=params.t_ae)
    with pytest.raises(DegenerateParameterError):
        CircuitParams(L=params.L, R_L=params.R_L, C=params.C, R_c=params.R_c,
                      R_1=params.R_1, R_2=params.R_2, R_rea=params.R_rea,
                      R_reg=params.R_reg, E_ac=-1.0,
                      t_cc=params.t_cc, t_ae=params.t_ae)


def test_actuator_map_round_trip_and_saturation():
    act = ActuatorMap()
    assert act.duty_to_volts(0.1055) == pytest.approx(21.1)
    duty, sat = act.volts_to_duty(21.1)
    assert duty == pytest.approx(0.1055) and not sat
    assert act.volts_to_duty(150.0) == (0.5, True)
    assert act.volts_to_duty(-5.0) == (0.0, True)
    with pytest.raises(ValueError):
        act.duty_to_volts(0.7)
    with pytest.raises(ValueError):
        ActuatorMap(duty_min=0.3, duty_max=0.2)


def test_canonical_parameter_values(plant):
    params, act = plant
    assert params.L == pytest.approx(180e-6)
    assert params.R_L == pytest.approx(0.016)
    assert params.C == pytest.approx(2.0)
    assert params.R_1 == pytest.approx(0.010)
    assert params.R_2 == pytest.approx(0.010)
    assert params.R_rea == pytest.approx(0.043)
    assert params.R_reg == pytest.approx(0.045)
    assert params.E_ac == pytest.approx(11.0)
    assert params.t_cc == pytest.approx(2.5e-3)
    assert params.t_ae == pytest.approx(9.5e-3)
    assert act.volts_per_unit_duty == pytest.approx(200.0)
    assert act.duty_max == pytest.approx(0.5)


def test_params_file_round_trip(tmp_path, plant):
    params, act = plant
    path = tmp_path / "round.params"
    save_params(path, params, act)
    params2, act2 = load_params(path)
    assert params2 == params
    assert act2 == act


def test_parse_kv_text_handles_decimal_commas_and_comments():
    values = parse_kv_text("a = 1,5  # comment\n\n# full comment line\nb=2.25\n")
    assert values == {"a": 1.5, "b": 2.25}
    with pytest.raises(ValueError):
        parse_kv_text("not a pair\n")
    with pytest.raises(ValueError):
        parse_kv_text("a = twelve\n")


def test_load_params_reports_missing_keys(tmp_path):
    path = tmp_path / "broken.params"
    path.write_text("L = 180e-6\n")
    with pytest.raises(ValueError, match="missing keys"):
        load_params(path)
