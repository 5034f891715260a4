"""Tuning verification: poles, sweeps, settling measurement, reports."""

import numpy as np
import pytest

from gmawctl import (NeverSettlesError, PidGains, SettlingSpec, ea_transfer,
                     closed_loop_poles, gain_sweep, measure_settling,
                     open_loop_slope_estimate, sc_transfer, table2, table3,
                     verify_tuning)
from gmawctl.analysis import simulate_phase_tracking


def _char_poly_oracle(plant, gains):
    """Characteristic polynomial built independently from the loop algebra."""
    n_g, d_g = plant.transfer_polynomials()
    n_c = np.array([gains.k_p * gains.T_f + gains.k_d,
                    gains.k_p + gains.k_i * gains.T_f,
                    gains.k_i])
    d_c = np.array([gains.T_f, 1.0, 0.0])
    return np.polyadd(np.polymul(d_c, d_g), np.polymul(n_c, n_g))


def test_closed_loop_poles_match_polynomial_roots(plant):
    params, _ = plant
    gains_sc, gains_ea = table2()
    for sys, gains in ((sc_transfer(params), gains_sc), (ea_transfer(params), gains_ea)):
        poles = closed_loop_poles(sys, gains)
        ref = np.sort_complex(np.roots(_char_poly_oracle(sys, gains)))
        assert np.allclose(np.sort_complex(poles), ref, rtol=1e-9)
        # output is sorted leftmost-first
        assert np.all(np.diff(poles.real) >= -1e-9)


def test_both_gain_tables_are_stabilizing(plant):
    params, _ = plant
    for gains_sc, gains_ea in (table2(), table3()):
        assert np.max(closed_loop_poles(sc_transfer(params), gains_sc).real) < 0.0
        assert np.max(closed_loop_poles(ea_transfer(params), gains_ea).real) < 0.0


def test_gain_sweep_branches_are_continuous(plant):
    params, _ = plant
    gains_sc, _ = table2()
    kp, locus = gain_sweep(sc_transfer(params), gains_sc, np.array([0.5, 50.0]),
                           n_points=60)
    assert kp.shape == (60,) and locus.shape == (60, 4)
    steps = np.abs(np.diff(locus, axis=0))
    scale = np.maximum(np.abs(locus[:-1]), 1.0)
    assert np.max(steps / scale) < 0.5   # no branch swapping between points


def test_gain_sweep_accepts_explicit_gain_values(plant):
    params, _ = plant
    gains_sc, _ = table2()
    kp, locus = gain_sweep(sc_transfer(params), gains_sc, np.array([1.0, 2.0, 4.0]))
    assert kp.shape == (3,)
    assert locus.shape == (3, 4)


def test_settling_measurement_validates_band(plant):
    params, _ = plant
    gains_sc, _ = table2()
    with pytest.raises(ValueError):
        measure_settling(sc_transfer(params), gains_sc, 100.0, 60e3,
                         2.5e-3, band=1.5)


def test_diverging_loop_raises_never_settles(plant):
    params, _ = plant
    wild = PidGains(K_p=5e4, T_i=1e-4, T_d=1e-3, T_f=1e-5)
    with pytest.raises(NeverSettlesError):
        measure_settling(sc_transfer(params), wild, 100.0, 60e3, 2.5e-3, band=0.05)


def test_tracking_error_stays_bounded_for_shipped_gains(plant):
    params, _ = plant
    gains_sc, gains_ea = table2()
    _, err = simulate_phase_tracking(sc_transfer(params), gains_sc, 100.0,
                                     60e3, params.t_cc)
    assert np.max(np.abs(err)) < 10.0
    _, err = simulate_phase_tracking(ea_transfer(params), gains_ea, 250.0,
                                     -20e3, params.t_ae)
    assert np.max(np.abs(err)) < 10.0


def test_verify_tuning_passes_for_both_tables(plant):
    params, act = plant
    rep2 = verify_tuning(params, *table2(), SettlingSpec(band=0.05), act)
    assert rep2.passed
    rep3 = verify_tuning(params, *table3(), SettlingSpec(band=0.10), act)
    assert rep3.passed
    names = {r.name for r in rep2.rows}
    assert names == {"stability_sc", "stability_ea", "settling_sc",
                     "settling_ea", "ramp_error_sc", "ramp_error_ea"}


def test_verify_tuning_reports_failures_without_raising(plant):
    params, act = plant
    # far too sluggish to follow a 60 A/ms ramp: settling must fail
    sluggish = PidGains(K_p=0.01, T_i=10.0, T_d=0.0)
    rep = verify_tuning(params, sluggish, sluggish, SettlingSpec(band=0.05), act)
    assert not rep.passed
    by_name = {r.name: r for r in rep.rows}
    assert not by_name["settling_sc"].passed
    assert not by_name["ramp_error_sc"].passed
    assert "FAIL" in rep.format()


def test_open_loop_slope_baseline(plant):
    params, _ = plant
    assert open_loop_slope_estimate(21.1, params.L) == pytest.approx(21.1 / 180e-6)
    with pytest.raises(ValueError):
        open_loop_slope_estimate(21.1, 0.0)


def test_settling_spec_validation():
    with pytest.raises(ValueError):
        SettlingSpec(band=0.0)
    with pytest.raises(ValueError):
        SettlingSpec(target_sc=-1.0)
