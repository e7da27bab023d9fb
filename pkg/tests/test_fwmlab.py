import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fwmcomb import combgen, dispersion, fwmlab, osa, sigkit, ssfm
from fwmcomb.sigkit import C_LIGHT, FREQUENCY, Field


def test_predict_lines_around_1550_12_nm():
    f_p = C_LIGHT / 1550.12e-9
    assert f_p == pytest.approx(193.39952e12, abs=5e6)
    (first,) = fwmlab.predict_lines(f_p, 50e9, 1)
    assert first.signal_frequency == pytest.approx(193.44952e12, abs=5e6)
    assert first.idler_frequency == pytest.approx(193.34952e12, abs=5e6)
    assert first.delta_f == pytest.approx(50e9)


@pytest.mark.parametrize("j_max", [0, -1, 2.5])
def test_predict_lines_needs_positive_integer_order(j_max):
    with pytest.raises(ValueError):
        fwmlab.predict_lines(193e12, 50e9, j_max)


def test_predict_lines_needs_positive_spacing():
    with pytest.raises(ValueError):
        fwmlab.predict_lines(193e12, 0.0, 3)


@given(st.floats(180e12, 200e12), st.floats(1e9, 200e9), st.integers(1, 30))
def test_signal_idler_symmetry(f_p, df, j_max):
    preds = fwmlab.predict_lines(f_p, df, j_max)
    assert [p.j for p in preds] == list(range(1, j_max + 1))
    for p in preds:
        assert p.signal_frequency + p.idler_frequency == pytest.approx(2 * f_p, rel=1e-15)
        assert p.signal_frequency - f_p == pytest.approx(p.j * df, rel=1e-6)


@given(st.floats(190e12, 196e12), st.floats(190e12, 196e12), st.floats(190e12, 196e12))
def test_pair_prediction_depends_only_on_separation(f_p, fa, fb):
    if fa == fb:
        return
    lo, hi = sorted((fa, fb))
    cm = fwmlab.correlation_matrix([lo, hi], f_p)
    forward, backward = cm.entries[(0, 1)], cm.entries[(1, 0)]
    assert forward.signal_frequency == backward.signal_frequency
    assert forward.idler_frequency == backward.idler_frequency
    assert forward.separation == -backward.separation


def test_correlation_matrix_of_six_lines():
    f = 193.0e12 + 50e9 * np.arange(6)
    cm = fwmlab.correlation_matrix(f, 193.4e12)
    orders = cm.orders()
    assert set(orders[orders > 0].ravel()) == {1, 2, 3, 4, 5}
    assert all(orders[k, k + 1] == 1 and orders[k + 1, k] == 1 for k in range(5))
    assert np.all(np.diag(orders) == 0)
    assert len(cm.entries) == 6 * 5 and len(cm.undirected()) == 15
    assert all((k, k) not in cm.entries for k in range(6))


def test_correlation_matrix_two_lines():
    cm = fwmlab.correlation_matrix([193.0e12, 193.05e12], 193.4e12)
    (entry,) = cm.undirected().values()
    assert entry.j == 1
    assert entry.signal_frequency == pytest.approx(193.45e12)


def test_correlation_matrix_non_uniform():
    f0 = 193.0e12
    cm = fwmlab.correlation_matrix(f0 + 50e9 * np.array([0, 1, 3]), 193.4e12)
    seps = sorted(round(abs(e.separation) / 1e9) for e in cm.undirected().values())
    assert seps == [50, 100, 150]
    for e in cm.entries.values():
        assert e.signal_frequency - 193.4e12 == pytest.approx(abs(e.separation), rel=1e-9)


@settings(max_examples=20)
@given(st.integers(2, 12))
def test_correlation_matrix_entry_count(n):
    cm = fwmlab.correlation_matrix(193e12 + 37e9 * np.arange(n), 194e12)
    assert len(cm.entries) == n * (n - 1)
    assert len(cm.undirected()) == n * (n - 1) // 2


def test_correlation_matrix_rejects_unsorted():
    with pytest.raises(ValueError):
        fwmlab.correlation_matrix([193.1e12, 193.0e12], 193.4e12)
    with pytest.raises(ValueError):
        fwmlab.correlation_matrix([193.1e12], 193.4e12)


def injected_spectrum(lines):
    grid = sigkit.make_grid(2**13, 2e-9, 1550e-9)
    rng = np.random.default_rng(5)
    bins = 1e-12 * rng.uniform(0.5, 1.5, grid.n_points)
    for f, p in lines:
        bins[grid.nearest_bin(f)] = p
    return grid, Field(grid, FREQUENCY, np.sqrt(bins * grid.n_points))


def test_measure_recovers_injected_sidebands():
    grid = sigkit.make_grid(2**13, 2e-9, 1550e-9)
    f_p = grid.center_frequency
    preds = fwmlab.predict_lines(f_p, 50e9, 5)
    lines = [(p.signal_frequency, 1e-6 / p.j) for p in preds[:4]]
    lines += [(p.idler_frequency, 2e-6 / p.j) for p in preds[:4]]
    _, spec = injected_spectrum(lines)
    before = spec.samples.copy()
    meas = fwmlab.measure_sidebands(spec, preds, 10e9)
    for m in meas[:4]:
        assert m.found
        assert m.signal_power == pytest.approx(1e-6 / m.j, rel=1e-9)
        assert m.idler_power == pytest.approx(2e-6 / m.j, rel=1e-9)
    assert not meas[4].signal_found and not meas[4].idler_found
    # no side effects, same answer twice
    assert np.array_equal(spec.samples, before)
    assert fwmlab.measure_sidebands(spec, preds, 10e9) == meas


def test_measure_on_trace():
    grid = sigkit.make_grid(2**13, 2e-9, 1550e-9)
    f_p = grid.center_frequency
    preds = fwmlab.predict_lines(f_p, 50e9, 2)
    _, spec = injected_spectrum([(p.signal_frequency, 1e-6) for p in preds]
                                + [(p.idler_frequency, 1e-6) for p in preds])
    trace = osa.emulate_osa(spec, 3e9)
    meas = fwmlab.measure_sidebands(trace, preds, 10e9)
    assert all(m.found for m in meas)
    assert all(m.signal_power == pytest.approx(1e-6, rel=0.01) for m in meas)


def test_measure_rejects_overlapping_window():
    preds = fwmlab.predict_lines(193e12, 50e9, 2)
    _, spec = injected_spectrum([])
    with pytest.raises(ValueError, match="overlaps"):
        fwmlab.measure_sidebands(spec, preds, 25e9)


# -- calibration on a reduced grid (single-bin comb lines, 20 m steps) -----

@pytest.fixture(scope="module")
def cal_setup():
    grid = sigkit.make_grid(2**13, 2e-9, 1550e-9)
    f_p = grid.frequencies[grid.n_points // 2 - 200]
    comb = combgen.CombSpec(tuple((f_p + (k + 0.5) * 50e9, 1e-3) for k in range(-3, 2)),
                            sub_spacing=1e12, envelope_fwhm=1e6)
    pump = combgen.PumpSpec(f_p, 10.5e-3)
    fiber = ssfm.FiberParams(1000.0, 11e-3, 20.0, dispersion.taylor_betas(dispersion.default_hnlf()))
    truth = fwmlab.simulate_output(comb, pump, fiber, grid, 1.3, 0.8)
    return grid, comb, pump, fiber, osa.emulate_osa(truth, 3e9)


def test_calibration_recovers_known_scales(cal_setup):
    grid, comb, pump, fiber, measured = cal_setup
    res = fwmlab.calibrate(measured, comb, pump, fiber, grid, max_evals=60)
    assert res.pump_scale == pytest.approx(1.3, rel=0.05)
    assert res.comb_scale == pytest.approx(0.8, rel=0.05)
    assert res.chirp == 0.0
    assert res.evaluations <= 61
    assert res.objective_history[-1] < 0.05
    assert set(res.residuals_db) >= {"p", "s1", "i1"}


def test_calibration_zero_budget(cal_setup):
    grid, comb, pump, fiber, measured = cal_setup
    res = fwmlab.calibrate(measured, comb, pump, fiber, grid, max_evals=0)
    assert (res.pump_scale, res.comb_scale, res.chirp) == (1.0, 1.0, 0.0)
    assert len(res.objective_history) == 1 and res.evaluations == 1


def test_calibration_history_and_bounds(cal_setup, monkeypatch):
    grid, comb, pump, fiber, measured = cal_setup
    seen = []
    real = fwmlab.simulate_output

    def spy(*args):
        seen.append(args[4:])
        return real(*args)

    monkeypatch.setattr(fwmlab, "simulate_output", spy)
    bounds = {"pump_scale": (0.9, 1.2), "comb_scale": (0.7, 1.1), "chirp": (-1e18, 1e18)}
    res = fwmlab.calibrate(measured, comb, pump, fiber, grid, bounds, max_evals=25)
    hist = np.array(res.objective_history)
    assert np.all(np.diff(hist) <= 0)
    assert len(seen) == res.evaluations <= 26
    for ps, cs, ch in seen:
        assert 0.9 <= ps <= 1.2 and 0.7 <= cs <= 1.1 and -1e18 <= ch <= 1e18
    assert hist[-1] < hist[0]


def test_calibration_with_free_chirp(cal_setup):
    grid, comb, pump, fiber, measured = cal_setup
    res = fwmlab.calibrate(measured, comb, pump, fiber, grid, {"chirp": (-1e18, 1e18)}, max_evals=80)
    assert res.pump_scale == pytest.approx(1.3, rel=0.05)
    assert res.comb_scale == pytest.approx(0.8, rel=0.05)


def test_calibration_rejects_box_without_start(cal_setup):
    grid, comb, pump, fiber, measured = cal_setup
    with pytest.raises(ValueError):
        fwmlab.calibrate(measured, comb, pump, fiber, grid, {"pump_scale": (1.1, 2.0)})


def test_calibration_result_json(cal_setup):
    grid, comb, pump, fiber, measured = cal_setup
    d = fwmlab.calibrate(measured, comb, pump, fiber, grid, max_evals=0).to_dict()
    assert {"pump_scale", "comb_scale", "chirp", "objective_history_db", "residuals_db"} <= set(d)
