import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fwmcomb import dispersion
from fwmcomb.dispersion import BetaSet, DispersionModel
from fwmcomb.sigkit import C_LIGHT

HNLF = dispersion.default_hnlf()


def exact_normal_equations(samples):
    """Least-squares quadratic via normal equations in exact rational arithmetic."""
    xs = [Fraction(w) for w, _ in samples]
    ys = [Fraction(d) for _, d in samples]
    s = [sum(x**k for x in xs) for k in range(5)]
    t = [sum(y * x**k for x, y in zip(xs, ys)) for k in range(3)]
    m = [[s[0], s[1], s[2], t[0]], [s[1], s[2], s[3], t[1]], [s[2], s[3], s[4], t[2]]]
    for col in range(3):  # Gauss-Jordan, exact so no pivoting concerns
        piv = next(r for r in range(col, 3) if m[r][col] != 0)
        m[col], m[piv] = m[piv], m[col]
        m[col] = [v / m[col][col] for v in m[col]]
        for r in range(3):
            if r != col:
                m[r] = [a - m[r][col] * b for a, b in zip(m[r], m[col])]
    return float(m[0][3]), float(m[1][3]), float(m[2][3])


def hnlf_samples(n=10, lo=1530e-9, hi=1570e-9):
    wl = np.linspace(lo, hi, n)
    return [(w, HNLF.d2 * w * w + HNLF.d1 * w + HNLF.d0) for w in wl]


def test_fit_recovers_hnlf_coefficients():
    fit = dispersion.fit_quadratic(hnlf_samples())
    assert fit.d0 == pytest.approx(-2.36e-4, rel=1e-9)
    assert fit.d1 == pytest.approx(297.5, rel=1e-9)
    assert fit.d2 == pytest.approx(-9.4e7, rel=1e-9)


def test_fit_of_zero_dispersion():
    fit = dispersion.fit_quadratic([(1540e-9, 0.0), (1550e-9, 0.0), (1560e-9, 0.0)])
    assert (fit.d0, fit.d1, fit.d2) == (0.0, 0.0, 0.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 25))
def test_noisy_fit_matches_exact_normal_equations(seed, n):
    rng = np.random.default_rng(seed)
    wl = np.sort(rng.uniform(1510e-9, 1590e-9, n))
    if len(np.unique(wl)) < 3:
        return
    d = HNLF(wl) + rng.normal(0, 5e-8, n)
    samples = list(zip(wl, d))
    d0, d1, d2 = exact_normal_equations(samples)
    fit = dispersion.fit_quadratic(samples)
    # compare through the fitted curve as well as the coefficients
    assert fit.d2 == pytest.approx(d2, rel=1e-9)
    assert fit.d1 == pytest.approx(d1, rel=1e-9)
    assert fit.d0 == pytest.approx(d0, rel=1e-9)


def test_fit_needs_three_distinct_wavelengths():
    with pytest.raises(ValueError):
        dispersion.fit_quadratic([(1550e-9, 1e-6), (1550e-9, 2e-6), (1560e-9, 0.0)])
    with pytest.raises(ValueError):
        dispersion.fit_quadratic([(1550e-9, 1e-6), (1560e-9, 0.0)])


def test_eval_d_examples():
    assert dispersion.eval_d(HNLF, 1550e-9) == pytest.approx(-7.10e-7, rel=1e-3)
    flat = DispersionModel(3e-6, 0.0, 0.0)
    assert dispersion.eval_d(flat, 1300e-9) == 3e-6
    vertex = -HNLF.d1 / (2 * HNLF.d2)
    assert vertex == pytest.approx(1582.4e-9, rel=1e-4)
    assert dispersion.eval_d(HNLF, vertex) == pytest.approx(-6.11e-7, rel=2e-3)
    # it is the maximum
    assert dispersion.eval_d(HNLF, vertex) > dispersion.eval_d(HNLF, vertex + 5e-9)
    assert dispersion.eval_d(HNLF, vertex) > dispersion.eval_d(HNLF, vertex - 5e-9)


@given(st.floats(1.01e-6, 1.99e-6))
def test_eval_d_is_the_quadratic(w):
    assert dispersion.eval_d(HNLF, w) == pytest.approx(HNLF.d2 * w * w + HNLF.d1 * w + HNLF.d0,
                                                       rel=1e-12, abs=1e-20)


@pytest.mark.parametrize("w", [0.9e-6, 2.1e-6])
def test_eval_d_rejects_out_of_band(w):
    with pytest.raises(ValueError):
        dispersion.eval_d(HNLF, w)


def test_beta2_at_1550():
    b = dispersion.taylor_betas(HNLF, 1550e-9)
    assert b.beta2 == pytest.approx(9.06e-28, rel=5e-3)
    assert b.beta2 == pytest.approx(-(1550e-9) ** 2 * dispersion.eval_d(HNLF, 1550e-9)
                                    / (2 * math.pi * C_LIGHT), rel=1e-12)


def test_zero_model_gives_zero_betas():
    b = dispersion.taylor_betas(DispersionModel(0.0, 0.0, 0.0), 1550e-9)
    assert (b.beta2, b.beta3, b.beta4) == (0.0, 0.0, 0.0)


def test_constant_d_beta3_reduction():
    d0 = -2.36e-4
    lam = 1550e-9
    b = dispersion.taylor_betas(DispersionModel(d0, 0.0, 0.0), lam)
    assert b.beta3 == pytest.approx(d0 * lam**3 / (2 * math.pi**2 * C_LIGHT**2), rel=1e-12)


def _beta2_of_omega(model, omega):
    lam = 2 * math.pi * C_LIGHT / omega
    return -lam**2 * (model.d2 * lam**2 + model.d1 * lam + model.d0) / (2 * math.pi * C_LIGHT)


@settings(max_examples=30, deadline=None)
@given(st.floats(1450e-9, 1650e-9), st.floats(-1e8, 1e8), st.floats(-400, 400), st.floats(-3e-4, 3e-4))
def test_betas_are_frequency_derivatives(lam, d2, d1, d0):
    model = DispersionModel(d0, d1, d2, lam)
    b = dispersion.taylor_betas(model)
    w0 = 2 * math.pi * C_LIGHT / lam
    h = 1e10
    b3 = (_beta2_of_omega(model, w0 + h) - _beta2_of_omega(model, w0 - h)) / (2 * h)
    lam_at = lambda w: 2 * math.pi * C_LIGHT / w  # noqa: E731
    b4 = (dispersion.taylor_betas(model, lam_at(w0 + h)).beta3
          - dispersion.taylor_betas(model, lam_at(w0 - h)).beta3) / (2 * h)
    # scale-aware tolerance: the coefficients can cancel to near zero
    scale3 = abs(lam**3 * (abs(4 * d2 * lam**2) + abs(3 * d1 * lam) + abs(2 * d0))) / (4 * math.pi**2 * C_LIGHT**2)
    scale4 = abs(lam**3 * (abs(20 * d2 * lam**3) + abs(12 * d1 * lam**2) + abs(6 * d0 * lam))) / (8 * math.pi**3 * C_LIGHT**3)
    assert abs(b.beta3 - b3) <= 1e-6 * scale3
    assert abs(b.beta4 - b4) <= 1e-6 * scale4


def test_hnlf_model_has_no_zero_dispersion_wavelength():
    assert HNLF.d1**2 - 4 * HNLF.d2 * HNLF.d0 < 0
    assert dispersion.zero_dispersion_wavelengths(HNLF) == []


def test_zero_dispersion_wavelength_found_when_real():
    # D = 1e-3 * (lam - 1550 nm) crosses zero at 1550 nm
    model = DispersionModel(-1e-3 * 1550e-9, 1e-3, 0.0)
    (root,) = dispersion.zero_dispersion_wavelengths(model)
    assert root == pytest.approx(1550e-9, rel=1e-12)


def test_linear_phase_examples():
    b = BetaSet(9.06e-28, 0.0, 0.0)
    w = 2 * math.pi * 5e10
    assert dispersion.linear_transfer_phase(b, [w], 1000.0)[0] == pytest.approx(0.0447, rel=2e-3)
    assert dispersion.linear_transfer_phase(dispersion.taylor_betas(HNLF), [0.0], 123.0)[0] == 0.0
    odd = BetaSet(0.0, 8e-41, 0.0)
    ws = np.linspace(-1e12, 1e12, 11)
    phi = dispersion.linear_transfer_phase(odd, ws, 10.0)
    assert np.allclose(phi, -phi[::-1], rtol=0, atol=1e-18)
    with pytest.raises(ValueError):
        dispersion.linear_transfer_phase(b, [w], -1.0)


@given(st.floats(0, 1000), st.floats(0, 1000))
def test_linear_phase_additive_in_z(z1, z2):
    b = dispersion.taylor_betas(HNLF)
    ws = np.linspace(-2e12, 2e12, 9)
    total = dispersion.linear_transfer_phase(b, ws, z1 + z2)
    parts = dispersion.linear_transfer_phase(b, ws, z1) + dispersion.linear_transfer_phase(b, ws, z2)
    assert np.allclose(total, parts, rtol=1e-12, atol=1e-15)


def test_phase_mismatch_examples():
    zero = BetaSet.zero()
    assert dispersion.phase_mismatch(zero, 11e-3, 10e-3, 0.0) == pytest.approx(2.2e-4, rel=1e-12)
    b2 = BetaSet(9.06e-28, 0.0, 0.0)
    assert dispersion.phase_mismatch(b2, 0.0, 0.0, 2 * math.pi * 5e10) == pytest.approx(8.94e-5, rel=2e-3)
    assert dispersion.phase_mismatch(zero, 11e-3, 0.0, 1e12) == 0.0
    with pytest.raises(ValueError):
        dispersion.phase_mismatch(zero, 11e-3, -1.0, 0.0)


def test_sample_file_round_trip(tmp_path):
    samples = hnlf_samples(5)
    path = tmp_path / "d.csv"
    dispersion.save_dispersion_samples(samples, path)
    assert path.read_text().splitlines()[0] == "wavelength_nm,d_ps_per_nm_km"
    back = dispersion.load_dispersion_samples(path)
    for (w0, d0), (w1, d1) in zip(samples, back):
        assert w1 == pytest.approx(w0, rel=1e-15)
        assert d1 == pytest.approx(d0, rel=1e-14)


def test_sample_file_units(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("wavelength_nm,d_ps_per_nm_km\n1550,-0.71\n")
    (w, d), = dispersion.load_dispersion_samples(path)
    assert w == pytest.approx(1550e-9) and d == pytest.approx(-7.1e-7)
    path.write_text("wavelength_nm,d_ps_per_nm_km\n1550,abc\n")
    with pytest.raises(ValueError, match=":2:"):
        dispersion.load_dispersion_samples(path)
