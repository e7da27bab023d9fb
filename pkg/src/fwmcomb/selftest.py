"""Fast built-in property checks, run by ``fwmcomb selftest``.

Each check is small enough that the whole set finishes in a few seconds; the
full test suite under ``tests/`` covers the same ground on full-size grids.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from . import coincidence as coin
from . import combgen, dispersion, fwmlab, osa, sigkit, ssfm, tagsim

CHECKS = []


def check(fn):
    CHECKS.append(fn)
    return fn


def _random_field(rng, n, rep=sigkit.TIME):
    grid = sigkit.make_grid(n, 1e-9, 1550e-9)
    return sigkit.Field(grid, rep, rng.normal(size=n) + 1j * rng.normal(size=n))


@check
def parseval_and_round_trip():
    rng = np.random.default_rng(1)
    for n in (2, 64, 4096):
        f = _random_field(rng, n)
        g = sigkit.transform(f, "to_frequency")
        back = sigkit.transform(g, "to_time")
        assert math.isclose(sigkit.field_energy(f), sigkit.field_energy(g), rel_tol=1e-12)
        assert np.linalg.norm(back.samples - f.samples) <= 1e-12 * np.linalg.norm(f.samples)


@check
def power_conversion_round_trip():
    p = np.logspace(-12, 1, 50)
    back = sigkit.dbm_to_watts(sigkit.watts_to_dbm(p))
    assert np.allclose(back, p, rtol=1e-12, atol=0)


@check
def dispersion_fit_and_betas():
    model = dispersion.default_hnlf()
    wl = np.linspace(1530e-9, 1570e-9, 10)
    fit = dispersion.fit_quadratic(list(zip(wl, dispersion.eval_d(model, wl))))
    for a, b in ((fit.d0, model.d0), (fit.d1, model.d1), (fit.d2, model.d2)):
        assert abs(a - b) <= 1e-9 * abs(b)
    betas = dispersion.taylor_betas(model)
    assert abs(betas.beta2 - 9.06e-28) <= 0.005 * 9.06e-28
    assert dispersion.zero_dispersion_wavelengths(model) == []


@check
def spm_phase():
    grid = sigkit.make_grid(64, 1e-9, 1550e-9)
    p = sigkit.dbm_to_watts(10.2)
    field = sigkit.Field(grid, sigkit.TIME, np.full(64, math.sqrt(p), dtype=complex))
    out, diag = ssfm.propagate(field, ssfm.FiberParams(1000.0, 11e-3, 10.0))
    phase = np.angle(out.samples[0])
    assert abs(phase - 11e-3 * p * 1000.0) < 1e-4
    assert np.allclose(np.abs(out.samples), math.sqrt(p), rtol=1e-12)
    assert diag.relative_energy_drift < 1e-12


@check
def parametric_idler():
    grid = sigkit.make_grid(2**12, 1e-9, 1550e-9)
    f_p = grid.center_frequency
    comb = combgen.CombSpec(((f_p + 50e9, 1e-6),), sub_spacing=1e12, envelope_fwhm=1e6)
    field = combgen.synthesize_input(comb, combgen.PumpSpec(f_p, 10e-3), grid)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ssfm.BandEdgeWarning)
        out, _ = ssfm.propagate(field.in_time(), ssfm.FiberParams(1000.0, 11e-3, 10.0))
    powers = out.in_frequency().bin_powers()
    idler = powers[grid.nearest_bin(f_p - 50e9)]
    assert abs(idler / 1.21e-8 - 1) < 0.05


@check
def fwm_line_algebra():
    preds = fwmlab.predict_lines(193.4e12, 50e9, 5)
    assert [p.j for p in preds] == [1, 2, 3, 4, 5]
    for p in preds:
        assert math.isclose(p.signal_frequency + p.idler_frequency, 2 * 193.4e12, rel_tol=1e-15)
    cm = fwmlab.correlation_matrix(193.0e12 + 50e9 * np.arange(6), 193.4e12)
    assert len(cm.entries) == 30 and len(cm.undirected()) == 15


@check
def osa_resolution():
    grid = sigkit.make_grid(2**14, 2e-9, 1550e-9)
    spec = np.zeros(grid.n_points, dtype=complex)
    c = grid.n_points // 2
    spec[c] = spec[c + 100] = math.sqrt(1e-3 * grid.n_points)  # 50 GHz apart at df = 0.5 GHz
    field = sigkit.Field(grid, sigkit.FREQUENCY, spec)
    smoothed = osa.smooth_psd(field, 3e9)
    assert math.isclose(smoothed.sum(), field.bin_powers().sum(), rel_tol=1e-6)
    trace = osa.emulate_osa(field, 3e9)
    assert len(combgen.extract_comb_peaks(trace, 10.0)) == 2


@check
def correlogram_brute_force():
    rng = np.random.default_rng(7)
    s = np.sort(rng.integers(0, 10**7, 500))
    i = np.sort(rng.integers(0, 10**7, 500))
    hist = coin.correlogram(coin.TagStream(0, s, 1e-5), coin.TagStream(1, i, 1e-5), 50, (-200_000, 200_000))
    d = (i[None, :] - s[:, None]).ravel()
    assert hist.counts.sum() == np.count_nonzero((d >= -200_000) & (d < 200_000))


@check
def car_against_analytic():
    model = tagsim.SourceModel(mu=0.1, eta_s=0.1, eta_i=0.1, dark_rate_s=0.0, dark_rate_i=0.0)
    sig, idl = tagsim.generate_tags(model, 0.2, seed=3)
    hist = coin.correlogram(sig, idl)
    report = coin.compute_car(hist, sig, idl)
    expected = tagsim.analytic_car(model, coin.DEFAULT_PEAK_WINDOW_PS)
    assert abs(report.car - expected) <= 3 * report.car_sigma
    assert abs(report.peak_period - model.period_ps) <= 1e-3 * model.period_ps


def run_selftest(verbose: bool = False) -> int:
    """Run every check; returns the number of failures."""
    failures = 0
    for fn in CHECKS:
        try:
            fn()
            status = "ok"
        except Exception as exc:  # report and keep going
            failures += 1
            status = f"FAIL ({type(exc).__name__}: {exc})"
        if verbose:
            print(f"  {fn.__name__:<28} {status}")
    return failures
