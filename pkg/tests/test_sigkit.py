import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fwmcomb import sigkit
from fwmcomb.sigkit import C_LIGHT, FREQUENCY, TIME, Field


def test_grid_for_one_mll_period():
    g = sigkit.make_grid(2**18, 44.5e-9, 1550e-9)
    assert g.dt == pytest.approx(169.75e-15, rel=1e-4)
    assert g.df == pytest.approx(22.472e6, rel=1e-4)
    assert g.span == pytest.approx(5.891e12, rel=1e-3)
    assert g.center_frequency == C_LIGHT / 1550e-9


def test_two_point_grid():
    g = sigkit.make_grid(2, 1.0, 1550e-9)
    assert g.dt == 0.5 and g.df == 1.0


@pytest.mark.parametrize("n", [2**10 + 1, 0, 1, 3, 6])
def test_rejects_non_power_of_two(n):
    with pytest.raises(ValueError, match="power of two"):
        sigkit.make_grid(n, 1e-9, 1550e-9)


@pytest.mark.parametrize("window", [0.0, -1e-9])
def test_rejects_non_positive_window(window):
    with pytest.raises(ValueError):
        sigkit.make_grid(64, window, 1550e-9)


def test_rejects_wavelength_outside_band():
    with pytest.raises(ValueError):
        sigkit.make_grid(64, 1e-9, 2.5e-6)


@given(st.integers(1, 20), st.floats(1e-12, 1e-3))
def test_df_times_window_is_one(log2n, window):
    g = sigkit.make_grid(2**log2n, window, 1550e-9)
    # 1/w * w can round one ulp away from 1; dt * n is exact for powers of two
    assert abs(g.df * g.time_window - 1.0) <= 2.0**-52
    assert g.dt * g.n_points == window
    assert g.span == g.n_points * g.df


def test_delta_in_time_is_flat_in_frequency():
    g = sigkit.make_grid(256, 1e-9, 1550e-9)
    a = np.zeros(256, dtype=complex)
    a[17] = 3.0
    spec = sigkit.transform(Field(g, TIME, a), "to_frequency")
    mags = np.abs(spec.samples)
    assert np.allclose(mags, mags[0], rtol=1e-12)


def test_transform_rejects_same_representation():
    g = sigkit.make_grid(8, 1e-9, 1550e-9)
    f = Field(g, TIME, np.ones(8))
    with pytest.raises(ValueError):
        sigkit.transform(f, "to_time")
    with pytest.raises(ValueError):
        sigkit.transform(sigkit.transform(f, "to_frequency"), "to_frequency")


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 14), st.integers(0, 2**32 - 1), st.floats(1e-6, 1e3))
def test_parseval_and_round_trip(log2n, seed, scale):
    rng = np.random.default_rng(seed)
    n = 2**log2n
    g = sigkit.make_grid(n, 1e-9, 1550e-9)
    a = scale * (rng.normal(size=n) + 1j * rng.normal(size=n))
    f = Field(g, TIME, a)
    spec = sigkit.transform(f, "to_frequency")
    assert sigkit.field_energy(spec) == pytest.approx(sigkit.field_energy(f), rel=1e-12)
    back = sigkit.transform(spec, "to_time")
    assert np.linalg.norm(back.samples - a) <= 1e-12 * np.linalg.norm(a)


def test_positive_offset_line_lands_above_center():
    # sign convention: exp(-i w T) is a line at +w
    g = sigkit.make_grid(1024, 1e-9, 1550e-9)
    k = 37
    a = np.exp(-1j * 2 * np.pi * k * g.df * g.times)
    powers = Field(g, TIME, a).bin_powers()
    assert int(np.argmax(powers)) == g.n_points // 2 + k
    assert powers.max() == pytest.approx(1.0, rel=1e-12)


def test_gaussian_time_bandwidth_product():
    g = sigkit.make_grid(2**14, 2e-9, 1550e-9)
    fwhm_t = 15e-12
    t0 = fwhm_t / (2 * math.sqrt(math.log(2)))  # amplitude exp(-T^2 / 2 t0^2)
    a = np.exp(-(g.times**2) / (2 * t0**2))
    psd = Field(g, TIME, a).bin_powers()
    half = psd >= psd.max() / 2
    # linear interpolation at the two half-maximum crossings
    idx = np.flatnonzero(half)
    lo, hi = idx[0], idx[-1]
    f = g.offsets

    def cross(i0, i1):
        y0, y1 = psd[i0], psd[i1]
        return f[i0] + (psd.max() / 2 - y0) * (f[i1] - f[i0]) / (y1 - y0)

    width = cross(hi, hi + 1) - cross(lo - 1, lo)
    assert width == pytest.approx(2 * math.log(2) / math.pi / fwhm_t, rel=2e-3)
    assert width == pytest.approx(29.4e9, rel=2e-3)


def test_cw_energy():
    g = sigkit.make_grid(1024, 44.5e-9, 1550e-9)
    f = Field(g, TIME, np.ones(1024))
    assert sigkit.field_energy(f) == pytest.approx(44.5e-9, rel=1e-12)
    assert sigkit.field_energy(sigkit.transform(f, "to_frequency")) == pytest.approx(44.5e-9, rel=1e-12)
    assert sigkit.field_energy(Field(g, TIME, np.zeros(1024))) == 0.0


def test_cw_line_reads_its_power_in_one_bin():
    g = sigkit.make_grid(64, 1e-9, 1550e-9)
    f = Field(g, TIME, np.full(64, math.sqrt(0.25)))
    p = f.bin_powers()
    assert p[32] == pytest.approx(0.25, rel=1e-12)
    assert p.sum() == pytest.approx(0.25, rel=1e-12)


def test_power_conversion_examples():
    assert sigkit.convert_power(10.2, "dbm_to_watts") == pytest.approx(10.471e-3, rel=5e-5)
    assert sigkit.convert_power(0.0, "dbm_to_watts") == pytest.approx(1e-3, rel=1e-15)
    assert sigkit.convert_power(30.0, "dbm_to_watts") == pytest.approx(1.0, rel=1e-15)
    assert sigkit.convert_power(1e-3, "watts_to_dbm") == 0.0
    for bad in (0.0, -1.0):
        with pytest.raises(ValueError):
            sigkit.convert_power(bad, "watts_to_dbm")
    with pytest.raises(ValueError):
        sigkit.convert_power(1.0, "sideways")


@given(st.floats(1e-12, 10.0))
def test_power_conversion_round_trip(p):
    dbm = sigkit.convert_power(p, "watts_to_dbm")
    assert sigkit.convert_power(dbm, "dbm_to_watts") == pytest.approx(p, rel=1e-12)


def test_samples_are_read_only():
    g = sigkit.make_grid(8, 1e-9, 1550e-9)
    f = Field(g, TIME, np.ones(8))
    with pytest.raises(ValueError):
        f.samples[0] = 2.0


def test_field_rejects_wrong_length():
    g = sigkit.make_grid(8, 1e-9, 1550e-9)
    with pytest.raises(ValueError):
        Field(g, TIME, np.ones(7))
    with pytest.raises(ValueError):
        Field(g, "wavelet", np.ones(8))


def test_spectrum_dump_round_trip(tmp_path, rng):
    g = sigkit.make_grid(256, 1e-9, 1550e-9)
    spec = rng.normal(size=256) + 1j * rng.normal(size=256)
    spec[:10] = 0.0
    f = Field(g, FREQUENCY, spec)
    path = tmp_path / "spec.csv"
    sigkit.save_spectrum(f, path)
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    assert lines[0] == "frequency_thz,power_dbm,phase_rad"
    freqs = [float(l.split(",")[0]) for l in lines[1:]]
    assert all(b > a for a, b in zip(freqs, freqs[1:]))
    back = sigkit.load_spectrum(path)
    assert back.grid == g
    assert np.allclose(back.samples, f.samples, rtol=1e-12, atol=0)


def test_nearest_bin_and_span():
    g = sigkit.make_grid(64, 1e-9, 1550e-9)
    f0 = g.center_frequency
    assert g.nearest_bin(f0 + 0.4e9) == 32
    assert g.nearest_bin(f0 + 0.6e9) == 33
    with pytest.raises(ValueError):
        g.nearest_bin(f0 + 1e12)
