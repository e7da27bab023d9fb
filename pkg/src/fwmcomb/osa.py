"""OSA traces: CSV I/O, finite resolution-bandwidth emulation and trace comparison."""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
from scipy.signal import find_peaks

from .sigkit import C_LIGHT, Field, dbm_to_watts, watts_to_dbm

TRACE_HEADER = "wavelength_nm,power_dbm"
DEFAULT_RBW = 3e9
DEFAULT_FLOOR_DBM = -75.0
DISPLAY_FLOOR_DBM = -200.0
FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


class TraceFormatError(ValueError):
    """Malformed trace file; carries the offending line number when known."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        super().__init__(message if lineno is None else f"line {lineno}: {message}")


@dataclass(frozen=True)
class Trace:
    """Wavelength-vs-power spectrum as recorded by an OSA."""

    wavelength_nm: np.ndarray
    power_dbm: np.ndarray
    rbw: float = DEFAULT_RBW
    meta: dict = dc_field(default_factory=dict, compare=False)

    def __post_init__(self):
        wl = np.array(self.wavelength_nm, dtype=float)
        p = np.array(self.power_dbm, dtype=float)
        if wl.shape != p.shape or wl.ndim != 1:
            raise ValueError("wavelength and power arrays must be 1-D and equally long")
        if np.any(np.diff(wl) <= 0):
            bad = int(np.argmax(np.diff(wl) <= 0)) + 1
            raise ValueError(f"wavelengths must be strictly increasing (sample {bad})")
        if not np.all(np.isfinite(p)):
            raise ValueError("trace powers must be finite")
        wl.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "wavelength_nm", wl)
        object.__setattr__(self, "power_dbm", p)

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        return (
            self.rbw == other.rbw
            and np.array_equal(self.wavelength_nm, other.wavelength_nm)
            and np.array_equal(self.power_dbm, other.power_dbm)
        )

    def __len__(self):
        return len(self.wavelength_nm)

    @property
    def frequencies(self) -> np.ndarray:
        """Optical frequencies in Hz (decreasing, since wavelengths increase)."""
        return C_LIGHT / (self.wavelength_nm * 1e-9)

    @property
    def power_watts(self) -> np.ndarray:
        return dbm_to_watts(self.power_dbm)

    def by_frequency(self) -> tuple[np.ndarray, np.ndarray]:
        """(frequency Hz, linear power W), sorted by increasing frequency."""
        return self.frequencies[::-1].copy(), self.power_watts[::-1].copy()


def save_trace(trace: Trace, path) -> None:
    lines = [f"# rbw_ghz={trace.rbw / 1e9:.6f}"]
    lines += [f"# {k}={v}" for k, v in trace.meta.items()]
    lines.append(TRACE_HEADER)
    lines += [f"{w:.6f},{p:.6f}" for w, p in zip(trace.wavelength_nm, trace.power_dbm)]
    Path(path).write_text("\n".join(lines) + "\n")


def load_trace(path) -> Trace:
    """Read a trace CSV; ``# key=value`` comment lines become metadata."""
    meta = {}
    wl, pw = [], []
    header_seen = False
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].strip().partition("=")
            if sep:
                meta[key.strip()] = value.strip()
            continue
        if not header_seen and line.replace(" ", "") == TRACE_HEADER:
            header_seen = True
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise TraceFormatError(f"expected 2 columns, got {len(parts)}: {line!r}", lineno)
        try:
            w, p = float(parts[0]), float(parts[1])
        except ValueError:
            raise TraceFormatError(f"malformed row {line!r}", lineno) from None
        if wl and w <= wl[-1]:
            raise TraceFormatError(f"wavelengths not strictly increasing at {w}", lineno)
        wl.append(w)
        pw.append(p)
    rbw = float(meta.pop("rbw_ghz", DEFAULT_RBW / 1e9)) * 1e9
    return Trace(np.array(wl), np.array(pw), rbw, meta)


def _gaussian_kernel(rbw: float, df: float) -> np.ndarray:
    sigma = rbw * FWHM_TO_SIGMA
    radius = int(math.floor(5 * sigma / df))
    k = np.arange(-radius, radius + 1) * df
    kernel = np.exp(-0.5 * (k / sigma) ** 2)
    return kernel / kernel.sum()


def smooth_psd(spectrum: Field, rbw: float) -> np.ndarray:
    """Bin powers convolved with a unit-area Gaussian of FWHM ``rbw``.

    The sum over bins is preserved (up to power leaking past the grid edges).
    An ``rbw`` narrower than one bin returns the bin powers unchanged.
    """
    if not rbw > 0:
        raise ValueError(f"rbw must be positive, got {rbw}")
    powers = spectrum.bin_powers()
    kernel = _gaussian_kernel(rbw, spectrum.grid.df)
    if len(kernel) == 1:
        return powers
    # direct summation: an FFT convolution would leave a ~1e-16 relative
    # round-off floor that shows up as spurious peaks in dB
    return np.convolve(powers, kernel, mode="same")


def emulate_osa(spectrum: Field, rbw: float = DEFAULT_RBW, wavelength_range=None,
                n_points: int | None = None) -> Trace:
    """Render a simulated spectrum the way a finite-RBW OSA would display it.

    The smoothed PSD is scaled by the kernel's noise-equivalent width so an
    isolated narrow line reads its true power and broad features read the
    power inside one resolution bandwidth.

    Args:
        spectrum: Field in frequency representation.
        rbw: Resolution bandwidth (Gaussian FWHM), Hz.
        wavelength_range: ``(lo_nm, hi_nm)``; defaults to the full grid.
        n_points: Resample onto a uniform wavelength axis of this length
            (linear interpolation of linear power). ``None`` keeps the grid bins.
    """
    if spectrum.representation != "frequency":
        raise ValueError("emulate_osa expects a frequency-representation field")
    grid = spectrum.grid
    smoothed = smooth_psd(spectrum, rbw)
    kernel = _gaussian_kernel(rbw, grid.df)
    reading = smoothed / kernel.max()

    wl_nm = C_LIGHT / grid.frequencies * 1e9
    wl_nm, reading = wl_nm[::-1], reading[::-1]
    if wavelength_range is None:
        lo, hi = wl_nm[0], wl_nm[-1]
    else:
        lo, hi = sorted(wavelength_range)
        if lo < wl_nm[0] or hi > wl_nm[-1]:
            raise ValueError(
                f"wavelength range {lo}-{hi} nm outside grid span {wl_nm[0]:.4f}-{wl_nm[-1]:.4f} nm"
            )
    if n_points is None:
        sel = (wl_nm >= lo) & (wl_nm <= hi)
        axis, values = wl_nm[sel], reading[sel]
    else:
        axis = np.linspace(lo, hi, n_points)
        values = np.interp(axis, wl_nm, reading)
    floor = dbm_to_watts(DISPLAY_FLOOR_DBM)
    return Trace(axis, watts_to_dbm(values, floor), rbw)


@dataclass
class ComparisonReport:
    rms_db: float
    n_samples: int
    peak_frequencies: np.ndarray  # Hz, peaks of trace a
    peak_offsets: np.ndarray  # Hz, nearest b peak minus a peak
    peak_power_deltas: np.ndarray  # dB, b minus a
    peak_matched: np.ndarray  # offset within the matching window

    def to_dict(self) -> dict:
        return {
            "rms_db": self.rms_db,
            "n_samples": self.n_samples,
            "peaks": [
                {
                    "frequency_thz": f / 1e12,
                    "offset_ghz": o / 1e9,
                    "power_delta_db": d,
                    "matched": bool(m),
                }
                for f, o, d, m in zip(self.peak_frequencies, self.peak_offsets,
                                      self.peak_power_deltas, self.peak_matched)
            ],
        }


def _trace_peaks(trace: Trace, prominence_db: float):
    idx, _ = find_peaks(trace.power_dbm, prominence=prominence_db)
    return trace.frequencies[idx], trace.power_dbm[idx]


def compare_traces(a: Trace, b: Trace, band=None, floor_dbm: float = DEFAULT_FLOOR_DBM,
                   normalize: bool = False, peak_prominence_db: float = 10.0,
                   match_window: float = 10e9) -> ComparisonReport:
    """Compare two traces on a common wavelength axis.

    Both traces are interpolated (in dB) onto the union of their sample
    wavelengths inside the overlap, samples where either trace is below
    ``floor_dbm`` are dropped, and the RMS dB difference is reported. Peaks of
    ``a`` are paired with the nearest peak of ``b``; pairs further apart than
    ``match_window`` are reported but flagged unmatched; only peaks above
    ``floor_dbm`` take part. With ``normalize``
    each trace is referenced to its own peak before differencing; the floor
    still applies to absolute powers.
    """
    lo = max(a.wavelength_nm[0], b.wavelength_nm[0])
    hi = min(a.wavelength_nm[-1], b.wavelength_nm[-1])
    if band is not None:
        lo, hi = max(lo, min(band)), min(hi, max(band))
    if not lo < hi:
        raise ValueError("traces do not overlap inside the requested band")

    axis = np.union1d(a.wavelength_nm, b.wavelength_nm)
    axis = axis[(axis >= lo) & (axis <= hi)]
    ia = np.interp(axis, a.wavelength_nm, a.power_dbm)
    ib = np.interp(axis, b.wavelength_nm, b.power_dbm)
    keep = (ia >= floor_dbm) & (ib >= floor_dbm)
    if normalize:
        ia = ia - a.power_dbm.max()
        ib = ib - b.power_dbm.max()
    diff = ib[keep] - ia[keep]
    rms = float(np.sqrt(np.mean(diff**2))) if diff.size else float("nan")

    fa, ha = _trace_peaks(a, peak_prominence_db)
    fb, hb = _trace_peaks(b, peak_prominence_db)
    in_band_a = (C_LIGHT / fa * 1e9 >= lo) & (C_LIGHT / fa * 1e9 <= hi) & (ha >= floor_dbm)
    fa, ha = fa[in_band_a], ha[in_band_a]
    fb, hb = fb[hb >= floor_dbm], hb[hb >= floor_dbm]
    if normalize:
        ha = ha - a.power_dbm.max()
        hb = hb - b.power_dbm.max()
    offsets = np.full(fa.shape, np.nan)
    deltas = np.full(fa.shape, np.nan)
    if fb.size:
        for k, f in enumerate(fa):
            j = int(np.argmin(np.abs(fb - f)))
            offsets[k] = fb[j] - f
            deltas[k] = hb[j] - ha[k]
    matched = np.abs(offsets) <= match_window
    return ComparisonReport(rms, int(keep.sum()), fa, offsets, deltas, matched)
