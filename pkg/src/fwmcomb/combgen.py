"""Simulation input spectra: filtered mode-locked comb lines and a CW pump.

Each comb line is a dense sub-comb (the mode-locked laser's repetition rate)
under a Gaussian power envelope set by the Fabry-Perot filter passband. The
pump is a single spectral bin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
from scipy.signal import find_peaks

from .osa import Trace
from .sigkit import (
    FREQUENCY,
    TIME,
    Field,
    TemporalGrid,
    convert_power,
    dbm_to_watts,
    to_frequency_samples,
    to_time_samples,
)

MLL_REP_RATE = 22.47e6  # Hz
TFPF_LINE_FWHM = 21.23e6  # Hz
TFPF_SPACING = 50e9  # Hz
ENVELOPE_CUTOFF_FWHM = 3.0
COMB_HEADER = "frequency_thz,power_dbm"


@dataclass(frozen=True)
class CombSpec:
    """Comb lines as ``(center_frequency_hz, peak_power_w)`` pairs."""

    lines: tuple = ()
    sub_spacing: float = MLL_REP_RATE
    envelope_fwhm: float = TFPF_LINE_FWHM

    def __post_init__(self):
        lines = tuple((float(f), float(p)) for f, p in self.lines)
        freqs = [f for f, _ in lines]
        if any(b <= a for a, b in zip(freqs, freqs[1:])):
            raise ValueError("comb line frequencies must be strictly increasing")
        if any(not p > 0 for _, p in lines):
            raise ValueError("comb line powers must be positive")
        if not self.sub_spacing > 0 or not self.envelope_fwhm > 0:
            raise ValueError("sub_spacing and envelope_fwhm must be positive")
        object.__setattr__(self, "lines", lines)

    def __len__(self):
        return len(self.lines)

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([f for f, _ in self.lines])

    @property
    def powers(self) -> np.ndarray:
        return np.array([p for _, p in self.lines])

    def scaled(self, factor: float) -> "CombSpec":
        return CombSpec(tuple((f, p * factor) for f, p in self.lines),
                        self.sub_spacing, self.envelope_fwhm)

    def sub_lines(self) -> list[tuple[float, float]]:
        """All ``(frequency, power)`` sub-lines kept after envelope truncation."""
        out = []
        k_max = int(math.floor(ENVELOPE_CUTOFF_FWHM * self.envelope_fwhm / self.sub_spacing))
        ks = np.arange(-k_max, k_max + 1)
        weights = np.exp(-4 * math.log(2) * (ks * self.sub_spacing / self.envelope_fwhm) ** 2)
        for f0, p in self.lines:
            out.extend(zip(f0 + ks * self.sub_spacing, p * weights))
        return out


@dataclass(frozen=True)
class PumpSpec:
    frequency: float
    power: float

    def __post_init__(self):
        if not self.power > 0:
            raise ValueError(f"pump power must be positive, got {self.power}")

    def scaled(self, factor: float) -> "PumpSpec":
        return PumpSpec(self.frequency, self.power * factor)


@dataclass
class SynthesisReport:
    """Bookkeeping from synthesize_input: snapping errors and configured power."""

    configured_power: float
    max_snap_error: float  # Hz
    pump_bin: int | None
    pump_snap_error: float
    merged_bins: int  # sub-lines that landed on an already occupied bin
    bins: list = dc_field(default_factory=list, repr=False)


def extract_comb_peaks(trace: Trace, min_prominence_db: float,
                       sub_spacing: float = MLL_REP_RATE,
                       envelope_fwhm: float = TFPF_LINE_FWHM) -> CombSpec:
    """Pick comb lines out of a measured spectrum.

    Local maxima whose prominence over the surrounding baseline is at least
    ``min_prominence_db`` are returned as ``(frequency, linear peak power)``.
    """
    if len(trace) == 0:
        raise ValueError("empty trace")
    if not min_prominence_db > 0:
        raise ValueError("min_prominence_db must be positive")
    idx, _ = find_peaks(trace.power_dbm, prominence=min_prominence_db)
    freqs = trace.frequencies[idx]
    powers = trace.power_watts[idx]
    order = np.argsort(freqs)
    return CombSpec(tuple(zip(freqs[order], powers[order])), sub_spacing, envelope_fwhm)


def _min_line_spacing(comb: CombSpec) -> float:
    f = comb.frequencies
    return float(np.min(np.diff(f))) if len(f) > 1 else math.inf


def synthesize_input(comb: CombSpec, pump: PumpSpec | None, grid: TemporalGrid,
                     chirp: float | None = None, return_report: bool = False):
    """Build the input spectrum on ``grid``.

    Sub-lines snap to their nearest bin; sub-lines sharing a bin add in power.
    A non-zero ``chirp`` (rad/s^2, time-domain ``exp(1j C T^2)``) is applied to
    the comb only, before the pump bin is added.

    Returns:
        Frequency-representation Field, or ``(Field, SynthesisReport)`` when
        ``return_report`` is set.
    """
    if grid.df > _min_line_spacing(comb):
        raise ValueError(
            f"grid resolution {grid.df / 1e6:.3f} MHz cannot separate comb lines "
            f"spaced {_min_line_spacing(comb) / 1e6:.3f} MHz"
        )
    for f, _ in comb.lines:
        if not grid.contains(f):
            raise ValueError(f"comb line at {f / 1e12:.6f} THz outside the grid span")
    if pump is not None and not grid.contains(pump.frequency):
        raise ValueError(f"pump at {pump.frequency / 1e12:.6f} THz outside the grid span")

    n = grid.n_points
    bin_power = np.zeros(n)
    max_err = 0.0
    merged = 0
    total = 0.0
    for f, p in comb.sub_lines():
        if not grid.contains(f):
            continue  # envelope tail beyond the grid edge
        k = grid.nearest_bin(f)
        max_err = max(max_err, abs(grid.frequencies[k] - f))
        if bin_power[k] > 0:
            merged += 1
        bin_power[k] += p
        total += p

    spectrum = np.sqrt(bin_power * n).astype(complex)
    if chirp:
        spectrum = to_frequency_samples(
            to_time_samples(spectrum) * np.exp(1j * chirp * grid.times**2)
        )

    pump_bin = None
    pump_err = 0.0
    if pump is not None:
        pump_bin = grid.nearest_bin(pump.frequency)
        pump_err = abs(grid.frequencies[pump_bin] - pump.frequency)
        amp = math.sqrt(pump.power * n)
        if spectrum[pump_bin] != 0:
            merged += 1
            # add in power; the bin takes the pump's zero phase, since a chirped
            # comb leaves a weak leak of arbitrary phase here
            spectrum[pump_bin] = math.sqrt(abs(spectrum[pump_bin]) ** 2 + amp**2)
        else:
            spectrum[pump_bin] = amp
        total += pump.power

    field = Field(grid, FREQUENCY, spectrum)
    if not return_report:
        return field
    occupied = np.flatnonzero(bin_power).tolist()
    report = SynthesisReport(total, max_err, pump_bin, pump_err, merged, occupied)
    return field, report


def apply_linear_chirp(field: Field, chirp_coefficient: float) -> Field:
    """Multiply a time-domain field by ``exp(1j C T^2)``."""
    if field.representation != TIME:
        raise ValueError("apply_linear_chirp needs a time-representation field")
    if chirp_coefficient == 0:
        return field
    t = field.grid.times
    return Field(field.grid, TIME, field.samples * np.exp(1j * chirp_coefficient * t**2))


def load_comb(path, sub_spacing: float = MLL_REP_RATE,
              envelope_fwhm: float = TFPF_LINE_FWHM) -> CombSpec:
    """Read ``frequency_thz,power_dbm`` rows into a CombSpec (rows may be unsorted)."""
    rows = []
    header_seen = False
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not header_seen:
            if line.replace(" ", "") != COMB_HEADER:
                raise ValueError(f"{path}:{lineno}: expected header {COMB_HEADER!r}")
            header_seen = True
            continue
        try:
            f_thz, p_dbm = (float(x) for x in line.split(","))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: malformed row {line!r}") from None
        rows.append((f_thz * 1e12, float(dbm_to_watts(p_dbm))))
    rows.sort()
    return CombSpec(tuple(rows), sub_spacing, envelope_fwhm)


def save_comb(comb: CombSpec, path) -> None:
    out = [COMB_HEADER]
    out += [f"{f / 1e12!r},{float(convert_power(p, 'watts_to_dbm'))!r}" for f, p in comb.lines]
    Path(path).write_text("\n".join(out) + "\n")


def itu_comb(first_thz: float, n_lines: int, power_w: float,
             spacing: float = TFPF_SPACING, **kwargs) -> CombSpec:
    """Equal-power comb starting at ``first_thz`` with ``spacing`` between lines."""
    lines = tuple((first_thz * 1e12 + k * spacing, power_w) for k in range(n_lines))
    return CombSpec(lines, **kwargs)
