"""Uniform time/frequency grids, complex field containers and domain transforms.

Sign convention: a spectral component at angular offset ``w`` from the grid
center contributes ``exp(-1j * w * T)`` to the time-domain envelope. Under this
convention a linear propagation step multiplies each spectral bin by
``exp(+1j * phi(w))`` with ``phi = (b2/2 w^2 + b3/6 w^3 + b4/24 w^4) z``.

Both representations are stored in monotone order: time sample ``n/2`` is
``T = 0`` and frequency bin ``n/2`` is the center frequency. The transform is
unitary (1/sqrt(n) each way), so ``sum |A|^2`` is the same in both domains.

The retarded frame ``T = t - beta1 z`` removes the group delay, so beta1 is
never computed or stored.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

C_LIGHT = 299_792_458.0  # m/s

TIME = "time"
FREQUENCY = "frequency"


def _is_power_of_two(n: int) -> bool:
    return n >= 2 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class TemporalGrid:
    """Uniform sampling of one time window around a carrier wavelength."""

    n_points: int
    time_window: float
    center_wavelength: float

    def __post_init__(self):
        if isinstance(self.n_points, bool) or int(self.n_points) != self.n_points:
            raise ValueError(f"n_points must be an integer, got {self.n_points!r}")
        object.__setattr__(self, "n_points", int(self.n_points))
        if not _is_power_of_two(self.n_points):
            raise ValueError(f"n_points must be a power of two >= 2, got {self.n_points}")
        if not self.time_window > 0:
            raise ValueError(f"time_window must be positive, got {self.time_window}")
        if not 1e-6 < self.center_wavelength < 2e-6:
            raise ValueError(
                f"center_wavelength must lie in (1 um, 2 um), got {self.center_wavelength}"
            )

    @property
    def dt(self) -> float:
        return self.time_window / self.n_points

    @property
    def df(self) -> float:
        return 1.0 / self.time_window

    @property
    def span(self) -> float:
        return self.n_points * self.df

    @property
    def center_frequency(self) -> float:
        return C_LIGHT / self.center_wavelength

    @property
    def times(self) -> np.ndarray:
        """Retarded time axis, seconds, with T = 0 at index n/2."""
        return (np.arange(self.n_points) - self.n_points // 2) * self.dt

    @property
    def offsets(self) -> np.ndarray:
        """Frequency offsets from the center frequency, Hz, monotone."""
        return (np.arange(self.n_points) - self.n_points // 2) * self.df

    @property
    def omegas(self) -> np.ndarray:
        """Angular frequency offsets, rad/s."""
        return 2 * np.pi * self.offsets

    @property
    def frequencies(self) -> np.ndarray:
        """Absolute optical frequencies, Hz."""
        return self.center_frequency + self.offsets

    def frequency_bounds(self) -> tuple[float, float]:
        f = self.center_frequency
        return f + self.offsets[0] - self.df / 2, f + self.offsets[-1] + self.df / 2

    def contains(self, frequency: float) -> bool:
        lo, hi = self.frequency_bounds()
        return lo <= frequency < hi

    def nearest_bin(self, frequency: float) -> int:
        """Index of the bin closest to an absolute frequency."""
        if not self.contains(frequency):
            raise ValueError(
                f"frequency {frequency / 1e12:.6f} THz lies outside the grid span"
            )
        k = int(np.round((frequency - self.center_frequency) / self.df)) + self.n_points // 2
        return min(max(k, 0), self.n_points - 1)


def make_grid(n_points: int, time_window: float, center_wavelength: float) -> TemporalGrid:
    return TemporalGrid(n_points, time_window, center_wavelength)


def to_frequency_samples(samples: np.ndarray) -> np.ndarray:
    """Centered unitary transform, time -> frequency (raw arrays)."""
    return np.fft.fftshift(np.fft.ifft(np.fft.ifftshift(samples), norm="ortho"))


def to_time_samples(samples: np.ndarray) -> np.ndarray:
    """Centered unitary transform, frequency -> time (raw arrays)."""
    return np.fft.fftshift(np.fft.fft(np.fft.ifftshift(samples), norm="ortho"))


@dataclass(frozen=True)
class Field:
    """Complex envelope on a grid; time samples are in sqrt(W)."""

    grid: TemporalGrid
    representation: str
    samples: np.ndarray = dc_field(repr=False)

    def __post_init__(self):
        if self.representation not in (TIME, FREQUENCY):
            raise ValueError(f"unknown representation {self.representation!r}")
        samples = np.array(self.samples, dtype=complex)
        if samples.shape != (self.grid.n_points,):
            raise ValueError(
                f"expected {self.grid.n_points} samples, got shape {samples.shape}"
            )
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def in_time(self) -> "Field":
        return self if self.representation == TIME else transform(self, "to_time")

    def in_frequency(self) -> "Field":
        return self if self.representation == FREQUENCY else transform(self, "to_frequency")

    def bin_powers(self) -> np.ndarray:
        """Average power carried by each spectral bin, W.

        A CW line of power P occupying one bin reports exactly P; the bins sum
        to the window-averaged power.
        """
        spec = self.in_frequency().samples
        return np.abs(spec) ** 2 / self.grid.n_points

    def power(self) -> np.ndarray:
        """Instantaneous power |A(T)|^2, W."""
        return np.abs(self.in_time().samples) ** 2


def transform(field: Field, direction: str) -> Field:
    """Switch a field between time and frequency representation.

    Args:
        field: Field to transform.
        direction: ``"to_frequency"`` or ``"to_time"``; must differ from the
            field's current representation.
    """
    if direction == "to_frequency":
        if field.representation == FREQUENCY:
            raise ValueError("field is already in frequency representation")
        return Field(field.grid, FREQUENCY, to_frequency_samples(field.samples))
    if direction == "to_time":
        if field.representation == TIME:
            raise ValueError("field is already in time representation")
        return Field(field.grid, TIME, to_time_samples(field.samples))
    raise ValueError(f"unknown direction {direction!r}")


def field_energy(field: Field) -> float:
    """Pulse energy in joules, sum |A|^2 dt (identical in either domain)."""
    return float(np.sum(np.abs(field.samples) ** 2) * field.grid.dt)


def convert_power(value: float, direction: str) -> float:
    """Convert between dBm and watts.

    >>> round(convert_power(30.0, "dbm_to_watts"), 12)
    1.0
    """
    if direction == "dbm_to_watts":
        return 1e-3 * 10.0 ** (value / 10.0)
    if direction == "watts_to_dbm":
        if not value > 0:
            raise ValueError(f"power must be positive for a dBm conversion, got {value}")
        return 10.0 * np.log10(value / 1e-3)
    raise ValueError(f"unknown direction {direction!r}")


def dbm_to_watts(value):
    return 1e-3 * 10.0 ** (np.asarray(value, dtype=float) / 10.0)


def watts_to_dbm(value, floor_watts: float = 0.0):
    """Vectorized watts -> dBm; values at or below ``floor_watts`` are clipped to it.

    With the default floor of zero, zero power maps to ``-inf``.
    """
    p = np.maximum(np.asarray(value, dtype=float), floor_watts)
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(p / 1e-3)


# -- spectrum dump ---------------------------------------------------------

SPECTRUM_HEADER = "frequency_thz,power_dbm,phase_rad"


def save_spectrum(field: Field, path) -> None:
    """Write a field as ``frequency_thz,power_dbm,phase_rad`` rows.

    Grid metadata goes into leading ``#`` comments so the grid reloads
    exactly; zero-power bins are written as ``-inf``.
    """
    spec = field.in_frequency()
    grid = spec.grid
    powers = watts_to_dbm(spec.bin_powers())
    phases = np.angle(spec.samples)
    freqs_thz = grid.frequencies / 1e12
    lines = [
        f"# n_points={grid.n_points}",
        f"# time_window_s={float(grid.time_window)!r}",
        f"# center_wavelength_m={float(grid.center_wavelength)!r}",
        SPECTRUM_HEADER,
    ]
    lines += [f"{f:.9f},{p!r},{ph!r}" for f, p, ph in zip(freqs_thz, powers.tolist(), phases.tolist())]
    Path(path).write_text("\n".join(lines) + "\n")


def load_spectrum(path) -> Field:
    """Read a spectrum dump back into a frequency-representation field."""
    meta = {}
    rows = []
    header_seen = False
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key.strip()] = value.strip()
            continue
        if not header_seen:
            if line.replace(" ", "") != SPECTRUM_HEADER:
                raise ValueError(f"{path}:{lineno}: expected header {SPECTRUM_HEADER!r}")
            header_seen = True
            continue
        parts = line.split(",")
        try:
            rows.append([float(x) for x in parts])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: malformed row {line!r}") from None
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected 3 columns, got {len(parts)}")
    if not rows:
        raise ValueError(f"{path}: no spectrum rows")
    data = np.array(rows)
    freqs = data[:, 0] * 1e12
    if np.any(np.diff(freqs) <= 0):
        raise ValueError(f"{path}: frequencies must be strictly increasing")
    n = len(data)
    if "time_window_s" in meta and "center_wavelength_m" in meta:
        grid = TemporalGrid(int(meta.get("n_points", n)), float(meta["time_window_s"]),
                            float(meta["center_wavelength_m"]))
    else:
        df = (freqs[-1] - freqs[0]) / (n - 1)
        grid = TemporalGrid(n, 1.0 / df, C_LIGHT / freqs[n // 2])
    if grid.n_points != n:
        raise ValueError(f"{path}: metadata says {grid.n_points} points, found {n}")
    amplitude = np.sqrt(dbm_to_watts(data[:, 1]) * n)
    return Field(grid, FREQUENCY, amplitude * np.exp(1j * data[:, 2]))
