"""Cross-correlograms of two detector time-tag streams and CAR estimation."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.signal import find_peaks

TAG_HEADER = "channel,timestamp_ps"
SIGNAL, IDLER = 0, 1

DEFAULT_BIN_PS = 50
DEFAULT_RANGE_PS = (0, 1_000_000)
DEFAULT_PEAK_WINDOW_PS = 2_000
DEFAULT_ACCIDENTAL_WINDOWS = 4

_CHUNK = 1 << 20


class TagFormatError(ValueError):
    def __init__(self, message, row=None):
        self.row = row
        super().__init__(message if row is None else f"row {row}: {message}")


@dataclass(frozen=True)
class TagStream:
    """Detection times of one channel, integer picoseconds."""

    channel_id: int
    timestamps: np.ndarray
    duration: float  # s

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64)
        if ts.ndim != 1:
            raise ValueError("timestamps must be 1-D")
        if ts.size and np.any(np.diff(ts) < 0):
            bad = int(np.argmax(np.diff(ts) < 0)) + 1
            raise ValueError(f"timestamps not sorted at index {bad}")
        if ts.size and (ts[0] < 0 or ts[-1] > round(self.duration * 1e12)):
            raise ValueError("timestamps must lie within [0, duration]")
        ts = ts.copy()
        ts.setflags(write=False)
        object.__setattr__(self, "timestamps", ts)

    def __len__(self):
        return len(self.timestamps)

    @property
    def rate(self) -> float:
        return len(self.timestamps) / self.duration if self.duration > 0 else 0.0

    def shifted(self, offset_ps: int, duration: float | None = None) -> "TagStream":
        return TagStream(self.channel_id, self.timestamps + int(offset_ps),
                         self.duration if duration is None else duration)


def save_tags(streams, path, duration: float | None = None) -> None:
    """Write streams as one ``channel,timestamp_ps`` table merged in time order."""
    streams = list(streams)
    if duration is None:
        duration = max((s.duration for s in streams), default=0.0)
    chans = np.concatenate([np.full(len(s), s.channel_id, dtype=np.int64) for s in streams]) \
        if streams else np.empty(0, dtype=np.int64)
    times = np.concatenate([s.timestamps for s in streams]) if streams else np.empty(0, dtype=np.int64)
    order = np.lexsort((chans, times))
    with open(path, "w") as fh:
        fh.write(f"# duration_s={float(duration)!r}\n{TAG_HEADER}\n")
        np.savetxt(fh, np.column_stack([chans[order], times[order]]), fmt="%d", delimiter=",")


def load_tags(path, duration: float | None = None) -> list[TagStream]:
    """Read a tag CSV into one stream per channel (signal first).

    Timestamps must be non-decreasing within each channel. The duration comes
    from a ``# duration_s=`` comment, the ``duration`` argument, or the last
    timestamp, in that order.
    """
    text = Path(path).read_text()
    meta = {}
    body = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].strip().partition("=")
            if sep:
                meta[key.strip()] = value.strip()
            continue
        body.append(line)
    if body and body[0].replace(" ", "") == TAG_HEADER:
        body = body[1:]
    if not body:
        return []
    try:
        data = np.array([[int(x) for x in line.split(",")] for line in body], dtype=np.int64)
    except ValueError:
        for row, line in enumerate(body):
            try:
                [int(x) for x in line.split(",")]
            except ValueError:
                raise TagFormatError(f"malformed row {line!r}", row) from None
        raise
    if data.ndim != 2 or data.shape[1] != 2:
        raise TagFormatError("expected two columns")
    chans, times = data[:, 0], data[:, 1]
    unknown = ~np.isin(chans, (SIGNAL, IDLER))
    if unknown.any():
        row = int(np.argmax(unknown))
        raise TagFormatError(f"unknown channel {chans[row]}", row)
    if "duration_s" in meta:
        duration = float(meta["duration_s"])
    elif duration is None:
        duration = float(times.max()) * 1e-12
    streams = []
    for ch in (SIGNAL, IDLER):
        rows = np.flatnonzero(chans == ch)
        ts = times[rows]
        back = np.flatnonzero(np.diff(ts) < 0)
        if back.size:
            raise TagFormatError(f"timestamp out of order on channel {ch}", int(rows[back[0] + 1]))
        streams.append(TagStream(ch, ts, duration))
    return streams


@dataclass
class Correlogram:
    """Histogram of idler-minus-signal delays; bin k covers ``[lo + k w, lo + (k+1) w)``."""

    bin_width: int  # ps
    range: tuple  # (min_delay, max_delay) ps
    counts: np.ndarray

    @property
    def edges(self) -> np.ndarray:
        return self.range[0] + self.bin_width * np.arange(len(self.counts) + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.range[0] + self.bin_width * (np.arange(len(self.counts)) + 0.5)

    def merged(self, other: "Correlogram") -> "Correlogram":
        if other.bin_width != self.bin_width or tuple(other.range) != tuple(self.range):
            raise ValueError("cannot merge correlograms with different binning")
        return Correlogram(self.bin_width, tuple(self.range), self.counts + other.counts)


def _n_bins(bin_width: int, delay_range) -> int:
    lo, hi = delay_range
    if not bin_width > 0:
        raise ValueError(f"bin_width must be positive, got {bin_width}")
    if not hi > lo:
        raise ValueError(f"empty delay range {delay_range}")
    span = hi - lo
    if span % bin_width:
        raise ValueError(f"range width {span} ps is not a multiple of bin width {bin_width} ps")
    return span // bin_width


def correlogram(signal: TagStream, idler: TagStream, bin_width: int = DEFAULT_BIN_PS,
                delay_range=DEFAULT_RANGE_PS) -> Correlogram:
    """Histogram of ``t_idler - t_signal`` over every tag pair inside the range.

    For each signal tag the matching idler tags are located by binary search
    on the sorted idler stream, so the cost is near-linear in the number of
    tags for a bounded range. Signal tags are processed in chunks whose
    partial histograms are summed.
    """
    bin_width = int(bin_width)
    lo, hi = int(delay_range[0]), int(delay_range[1])
    n_bins = _n_bins(bin_width, (lo, hi))
    counts = np.zeros(n_bins, dtype=np.int64)
    ts = signal.timestamps
    ti = idler.timestamps
    if ts.size == 0 or ti.size == 0:
        return Correlogram(bin_width, (lo, hi), counts)
    for start in range(0, ts.size, _CHUNK):
        chunk = ts[start:start + _CHUNK]
        first = np.searchsorted(ti, chunk + lo, side="left")
        last = np.searchsorted(ti, chunk + hi, side="left")
        n_match = last - first
        total = int(n_match.sum())
        if total == 0:
            continue
        owner = np.repeat(np.arange(chunk.size), n_match)
        starts = np.cumsum(n_match) - n_match
        idx = first[owner] + (np.arange(total) - starts[owner])
        delays = ti[idx] - chunk[owner]
        counts += np.bincount((delays - lo) // bin_width, minlength=n_bins)
    return Correlogram(bin_width, (lo, hi), counts)


@dataclass
class PeakTrain:
    offset: float | None  # ps, first peak
    period: float | None  # ps, median spacing
    peak_indices: np.ndarray
    peak_positions: np.ndarray  # ps, refined centroids

    @classmethod
    def known(cls, hist: Correlogram, offset: float, period: float) -> "PeakTrain":
        """Train at ``offset + k period`` inside the histogram, for sources with a known clock."""
        lo, hi = hist.range
        k0 = math.ceil((lo - offset) / period)
        k1 = math.floor((hi - 1 - offset) / period)
        pos = offset + period * np.arange(k0, k1 + 1)
        idx = ((pos - lo) // hist.bin_width).astype(int)
        return cls(float(pos[0]) if pos.size else None, float(period), idx, pos)


def _centroid(hist: Correlogram, k: int, half_width: int, baseline: float) -> float:
    a, b = max(0, k - half_width), min(len(hist.counts), k + half_width + 1)
    w = np.clip(hist.counts[a:b] - baseline, 0, None).astype(float)
    centers = hist.centers[a:b]
    if w.sum() == 0:
        return float(hist.centers[k])
    return float(np.sum(w * centers) / w.sum())


def find_peak_train(hist: Correlogram, min_prominence: float,
                    min_separation_ps: float = 5_000, refine_ps: float = 1_000) -> PeakTrain:
    """Locate the repeating coincidence peaks of a pulsed source.

    Local maxima with at least ``min_prominence`` counts of prominence and at
    least ``min_separation_ps`` apart are kept; each position is refined to the
    baseline-subtracted centroid within ``refine_ps``. ``offset`` is the first
    peak and ``period`` the median spacing of consecutive peaks (``None`` with
    fewer than two peaks).
    """
    counts = hist.counts
    if counts.size == 0:
        raise ValueError("empty histogram")
    distance = max(1, int(min_separation_ps // hist.bin_width))
    idx, _ = find_peaks(counts, prominence=min_prominence, distance=distance)
    if idx.size == 0:
        return PeakTrain(None, None, idx, np.empty(0))
    baseline = float(np.median(counts))
    half = max(1, int(refine_ps // hist.bin_width))
    pos = np.array([_centroid(hist, int(k), half, baseline) for k in idx])
    period = float(np.median(np.diff(pos))) if pos.size >= 2 else None
    return PeakTrain(float(pos[0]), period, idx, pos)


@dataclass
class CarReport:
    coincidence_counts: int
    mean_accidental_counts: float
    accidental_counts: list
    car: float
    car_sigma: float
    car_infinite: bool
    r_s: float
    r_i: float
    r_c: float
    peak_offset: float  # ps
    peak_period: float  # ps
    peak_window: float  # ps

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.car_infinite:
            d["car"] = None
            d["car_sigma"] = None
        return d


def _window_sum(hist: Correlogram, center: float, half_width: float) -> int:
    # bins whose centers lie inside the window
    c = hist.centers
    sel = (c >= center - half_width) & (c <= center + half_width)
    return int(hist.counts[sel].sum())


def compute_car(hist: Correlogram, signal: TagStream, idler: TagStream,
                peak_window: float = DEFAULT_PEAK_WINDOW_PS,
                n_accidental_windows: int = DEFAULT_ACCIDENTAL_WINDOWS,
                train: PeakTrain | None = None, min_prominence: float | None = None) -> CarReport:
    """Coincidence-to-accidental ratio from a pulsed-source correlogram.

    The coincidence peak is the tallest peak of the train. Coincidences are
    the counts within ``+/- peak_window`` of it; the accidental level is the
    mean over equal windows centered on the next ``n_accidental_windows``
    peak positions one period apart (earlier positions are used when later
    ones fall outside the histogram). The uncertainty follows Poisson
    statistics: ``car * sqrt(1/C + 1/sum(A))``.
    """
    if n_accidental_windows < 2:
        raise ValueError("need at least 2 accidental windows")
    if train is None:
        if min_prominence is None:
            min_prominence = max(5.0, 5 * math.sqrt(max(float(np.median(hist.counts)), 1.0)))
        train = find_peak_train(hist, min_prominence)
    if train.period is None:
        raise ValueError("no coincidence peak train found in the correlogram")
    period = train.period
    if not peak_window < period / 2:
        raise ValueError(f"peak_window {peak_window} ps must be below half the period ({period / 2} ps)")

    tallest = int(np.argmax(hist.counts[train.peak_indices]))
    zero = float(train.peak_positions[tallest])
    coincidences = _window_sum(hist, zero, peak_window)

    lo_edge, hi_edge = hist.range
    centers = []
    k = 1
    while len(centers) < n_accidental_windows and k < 10_000:
        c = zero + k * period
        if c + peak_window > hi_edge:
            break
        centers.append(c)
        k += 1
    k = 1
    while len(centers) < n_accidental_windows:
        c = zero - k * period
        if c - peak_window < lo_edge:
            raise ValueError("histogram range too short for the requested accidental windows")
        centers.append(c)
        k += 1
    accidentals = [_window_sum(hist, c, peak_window) for c in centers]
    total_acc = sum(accidentals)
    mean_acc = total_acc / len(accidentals)

    duration = signal.duration
    if total_acc == 0:
        car, sigma, inf = math.inf, math.inf, True
    else:
        car = coincidences / mean_acc
        sigma = car * math.sqrt((1 / coincidences if coincidences else 0.0) + 1 / total_acc)
        inf = False
    return CarReport(
        coincidence_counts=coincidences,
        mean_accidental_counts=mean_acc,
        accidental_counts=accidentals,
        car=car,
        car_sigma=sigma,
        car_infinite=inf,
        r_s=len(signal) / duration,
        r_i=len(idler) / idler.duration,
        r_c=coincidences / duration,
        peak_offset=zero,
        peak_period=period,
        peak_window=float(peak_window),
    )
