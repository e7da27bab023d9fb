"""FWM line bookkeeping, sideband measurement and input-power calibration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.optimize import minimize

from .combgen import CombSpec, PumpSpec, synthesize_input
from .osa import Trace, emulate_osa
from .sigkit import Field, TemporalGrid
from .ssfm import FiberParams, propagate

DEFAULT_WINDOW = 10e9
DEFAULT_ORDERS = 5


@dataclass(frozen=True)
class LinePrediction:
    j: int
    signal_frequency: float
    idler_frequency: float
    pump_frequency: float

    @property
    def delta_f(self) -> float:
        return (self.signal_frequency - self.idler_frequency) / (2 * self.j)


def predict_lines(pump_frequency: float, delta_f: float, j_max: int) -> list[LinePrediction]:
    """Signal/idler pairs ``f_p +/- j delta_f`` for ``j = 1..j_max``."""
    if not delta_f > 0:
        raise ValueError(f"delta_f must be positive, got {delta_f}")
    if int(j_max) != j_max or j_max < 1:
        raise ValueError(f"j_max must be an integer >= 1, got {j_max}")
    return [
        LinePrediction(j, pump_frequency + j * delta_f, pump_frequency - j * delta_f, pump_frequency)
        for j in range(1, int(j_max) + 1)
    ]


@dataclass(frozen=True)
class CorrelationEntry:
    j: int  # index distance |m' - m|
    separation: float  # f_m' - f_m, Hz (signed)
    signal_frequency: float
    idler_frequency: float


@dataclass
class CorrelationMatrix:
    comb_frequencies: np.ndarray
    pump_frequency: float
    entries: dict = dc_field(default_factory=dict)  # (m, m') -> CorrelationEntry

    def undirected(self) -> dict:
        return {k: v for k, v in self.entries.items() if k[0] < k[1]}

    def orders(self) -> np.ndarray:
        """N x N array of pair orders, 0 on the diagonal."""
        n = len(self.comb_frequencies)
        out = np.zeros((n, n), dtype=int)
        for (m, mp), e in self.entries.items():
            out[m, mp] = e.j
        return out


def correlation_matrix(comb_frequencies, pump_frequency: float) -> CorrelationMatrix:
    """Which signal/idler pair each ordered pair of comb lines feeds."""
    f = np.asarray(comb_frequencies, dtype=float)
    if f.ndim != 1 or len(f) < 2:
        raise ValueError("need at least 2 comb frequencies")
    if np.any(np.diff(f) <= 0):
        raise ValueError("comb frequencies must be strictly increasing")
    entries = {}
    for m in range(len(f)):
        for mp in range(len(f)):
            if m == mp:
                continue
            sep = f[mp] - f[m]
            entries[(m, mp)] = CorrelationEntry(
                abs(mp - m), sep, pump_frequency + abs(sep), pump_frequency - abs(sep)
            )
    return CorrelationMatrix(f, pump_frequency, entries)


@dataclass(frozen=True)
class SidebandMeasurement:
    j: int
    signal_power: float  # W
    idler_power: float
    signal_found: bool
    idler_found: bool
    signal_floor: float = 0.0
    idler_floor: float = 0.0

    @property
    def found(self) -> bool:
        return self.signal_found and self.idler_found


def _spectrum_arrays(spectrum) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(spectrum, Trace):
        return spectrum.by_frequency()
    if isinstance(spectrum, Field):
        return spectrum.grid.frequencies, spectrum.bin_powers()
    raise TypeError(f"expected a Field or Trace, got {type(spectrum).__name__}")


def _peak_and_floor(freqs, powers, f0, window, outer):
    lo, hi = np.searchsorted(freqs, [f0 - window, f0 + window], side="left")
    if hi <= lo:
        return 0.0, 0.0
    peak = float(powers[lo:hi].max())
    olo, ohi = np.searchsorted(freqs, [f0 - outer, f0 + outer], side="left")
    ring = np.concatenate([powers[olo:lo], powers[hi:ohi]])
    floor = float(np.median(ring)) if ring.size else 0.0
    return peak, floor


def _is_found(peak, floor):
    return peak > 0 and peak >= 2.0 * floor  # 3 dB over the local median


def measure_sidebands(spectrum, predictions, window: float = DEFAULT_WINDOW) -> list[SidebandMeasurement]:
    """Peak power near each predicted signal and idler frequency.

    The local floor is the median power between ``window`` and ``delta_f/2``
    from the prediction; a line counts as found when its peak is at least
    3 dB above that floor.
    """
    predictions = list(predictions)
    if not predictions:
        return []
    delta_f = predictions[0].delta_f
    if not window < delta_f / 2:
        raise ValueError(
            f"window {window / 1e9:g} GHz overlaps adjacent orders (delta_f/2 = {delta_f / 2e9:g} GHz)"
        )
    freqs, powers = _spectrum_arrays(spectrum)
    out = []
    for pred in predictions:
        ps, fs = _peak_and_floor(freqs, powers, pred.signal_frequency, window, delta_f / 2)
        pi, fi = _peak_and_floor(freqs, powers, pred.idler_frequency, window, delta_f / 2)
        out.append(SidebandMeasurement(pred.j, ps, pi, _is_found(ps, fs), _is_found(pi, fi), fs, fi))
    return out


def pump_peak(spectrum, pump_frequency: float, window: float = DEFAULT_WINDOW) -> float:
    freqs, powers = _spectrum_arrays(spectrum)
    peak, _ = _peak_and_floor(freqs, powers, pump_frequency, window, window)
    return peak


# -- calibration -----------------------------------------------------------

PARAMS = ("pump_scale", "comb_scale", "chirp")
DEFAULT_BOUNDS = {"pump_scale": (0.25, 4.0), "comb_scale": (0.25, 4.0), "chirp": (0.0, 0.0)}


class _BudgetExhausted(Exception):
    pass


@dataclass
class CalibrationResult:
    pump_scale: float
    comb_scale: float
    chirp: float
    objective_history: list  # best-so-far RMS dB after each evaluation
    evaluations: int
    residuals_db: dict  # label -> simulated minus measured, dB
    converged: bool

    def to_dict(self) -> dict:
        return {
            "pump_scale": self.pump_scale,
            "comb_scale": self.comb_scale,
            "chirp": self.chirp,
            "objective_history_db": list(self.objective_history),
            "evaluations": self.evaluations,
            "residuals_db": self.residuals_db,
            "converged": self.converged,
        }


def simulate_output(comb: CombSpec, pump: PumpSpec, fiber: FiberParams, grid: TemporalGrid,
                    pump_scale: float = 1.0, comb_scale: float = 1.0, chirp: float = 0.0) -> Field:
    """Synthesize the scaled input and propagate it; returns the output spectrum."""
    spec = synthesize_input(comb.scaled(comb_scale), pump.scaled(pump_scale), grid, chirp or None)
    out, _ = propagate(spec.in_time(), fiber)
    return out.in_frequency()


def _line_powers(spectrum, pump_frequency, predictions, window):
    """Labelled peak powers (pump, s_j, i_j) plus found flags."""
    values = {"p": (pump_peak(spectrum, pump_frequency, window), True)}
    for m in measure_sidebands(spectrum, predictions, window):
        values[f"s{m.j}"] = (m.signal_power, m.signal_found)
        values[f"i{m.j}"] = (m.idler_power, m.idler_found)
    return values


def calibrate(measured: Trace, comb: CombSpec, pump: PumpSpec, fiber: FiberParams,
              grid: TemporalGrid, bounds: dict | None = None, max_evals: int = 80,
              tol_db: float = 1e-3, delta_f: float | None = None,
              orders: int = DEFAULT_ORDERS, window: float = DEFAULT_WINDOW) -> CalibrationResult:
    """Fit pump scale, comb scale and chirp to a measured trace.

    The objective is the RMS dB error between simulated and measured peak
    powers of the pump line and the signal/idler sidebands ``j = 1..orders``
    (only lines the measurement shows above its local floor). Each simulated
    output is passed through the same OSA emulation as the measurement's RBW.
    Minimization is bounded Nelder-Mead on the box normalized to unit sides.

    Args:
        bounds: ``{name: (lo, hi)}`` for ``pump_scale``, ``comb_scale``,
            ``chirp``; a parameter with ``lo == hi`` is held fixed. Must contain
            the initial point (1, 1, 0).
        max_evals: Evaluations allowed after the initial point.
    """
    box = dict(DEFAULT_BOUNDS)
    box.update(bounds or {})
    x0 = np.array([1.0, 1.0, 0.0])
    lo = np.array([box[k][0] for k in PARAMS], dtype=float)
    hi = np.array([box[k][1] for k in PARAMS], dtype=float)
    if np.any(lo > hi) or np.any(x0 < lo) or np.any(x0 > hi):
        raise ValueError(f"bounds {box} must contain the initial point (1, 1, 0)")
    free = hi > lo

    if delta_f is None:
        f = comb.frequencies
        delta_f = float(np.min(np.diff(f))) if len(f) > 1 else 50e9
    predictions = predict_lines(pump.frequency, delta_f, orders)
    target = _line_powers(measured, pump.frequency, predictions, window)
    labels = [k for k, (p, ok) in target.items() if ok and p > 0]
    if not labels:
        raise ValueError("measured trace shows neither pump nor sidebands above its floor")

    evaluated = []  # (objective, x, residuals)
    best = [math.inf]
    history = []

    def evaluate(x):
        if np.any(x < lo) or np.any(x > hi):
            raise AssertionError(f"calibration stepped outside bounds: {x}")
        out = simulate_output(comb, pump, fiber, grid, *x)
        sim = _line_powers(emulate_osa(out, measured.rbw), pump.frequency, predictions, window)
        res = {}
        for k in labels:
            p_sim = max(sim[k][0], 1e-300)
            res[k] = 10 * math.log10(p_sim / target[k][0])
        obj = math.sqrt(sum(r * r for r in res.values()) / len(res))
        evaluated.append((obj, x.copy(), res))
        best[0] = min(best[0], obj)
        history.append(best[0])
        return obj

    def full_point(u):
        x = x0.copy()
        x[free] = lo[free] + np.clip(u, 0.0, 1.0) * (hi[free] - lo[free])
        return x

    evaluate(x0)
    budget = [int(max_evals)]

    def objective(u):
        if budget[0] <= 0:
            raise _BudgetExhausted
        budget[0] -= 1
        return evaluate(full_point(u))

    converged = False
    if free.any() and max_evals > 0:
        u0 = (x0[free] - lo[free]) / (hi[free] - lo[free])
        dim = int(free.sum())
        simplex = [u0]
        for k in range(dim):
            v = u0.copy()
            v[k] = v[k] + 0.1 if v[k] + 0.1 <= 1.0 else v[k] - 0.1
            simplex.append(v)
        try:
            res = minimize(
                objective, u0, method="Nelder-Mead",
                bounds=[(0.0, 1.0)] * dim,
                options={"initial_simplex": np.array(simplex), "fatol": tol_db,
                         "xatol": 1e-6, "maxfev": 10**9},
            )
            converged = bool(res.success)
        except _BudgetExhausted:
            pass

    obj, x, residuals = min(evaluated, key=lambda item: item[0])
    return CalibrationResult(float(x[0]), float(x[1]), float(x[2]), history,
                             len(evaluated), residuals, converged)
