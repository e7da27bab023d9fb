"""Synthetic SNSPD time tags for a pulsed photon-pair source, and its CAR oracle.

Pair number per pulse is Poisson(mu); each photon of a pair is detected
independently (efficiency eta_s / eta_i). By Poisson thinning the per-pulse
counts of signal-only, idler-only and both-detected pairs are independent
Poisson variables, so each class is generated as a Poisson number of events
placed on uniformly drawn pulse indices. Dark counts are homogeneous Poisson
processes over the whole duration.

Random numbers come from ``numpy.random.Generator(PCG64(seed))``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .coincidence import IDLER, SIGNAL, TagStream

MLL_REP_RATE = 22.47e6


@dataclass(frozen=True)
class SourceModel:
    rep_rate: float = MLL_REP_RATE  # Hz
    mu: float = 0.0625  # mean pairs per pulse
    eta_s: float = 0.712
    eta_i: float = 0.712
    dark_rate_s: float = 100.0  # counts/s
    dark_rate_i: float = 100.0
    jitter_sigma: float = 300.0  # ps, per detector
    delay_offset: float = 33_500.0  # ps, idler path delay

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("mu must be non-negative")
        for name in ("eta_s", "eta_i"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        for name in ("dark_rate_s", "dark_rate_i", "jitter_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not self.rep_rate > 0:
            raise ValueError("rep_rate must be positive")

    @property
    def period_ps(self) -> float:
        return 1e12 / self.rep_rate

    def singles_rates(self) -> tuple[float, float]:
        """Expected detection rates (signal, idler), counts/s."""
        return (self.rep_rate * self.mu * self.eta_s + self.dark_rate_s,
                self.rep_rate * self.mu * self.eta_i + self.dark_rate_i)

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2))

    @classmethod
    def from_json(cls, path) -> "SourceModel":
        return cls(**json.loads(Path(path).read_text()))


def generate_tags(model: SourceModel, duration: float, seed: int = 0) -> tuple[TagStream, TagStream]:
    """Simulate ``duration`` seconds of signal and idler detections."""
    if not duration > 0:
        raise ValueError(f"duration must be positive, got {duration}")
    rng = np.random.Generator(np.random.PCG64(seed))
    n_pulses = int(math.floor(duration * model.rep_rate))
    period = model.period_ps
    end_ps = int(round(duration * 1e12))

    both = model.mu * model.eta_s * model.eta_i
    s_only = model.mu * model.eta_s * (1 - model.eta_i)
    i_only = model.mu * (1 - model.eta_s) * model.eta_i

    def pulses(rate):
        k = rng.poisson(rate * n_pulses) if n_pulses else 0
        return rng.integers(0, n_pulses, size=k) if k else np.empty(0, dtype=np.int64)

    p_both = pulses(both)
    p_s = pulses(s_only)
    p_i = pulses(i_only)

    def detect(pulse_idx, delay):
        t = pulse_idx * period + delay
        if model.jitter_sigma > 0:
            t = t + rng.normal(0.0, model.jitter_sigma, size=t.size)
        return np.rint(t).astype(np.int64)

    def darks(rate):
        k = rng.poisson(rate * duration)
        return rng.integers(0, end_ps + 1, size=k, dtype=np.int64)

    sig = np.concatenate([detect(p_both, 0.0), detect(p_s, 0.0), darks(model.dark_rate_s)])
    idl = np.concatenate([
        detect(p_both, model.delay_offset),
        detect(p_i, model.delay_offset),
        darks(model.dark_rate_i),
    ])
    sig = np.sort(sig[(sig >= 0) & (sig <= end_ps)])
    idl = np.sort(idl[(idl >= 0) & (idl <= end_ps)])
    return TagStream(SIGNAL, sig, duration), TagStream(IDLER, idl, duration)


def analytic_car(model: SourceModel, peak_window: float | None = None) -> float:
    """Expected CAR of the pulsed source for a coincidence window of +/- ``peak_window`` ps.

    With ``a = mu eta`` the per-pulse detection means and the dark rates
    ``D``, the expected counts in one side-peak window (per pulse) are

        acc = a_s a_i + W (a_s D_i + D_s a_i) + D_s D_i W / f_rep

    with ``W = 2 peak_window`` and the zero-order window holds
    ``acc + mu eta_s eta_i``. Without ``peak_window`` the window spans a full
    period (``W = 1/f_rep``) and the expression reduces to
    ``1 + mu eta_s eta_i / ((a_s + d_s)(a_i + d_i))`` with ``d = D / f_rep``.
    Assumes the window captures the whole jitter-broadened peak.
    """
    a_s = model.mu * model.eta_s
    a_i = model.mu * model.eta_i
    if peak_window is None:
        w = 1.0 / model.rep_rate
    else:
        w = min(2 * peak_window * 1e-12, 1.0 / model.rep_rate)
    ds, di = model.dark_rate_s, model.dark_rate_i
    acc = a_s * a_i + w * (a_s * di + ds * a_i) + ds * di * w / model.rep_rate
    if acc == 0:
        raise ValueError("no accidental events: the model has no detectable counts")
    return 1.0 + model.mu * model.eta_s * model.eta_i / acc
