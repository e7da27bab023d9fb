"""Quadratic fiber dispersion D(lambda), its Taylor beta coefficients and phase helpers.

Units are SI throughout: D in s/m^2 (1 ps/(nm km) = 1e-6 s/m^2), wavelengths
in meters, beta_n in s^n/m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .sigkit import C_LIGHT

BAND = (1e-6, 2e-6)
FIT_CENTER = 1550e-9
PS_PER_NM_KM = 1e-6  # s/m^2

# HNLF quadratic fit coefficients at 1550 nm
HNLF_D0 = -2.36e-4  # s/m^2
HNLF_D1 = 297.5  # s/m^3
HNLF_D2 = -9.4e7  # s/m^4
HNLF_GAMMA = 11e-3  # 1/(W m)
HNLF_LENGTH = 1000.0  # m


def _check_band(wavelength, name="wavelength"):
    w = np.asarray(wavelength, dtype=float)
    if np.any(~((w > BAND[0]) & (w < BAND[1]))):
        raise ValueError(f"{name} outside the modeled 1-2 um band: {wavelength}")


@dataclass(frozen=True)
class DispersionModel:
    d0: float
    d1: float
    d2: float
    lambda_c: float = FIT_CENTER

    def __post_init__(self):
        _check_band(self.lambda_c, "lambda_c")

    def __call__(self, wavelength):
        return eval_d(self, wavelength)


@dataclass(frozen=True)
class BetaSet:
    beta2: float
    beta3: float
    beta4: float
    lambda_c: float = FIT_CENTER

    @classmethod
    def zero(cls, lambda_c: float = FIT_CENTER) -> "BetaSet":
        return cls(0.0, 0.0, 0.0, lambda_c)


def default_hnlf() -> DispersionModel:
    """The HNLF dispersion fit used for the comb simulations."""
    return DispersionModel(HNLF_D0, HNLF_D1, HNLF_D2, FIT_CENTER)


def fit_quadratic(samples, center: float = FIT_CENTER) -> DispersionModel:
    """Least-squares quadratic fit of D(lambda).

    The normal equations are solved in the recentered coordinate
    ``x = (lambda - center) / s``, with ``s`` the largest sample distance from
    ``center``, and the coefficients are mapped back to the raw-wavelength basis.

    Args:
        samples: Iterable of ``(wavelength_m, D_s_per_m2)`` pairs.
        center: Recentering wavelength; also stored as the model's lambda_c.
    """
    data = np.asarray(list(samples), dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValueError("samples must be (wavelength, D) pairs")
    wl, d = data[:, 0], data[:, 1]
    _check_band(wl)
    if len(np.unique(wl)) < 3:
        raise ValueError("need at least 3 distinct wavelengths for a quadratic fit")

    scale = float(np.max(np.abs(wl - center))) or 1e-9
    x = (wl - center) / scale
    vander = np.vstack([np.ones_like(x), x, x * x]).T
    normal = vander.T @ vander
    rhs = vander.T @ d
    a0, a1, a2 = np.linalg.solve(normal, rhs)

    # D = a2 x^2 + a1 x + a0 with x = (lam - c)/s
    c, s = center, scale
    d2 = a2 / s**2
    d1 = a1 / s - 2 * a2 * c / s**2
    d0 = a0 - a1 * c / s + a2 * c**2 / s**2
    return DispersionModel(float(d0), float(d1), float(d2), center)


def eval_d(model: DispersionModel, wavelength):
    """D(lambda) = d2 lambda^2 + d1 lambda + d0, in s/m^2."""
    _check_band(wavelength)
    w = np.asarray(wavelength, dtype=float)
    out = model.d2 * w**2 + model.d1 * w + model.d0
    return float(out) if out.ndim == 0 else out


def taylor_betas(model: DispersionModel, lambda_c: float | None = None) -> BetaSet:
    """beta2..beta4 at ``lambda_c`` from the quadratic D(lambda)."""
    lam = model.lambda_c if lambda_c is None else lambda_c
    _check_band(lam, "lambda_c")
    d0, d1, d2 = model.d0, model.d1, model.d2
    c = C_LIGHT
    lam2 = lam * lam
    beta2 = -lam2 * (d2 * lam2 + d1 * lam + d0) / (2 * math.pi * c)
    beta3 = lam2 * (4 * d2 * lam**3 + 3 * d1 * lam2 + 2 * d0 * lam) / (4 * math.pi**2 * c**2)
    beta4 = -lam2 * (20 * d2 * lam**4 + 12 * d1 * lam**3 + 6 * d0 * lam2) / (8 * math.pi**3 * c**3)
    return BetaSet(beta2, beta3, beta4, lam)


def zero_dispersion_wavelengths(model: DispersionModel) -> list[float]:
    """Real roots of D(lambda) inside the band; empty list when there are none."""
    a, b, c = model.d2, model.d1, model.d0
    if a == 0:
        roots = [] if b == 0 else [-c / b]
    else:
        disc = b * b - 4 * a * c
        if disc < 0:
            return []
        sq = math.sqrt(disc)
        roots = sorted({(-b - sq) / (2 * a), (-b + sq) / (2 * a)})
    return [r for r in roots if BAND[0] < r < BAND[1]]


def linear_transfer_phase(betas: BetaSet, omega_offsets, z: float) -> np.ndarray:
    """Spectral phase accumulated by pure dispersion over a length ``z``.

    Applied as ``exp(1j * phi)`` on the frequency samples this advances the
    field by ``z`` under the dispersive part of the propagation equation.
    """
    if z < 0:
        raise ValueError(f"z must be non-negative, got {z}")
    w = np.asarray(omega_offsets, dtype=float)
    return (betas.beta2 / 2 * w**2 + betas.beta3 / 6 * w**3 + betas.beta4 / 24 * w**4) * z


def phase_mismatch(betas: BetaSet, gamma: float, pump_power: float, detuning: float) -> float:
    """Degenerate-pump FWM phase mismatch, 1/m.

    ``2 gamma P + beta2 dw^2 + beta4/12 dw^4``; positive values mean the
    linear mismatch adds to the Kerr term. Odd orders cancel for symmetric
    signal/idler pairs.
    """
    if pump_power < 0:
        raise ValueError(f"pump_power must be non-negative, got {pump_power}")
    dw = detuning
    return 2 * gamma * pump_power + betas.beta2 * dw**2 + betas.beta4 / 12 * dw**4


def load_dispersion_samples(path) -> list[tuple[float, float]]:
    """Read ``wavelength_nm,d_ps_per_nm_km`` rows as SI ``(m, s/m^2)`` pairs."""
    out = []
    lines = Path(path).read_text().splitlines()
    header_seen = False
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not header_seen:
            if line.replace(" ", "") != "wavelength_nm,d_ps_per_nm_km":
                raise ValueError(f"{path}:{lineno}: expected header wavelength_nm,d_ps_per_nm_km")
            header_seen = True
            continue
        try:
            wl_nm, d_ps = (float(x) for x in line.split(","))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: malformed row {line!r}") from None
        out.append((wl_nm * 1e-9, d_ps * PS_PER_NM_KM))
    return out


def save_dispersion_samples(samples, path) -> None:
    rows = ["wavelength_nm,d_ps_per_nm_km"]
    rows += [f"{float(wl) / 1e-9!r},{float(d) / PS_PER_NM_KM!r}" for wl, d in samples]
    Path(path).write_text("\n".join(rows) + "\n")
