"""Figure rendering for CLI reports (non-interactive backend, written to files)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "fwmcomb"  # stable element ids between runs
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .sigkit import C_LIGHT, watts_to_dbm  # noqa: E402

FLOOR_DBM = -120.0


def _finish(fig, ax, path):
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)
    return path


def plot_spectrum(field, path, reference=None, title=None, floor_dbm=FLOOR_DBM,
                  wavelength_range=None):
    """Bin power (dBm) versus wavelength; ``reference`` is drawn underneath."""
    fig, ax = plt.subplots(figsize=(8, 4))
    for f, color, label in ((reference, "tab:red", "input"), (field, "tab:blue", "output")):
        if f is None:
            continue
        spec = f.in_frequency()
        wl = C_LIGHT / spec.grid.frequencies * 1e9
        ax.plot(wl, watts_to_dbm(spec.bin_powers(), 1e-3 * 10 ** (floor_dbm / 10)),
                color=color, lw=0.6, label=label)
    if wavelength_range is not None:
        ax.set_xlim(*wavelength_range)
    ax.set_xlabel("Wavelength (nm)")
    ax.set_ylabel("Power per bin (dBm)")
    ax.set_ylim(bottom=floor_dbm)
    if reference is not None:
        ax.legend(loc="upper right")
    if title:
        ax.set_title(title)
    return _finish(fig, ax, path)


def plot_traces(traces, labels, path, title=None):
    fig, ax = plt.subplots(figsize=(8, 4))
    for tr, label in zip(traces, labels):
        ax.plot(tr.wavelength_nm, tr.power_dbm, lw=0.8, label=label)
    ax.set_xlabel("Wavelength (nm)")
    ax.set_ylabel(f"Power (dBm, RBW {traces[0].rbw / 1e9:g} GHz)")
    ax.legend(loc="upper right")
    if title:
        ax.set_title(title)
    return _finish(fig, ax, path)


def plot_correlogram(hist, path, report=None, inset_ns=5.0):
    """Coincidence counts versus delay, with a zoom on the coincidence peak."""
    fig, ax = plt.subplots(figsize=(8, 4))
    t_ns = hist.centers / 1e3
    ax.plot(t_ns, hist.counts, lw=0.6, color="tab:blue")
    ax.set_xlabel("Time difference (ns)")
    ax.set_ylabel(f"Coincidences / {hist.bin_width} ps")
    if report is not None:
        text = (f"CAR = {report.car:.1f} ± {report.car_sigma:.1f}\n"
                f"R_s = {report.r_s / 1e3:.0f} kcps\nR_c = {report.r_c / 1e3:.2f} kcps")
        ax.text(0.98, 0.95, text, transform=ax.transAxes, ha="right", va="top", fontsize=9)
        inset = ax.inset_axes([0.55, 0.35, 0.3, 0.35])
        center = report.peak_offset / 1e3
        sel = np.abs(t_ns - center) <= inset_ns
        inset.plot(t_ns[sel], hist.counts[sel], lw=0.8, color="tab:blue")
        inset.tick_params(labelsize=7)
    return _finish(fig, ax, path)
