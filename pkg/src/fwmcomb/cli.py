"""Command-line entry point: ``fwmcomb <subcommand> [options]``.

Every run reads an optional JSON config (``--config``), applies flag
overrides (flags win), validates everything at once, writes its artifacts to
``--out`` and prints a one-line summary. Exit status: 0 success, 1 validation
error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import combgen, dispersion, fwmlab, osa, sigkit, ssfm, tagsim
from . import coincidence as coin
from .sigkit import C_LIGHT

SUBCOMMANDS = (
    "fit-dispersion", "synth-input", "propagate", "predict-lines", "emulate-osa",
    "compare", "gen-tags", "analyze-tags", "calibrate", "selftest",
)

DEFAULT_CONFIG = {
    "fiber": {"length_m": 1000.0, "gamma_per_w_km": 11.0, "dz_m": 10.0},
    "grid": {"n_points": 2**18, "window_ns": 89.0, "center_nm": 1550.0},
    "dispersion": {
        "d0": dispersion.HNLF_D0, "d1": dispersion.HNLF_D1, "d2": dispersion.HNLF_D2,
        "lambda_c_nm": 1550.0, "sample_file": None,
    },
    "input": {
        "comb_file": None,
        "lines": None,  # [[frequency_thz, power_dbm], ...]
        "default_comb": {"n_lines": 5, "power_dbm": -10.0, "spacing_ghz": 50.0},
        "pump_nm": 1547.12,
        "pump_dbm": 10.2,
        "chirp": 0.0,
        "sub_spacing_mhz": 22.47,
        "envelope_fwhm_mhz": 21.23,
    },
    "osa": {"rbw_ghz": 3.0, "floor_dbm": osa.DEFAULT_FLOOR_DBM},
    "analysis": {
        "bin_ps": 50, "range_us": 1.0, "range_start_us": 0.0, "peak_window_ns": 2.0,
        "accidental_windows": 4, "jmax": 5, "delta_ghz": 50.0, "window_ghz": 10.0,
    },
    "source": {
        "rep_rate_mhz": 22.47, "mu": 0.0625, "eta_s": 0.712, "eta_i": 0.712,
        "dark_rate_s": 100.0, "dark_rate_i": 100.0, "jitter_ps": 300.0,
        "delay_ps": 33_500.0, "duration_s": 1.0,
    },
    "seed": 0,
}

# flag dest -> config path
FLAG_PATHS = {
    "n_points": ("grid", "n_points"),
    "window_ns": ("grid", "window_ns"),
    "center_nm": ("grid", "center_nm"),
    "pump_nm": ("input", "pump_nm"),
    "pump_dbm": ("input", "pump_dbm"),
    "chirp": ("input", "chirp"),
    "comb": ("input", "comb_file"),
    "dz_m": ("fiber", "dz_m"),
    "length_m": ("fiber", "length_m"),
    "gamma": ("fiber", "gamma_per_w_km"),
    "samples": ("dispersion", "sample_file"),
    "bin_ps": ("analysis", "bin_ps"),
    "range_us": ("analysis", "range_us"),
    "range_start_us": ("analysis", "range_start_us"),
    "accidental_windows": ("analysis", "accidental_windows"),
    "peak_window_ns": ("analysis", "peak_window_ns"),
    "jmax": ("analysis", "jmax"),
    "delta_ghz": ("analysis", "delta_ghz"),
    "rbw_ghz": ("osa", "rbw_ghz"),
    "floor_dbm": ("osa", "floor_dbm"),
    "mu": ("source", "mu"),
    "eta_s": ("source", "eta_s"),
    "eta_i": ("source", "eta_i"),
    "dark_s": ("source", "dark_rate_s"),
    "dark_i": ("source", "dark_rate_i"),
    "jitter_ps": ("source", "jitter_ps"),
    "delay_ps": ("source", "delay_ps"),
    "rep_mhz": ("source", "rep_rate_mhz"),
    "duration_s": ("source", "duration_s"),
    "seed": ("seed",),
}


class ValidationError(Exception):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ValidationError([message])


def _merge(base, override):
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def build_config(args) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ValidationError([f"config file not found: {path}"])
        try:
            cfg = _merge(cfg, json.loads(path.read_text()))
        except json.JSONDecodeError as exc:
            raise ValidationError([f"config {path} is not valid JSON: {exc}"]) from None
    for dest, keys in FLAG_PATHS.items():
        value = getattr(args, dest, None)
        if value is None:
            continue
        node = cfg
        for k in keys[:-1]:
            node = node[k]
        node[keys[-1]] = value
    return cfg


def _type_problems(cfg, default, prefix=""):
    problems = []
    for key, ref in default.items():
        name = f"{prefix}{key}"
        if key not in cfg:
            continue
        value = cfg[key]
        if isinstance(ref, dict):
            if isinstance(value, dict):
                problems += _type_problems(value, ref, name + ".")
            else:
                problems.append(f"{name} must be an object")
        elif isinstance(ref, (int, float)) and not isinstance(ref, bool):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                problems.append(f"{name} must be a number, got {value!r}")
    return problems


def validate_config(cfg: dict) -> list[str]:
    problems = _type_problems(cfg, DEFAULT_CONFIG)
    if problems:
        return problems

    def check(cond, msg):
        if not cond:
            problems.append(msg)

    n = cfg["grid"]["n_points"]
    check(isinstance(n, int) and n >= 2 and n & (n - 1) == 0, f"grid.n_points must be a power of two, got {n}")
    check(cfg["grid"]["window_ns"] > 0, "grid.window_ns must be positive")
    check(1000 < cfg["grid"]["center_nm"] < 2000, "grid.center_nm must lie in (1000, 2000)")
    check(cfg["fiber"]["length_m"] > 0, "fiber.length_m must be positive")
    check(cfg["fiber"]["dz_m"] > 0, "fiber.dz_m must be positive")
    check(cfg["fiber"]["gamma_per_w_km"] >= 0, "fiber.gamma_per_w_km must be non-negative")
    check(1000 < cfg["input"]["pump_nm"] < 2000, "input.pump_nm must lie in (1000, 2000)")
    check(cfg["input"]["sub_spacing_mhz"] > 0, "input.sub_spacing_mhz must be positive")
    check(cfg["input"]["envelope_fwhm_mhz"] > 0, "input.envelope_fwhm_mhz must be positive")
    for key in ("comb_file",):
        p = cfg["input"][key]
        check(p is None or Path(p).exists(), f"input.{key} not found: {p}")
    p = cfg["dispersion"]["sample_file"]
    check(p is None or Path(p).exists(), f"dispersion.sample_file not found: {p}")
    a = cfg["analysis"]
    check(a["bin_ps"] > 0, "analysis.bin_ps must be positive")
    check(a["range_us"] > 0, "analysis.range_us must be positive")
    check(a["peak_window_ns"] > 0, "analysis.peak_window_ns must be positive")
    check(a["accidental_windows"] >= 2, "analysis.accidental_windows must be >= 2")
    check(isinstance(a["jmax"], int) and a["jmax"] >= 1, "analysis.jmax must be an integer >= 1")
    check(a["delta_ghz"] > 0, "analysis.delta_ghz must be positive")
    check(cfg["osa"]["rbw_ghz"] > 0, "osa.rbw_ghz must be positive")
    s = cfg["source"]
    check(s["mu"] >= 0, "source.mu must be non-negative")
    check(0 <= s["eta_s"] <= 1 and 0 <= s["eta_i"] <= 1, "source efficiencies must lie in [0, 1]")
    check(s["dark_rate_s"] >= 0 and s["dark_rate_i"] >= 0, "source dark rates must be non-negative")
    check(s["rep_rate_mhz"] > 0, "source.rep_rate_mhz must be positive")
    check(s["duration_s"] > 0, "source.duration_s must be positive")
    seed = cfg["seed"]
    check(isinstance(seed, int) and 0 <= seed < 2**64, "seed must be an unsigned 64-bit integer")
    return problems


# -- config -> domain objects --------------------------------------------

def make_grid(cfg):
    g = cfg["grid"]
    return sigkit.make_grid(g["n_points"], g["window_ns"] * 1e-9, g["center_nm"] * 1e-9)


def make_dispersion(cfg):
    d = cfg["dispersion"]
    lam = d["lambda_c_nm"] * 1e-9
    if d["sample_file"]:
        return dispersion.fit_quadratic(dispersion.load_dispersion_samples(d["sample_file"]), lam)
    return dispersion.DispersionModel(d["d0"], d["d1"], d["d2"], lam)


def make_fiber(cfg):
    f = cfg["fiber"]
    betas = dispersion.taylor_betas(make_dispersion(cfg))
    return ssfm.FiberParams(f["length_m"], f["gamma_per_w_km"] * 1e-3, f["dz_m"], betas)


def make_pump(cfg, grid=None):
    i = cfg["input"]
    return combgen.PumpSpec(C_LIGHT / (i["pump_nm"] * 1e-9), sigkit.convert_power(i["pump_dbm"], "dbm_to_watts"))


def make_comb(cfg, grid):
    """Comb from file, inline lines, or the default 5-line comb offset by half a spacing from the pump."""
    i = cfg["input"]
    kw = {"sub_spacing": i["sub_spacing_mhz"] * 1e6, "envelope_fwhm": i["envelope_fwhm_mhz"] * 1e6}
    if i["comb_file"]:
        return combgen.load_comb(i["comb_file"], **kw)
    if i["lines"]:
        rows = sorted((f * 1e12, float(sigkit.dbm_to_watts(p))) for f, p in i["lines"])
        return combgen.CombSpec(tuple(rows), **kw)
    d = i["default_comb"]
    spacing = d["spacing_ghz"] * 1e9
    pump = make_pump(cfg)
    f_p = grid.frequencies[grid.nearest_bin(pump.frequency)]
    n = d["n_lines"]
    ks = np.arange(n) - (n + 1) // 2
    power = float(sigkit.dbm_to_watts(d["power_dbm"]))
    return combgen.CombSpec(tuple((f_p + (k + 0.5) * spacing, power) for k in ks), **kw)


def make_source(cfg):
    s = cfg["source"]
    return tagsim.SourceModel(
        rep_rate=s["rep_rate_mhz"] * 1e6, mu=s["mu"], eta_s=s["eta_s"], eta_i=s["eta_i"],
        dark_rate_s=s["dark_rate_s"], dark_rate_i=s["dark_rate_i"],
        jitter_sigma=s["jitter_ps"], delay_offset=s["delay_ps"],
    )


def _write_json(path, data):
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _require(path, what):
    if path is None:
        raise ValidationError([f"{what} is required"])
    if not Path(path).exists():
        raise ValidationError([f"{what} not found: {path}"])
    return Path(path)


# -- subcommands ---------------------------------------------------------

def cmd_fit_dispersion(args, cfg, out):
    model = make_dispersion(cfg)
    betas = dispersion.taylor_betas(model)
    zdw = dispersion.zero_dispersion_wavelengths(model)
    data = {
        "d0_s_per_m2": model.d0, "d1_s_per_m3": model.d1, "d2_s_per_m4": model.d2,
        "lambda_c_m": model.lambda_c,
        "d_at_lambda_c_ps_per_nm_km": dispersion.eval_d(model, model.lambda_c) / dispersion.PS_PER_NM_KM,
        "beta2_s2_per_m": betas.beta2, "beta3_s3_per_m": betas.beta3, "beta4_s4_per_m": betas.beta4,
        "zero_dispersion_wavelengths_nm": [z * 1e9 for z in zdw] or None,
    }
    _write_json(out / "dispersion.json", data)
    if args.svg:
        from . import plotting
        wl = np.linspace(1.50e-6, 1.60e-6, 201)
        import matplotlib.pyplot as plt
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(wl * 1e9, dispersion.eval_d(model, wl) / dispersion.PS_PER_NM_KM)
        if cfg["dispersion"]["sample_file"]:
            pts = np.array(dispersion.load_dispersion_samples(cfg["dispersion"]["sample_file"]))
            ax.plot(pts[:, 0] * 1e9, pts[:, 1] / dispersion.PS_PER_NM_KM, "o", ms=3)
        ax.set_xlabel("Wavelength (nm)")
        ax.set_ylabel("D (ps/(nm km))")
        plotting._finish(fig, ax, out / "dispersion.svg")
    return (f"D(1550 nm) = {data['d_at_lambda_c_ps_per_nm_km']:.4f} ps/(nm km), "
            f"beta2 = {betas.beta2 * 1e27:.4f} ps^2/km, ZDW = {data['zero_dispersion_wavelengths_nm'] or 'none'}")


def _synth(cfg):
    grid = make_grid(cfg)
    comb = make_comb(cfg, grid)
    pump = make_pump(cfg)
    chirp = cfg["input"]["chirp"] or None
    field, report = combgen.synthesize_input(comb, pump, grid, chirp, return_report=True)
    return grid, comb, pump, field, report


def cmd_synth_input(args, cfg, out):
    grid, comb, pump, field, report = _synth(cfg)
    sigkit.save_spectrum(field, out / "input_spectrum.csv")
    _write_json(out / "synthesis.json", {
        "configured_power_w": report.configured_power,
        "max_snap_error_hz": report.max_snap_error,
        "pump_bin": report.pump_bin,
        "pump_snap_error_hz": report.pump_snap_error,
        "merged_bins": report.merged_bins,
        "comb_lines": [{"frequency_thz": f / 1e12, "power_w": p} for f, p in comb.lines],
    })
    if args.svg:
        from . import plotting
        plotting.plot_spectrum(field, out / "input_spectrum.svg", title="Input spectrum",
                               wavelength_range=_zoom_nm(comb, pump))
    return f"synthesized {len(comb)} comb lines + pump, total {report.configured_power * 1e3:.4f} mW"


def _zoom_nm(comb, pump, margin=400e9):
    freqs = list(comb.frequencies) + [pump.frequency]
    lo, hi = min(freqs) - margin, max(freqs) + margin
    return C_LIGHT / hi * 1e9, C_LIGHT / lo * 1e9


def cmd_propagate(args, cfg, out):
    if args.input:
        field = sigkit.load_spectrum(_require(args.input, "--input"))
        grid = field.grid
        pump = make_pump(cfg)
        comb = None
    else:
        grid, comb, pump, field, _ = _synth(cfg)
    fiber = make_fiber(cfg)
    result, diag = ssfm.propagate(field.in_time(), fiber)
    spec = result.in_frequency()
    sigkit.save_spectrum(spec, out / "output_spectrum.csv")
    f_p = grid.frequencies[grid.nearest_bin(pump.frequency)]
    a = cfg["analysis"]
    preds = fwmlab.predict_lines(f_p, a["delta_ghz"] * 1e9, a["jmax"])
    sidebands = fwmlab.measure_sidebands(spec, preds, a["window_ghz"] * 1e9)
    data = diag.to_dict(per_step=args.per_step_energy)
    data["sidebands"] = [
        {"j": m.j, "signal_thz": p.signal_frequency / 1e12, "idler_thz": p.idler_frequency / 1e12,
         "signal_dbm": float(sigkit.watts_to_dbm(m.signal_power)),
         "idler_dbm": float(sigkit.watts_to_dbm(m.idler_power)),
         "signal_found": m.signal_found, "idler_found": m.idler_found}
        for m, p in zip(sidebands, preds)
    ]
    _write_json(out / "diagnostics.json", data)
    if args.svg:
        from . import plotting
        zoom = _zoom_nm(comb, pump) if comb is not None else None
        plotting.plot_spectrum(spec, out / "output_spectrum.svg", reference=field,
                               title="HNLF output", wavelength_range=zoom)
    found = sum(m.found for m in sidebands)
    return (f"propagated {diag.steps_taken} steps, energy drift {diag.relative_energy_drift:.2e}, "
            f"sidebands found for {found}/{len(sidebands)} orders")


def cmd_predict_lines(args, cfg, out):
    a = cfg["analysis"]
    f_p = C_LIGHT / (cfg["input"]["pump_nm"] * 1e-9)
    preds = fwmlab.predict_lines(f_p, a["delta_ghz"] * 1e9, a["jmax"])
    rows = ["j,signal_thz,idler_thz,signal_nm,idler_nm"]
    for p in preds:
        rows.append(f"{p.j},{p.signal_frequency / 1e12:.6f},{p.idler_frequency / 1e12:.6f},"
                    f"{C_LIGHT / p.signal_frequency * 1e9:.4f},{C_LIGHT / p.idler_frequency * 1e9:.4f}")
    (out / "lines.csv").write_text("\n".join(rows) + "\n")
    print("\n".join(rows))
    return f"{len(preds)} signal/idler pairs around {f_p / 1e12:.6f} THz"


def cmd_emulate_osa(args, cfg, out):
    field = sigkit.load_spectrum(_require(args.input, "--input"))
    rbw = cfg["osa"]["rbw_ghz"] * 1e9
    trace = osa.emulate_osa(field, rbw, args.range_nm, args.trace_points)
    osa.save_trace(trace, out / "trace.csv")
    if args.svg:
        from . import plotting
        plotting.plot_traces([trace], [f"RBW {rbw / 1e9:g} GHz"], out / "trace.svg")
    return f"trace of {len(trace)} points at RBW {rbw / 1e9:g} GHz"


def cmd_compare(args, cfg, out):
    a = osa.load_trace(_require(args.trace_a, "--trace-a"))
    b = osa.load_trace(_require(args.trace_b, "--trace-b"))
    report = osa.compare_traces(a, b, args.band_nm, cfg["osa"]["floor_dbm"], normalize=not args.absolute)
    _write_json(out / "comparison.json", report.to_dict())
    if args.svg:
        from . import plotting
        plotting.plot_traces([a, b], [Path(args.trace_a).stem, Path(args.trace_b).stem], out / "comparison.svg")
    return f"rms difference {report.rms_db:.3f} dB over {report.n_samples} samples"


def cmd_gen_tags(args, cfg, out):
    model = make_source(cfg)
    duration = cfg["source"]["duration_s"]
    sig, idl = tagsim.generate_tags(model, duration, cfg["seed"])
    coin.save_tags([sig, idl], out / "tags.csv", duration)
    model.to_json(out / "source.json")
    win = cfg["analysis"]["peak_window_ns"] * 1e3
    return (f"{len(sig)} signal / {len(idl)} idler tags over {duration:g} s, "
            f"analytic CAR {tagsim.analytic_car(model, win):.3f}")


def cmd_analyze_tags(args, cfg, out):
    streams = coin.load_tags(_require(args.tags, "--tags"))
    if len(streams) != 2:
        raise ValidationError([f"{args.tags}: expected signal and idler channels"])
    sig, idl = streams
    a = cfg["analysis"]
    lo = int(round(a["range_start_us"] * 1e6))
    hist = coin.correlogram(sig, idl, int(a["bin_ps"]), (lo, lo + int(round(a["range_us"] * 1e6))))
    win = a["peak_window_ns"] * 1e3
    report = coin.compute_car(hist, sig, idl, win, a["accidental_windows"])
    data = report.to_dict()
    if args.source:
        model = tagsim.SourceModel.from_json(_require(args.source, "--source"))
        data["analytic_car"] = tagsim.analytic_car(model, win)
    _write_json(out / "car_report.json", data)
    rows = ["delay_ps,count"] + [f"{int(c)},{n}" for c, n in zip(hist.edges[:-1], hist.counts)]
    (out / "correlogram.csv").write_text("\n".join(rows) + "\n")
    if args.svg:
        from . import plotting
        plotting.plot_correlogram(hist, out / "correlogram.svg", report)
    return (f"CAR {report.car:.2f} +/- {report.car_sigma:.2f}, offset {report.peak_offset / 1e3:.3f} ns, "
            f"period {report.peak_period / 1e3:.3f} ns, R_c {report.r_c:.1f} cps")


def cmd_calibrate(args, cfg, out):
    measured = osa.load_trace(_require(args.measured, "--measured"))
    grid = make_grid(cfg)
    comb = make_comb(cfg, grid)
    pump = make_pump(cfg)
    bounds = {
        "pump_scale": tuple(args.pump_bounds),
        "comb_scale": tuple(args.comb_bounds),
        "chirp": (-args.chirp_bound, args.chirp_bound),
    }
    result = fwmlab.calibrate(measured, comb, pump, make_fiber(cfg), grid, bounds,
                              args.max_evals, args.tol_db, cfg["analysis"]["delta_ghz"] * 1e9,
                              cfg["analysis"]["jmax"], cfg["analysis"]["window_ghz"] * 1e9)
    _write_json(out / "calibration.json", result.to_dict())
    return (f"pump x{result.pump_scale:.4f}, comb x{result.comb_scale:.4f}, chirp {result.chirp:.3g}, "
            f"rms {result.objective_history[-1]:.3f} dB after {result.evaluations} evaluations")


def cmd_selftest(args, cfg, out):
    from .selftest import run_selftest
    failures = run_selftest(verbose=True)
    if failures:
        raise SelftestFailed(f"{failures} self-test check(s) failed")
    return "all self-test checks passed"


class SelftestFailed(Exception):
    pass


COMMANDS = {
    "fit-dispersion": cmd_fit_dispersion,
    "synth-input": cmd_synth_input,
    "propagate": cmd_propagate,
    "predict-lines": cmd_predict_lines,
    "emulate-osa": cmd_emulate_osa,
    "compare": cmd_compare,
    "gen-tags": cmd_gen_tags,
    "analyze-tags": cmd_analyze_tags,
    "calibrate": cmd_calibrate,
    "selftest": cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", default=".", help="output directory (default: current)")
    common.add_argument("--seed", type=int)
    common.add_argument("--svg", action="store_true", help="also render SVG figures")
    common.add_argument("--n-points", type=int)
    common.add_argument("--window-ns", type=float)
    common.add_argument("--center-nm", type=float)
    common.add_argument("--pump-nm", type=float)
    common.add_argument("--pump-dbm", type=float)
    common.add_argument("--chirp", type=float, help="linear chirp coefficient, rad/s^2")
    common.add_argument("--comb", help="comb CSV (frequency_thz,power_dbm)")
    common.add_argument("--dz-m", type=float)
    common.add_argument("--length-m", type=float)
    common.add_argument("--gamma", type=float, help="non-linear coefficient, 1/(W km)")
    common.add_argument("--samples", help="dispersion CSV (wavelength_nm,d_ps_per_nm_km)")
    common.add_argument("--bin-ps", type=int)
    common.add_argument("--range-us", type=float, help="correlogram range width")
    common.add_argument("--range-start-us", type=float, help="first delay of the range; negative for signed ranges")
    common.add_argument("--accidental-windows", type=int)
    common.add_argument("--peak-window-ns", type=float)
    common.add_argument("--jmax", type=int)
    common.add_argument("--delta-ghz", type=float)
    common.add_argument("--rbw-ghz", type=float)
    common.add_argument("--floor-dbm", type=float)

    parser = _Parser(prog="fwmcomb", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="subcommand", parser_class=_Parser)
    sub.required = True
    p = {name: sub.add_parser(name, parents=[common]) for name in SUBCOMMANDS}

    p["propagate"].add_argument("--input", help="input spectrum CSV; synthesized from config when absent")
    p["propagate"].add_argument("--per-step-energy", action="store_true")
    p["emulate-osa"].add_argument("--input", required=True, help="spectrum CSV")
    p["emulate-osa"].add_argument("--range-nm", type=float, nargs=2)
    p["emulate-osa"].add_argument("--trace-points", type=int)
    p["compare"].add_argument("--trace-a", required=True)
    p["compare"].add_argument("--trace-b", required=True)
    p["compare"].add_argument("--band-nm", type=float, nargs=2)
    p["compare"].add_argument("--absolute", action="store_true", help="skip peak normalization")
    for name in ("gen-tags",):
        p[name].add_argument("--mu", type=float)
        p[name].add_argument("--eta-s", type=float)
        p[name].add_argument("--eta-i", type=float)
        p[name].add_argument("--dark-s", type=float)
        p[name].add_argument("--dark-i", type=float)
        p[name].add_argument("--jitter-ps", type=float)
        p[name].add_argument("--delay-ps", type=float)
        p[name].add_argument("--rep-mhz", type=float)
        p[name].add_argument("--duration-s", type=float)
    p["analyze-tags"].add_argument("--tags", required=True)
    p["analyze-tags"].add_argument("--source", help="source.json from gen-tags, adds the analytic CAR")
    p["calibrate"].add_argument("--measured", required=True, help="measured trace CSV")
    p["calibrate"].add_argument("--max-evals", type=int, default=60)
    p["calibrate"].add_argument("--tol-db", type=float, default=1e-3)
    p["calibrate"].add_argument("--pump-bounds", type=float, nargs=2, default=(0.25, 4.0))
    p["calibrate"].add_argument("--comb-bounds", type=float, nargs=2, default=(0.25, 4.0))
    p["calibrate"].add_argument("--chirp-bound", type=float, default=0.0)
    return parser


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = build_config(args)
        problems = validate_config(cfg)
        if problems:
            raise ValidationError(problems)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        summary = COMMANDS[args.command](args, cfg, out)
    except ValidationError as exc:
        for problem in exc.problems:
            print(f"error: {problem}", file=sys.stderr)
        return 1
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SelftestFailed as exc:
        print(f"selftest: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    print(f"{args.command}: {summary}")
    return 0


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
