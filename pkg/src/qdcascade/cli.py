"""Command-line entry point: ``qdcascade <command> --config run.yaml``.

Commands write plot-ready CSV (or JSON with ``--format json``) plus a
``<command>.meta.json`` block recording the config hash, versions and seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .analyzer import (
    QBER_LIMIT, cumulative_pairs, cycle_fidelity, fidelity_map, fidelity_vs_delay, g2_auto,
    polarization_maps, qber_from_fidelity,
)
from .config import ConfigError, RunConfig, load_config
from .dynamics import evolve_cycles, periodic_steady_state
from .metrics import (
    cumulative_pairs_model, cycle_populations, model_cycle_fidelity, model_fidelity_vs_delay,
    pair_rate, pairs_per_cycle,
)
from .model import DriveWaveform, pump_rate_at
from .montecarlo import CHANNELS, DetectorModel, simulate_basis_streams
from .optimize import OptimizationError, optimal_dc_pump, superequilibrium_band
from .timetags import TimeTagFormatError, read_sidecar, read_timetags, write_sidecar, write_timetags

CSV_VERSION = 1


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "nan" if np.isnan(v) else repr(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return None if np.isnan(v) else v
    return obj


def write_json(path: Path, data: dict) -> Path:
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")
    return path


def write_table(out: Path, name: str, columns: dict, fmt: str = "csv") -> Path:
    """Write equal-length columns as a versioned CSV or a JSON object of lists."""
    if fmt == "json":
        return write_json(out / f"{name}.json", {"table": name, "version": CSV_VERSION,
                                                  "columns": columns})
    path = out / f"{name}.csv"
    keys = list(columns)
    n = len(next(iter(columns.values()))) if columns else 0
    with open(path, "w", newline="") as fh:
        fh.write(f"# qdcascade {name} v{CSV_VERSION}\n")
        fh.write(",".join(keys) + "\n")
        for i in range(n):
            fh.write(",".join(_fmt(columns[k][i]) for k in keys) + "\n")
    return path


def metadata(cfg: RunConfig, command: str, **extra) -> dict:
    meta = {
        "command": command,
        "config_sha256": cfg.digest(),
        "config": cfg.raw,
        "seed": cfg.simulation["seed"],
        "versions": {"qdcascade": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__},
    }
    meta.update(extra)
    return meta


def _write_meta(out: Path, cfg: RunConfig, command: str, **extra):
    write_json(out / f"{command}.meta.json", metadata(cfg, command, **extra))


def cmd_populations(cfg: RunConfig, out: Path, fmt: str = "csv") -> Path:
    """Periodic-steady-state populations over a few cycles."""
    w = cfg.build_waveform()
    p0 = periodic_steady_state(cfg.device, w)
    traj = evolve_cycles(cfg.device, w, p0, cfg.simulation["n_cycles_plot"],
                         cfg.simulation["samples_per_cycle"])
    path = write_table(out, "populations", {
        "t_ps": traj.times, "p_g": traj.g, "p_x": traj.x, "p_xx": traj.xx,
        "pump_per_ps": pump_rate_at(w, traj.times),
    }, fmt)
    _write_meta(out, cfg, "populations", waveform=w.__dict__,
                max_ground_population=float(traj.g.max()))
    return path


def sweep_table(cfg: RunConfig, f_min: float, f_max: float, n_points: int) -> dict:
    wf = cfg.waveform
    pw, pr = float(wf["pulse_width"]), float(wf["pulse_rate"])
    dc = 0.0 if wf["dc_rate"] == "optimal" else float(wf["dc_rate"])
    _, r_dc = optimal_dc_pump(cfg.device)
    freqs = np.array([f_min]) if n_points == 1 else np.geomspace(f_min, f_max, n_points)
    rates, ppc = [], []
    for f in freqs:
        w = DriveWaveform.pulsed(f, pulse_width=pw, pulse_rate=pr, dc_rate=dc)
        rates.append(pair_rate(cfg.device, w))
        ppc.append(pairs_per_cycle(cfg.device, w))
    rates = np.array(rates)
    above = rates > r_dc
    edge = np.zeros(freqs.size, bool)
    edge[1:] |= above[1:] != above[:-1]
    edge[:-1] |= above[1:] != above[:-1]
    return {
        "f_ghz": freqs,
        "pair_rate_per_ns": rates,
        "dc_optimal_rate_per_ns": np.full(freqs.size, r_dc),
        "pairs_per_cycle": np.array(ppc),
        "enhancement": rates / r_dc - 1,
        "above_dc": above,
        "band_edge": edge & above,
        "is_max": np.arange(freqs.size) == int(np.argmax(rates)),
    }


def cmd_sweep(cfg: RunConfig, out: Path, fmt: str = "csv", f_min=None, f_max=None,
              n_points=None) -> Path:
    sw = cfg.sweep
    f_min = sw["f_min"] if f_min is None else f_min
    f_max = sw["f_max"] if f_max is None else f_max
    n_points = sw["n_points"] if n_points is None else n_points
    path = write_table(out, "sweep", sweep_table(cfg, f_min, f_max, n_points), fmt)
    _write_meta(out, cfg, "sweep", f_min=f_min, f_max=f_max, n_points=n_points)
    return path


def optimize_summary(cfg: RunConfig) -> dict:
    wf = cfg.waveform
    pw, pr = float(wf["pulse_width"]), float(wf["pulse_rate"])
    band = superequilibrium_band(cfg.device, pw, pr)
    res = band.to_dict()
    p_dc, _ = optimal_dc_pump(cfg.device)
    res["optimal_dc_pump_per_ps"] = p_dc
    if not band.empty:
        w = DriveWaveform.pulsed(band.f_optimal, pulse_width=pw, pulse_rate=pr)
        res["pairs_per_cycle_at_optimal"] = pairs_per_cycle(cfg.device, w)
        res["pairs_per_cycle_at_optimal_within"] = pairs_per_cycle(cfg.device, w, "within")
        grid = np.linspace(0, w.period, 2001)
        res["max_ground_population_at_optimal"] = float(
            cycle_populations(cfg.device, w, grid)[:, 0].max())
    return res


def cmd_optimize(cfg: RunConfig, out: Path, fmt: str = "json") -> Path:
    res = optimize_summary(cfg)
    path = write_json(out / "optimize.json", {"result": res, "metadata": metadata(cfg, "optimize")})
    _write_meta(out, cfg, "optimize")
    return path


def _detector(cfg: RunConfig) -> DetectorModel:
    d = cfg.detector
    return DetectorModel(jitter_sigma=float(d["jitter_sigma"]), efficiency=d["efficiency"],
                         dark_rate=d["dark_rate"])


def cmd_montecarlo(cfg: RunConfig, out: Path, fmt: str = "csv") -> dict:
    """Simulate one four-channel acquisition per analyzer basis and write time tags."""
    w = cfg.build_waveform()
    sim = cfg.simulation
    duration = sim["n_cycles"] * w.period
    streams = simulate_basis_streams(cfg.device, w, duration, sim["seed"], _detector(cfg),
                                     frame=sim["frame"], bases=sim["bases"])
    p_avg = cycle_populations(cfg.device, w, np.linspace(0, w.period, 4001)[:-1]).mean(axis=0)
    files, singles = {}, {}
    for basis, (tags, em) in streams.items():
        path = out / f"timetags_{basis}.qdtt"
        write_timetags(tags, path)
        counts = np.bincount(tags["channel"], minlength=4)[:4]
        singles[basis] = {
            "duration_ps": duration,
            "counts": counts,
            "rate_per_ps": counts / duration if duration else np.zeros(4),
            "xx_rate_per_ps": counts[:2].sum() / duration if duration else 0.0,
            "x_rate_per_ps": counts[2:].sum() / duration if duration else 0.0,
            "linked_pairs": int(em.linked_pairs()[1].size),
        }
        write_sidecar(path, w.period, CHANNELS, cfg.raw, basis=basis, duration_ps=duration,
                      n_sync=sim["n_cycles"], waveform=w.__dict__, seed=sim["seed"],
                      frame=sim["frame"])
        files[basis] = str(path)
    summary = {
        "files": files,
        "singles": singles,
        "analytic": {
            "xx_rate_per_ps": cfg.device.a * p_avg[2],
            "x_rate_per_ps": cfg.device.b * p_avg[1],
            "pairs_per_cycle": pairs_per_cycle(cfg.device, w),
        },
        "metadata": metadata(cfg, "montecarlo"),
    }
    write_json(out / "montecarlo_summary.json", summary)
    _write_meta(out, cfg, "montecarlo")
    return summary


def _load_streams(paths, period=None):
    streams, meta = {}, {}
    for p in paths:
        if "=" in str(p):
            basis, p = str(p).split("=", 1)
            side = {}
            try:
                side = read_sidecar(p)
            except FileNotFoundError:
                pass
        else:
            side = read_sidecar(p)
            basis = side["basis"]
        streams[basis] = read_timetags(p)
        meta[basis] = side
    periods = {m.get("sync_period_ps") for m in meta.values()} - {None}
    if period is None:
        if len(periods) != 1:
            raise ValueError("sync period unknown or inconsistent; pass --period")
        period = periods.pop()
    n_sync = {m.get("n_sync") for m in meta.values()} - {None}
    return streams, float(period), (n_sync.pop() if len(n_sync) == 1 else None)


def _map_rows(times_xx, times_x, values, stderr):
    tt1, tt2 = np.meshgrid(times_xx, times_x, indexing="ij")
    return {"t_xx_ps": tt1.ravel(), "t_x_ps": tt2.ravel(), "value": values.ravel(),
            "stderr": stderr.ravel()}


def cmd_analyze(cfg: RunConfig, out: Path, paths, dc_paths=None, fmt: str = "csv",
                period: float | None = None) -> dict:
    """Correlation analysis of time-tag files from a three-basis acquisition."""
    an = cfg.analysis
    streams, period, n_sync = _load_streams(paths, period)
    bw = float(an["bin_width"])
    span = int(an["n_cycles_span"])
    maps = polarization_maps(streams, period, bw, span, n_sync)
    summary = {"period_ps": period, "bin_width_ps": maps.reference.bin_width,
               "normalisation": {"g2_far_offsets": an["norm_window"],
                                 "min_counts_per_basis": an["min_counts"]}}

    first = next(iter(streams.values()))
    g2 = g2_auto(first, an["g2_channels"], period, bw, span, tuple(an["norm_window"]))
    write_table(out, "g2_auto", {"delay_ps": g2.delays, "g2": g2.g2}, fmt)
    write_table(out, "g2_auto_peaks", {"offset": g2.offsets, "area": g2.peak_areas}, fmt)
    summary["g2_center"] = g2.center
    summary["g2_center_stderr"] = g2.center_stderr

    unpol = None
    for b in maps.co:
        m = maps.co[b] + maps.cross[b]
        unpol = m if unpol is None else unpol + m
    g2map = unpol.g2(tuple(an["norm_window"]))[span]
    tc = unpol.bin_centers
    write_table(out, "g2_2d", _map_rows(tc, tc, g2map, np.full(g2map.shape, np.nan)), fmt)

    mode = an["fidelity_mode"]
    fss = cfg.device.fss_omega
    fm = fidelity_map(maps, fss, mode, 0, an["min_counts"])
    write_table(out, "fidelity_map", _map_rows(fm.t_xx, fm.t_x, fm.values, fm.stderr), fmt)

    kmax = min(int(an["max_cycle_offset"]), span)
    offs = np.arange(-kmax, kmax + 1)
    cf = [cycle_fidelity(maps, int(n), fss, mode) for n in offs]
    write_table(out, "cycle_fidelity", {"cycle_offset": offs, "fidelity": [c[0] for c in cf],
                                        "stderr": [c[1] for c in cf]}, fmt)
    f0, f0_err = cf[kmax]
    q, secure = qber_from_fidelity(f0)
    summary.update({"same_cycle_fidelity": f0, "same_cycle_fidelity_stderr": f0_err,
                    "qber": q, "qber_stderr": 2 * f0_err / 3, "qber_limit": QBER_LIMIT,
                    "secure": secure})

    fd = fidelity_vs_delay(maps, 0, an["min_counts"], fss, mode)
    write_table(out, "fidelity_vs_delay", {"delay_ps": fd.delays, "fidelity": fd.fidelity,
                                           "stderr": fd.stderr, "coincidences": fd.counts}, fmt)

    if dc_paths:
        dc_streams, dc_period, dc_sync = _load_streams(dc_paths, period)
        dc_maps = polarization_maps(dc_streams, dc_period, bw, span, dc_sync)
        cp = cumulative_pairs(maps, dc_maps)
        write_table(out, "cumulative_pairs", {
            "t_ps": cp.times, "ar_pairs": cp.ar_pairs, "dc_pairs": cp.dc_pairs,
            "ar_norm_total": cp.ar_norm_total, "dc_norm_total": cp.dc_norm_total,
            "ar_norm_same_cycle": cp.ar_norm_same_cycle,
            "dc_norm_same_cycle": cp.dc_norm_same_cycle}, fmt)
        summary.update({"enhancement_ratio": cp.ratio, "enhancement_ratio_stderr": cp.ratio_stderr,
                        "dc_same_cycle_fidelity": cycle_fidelity(dc_maps, 0, fss, mode)[0]})
    summary["metadata"] = metadata(cfg, "analyze", inputs=[str(p) for p in paths],
                                   dc_inputs=[str(p) for p in dc_paths or []])
    write_json(out / "analysis_summary.json", summary)
    _write_meta(out, cfg, "analyze")
    return summary


def cmd_compare(cfg: RunConfig, out: Path, fmt: str = "csv") -> dict:
    """Model-side AR (optimal clock) vs DC (optimal pump) comparison."""
    wf = cfg.waveform
    pw, pr = float(wf["pulse_width"]), float(wf["pulse_rate"])
    band = superequilibrium_band(cfg.device, pw, pr)
    if band.empty:
        raise ValueError("pulsed driving never beats DC for this configuration")
    w_ar = DriveWaveform.pulsed(band.f_optimal, pulse_width=pw, pulse_rate=pr)
    p_dc, _ = optimal_dc_pump(cfg.device)
    w_dc = DriveWaveform.dc(p_dc, w_ar.period)
    t, c_ar = cumulative_pairs_model(cfg.device, w_ar)
    _, c_dc = cumulative_pairs_model(cfg.device, w_dc)
    write_table(out, "compare_cumulative", {"t_ps": t, "ar_pairs": c_ar, "dc_pairs": c_dc}, fmt)
    delays = np.linspace(0, w_ar.period, 200)
    f_ar = model_fidelity_vs_delay(cfg.device, w_ar, delays)
    f_dc = model_fidelity_vs_delay(cfg.device, w_dc, delays)
    write_table(out, "compare_fidelity_vs_delay",
                {"delay_ps": delays, "ar_fidelity": f_ar, "dc_fidelity": f_dc}, fmt)
    res = {
        "f_optimal_ghz": band.f_optimal, "optimal_dc_pump_per_ps": p_dc,
        "ar_pairs_per_cycle": pairs_per_cycle(cfg.device, w_ar),
        "dc_pairs_per_cycle": pairs_per_cycle(cfg.device, w_dc),
        "ar_same_cycle_fidelity": model_cycle_fidelity(cfg.device, w_ar),
        "dc_same_cycle_fidelity": model_cycle_fidelity(cfg.device, w_dc),
        "enhancement": band.enhancement,
        "metadata": metadata(cfg, "compare"),
    }
    write_json(out / "compare.json", res)
    _write_meta(out, cfg, "compare")
    return res


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qdcascade", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="YAML run configuration")
        p.add_argument("--out", type=Path, help="output directory (overrides output.dir)")
        p.add_argument("--seed", type=int, help="override simulation.seed")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        return p

    common(sub.add_parser("populations", help="populations over the driving cycle"))
    sp = common(sub.add_parser("sweep", help="pair rate versus clock rate"))
    sp.add_argument("--f-min", type=float)
    sp.add_argument("--f-max", type=float)
    sp.add_argument("--n-points", type=int)
    common(sub.add_parser("optimize", help="optimal clock rate and superequilibrium band"))
    common(sub.add_parser("montecarlo", help="simulate time-tag files, one per analyzer basis"))
    ap = common(sub.add_parser("analyze", help="correlation analysis of time-tag files"))
    ap.add_argument("inputs", nargs="+", help="time-tag files (basis read from sidecar, "
                                              "or given as basis=PATH)")
    ap.add_argument("--dc", nargs="+", default=None, help="DC reference acquisition files")
    ap.add_argument("--period", type=float, help="sync period in ps if no sidecar")
    common(sub.add_parser("compare", help="model AR vs DC comparison"))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        overrides = {}
        if args.seed is not None:
            overrides["simulation"] = {"seed": args.seed}
        if args.out is not None:
            overrides["output"] = {"dir": str(args.out)}
        cfg = load_config(args.config, overrides)
        out = cfg.output_dir
        out.mkdir(parents=True, exist_ok=True)
        fmt = args.format
        if args.command == "populations":
            cmd_populations(cfg, out, fmt)
        elif args.command == "sweep":
            cmd_sweep(cfg, out, fmt, args.f_min, args.f_max, args.n_points)
        elif args.command == "optimize":
            cmd_optimize(cfg, out, fmt)
        elif args.command == "montecarlo":
            cmd_montecarlo(cfg, out, fmt)
        elif args.command == "analyze":
            cmd_analyze(cfg, out, args.inputs, args.dc, fmt, args.period)
        elif args.command == "compare":
            cmd_compare(cfg, out, fmt)
    except (ConfigError, ValueError, OSError, OptimizationError, TimeTagFormatError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, ConfigError):
            err["key"] = exc.key
        print(json.dumps(err), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
