"""Run configuration: one YAML file with device, waveform, simulation, detector,
analysis, sweep and output sections.

Unknown keys and invalid values raise :class:`ConfigError` naming the
offending key.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import yaml

from .model import DeviceParams, DriveWaveform

DEFAULTS = {
    "device": {
        "tau_xx": 300.0,
        "tau_x": 500.0,
        "fss_omega": 0.0,
        "f0": 1.0,
        "t_coh": 2000.0,
        "tunnel_rate": 0.0,
    },
    "waveform": {
        # "ar": pulse train; "dc": constant pump
        "mode": "ar",
        # GHz, or "optimal" to use the optimum (clock rate for ar, pump for dc frame)
        "frequency_ghz": "optimal",
        "pulse_width": 50.0,
        "pulse_rate": 0.2,
        # 1/ps, or "optimal" (dc mode only)
        "dc_rate": 0.0,
        "phase": 0.0,
    },
    "simulation": {
        "n_cycles": 100000,
        "seed": 1,
        "frame": "rotating",
        "bases": ["rect", "diag", "circ"],
        "samples_per_cycle": 200,
        "n_cycles_plot": 3,
    },
    "detector": {
        "jitter_sigma": 0.0,
        "efficiency": 1.0,
        "dark_rate": 0.0,
    },
    "analysis": {
        "bin_width": 16.0,
        "n_cycles_span": 20,
        "norm_window": [5, 20],
        "min_counts": 25,
        "g2_channels": [2, 3],
        "fidelity_mode": "rotating",
        "max_cycle_offset": 5,
    },
    "sweep": {
        "f_min": 0.1,
        "f_max": 10.0,
        "n_points": 100,
    },
    "output": {
        "dir": "out",
    },
}


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key
        self.message = message


def _merge(base: dict, override: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        loc = f"{where}.{k}" if where else str(k)
        if k not in base:
            raise ConfigError(loc, "unknown key")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(loc, "expected a section")
            out[k] = _merge(base[k], v, loc)
        else:
            out[k] = v
    return out


@dataclass
class RunConfig:
    raw: dict
    device: DeviceParams

    @property
    def waveform(self) -> dict:
        return self.raw["waveform"]

    @property
    def simulation(self) -> dict:
        return self.raw["simulation"]

    @property
    def detector(self) -> dict:
        return self.raw["detector"]

    @property
    def analysis(self) -> dict:
        return self.raw["analysis"]

    @property
    def sweep(self) -> dict:
        return self.raw["sweep"]

    @property
    def output_dir(self) -> Path:
        return Path(self.raw["output"]["dir"])

    def digest(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def build_waveform(self) -> DriveWaveform:
        """Resolve "optimal" placeholders and construct the drive."""
        from .optimize import optimal_clock_rate, optimal_dc_pump

        wf = self.waveform
        pw, pr, phase = float(wf["pulse_width"]), float(wf["pulse_rate"]), float(wf["phase"])
        freq = wf["frequency_ghz"]
        if freq == "optimal":
            freq = optimal_clock_rate(self.device, pw, pr)[0]
        freq = float(freq)
        if wf["mode"] == "dc":
            rate = wf["dc_rate"]
            if rate == "optimal":
                rate = optimal_dc_pump(self.device)[0]
            return DriveWaveform.dc(float(rate), 1000.0 / freq)
        dc = float(wf["dc_rate"]) if wf["dc_rate"] != "optimal" else 0.0
        return DriveWaveform.pulsed(freq, pulse_width=pw, pulse_rate=pr, dc_rate=dc, phase=phase)


def _check(cond, key, msg):
    if not cond:
        raise ConfigError(key, msg)


def _number_or_optimal(v, key):
    if v == "optimal":
        return
    _check(isinstance(v, (int, float)) and not isinstance(v, bool), key,
           "expected a number or 'optimal'")


def validate(raw: dict) -> RunConfig:
    dev = raw["device"]
    for k, v in dev.items():
        _check(isinstance(v, (int, float)) and not isinstance(v, bool), f"device.{k}",
               "expected a number")
    try:
        device = DeviceParams(**{k: float(v) for k, v in dev.items()})
    except ValueError as exc:
        raise ConfigError("device", str(exc)) from None

    wf = raw["waveform"]
    _check(wf["mode"] in ("ar", "dc"), "waveform.mode", "expected 'ar' or 'dc'")
    _number_or_optimal(wf["frequency_ghz"], "waveform.frequency_ghz")
    if wf["frequency_ghz"] != "optimal":
        _check(wf["frequency_ghz"] > 0, "waveform.frequency_ghz", "must be positive")
    _number_or_optimal(wf["dc_rate"], "waveform.dc_rate")
    if wf["dc_rate"] != "optimal":
        _check(wf["dc_rate"] >= 0, "waveform.dc_rate", "must be non-negative")
    else:
        _check(wf["mode"] == "dc", "waveform.dc_rate", "'optimal' only applies in dc mode")
    for k in ("pulse_width", "pulse_rate", "phase"):
        _check(isinstance(wf[k], (int, float)) and wf[k] >= 0, f"waveform.{k}",
               "expected a non-negative number")

    sim = raw["simulation"]
    _check(isinstance(sim["n_cycles"], int) and sim["n_cycles"] >= 0, "simulation.n_cycles",
           "expected a non-negative integer")
    _check(isinstance(sim["seed"], int) and sim["seed"] >= 0, "simulation.seed",
           "expected a non-negative integer")
    _check(sim["frame"] in ("rotating", "lab"), "simulation.frame", "expected 'rotating' or 'lab'")
    _check(isinstance(sim["bases"], list) and sim["bases"], "simulation.bases",
           "expected a non-empty list")
    _check(isinstance(sim["samples_per_cycle"], int) and sim["samples_per_cycle"] >= 2,
           "simulation.samples_per_cycle", "expected an integer >= 2")
    _check(isinstance(sim["n_cycles_plot"], int) and sim["n_cycles_plot"] >= 1,
           "simulation.n_cycles_plot", "expected an integer >= 1")

    det = raw["detector"]
    _check(det["jitter_sigma"] >= 0, "detector.jitter_sigma", "must be non-negative")
    for k in ("efficiency", "dark_rate"):
        v = det[k]
        vals = v if isinstance(v, list) else [v]
        _check(len(vals) in (1, 4), f"detector.{k}", "expected a number or a list of 4")
        for x in vals:
            _check(isinstance(x, (int, float)) and x >= 0, f"detector.{k}",
                   "expected non-negative numbers")
    _check(all(x <= 1 for x in (det["efficiency"] if isinstance(det["efficiency"], list)
                                else [det["efficiency"]])),
           "detector.efficiency", "must not exceed 1")

    an = raw["analysis"]
    _check(an["bin_width"] > 0, "analysis.bin_width", "must be positive")
    nw = an["norm_window"]
    _check(isinstance(nw, list) and len(nw) == 2 and 0 < nw[0] <= nw[1],
           "analysis.norm_window", "expected [lo, hi] with 0 < lo <= hi")
    _check(an["n_cycles_span"] >= nw[1], "analysis.n_cycles_span",
           "must reach the normalisation window")
    _check(an["min_counts"] >= 0, "analysis.min_counts", "must be non-negative")
    _check(an["fidelity_mode"] in ("rotating", "demodulate"), "analysis.fidelity_mode",
           "expected 'rotating' or 'demodulate'")
    _check(isinstance(an["max_cycle_offset"], int) and an["max_cycle_offset"] >= 0,
           "analysis.max_cycle_offset", "expected a non-negative integer")

    sw = raw["sweep"]
    _check(0 < sw["f_min"] <= sw["f_max"], "sweep.f_min", "need 0 < f_min <= f_max")
    _check(isinstance(sw["n_points"], int) and sw["n_points"] >= 1, "sweep.n_points",
           "expected a positive integer")
    return RunConfig(raw, device)


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Read a YAML config (or defaults when ``path`` is None) and validate it."""
    user = {}
    if path is not None:
        text = Path(path).read_text()
        user = yaml.safe_load(text) or {}
        if not isinstance(user, dict):
            raise ConfigError("<root>", "expected a mapping of sections")
    raw = _merge(DEFAULTS, user)
    if overrides:
        raw = _merge(raw, overrides)
    return validate(raw)


def default_config_yaml() -> str:
    return yaml.safe_dump(DEFAULTS, sort_keys=False)
