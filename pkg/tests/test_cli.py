import json

import numpy as np
import pytest

from qdcascade.cli import main
from qdcascade.metrics import model_cycle_fidelity
from qdcascade.model import DeviceParams
from qdcascade.timetags import read_timetags


def run(*args):
    return main([str(a) for a in args])


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# qdcascade ") and lines[0].endswith(" v1")
    header = lines[1].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[2:]])
    return header, data


@pytest.fixture
def config(tmp_path):
    p = tmp_path / "run.yaml"
    p.write_text("device: {f0: 0.96, t_coh: 1500}\nsimulation: {n_cycles: 20000, seed: 3}\n"
                 "sweep: {n_points: 40}\n")
    return p


def test_populations(config, tmp_path):
    out = tmp_path / "o"
    assert run("populations", "--config", config, "--out", out) == 0
    header, data = read_csv(out / "populations.csv")
    assert header == ["t_ps", "p_g", "p_x", "p_xx", "pump_per_ps"]
    assert np.allclose(data[:, 1:4].sum(axis=1), 1)
    assert data[:, 1].max() <= 0.6
    meta = json.loads((out / "populations.meta.json").read_text())
    assert meta["seed"] == 3 and len(meta["config_sha256"]) == 64


def test_populations_250mhz(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("waveform: {frequency_ghz: 0.25}\nsimulation: {n_cycles_plot: 1}\n")
    run("populations", "--config", cfg, "--out", tmp_path)
    _, data = read_csv(tmp_path / "populations.csv")
    assert data[-1, 1] > 0.99


def test_sweep_flags(config, tmp_path):
    run("sweep", "--config", config, "--out", tmp_path)
    header, data = read_csv(tmp_path / "sweep.csv")
    col = {h: data[:, i] for i, h in enumerate(header)}
    assert col["is_max"].sum() == 1
    assert col["band_edge"].sum() == 2
    i = int(np.argmax(col["pair_rate_per_ns"]))
    assert col["is_max"][i] == 1 and col["pair_rate_per_ns"][i] > col["dc_optimal_rate_per_ns"][i]


def test_sweep_single_point(config, tmp_path):
    run("sweep", "--config", config, "--out", tmp_path, "--n-points", 1, "--f-min", 0.7)
    _, data = read_csv(tmp_path / "sweep.csv")
    assert data.shape[0] == 1 and data[0, 0] == 0.7


def test_json_format(config, tmp_path):
    run("sweep", "--config", config, "--out", tmp_path, "--format", "json")
    d = json.loads((tmp_path / "sweep.json").read_text())
    assert d["version"] == 1 and len(d["columns"]["f_ghz"]) == 40


def test_optimize(config, tmp_path):
    run("optimize", "--config", config, "--out", tmp_path)
    res = json.loads((tmp_path / "optimize.json").read_text())["result"]
    assert 1.0 <= res["f_optimal"] <= 1.7
    assert 0.3 <= res["enhancement"] <= 0.6
    assert "f_high" in res["metadata"]["ideal_reset"]


def test_compare(config, tmp_path):
    run("compare", "--config", config, "--out", tmp_path)
    res = json.loads((tmp_path / "compare.json").read_text())
    assert res["ar_same_cycle_fidelity"] > res["dc_same_cycle_fidelity"]
    _, cum = read_csv(tmp_path / "compare_cumulative.csv")
    assert cum[-1, 1] > cum[-1, 2]


def test_reruns_byte_identical(config, tmp_path):
    # the output directory is part of the recorded config, so rerun into the same one
    out = tmp_path / "o"
    snapshots = []
    for _ in range(2):
        for cmd in ("populations", "sweep", "montecarlo", "optimize"):
            run(cmd, "--config", config, "--out", out)
        snapshots.append({f.name: f.read_bytes() for f in sorted(out.iterdir())})
    assert snapshots[0] == snapshots[1]
    assert len(snapshots[0]) > 10


def test_zero_duration_montecarlo(tmp_path):
    cfg = tmp_path / "z.yaml"
    cfg.write_text("simulation: {n_cycles: 0}\n")
    assert run("montecarlo", "--config", cfg, "--out", tmp_path) == 0
    for b in ("rect", "diag", "circ"):
        assert read_timetags(tmp_path / f"timetags_{b}.qdtt").size == 0
        assert json.loads((tmp_path / f"timetags_{b}.qdtt.json").read_text())["basis"] == b


def test_errors_are_json(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("device: {tau_xxx: 3}\n")
    assert run("optimize", "--config", cfg, "--out", tmp_path) != 0
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ConfigError" and err["key"] == "device.tau_xxx"
    bad = tmp_path / "bad.qdtt"
    bad.write_bytes(b"garbage!")
    assert run("analyze", "--out", tmp_path, "--period", 800, f"rect={bad}") != 0
    assert json.loads(capsys.readouterr().err)["error"] == "TimeTagFormatError"


@pytest.fixture(scope="module")
def closed_loop(tmp_path_factory):
    root = tmp_path_factory.mktemp("loop")
    ar = root / "ar.yaml"
    ar.write_text("device: {f0: 0.96, t_coh: 1500}\nsimulation: {n_cycles: 300000, seed: 8}\n"
                  f"output: {{dir: {root / 'ar'}}}\n")
    dc = root / "dc.yaml"
    dc.write_text("device: {f0: 0.96, t_coh: 1500}\nwaveform: {mode: dc, dc_rate: optimal}\n"
                  f"simulation: {{n_cycles: 300000, seed: 9}}\noutput: {{dir: {root / 'dc'}}}\n")
    assert run("montecarlo", "--config", ar) == 0
    assert run("montecarlo", "--config", dc) == 0
    inputs = sorted((root / "ar").glob("*.qdtt"))
    dc_inputs = sorted((root / "dc").glob("*.qdtt"))
    assert run("analyze", "--config", ar, "--out", root / "ana", *inputs, "--dc", *dc_inputs) == 0
    return root


def test_singles_match_analytic(closed_loop):
    s = json.loads((closed_loop / "ar" / "montecarlo_summary.json").read_text())
    for b, v in s["singles"].items():
        dur = v["duration_ps"]
        n_xx = v["counts"][0] + v["counts"][1]
        n_x = v["counts"][2] + v["counts"][3]
        assert abs(n_xx - s["analytic"]["xx_rate_per_ps"] * dur) < 3 * np.sqrt(n_xx)
        assert abs(n_x - s["analytic"]["x_rate_per_ps"] * dur) < 3 * np.sqrt(n_x)


def test_analyze_closed_loop(closed_loop):
    from qdcascade.model import DriveWaveform
    from qdcascade.optimize import optimal_clock_rate
    s = json.loads((closed_loop / "ana" / "analysis_summary.json").read_text())
    d = DeviceParams(f0=0.96, t_coh=1500)
    w = DriveWaveform.pulsed(optimal_clock_rate(d)[0])
    assert s["same_cycle_fidelity"] == pytest.approx(model_cycle_fidelity(d, w), abs=0.01)
    assert s["qber"] == pytest.approx(2 * (1 - s["same_cycle_fidelity"]) / 3)
    assert s["secure"] is True
    assert s["enhancement_ratio"] > 1
    for name in ("g2_auto", "g2_2d", "fidelity_map", "cycle_fidelity", "fidelity_vs_delay",
                 "cumulative_pairs"):
        assert (closed_loop / "ana" / f"{name}.csv").exists()
    header, _ = read_csv(closed_loop / "ana" / "fidelity_map.csv")
    assert header == ["t_xx_ps", "t_x_ps", "value", "stderr"]
