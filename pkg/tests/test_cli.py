import json

import numpy as np
import pytest

from quditspeed import __version__
from quditspeed.cli import (ConfigError, ExperimentConfig, RunRecord, export_pulse_csv, fidelity_vs_nmax, main,
                            parse_config, pulses_from_csv, read_pulse_csv, run, sample_pulses)
from quditspeed.grape import GrapeContext, OptimizationRun, evaluate
from quditspeed.model import T_MIN, CouplingSpec, DeviceModel, PulseSet

SMALL_OPT = {"T": 0.8, "omega_max": 20, "M": 8, "max_iters": 40, "restarts": 2, "substeps": 8}


def random_pulses(seed=0, M=5, T=1.0, omega=10.0):
    rng = np.random.default_rng(seed)
    a = rng.uniform(0, omega, (2, 2, M)) * np.exp(2j * np.pi * rng.uniform(size=(2, 2, M)))
    return PulseSet(a, T, omega)


def write_config(tmp_path, data):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(data))
    return str(path)


def test_config_snapshot_round_trip():
    cfg = parse_config({"kind": "scan-time", "seed": 4, "device": {"d_sim": 4, "ort_enabled": True},
                        "coupling": {"kind": "four_tone"}, "optimization": SMALL_OPT,
                        "scan": {"t_grid": [0.5, 0.6]}, "gradcheck": {"n_configs": 2}})
    again = parse_config(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg
    assert parse_config(ExperimentConfig().to_dict()) == ExperimentConfig()


@pytest.mark.parametrize("data, field", [
    ({"bogus": 1}, "bogus"),
    ({"kind": "dance"}, "kind"),
    ({"seed": "x"}, "seed"),
    ({"device": {"g": -1}}, "device.g"),
    ({"device": {"d_sim": 2}}, "device"),
    ({"device": {"colour": 2}}, "device.colour"),
    ({"coupling": {"kind": "magic"}}, "coupling.kind"),
    ({"optimization": {"T": 0}}, "optimization.T"),
    ({"optimization": {"restarts": 0}}, "optimization"),
    ({"optimization": {"lr": 0.1}}, "optimization.lr"),
    ({"scan": {"grid": []}}, "scan.grid"),
])
def test_invalid_config_names_field(data, field):
    with pytest.raises(ConfigError) as exc:
        parse_config(data)
    assert str(exc.value).startswith(field)


def test_main_exit_codes(tmp_path, capsys):
    bad = write_config(tmp_path, {"optimization": {"omega_max": -3}})
    assert main(["optimize", "--config", bad, "--out", str(tmp_path / "o")]) == 2
    assert "optimization.omega_max" in capsys.readouterr().err
    assert main(["bound", "--config", str(tmp_path / "missing.json")]) == 2
    (tmp_path / "broken.json").write_text("{")
    assert main(["bound", "--config", str(tmp_path / "broken.json")]) == 2
    assert main(["bound", "--out", str(tmp_path / "b")]) == 0


def test_bound_experiment(tmp_path):
    rec = run(ExperimentConfig(kind="bound"), tmp_path)
    assert rec.result["j_norm"] == pytest.approx(3)
    assert rec.result["t_bound"] == pytest.approx(np.pi / 6)
    text = (tmp_path / "bound.csv").read_text().splitlines()
    assert text[0] == "coupling,J_over_g,t_bound,t_bound_over_Tmin"
    row = text[1].split(",")
    assert row[0] == "four_tone" and float(row[1]) == 3 and float(row[2]) == pytest.approx(np.pi / 6, abs=1e-16)
    assert json.loads((tmp_path / "config.json").read_text()) == rec.config
    back = RunRecord.load(tmp_path / "record.json")
    assert back.version == __version__ and back.result == json.loads(json.dumps(rec.result))


def test_protocol_report_experiment(tmp_path):
    run(ExperimentConfig(kind="protocol-report"), tmp_path)
    lines = (tmp_path / "protocols.csv").read_text().splitlines()
    assert lines[0] == "protocol,d,j_norm,t_bound,duration,fidelity"
    assert any(line.startswith("fourtone,3,3,") for line in lines)


def test_gradcheck_experiment(tmp_path):
    rec = run(ExperimentConfig(kind="gradcheck"), tmp_path)
    assert rec.result["passed"]
    assert rec.result["max_rel_error"] <= 1e-5
    assert {r["ort"] for r in rec.result["rows"]} == {True, False}


def test_optimize_is_reproducible_from_snapshot(tmp_path):
    cfg = parse_config({"kind": "optimize", "seed": 3, "optimization": SMALL_OPT})
    first = run(cfg, tmp_path / "a")
    snap = parse_config(json.loads((tmp_path / "a" / "config.json").read_text()))
    second = run(snap, tmp_path / "b")
    for key in ("f", "loss", "leak_max", "leak_avg"):
        assert abs(first.result[key] - second.result[key]) <= 1e-12
    for name in ("run.json", "history.csv", "pulses.csv", "record.json", "config.json"):
        assert (tmp_path / "a" / name).exists()
    stored = OptimizationRun.load(tmp_path / "a" / "run.json")
    assert evaluate(stored.best_pulses, stored.config.context()).loss == pytest.approx(first.result["loss"], abs=1e-12)


def test_cli_seed_override_and_resume(tmp_path):
    cfg = write_config(tmp_path, {"optimization": SMALL_OPT})
    out = tmp_path / "r"
    assert main(["optimize", "--config", cfg, "--out", str(out), "--seed", "9"]) == 0
    rec = RunRecord.load(out / "record.json")
    assert rec.config["seed"] == 9
    assert main(["optimize", "--config", cfg, "--out", str(out), "--seed", "9", "--resume"]) == 0
    assert RunRecord.load(out / "record.json").result["loss"] == rec.result["loss"]


def test_pulse_csv_samples(tmp_path):
    p = random_pulses(M=4, T=2.0)
    t, values = sample_pulses(p, 4)
    boundaries = np.arange(0, len(t), 4)
    assert np.all(values[boundaries] == 0)
    mids = np.arange(2, len(t), 4)
    assert np.allclose(values[mids], p.amplitudes.transpose(2, 0, 1), atol=1e-14)
    with pytest.raises(ValueError):
        sample_pulses(p, 1)


def test_pulse_csv_round_trip(tmp_path):
    p = random_pulses(M=6, T=1.3)
    path = tmp_path / "pulses.csv"
    export_pulse_csv(p, 8, path)
    header = path.read_text().splitlines()[0].split(",")
    assert header[:3] == ["t", "re_q1_01", "im_q1_01"] and len(header) == 9
    t, values = read_pulse_csv(path)
    t0, v0 = sample_pulses(p, 8)
    assert np.array_equal(t, t0) and np.array_equal(values, v0)
    back = pulses_from_csv(path, p.T, p.omega_max, p.M)
    assert np.allclose(back.amplitudes, p.amplitudes, rtol=1e-15, atol=1e-14)


def test_fidelity_vs_nmax_without_ort_is_flat():
    p = random_pulses(M=5, T=0.5 * T_MIN, omega=20)
    dev = DeviceModel(d_sim=3)
    table = fidelity_vs_nmax(p, dev, [2, 3, 4, 6], substeps=8)
    assert np.all(np.abs(table[:, 1] - table[0, 1]) <= 1e-14)


def test_fidelity_vs_nmax_at_d4_matches_optimizer():
    p = random_pulses(M=5, T=0.5 * T_MIN, omega=20)
    dev = DeviceModel(d_sim=4, ort_enabled=True)
    table = fidelity_vs_nmax(p, dev, [3, 4, 5], substeps=8)
    ref = evaluate(p, GrapeContext.build(dev, CouplingSpec("four_tone"), substeps=8)).f
    assert table[0, 1] == ref
    assert list(table[:, 0]) == [3, 4, 5]


def test_leakage_and_nmax_experiments(tmp_path):
    cfg = parse_config({"kind": "optimize", "device": {"d_sim": 4, "ort_enabled": True}, "optimization": SMALL_OPT})
    run(cfg, tmp_path / "opt")
    stored = str(tmp_path / "opt" / "run.json")
    lk = run(parse_config({"kind": "leakage-report", "pulses": stored}), tmp_path / "lk")
    header = (tmp_path / "lk" / "leakage.csv").read_text().splitlines()[0]
    assert header == "t,p01,p2,p3"
    assert 0 <= lk.result["p01_final"] <= 1
    fn = run(parse_config({"kind": "fidelity-vs-nmax", "pulses": stored, "nmax_list": [3, 4]}), tmp_path / "fn")
    assert fn.result["fidelity"][0] == pytest.approx(lk.result["f"], abs=1e-15)
    with pytest.raises(ConfigError):
        run(parse_config({"kind": "leakage-report"}), tmp_path / "none")


def test_scan_experiments(tmp_path):
    opt = dict(SMALL_OPT, max_iters=10)
    cfg = parse_config({"kind": "scan-omega", "optimization": opt,
                        "scan": {"t_grid": [0.6, 0.9], "omega_grid": [10, 20], "threshold": 0.5}})
    rec = run(cfg, tmp_path)
    lines = (tmp_path / "scan_omega.csv").read_text().splitlines()
    assert lines[0] == "omega_max,T_F_over_Tmin,t_exact_over_Tmin"
    assert len(lines) == 3
    assert [p["omega_max"] for p in rec.result["points"]] == [10, 20]
    cfg = parse_config({"kind": "scan-time", "optimization": opt, "scan": {"t_grid": [0.6, 0.9]}})
    rec = run(cfg, tmp_path / "st")
    assert len(rec.result["fidelities"]) == 2
    assert (tmp_path / "st" / "scan_time.csv").exists()
