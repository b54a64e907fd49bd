import json

import pytest

from echolock.cli import SWEEP_PARAMS, apply_override, load_scenario, main, readout_windows


def test_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["run", "presets/fig2_two_pulse.scn", "--out", str(out)]) == 0
    head = (out / "trace.csv").read_text().splitlines()
    assert head[0] == "t_us,re_P,im_P,intensity" and len(head) == 902
    metrics = dict(l.split(": ", 1) for l in (out / "metrics.txt").read_text().splitlines())
    assert abs(float(metrics["echo_peak_time_us"]) - 35.0) <= 0.5
    assert {"echo_peak_amp", "efficiency"} <= set(metrics)
    man = json.loads((out / "manifest.json").read_text())
    assert [o["file"] for o in man["outputs"]] == ["trace.csv", "metrics.txt"]
    assert len(man["scenario_sha256"]) == 64 and "wall_time_s" in man


def test_run_errors(tmp_path, capsys):
    assert main(["run", "nonexistent.scn", "--out", str(tmp_path)]) == 1
    bad = tmp_path / "bad.scn"
    bad.write_text("[ensemble]\nfwhm_khz = 1\n")
    assert main(["run", str(bad), "--out", str(tmp_path)]) == 1
    assert "span_khz" in capsys.readouterr().err
    assert main(["run", "fig2_two_pulse", "--set", "nope=1", "--out", str(tmp_path)]) == 1
    assert main(["bogus"]) == 1


def test_set_override_changes_result(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "s4_transfer", "--out", str(a)]) == 0
    assert main(["run", "s4_transfer", "--set", "area.B1=1.0", "--out", str(b)]) == 0
    man = json.loads((b / "manifest.json").read_text())
    assert man["overrides"] == [["area.B1", 1.0]]


def test_overrides():
    sc, _, _ = load_scenario("fig4_sweep_b1_100")
    moved = apply_override(sc, "T_b2_delay", 40.0)
    b1, b2, r = (moved.sequence.by_role(x)[0] for x in ("B1", "B2", "R"))
    assert b2.t0 - b1.t0 == pytest.approx(40.0) and r.t0 - b2.t0 == pytest.approx(0.2)
    assert moved.options.t_end == moved.sequence.t_end
    assert apply_override(sc, "gamma21_khz", 2.0).params.gamma21_pop == 2.0
    assert apply_override(sc, "fwhm_khz", 500.0).ensemble.fwhm == 500.0
    assert "T_b2_delay" in SWEEP_PARAMS and "area.B1" in SWEEP_PARAMS


def test_windows_follow_prediction():
    sc, _, _ = load_scenario("fig2_two_pulse")
    w = readout_windows(sc)
    assert w["echo"][0] < 35.0 < w["echo"][1]
    assert w["D"][1] <= w["echo"][0]


def test_sweep(tmp_path, capsys):
    out = tmp_path / "s"
    rc = main(["sweep", "s4_transfer", "--param", "area.B1", "--values", "0.6", "1.0",
               "--out", str(out)])
    assert rc == 0
    rows = (out / "sweep.csv").read_text().splitlines()
    assert rows[0] == "value,echo_peak_amp,echo_peak_time_us,intensity_norm"
    assert len(rows) == 3
    assert main(["sweep", "s4_transfer", "--param", "area.B1", "--values",
                 "--out", str(out)]) == 1
    assert main(["sweep", "s4_transfer", "--param", "bogus", "--values", "1",
                 "--out", str(out)]) == 1
    assert "T_b2_delay" in capsys.readouterr().err


def test_fit_command(tmp_path, capsys):
    f = tmp_path / "d.csv"
    f.write_text("t_us,intensity\n" + "".join(f"{t},{v}\n" for t, v in
                 [(0, 1), (10, .6), (20, .42), (40, .32), (80, .30), (160, .3)]))
    assert main(["fit", str(f), "--out", str(tmp_path)]) == 0
    assert "tau:" in (tmp_path / "fit.txt").read_text()
    flat = tmp_path / "flat.csv"
    flat.write_text("t_us,intensity\n0,1\n1,1\n2,1\n3,1\n")
    assert main(["fit", str(flat)]) == 1
    assert "flat data" in capsys.readouterr().err
    assert main(["fit", str(f), "--unit", "s"]) == 1


def test_noise_command(capsys):
    assert main(["noise"]) == 0
    text = capsys.readouterr().out
    assert "N_f: 0.029375" in text
    assert main(["noise", "--alpha", "0"]) == 0
    assert "N_f: 0\n" in capsys.readouterr().out
    assert main(["noise", "--n0", "-1"]) == 1


def test_presets_list(capsys):
    assert main(["presets", "list"]) == 0
    out = capsys.readouterr().out
    for name in ("fig2_two_pulse", "fig2ef_locked", "fig4_sweep_b1_060", "s2_stimulated",
                 "s4_transfer"):
        assert name in out
