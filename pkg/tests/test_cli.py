import json
import subprocess
import sys

import pytest

from pointloc.cli import main


def run(*args):
    return main([str(a) for a in args])


def test_simulate_then_evaluate_zero_noise(tmp_path):
    sim = tmp_path / "sim"
    assert run("simulate", "--participants", 2, "--grid", "2x3", "--sigma", 0, "--seed", 3,
               "--trials-per-cell", 2, "--out", sim) == 0
    frames = sorted(sim.glob("frames_p*.ndjson"))
    truths = sorted(sim.glob("truth_p*.ndjson"))
    assert len(frames) == len(truths) == 2
    events = []
    for i, f in enumerate(frames):
        out = tmp_path / f"events{i}.ndjson"
        assert run("replay", "--input", f, "--output", out) == 0
        events.append(out)
    rep = tmp_path / "rep"
    assert run("evaluate", "--events", *events, "--truth", *truths, "--grid", "2x3",
               "--min-accuracy", 100, "--out", rep) == 0
    assert "accuracy: 100.00 %" in (rep / "report.txt").read_text()
    assert (rep / "report.csv").read_text().startswith("intended,detected,count,row_pct\n")


def test_golden_replay(tmp_path, data_dir):
    out = tmp_path / "events.ndjson"
    assert run("replay", "--input", data_dir / "golden_frames.ndjson", "--output", out) == 0
    assert out.read_bytes() == (data_dir / "golden_events.ndjson").read_bytes()


def test_replay_trace(tmp_path, data_dir):
    trace = tmp_path / "trace.csv"
    assert run("replay", "--input", data_dir / "golden_frames.ndjson", "--output", tmp_path / "e",
               "--trace", trace) == 0
    lines = trace.read_text().splitlines()
    assert lines[0] == "t,r,drdt,phase"
    assert {ln.rsplit(",", 1)[1] for ln in lines[1:]} <= {"Idle", "Tracking", "Stable", "Destabilized"}


def test_replay_to_stdout(data_dir, capsys):
    assert run("replay", "--input", data_dir / "golden_frames.ndjson") == 0
    assert capsys.readouterr().out == (data_dir / "golden_events.ndjson").read_text()


def test_study_is_reproducible(tmp_path):
    for d in ("a", "b"):
        assert run("study", "--seed", 7, "--out", tmp_path / d, "--trials", 12, "--participants", 2) == 0
    for name in ("summary.txt", "summary.csv", "left_2x3/report.csv", "right_3x4/report.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert (tmp_path / "a" / "summary.csv").read_text().splitlines()[0] == "grid,left,right"


def test_evaluate_gate_fails(tmp_path, data_dir):
    truth = tmp_path / "truth.ndjson"
    truth.write_text(json.dumps({"cell": 1, "t_start": 1.5, "t_end": 4.5}) + "\n")
    assert run("evaluate", "--events", data_dir / "golden_events.ndjson", "--truth", truth,
               "--min-accuracy", 50, "--out", tmp_path) == 1


def test_usage_error_exits_2(capsys):
    with pytest.raises(SystemExit) as e:
        run("simulate", "--grid", "banana", "--out", "x")
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        run("frobnicate")
    assert e.value.code == 2


def test_data_error_names_file_and_line(tmp_path, data_dir, capsys):
    truth = tmp_path / "truth.ndjson"
    truth.write_text('{"cell": 1, "t_start": 0, "t_end": 1}\n{"cell": 2}\n')
    assert run("evaluate", "--events", data_dir / "golden_events.ndjson", "--truth", truth,
               "--out", tmp_path) == 1
    assert f"{truth}:2" in capsys.readouterr().err


def test_missing_input_file(tmp_path, capsys):
    assert run("replay", "--input", tmp_path / "nope.ndjson") == 1
    assert "nope.ndjson" in capsys.readouterr().err


def test_bad_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{\n  "schema": 1,\n  "grid": {"rows": 2,}\n}\n')
    assert run("--config", cfg, "replay", "--input", "x") == 1
    assert f"{cfg}:3" in capsys.readouterr().err


def test_config_from_environment(tmp_path, monkeypatch, data_dir):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"schema": 1, "grid": {"rows": 1, "cols": 1}}))
    monkeypatch.setenv("POINTLOC_CONFIG", str(cfg))
    out = tmp_path / "e.ndjson"
    assert run("replay", "--input", data_dir / "golden_frames.ndjson", "--output", out) == 0
    cells = {json.loads(line)["cell"] for line in out.read_text().splitlines()}
    assert cells <= {1, None}


def test_non_monotone_frames_in_replay_are_dropped(tmp_path, data_dir):
    lines = (data_dir / "golden_frames.ndjson").read_text().splitlines(keepends=True)
    f = tmp_path / "f.ndjson"
    f.write_text("".join(lines[:50] + [lines[10]] + lines[50:]))
    out = tmp_path / "e.ndjson"
    assert run("replay", "--input", f, "--output", out) == 0
    assert out.read_bytes() == (data_dir / "golden_events.ndjson").read_bytes()


def test_module_entry_point(data_dir):
    r = subprocess.run([sys.executable, "-m", "pointloc", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "simulate" in r.stdout
