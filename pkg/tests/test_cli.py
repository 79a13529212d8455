from __future__ import annotations

import json

import pytest

from mbrrm.cli import main


def run(*args):
    return main([str(a) for a in args])


@pytest.fixture
def scen(tmp_path):
    path = tmp_path / "s.json"
    assert run("gen", "--beams", 7, "--seed", 42, "-o", path) == 0
    return path


def test_gen_deterministic(tmp_path, scen):
    again = tmp_path / "s2.json"
    assert run("gen", "--beams", 7, "--seed", 42, "-o", again) == 0
    assert scen.read_bytes() == again.read_bytes()


@pytest.mark.parametrize("method", ["coloring", "alternating"])
def test_solve_deterministic(tmp_path, scen, method):
    outs = []
    for i in range(2):
        out, trace = tmp_path / f"p{i}.json", tmp_path / f"t{i}.csv"
        extra = ["--trace", trace] if method == "alternating" else []
        assert run("solve", "-s", scen, "--method", method, "-o", out, *extra) == 0
        outs.append(out.read_bytes() + (trace.read_bytes() if extra else b""))
    assert outs[0] == outs[1]


@pytest.mark.parametrize("method", ["proportional", "lp"])
def test_bh_deterministic(tmp_path, scen, method):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        assert run("bh", "-s", scen, "--method", method, "--max-active", 2,
                   "--slots", 12, "-o", out) == 0
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    assert sum(doc["t"]) == 12 and len(doc["sequence"]) == 12


def test_bruteforce_guard_rail_exit_2(tmp_path, capsys):
    path = tmp_path / "s4.json"
    assert run("gen", "--beams", 4, "--carriers", 3, "-o", path) == 0
    assert run("solve", "-s", path, "--method", "bruteforce") == 2
    assert "K*L" in capsys.readouterr().err


def test_bruteforce_small(tmp_path):
    path, out = tmp_path / "s.json", tmp_path / "p.json"
    run("gen", "--beams", 2, "--carriers", 2, "-o", path)
    assert run("solve", "-s", path, "--method", "bruteforce", "-o", out) == 0
    assert json.loads(out.read_text())["method"] == "bruteforce"


def test_alternating_report_beats_coloring(tmp_path, scen):
    usc = {}
    for method in ("coloring", "alternating"):
        plan, rep = tmp_path / f"{method}.json", tmp_path / f"{method}.rep.json"
        assert run("solve", "-s", scen, "--method", method, "-o", plan) == 0
        assert run("report", "-s", scen, "--plan", plan, "-o", rep) == 0
        usc[method] = json.loads(rep.read_text())["usc_bps"]
    assert usc["alternating"] >= usc["coloring"]


def test_report_csv(tmp_path, scen):
    plan, rep = tmp_path / "p.json", tmp_path / "r.csv"
    run("solve", "-s", scen, "--method", "coloring", "-o", plan)
    assert run("report", "-s", scen, "--plan", plan, "--format", "csv", "-o", rep) == 0
    lines = rep.read_text().splitlines()
    assert lines[0].startswith("beam,") and lines[-1].startswith("summary,") and len(lines) == 9


def test_schedule_outputs(tmp_path, scen):
    a, b = tmp_path / "a.json", tmp_path / "b.csv"
    assert run("schedule", "-s", scen, "--seed", 3, "-o", a) == 0
    assert run("schedule", "-s", scen, "--seed", 3, "--format", "csv", "-o", b) == 0
    assert "frame_plan" in json.loads(a.read_text())
    assert b.read_text().startswith("frame,beam,users")


def test_schedule_custom_modcod(tmp_path, scen):
    table = tmp_path / "mc.csv"
    table.write_text("threshold_db,spectral_efficiency\n-50,1\n")
    out = tmp_path / "o.json"
    assert run("schedule", "-s", scen, "--modcod", table, "-o", out) == 0
    frames = json.loads(out.read_text())["frame_plan"]["frames"]
    assert all(f["efficiency"] == 1 and f["loss"] == 0 for f in frames)


def test_validation_errors_exit_1(tmp_path, capsys):
    assert run("gen", "--beams", 0, "-o", tmp_path / "x.json") == 1
    assert "num_beams" in capsys.readouterr().err
    assert run("solve", "-s", tmp_path / "missing.json") == 1
    assert "scenario" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert run("solve", "-s", bad) == 1
    assert run("gen", "--beams", 3, "--format", "csv") == 1
    assert "format" in capsys.readouterr().err


def test_usage_errors_exit_1():
    with pytest.raises(SystemExit) as err:
        main(["solve", "--method", "magic", "-s", "x.json"])
    assert err.value.code == 1
    with pytest.raises(SystemExit) as err:
        main([])
    assert err.value.code == 1


def test_report_rejects_mismatched_plan(tmp_path, scen, capsys):
    plan = tmp_path / "p.json"
    plan.write_text(json.dumps({"x": [[1]], "p_w": [[1.0]]}))
    assert run("report", "-s", scen, "--plan", plan) == 1
    assert "plan" in capsys.readouterr().err


def test_empty_out_path(scen, capsys):
    assert run("solve", "-s", scen, "-o", "") == 1
    assert "out" in capsys.readouterr().err


def test_trace_only_for_alternating(tmp_path, scen):
    assert run("solve", "-s", scen, "--method", "coloring", "--trace", tmp_path / "t.csv") == 1
