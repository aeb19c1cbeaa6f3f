import json

import pytest

from epiquant import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_traces_qkd(capsys):
    code, out, _ = run(capsys, "traces", "qkd.dmc")
    rep = json.loads(out)
    assert code == 0
    assert rep["summary"] == {"total": 4, "successful": 2}
    assert [t["name"] for t in rep["traces"] if t["successful"]] == ["pi", "pi'"]


def test_traces_text_one_per_line(capsys):
    code, out, _ = run(capsys, "traces", "qss35.dmc", "--players", "A1,A2,A3", "--format", "text")
    lines = [ln for ln in out.splitlines() if ln.startswith("trace ")]
    assert code == 0 and len(lines) == 54
    assert sum("# successful" in ln for ln in lines) == 2


def test_missing_file_exits_2(capsys):
    code, _, err = run(capsys, "traces", "missing.dmc")
    assert code == 2 and "missing.dmc" in err


def test_parse_error_exits_2_with_span(tmp_path, capsys):
    bad = tmp_path / "bad.dmc"
    bad.write_text("name x\nsource D\nagent D(; 6) : P6^a\n")
    code, _, err = run(capsys, "traces", str(bad))
    assert code == 2
    assert "bad.dmc:3:" in err


def test_verify_exit_codes(capsys):
    assert run(capsys, "verify", "qss35.dmc", "qss_sharing.prop", "heaven.scn")[0] == 0
    code, out, _ = run(capsys, "verify", "qss35.dmc", "adversary_hell.prop", "adversary_hell.scn")
    rep = json.loads(out)
    assert code == 1
    assert rep["properties"][0]["attacks"]
    assert run(capsys, "verify", "qkd.dmc", "qkd.prop", "qkd_safe.scn")[0] == 0


def test_verify_bad_scenario_exits_2(tmp_path, capsys):
    scn = tmp_path / "x.scn"
    scn.write_text("quantum = unsafe\n")
    code, _, err = run(capsys, "verify", "qkd.dmc", "qkd.prop", str(scn))
    assert code == 2 and "adversary" in err


def test_verify_text_and_debug_tree(capsys):
    code, out, err = run(capsys, "verify", "qkd.dmc", "qkd.prop", "qkd_safe.scn",
                         "--format", "text", "--debug-tree")
    assert code == 0
    assert "3/3 properties hold" in out
    assert "box A total=4" in err


def test_verify_jobs_match_serial(tmp_path, monkeypatch, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    cli.main(["verify", "qkd.dmc", "qkd.prop", "qkd_safe.scn", "-o", str(a)])
    monkeypatch.setenv(cli.JOBS_ENV, "2")
    cli.main(["verify", "qkd.dmc", "qkd.prop", "qkd_safe.scn", "-o", str(b)])
    ja, jb = json.loads(a.read_text()), json.loads(b.read_text())
    ja.pop("timestamp"), jb.pop("timestamp")
    assert ja == jb


def test_appearances_dump(capsys):
    code, out, _ = run(capsys, "appearances", "qss35.dmc", "adversary_hell.scn",
                       "--prop", "qss_sharing.prop", "--agent", "E", "--format", "text")
    rows = out.splitlines()[1:]
    assert code == 0
    row = next(r for r in rows if r.split("\t")[2] == "qcio^{D}_{A1} q1")
    assert len(row.split("\t")[3].split(" | ")) == 6


def test_oracle_check(capsys):
    code, out, _ = run(capsys, "oracle-check", "--circuits", "50", "--seed", "7")
    assert code == 0 and json.loads(out)["mismatches"] == 0
    assert run(capsys, "oracle-check", "--circuits", "0")[0] == 2


def test_oracle_seed_reproducible(capsys):
    one = run(capsys, "oracle-check", "--circuits", "30", "--seed", "9")[1]
    two = run(capsys, "oracle-check", "--circuits", "30", "--seed", "9")[1]
    assert one == two


def test_regression_circuit(capsys):
    code, out, _ = run(capsys, "oracle-check", "--circuit", "epr_x.circ")
    assert code == 0
    assert json.loads(out)["probabilities"][0] == [0.5, 0.5]


def test_oracle_mismatch_exits_1(monkeypatch, capsys):
    monkeypatch.setattr(cli.qm, "run_circuit", lambda ops: [(0.5, 0.25)])
    code, out, _ = run(capsys, "oracle-check", "--circuits", "1", "--format", "text")
    assert code == 1
    assert "circuit 0:" in out and "prep" in out


def test_requires_subcommand():
    with pytest.raises(SystemExit):
        cli.main([])
