from __future__ import annotations

import io
import json
import subprocess
import sys

import pytest

from jafun.cli import main

from conftest import fixture_path

DLIST = str(fixture_path("dlist.jf"))
NPE = str(fixture_path("npe.jf"))


def cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def write(tmp_path, text, name="prog.jf"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_check_dlist():
    code, out, err = cli("check", DLIST)
    assert code == 0 and err == ""
    assert "0 error(s)" in out


def test_check_reports_type_errors(tmp_path):
    path = write(tmp_path, "class A ext Object { A f;\n rwr A rd m(rwr A b) { this.f = b } }")
    code, _, err = cli("check", path)
    assert code == 3
    assert err.strip() == f"{path}:A.m:body: WriteWithoutRwr: expected rwr A, found rd A (write of f)"


def test_check_json_diagnostics(tmp_path):
    path = write(tmp_path, "class A ext Object { rwr A rwr m() { throw this } }")
    code, out, err = cli("check", "--json", path)
    assert code == 3 and out == ""
    rec = json.loads(err)
    assert rec["reason"] == "UncoveredThrow" and rec["warning"] is False


def test_check_warning_only(tmp_path):
    path = write(tmp_path, "class A ext Object { A old() { this }\n rwr A rwr m() { this.old() } }")
    code, _, err = cli("check", path)
    assert code == 0 and "warning: A.m:body: UnverifiedCall" in err


@pytest.mark.parametrize("text, needle", [
    ("class A ext Object { ", "ParseError"),
    ("class A ext B { }", "UnknownSuper"),
    ("class A ext Object { }\nclass A ext Object { }", "DuplicateClass"),
])
def test_static_errors_exit_3(tmp_path, text, needle):
    path = write(tmp_path, text)
    for cmd in ("check", "run"):
        code, _, err = cli(cmd, path)
        assert code == 3 and needle in err


def test_missing_file(tmp_path):
    code, _, err = cli("check", str(tmp_path / "absent.jf"))
    assert code == 3 and err


def test_run_npe_trace():
    code, out, _ = cli("run", "--trace", "--json", NPE)
    assert code == 1
    rows = [json.loads(line) for line in out.splitlines()]
    assert [r["rule"] for r in rows[:-1]] == ["mthd", "varnpe", "methodex"]
    assert rows[-1] == {"outcome": "UncaughtException", "steps": 3, "loc": 0, "exception": "NPE"}


def test_run_human_output():
    code, out, _ = cli("run", "--trace", NPE)
    assert code == 1
    lines = out.splitlines()
    assert lines[1].split()[:2] == ["2", "varnpe"]
    assert lines[-1] == "UncaughtException NPE @0 after 3 step(s)"


@pytest.mark.parametrize("engine", ["red", "red2", "typed", "typed2", "lockstep"])
def test_run_dlist_engines(engine):
    code, out, _ = cli("run", "--engine", engine, "--json", "--dump-heap", DLIST)
    assert code == 0
    rec = json.loads(out)
    assert rec["outcome"] == "NormalResult" and rec["steps"] == 87 and rec["loc"] == 8
    assert rec["heap"][8] == "8: DList { prev=null, val=2, next=9 }"


def test_typed_trace_has_gamma_size():
    code, out, _ = cli("run", "--engine", "typed", "--trace", "--json", DLIST)
    rows = [json.loads(line) for line in out.splitlines()[:-1]]
    assert code == 0 and len(rows) == 87 and all("gammaSize" in r for r in rows)


def test_lockstep_matches_untyped_trace():
    _, typed, _ = cli("run", "--engine", "lockstep", "--trace", "--json", DLIST)
    _, untyped, _ = cli("run", "--trace", "--json", DLIST)
    strip = [{k: v for k, v in json.loads(line).items() if k != "gammaSize"}
             for line in typed.splitlines()]
    assert strip == [json.loads(line) for line in untyped.splitlines()]


def test_fuel_and_stuck(tmp_path):
    assert cli("run", "--max-steps", "5", DLIST)[0] == 4
    path = write(tmp_path, "class Main ext Object { Main f; rwr Main rwr main() { this.g } }")
    code, out, _ = cli("run", path)
    assert code == 2 and out.startswith("Stuck")
    assert cli("run", "--engine", "typed", path)[0] == 3


def test_loop_runs_out_of_fuel(tmp_path):
    path = write(tmp_path, "class Main ext Object { rwr Main rwr main() { this.main() } }")
    code, out, _ = cli("run", "--json", "--max-steps", "50", path)
    assert code == 4 and json.loads(out)["outcome"] == "OutOfFuel"


def test_entry_handling(tmp_path):
    assert cli("run", "--entry", "DList.appRec", DLIST)[0] == 3
    assert cli("run", "--entry", "Nope.main", DLIST)[0] == 3
    code, out, _ = cli("run", "--entry", "DList.copy", DLIST)
    assert code == 0 and out.startswith("NormalResult")
    with pytest.raises(SystemExit) as info:
        cli("run", "--entry", "not-an-entry", DLIST)
    assert info.value.code == 64


def test_fuzz_report():
    code, out, _ = cli("fuzz", "--property", "soundness", "--count", "15", "--seed", "3", "--json")
    assert code == 0
    rec = json.loads(out)
    assert rec["property"] == "soundness" and rec["runs"] == 15 and rec["counterexamples"] == []


def test_fuzz_all_unrestricted():
    code, out, err = cli("fuzz", "--count", "10", "--unrestricted", "--json")
    assert code == 0
    props = [json.loads(line)["property"] for line in out.splitlines()]
    assert props == ["engine_equiv", "invariants"]
    assert "skipped" in err


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "jafun.cli", "run", NPE],
                          capture_output=True, text=True)
    assert proc.returncode == 1 and "UncaughtException" in proc.stdout
