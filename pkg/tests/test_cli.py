import json

import pytest

from domino.cli import EXIT_ERROR, EXIT_OK, EXIT_REJECTED, main
from domino.corpus import entry


def path_of(name):
    return str(entry(name).path)


def run(capsys, *argv):
    rc = main(list(argv))
    out, err = capsys.readouterr()
    return rc, out, err


def test_classify_flowlet(capsys):
    rc, out, _ = run(capsys, "classify", path_of("flowlet"))
    assert rc == EXIT_OK and out == "PRAW\n"


def test_classify_codel_reports_why(capsys):
    rc, out, err = run(capsys, "classify", path_of("codel"))
    assert rc == EXIT_OK and out == "doesn't map\n"
    assert "sqrt" in err


def test_compile_rejection_exit_code(capsys):
    rc, out, err = run(capsys, "compile", path_of("conga"), "--target", "Nested")
    assert rc == EXIT_REJECTED and out == ""
    assert err.startswith("rejected for target Nested")


def test_compile_run_round_trip(capsys, tmp_path):
    cfg = tmp_path / "p.json"
    rc, _, _ = run(capsys, "compile", path_of("flowlet"), "--target", "praw", "-o", str(cfg))
    assert rc == EXIT_OK and json.loads(cfg.read_text())["target"] == "PRAW"
    trace = tmp_path / "t.jsonl"
    trace.write_text('{"sport": 1, "dport": 2, "arrival": 3}\n{"sport": 1, "dport": 2, "arrival": 30}\n')
    out = tmp_path / "o.jsonl"
    rc, _, _ = run(capsys, "run", "--pipeline", str(cfg), "--trace", str(trace), "-o", str(out))
    lines = [json.loads(x) for x in out.read_text().splitlines()]
    assert rc == EXIT_OK and len(lines) == 3
    assert lines[1]["next_hop"] == lines[1]["new_hop"]
    assert set(lines[2]["final_state"]) == {"last_time", "saved_hop"}


def test_run_reads_stdin(capsys, tmp_path, monkeypatch):
    import io

    cfg = tmp_path / "p.json"
    run(capsys, "compile", path_of("rcp"), "--target", "PRAW", "-o", str(cfg))
    monkeypatch.setattr("sys.stdin", io.StringIO('{"rtt": 3, "size": 100}\n'))
    rc, out, _ = run(capsys, "run", "--pipeline", str(cfg), "--trace", "-")
    assert rc == EXIT_OK and len(out.splitlines()) == 2


def test_run_rejects_tampered_pipeline(capsys, tmp_path):
    cfg = tmp_path / "p.json"
    run(capsys, "compile", path_of("flowlet"), "--target", "PRAW", "-o", str(cfg))
    d = json.loads(cfg.read_text())
    d["stages"].reverse()
    cfg.write_text(json.dumps(d))
    trace = tmp_path / "t.jsonl"
    trace.write_text("")
    rc, _, err = run(capsys, "run", "--pipeline", str(cfg), "--trace", str(trace))
    assert rc == EXIT_ERROR and "no earlier stage" in err


def test_verify(capsys):
    rc, out, _ = run(capsys, "verify", path_of("flowlet"), "--target", "PRAW", "--packets", "200", "--seed", "3")
    assert rc == EXIT_OK and out == "equivalent on 200 packets (seed 3)\n"


def test_domino_seed_overrides_flag(capsys, monkeypatch):
    monkeypatch.setenv("DOMINO_SEED", "9")
    rc, out, _ = run(capsys, "verify", path_of("rcp"), "--target", "PRAW", "--packets", "50", "--seed", "3")
    assert rc == EXIT_OK and "(seed 9)" in out


def test_limits_are_passed_through(capsys):
    rc, _, err = run(capsys, "compile", path_of("flowlet"), "--target", "PRAW", "--depth", "3")
    assert rc == EXIT_REJECTED and "depth exceeded" in err


def test_invalid_program_points_at_source(capsys, tmp_path):
    src = tmp_path / "bad.domino"
    src.write_text("struct Packet { int a; };\nvoid f(struct Packet p) { while (1) {} }\n")
    rc, _, err = run(capsys, "classify", str(src))
    assert rc == EXIT_ERROR
    assert err.startswith(f"{src}:2:")


@pytest.mark.parametrize(
    "argv",
    [
        ["compile", "x.domino", "--target", "Banzai"],
        ["compile", "x.domino"],
        ["classify", "x.domino", "--verify-width", "5"],
        ["frobnicate"],
        ["compile", "x.domino", "--target", "RAW", "--bogus"],
    ],
)
def test_usage_errors_exit_1(capsys, argv):
    with pytest.raises(SystemExit) as ei:
        main(argv)
    assert ei.value.code == EXIT_ERROR
    assert "usage:" in capsys.readouterr().err


def test_missing_file_exit_1(capsys, tmp_path):
    rc, _, err = run(capsys, "classify", str(tmp_path / "none.domino"))
    assert rc == EXIT_ERROR and "error" in err


def test_help_exits_0(capsys):
    with pytest.raises(SystemExit) as ei:
        main(["compile", "--help"])
    assert ei.value.code == 0
    assert "--target" in capsys.readouterr().out


@pytest.mark.parametrize(
    "flags",
    [["--dump-pass", p] for p in ("branch", "flank", "ssa", "tac")]
    + [["--dump-dag"], ["--dump-pipeline"], ["--dump-catalog"]],
)
def test_dumps_are_byte_stable(capsys, flags):
    a = run(capsys, "dump", path_of("flowlet"), *flags)
    b = run(capsys, "dump", path_of("flowlet"), *flags)
    assert a[0] == EXIT_OK and a[1] and a == b


def test_dump_catalog_needs_no_program(capsys):
    rc, out, _ = run(capsys, "dump", "--dump-catalog")
    assert rc == EXIT_OK and "Pairs" in out
    rc, _, err = run(capsys, "dump", "--dump-dag")
    assert rc == EXIT_ERROR and "needs a program" in err


def test_tac_dump_shows_lowered_flowlet(capsys):
    _, out, _ = run(capsys, "dump", path_of("flowlet"), "--dump-pass", "tac")
    assert "pkt.id0 = hash2(pkt.sport, pkt.dport) % 8000;" in out


def test_dumps_are_stable_across_processes():
    """Separate interpreters with different string hashing must agree."""
    import os
    import subprocess
    import sys

    outs = []
    for hs in ("1", "2"):
        env = dict(os.environ, PYTHONHASHSEED=hs)
        cmd = [sys.executable, "-m", "domino", "compile", path_of("dns_ttl"), "--target", "Nested"]
        outs.append(subprocess.run(cmd, env=env, capture_output=True, check=True).stdout)
    assert outs[0] == outs[1] and outs[0]
