import csv
import io
import json
import socket
import subprocess
import sys

import pytest

from erasuresim.cli import SWEEP_HEADER, budget_for_delta, main
from erasuresim.sim import RunTrace

SE4 = ["--protocol", "builtin:string-exchange:4", "--x", "10", "--y", "01"]


def cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_run_json(capsys):
    code, out, _ = cli(capsys, "run", "--scheme", "basic4", *SE4, "--noise", "none")
    doc = json.loads(out)
    assert code == 0
    assert doc["metrics"]["transmissions"] == 4 and doc["verify"] == "pass"


def test_run_ags1_random_noise(capsys):
    code, out, _ = cli(capsys, "run", "--scheme", "ags1", *SE4,
                       "--noise", "random:p=0.2,seed=7,horizon=200", "--out", "csv")
    row = next(csv.DictReader(io.StringIO(out)))
    assert int(row["cc_sym"]) <= 4 + int(row["erasures_counted"])
    assert code == 0


def test_run_bound_failure_exit_code(capsys):
    code, out, _ = cli(capsys, "run", "--scheme", "ags4", *SE4, "--noise", "erase:4")
    assert code == 1
    assert json.loads(out)["bound_failures"]


def test_malformed_noise_file(capsys, tmp_path):
    f = tmp_path / "erase.json"
    f.write_text("{broken")
    code, _, err = cli(capsys, "run", "--scheme", "basic4", *SE4, "--noise", f"file:{f}")
    assert code == 2 and "noise" in err


def test_bad_flags(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run", "--scheme", "basic9", *SE4])
    assert exc.value.code == 2
    code, _, _ = cli(capsys, "run", "--scheme", "basic4", "--protocol", "builtin:string-exchange:4",
                     "--x", "1a", "--y", "01")
    assert code == 2


def test_verify_round_trip(capsys, tmp_path):
    trace = tmp_path / "t.jsonl"
    assert main(["run", "--scheme", "ecc3", *SE4, "--noise", "erase:1", "--trace", str(trace)]) == 0
    capsys.readouterr()
    code, out, _ = cli(capsys, "verify", str(trace))
    assert code == 0 and out.strip().endswith("verify: pass")

    t = RunTrace.read(trace)
    t.steps[1]["bob"]["transcript"] = ""
    t.write(trace)
    code, out, _ = cli(capsys, "verify", str(trace))
    assert code == 1
    assert "transcript-sync        FAIL at round 2" in out


def test_verify_schema_errors(capsys, tmp_path):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    assert cli(capsys, "verify", str(empty))[0] == 2
    junk = tmp_path / "junk.jsonl"
    junk.write_text('{"type": "header", "format": 1}\n{"type": "step"}\n')
    assert cli(capsys, "verify", str(junk))[0] == 2
    assert cli(capsys, "verify", str(tmp_path / "missing.jsonl"))[0] == 2


def test_sweep_budgets(capsys):
    code, out, _ = cli(capsys, "sweep", "--n-bits", "100", "--budgets", "0..10")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and out.splitlines()[0] == ",".join(SWEEP_HEADER)
    assert [int(r["transmissions"]) for r in rows] == [100 + 2 * t for t in range(11)]


def test_sweep_deltas_parallel_is_ordered(capsys):
    code, out, _ = cli(capsys, "sweep", "--n-bits", "40", "--deltas", "0.3,0,0.1", "--jobs", "2")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["delta"] for r in rows] == ["0.3", "0", "0.1"]
    assert float(rows[1]["rate"]) >= 0.5


def test_sweep_rejects_half():
    with pytest.raises(Exception):
        budget_for_delta(0.5, 10)
    assert main(["sweep", "--n-bits", "10", "--deltas", "0.5"]) == 2


def test_search_and_unsync(capsys):
    code, out, _ = cli(capsys, "search", "--scheme", "basic4", *SE4, "--budget", "2", "--horizon", "12")
    assert code == 0 and json.loads(out)["worst"]["transmissions"] == 8
    code, out, _ = cli(capsys, "unsync-demo", *SE4, "--gap", "5")
    doc = json.loads(out)
    assert code == 0 and doc["gap"] == 5 and doc["erasures"] == 4


def test_search_limit_is_usage_error(capsys, monkeypatch):
    monkeypatch.setenv("ERASURESIM_MAX_PATTERNS", "5")
    assert cli(capsys, "search", "--scheme", "basic4", *SE4, "--budget", "2")[0] == 2


def _free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def test_serve_and_relay_processes():
    pa, pb = _free_port(), _free_port()
    exe = [sys.executable, "-m", "erasuresim"]
    relay = subprocess.Popen(exe + ["relay", "--a", str(pa), "--b", str(pb), "--noise", "erase:2",
                                    "--timeout", "20"], stdout=subprocess.PIPE, text=True)
    assert "listening" in relay.stdout.readline()
    common = ["--scheme", "basic4", "--protocol", "builtin:string-exchange:4"]
    alice = subprocess.Popen(exe + ["serve", "--role", "alice", *common, "--input", "10",
                                    "--connect", f"127.0.0.1:{pa}"], stdout=subprocess.PIPE, text=True)
    bob = subprocess.Popen(exe + ["serve", "--role", "bob", *common, "--input", "01",
                                  "--connect", f"127.0.0.1:{pb}"], stdout=subprocess.PIPE, text=True)
    a_out, _ = alice.communicate(timeout=30)
    b_out, _ = bob.communicate(timeout=30)
    r_out, _ = relay.communicate(timeout=30)
    a, b, r = json.loads(a_out), json.loads(b_out), json.loads(r_out)
    assert alice.returncode == bob.returncode == relay.returncode == 0
    assert a["transcript"] == b["transcript"] == "1001"
    assert a["sent"] + b["sent"] == 6
    assert r["erased"] == [2]


def test_serve_without_relay_is_transport_error():
    port = _free_port()
    proc = subprocess.run([sys.executable, "-m", "erasuresim", "serve", "--role", "alice",
                           "--scheme", "basic4", "--protocol", "builtin:string-exchange:4",
                           "--input", "10", "--connect", f"127.0.0.1:{port}", "--timeout", "0.5"],
                          capture_output=True, text=True, timeout=30)
    assert proc.returncode == 2
