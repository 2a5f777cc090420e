import copy

import pytest

from erasuresim.channel import NoisePattern
from erasuresim.protocol import hashed, string_exchange
from erasuresim.sim import RunConfig, RunTrace, run
from erasuresim.verify import AGS_CHECKS, FIXED_CHECKS, verify_trace

PI = string_exchange(4)


@pytest.mark.parametrize("scheme,erased", [
    ("basic4", []), ("basic4", [2, 3, 7]), ("basic2", [1, 6]), ("ecc3", [1, 2, 7]),
    ("ags4", []), ("ags4", [3]), ("ags4", [1, 2, 5]), ("ags1", [3, 9, 10]),
])
def test_run_traces_pass(scheme, erased):
    res = run(RunConfig(scheme, PI, "10", "01", NoisePattern.of(erased)))
    rep = verify_trace(res.trace)
    assert rep.ok, rep.lines()
    names = [c.name for c in rep.checks]
    assert names == list(AGS_CHECKS if scheme.startswith("ags") else FIXED_CHECKS)


def test_every_check_is_evaluated():
    res = run(RunConfig("ags4", hashed(8, 3), "0110", "1010", NoisePattern.of([2, 5, 11, 12])))
    rep = verify_trace(res.trace)
    for c in rep.checks:
        if c.name not in ("termination-stall",):
            assert c.evaluated > 0, c.name


def _mutate(trace, fn):
    t = copy.deepcopy(trace)
    fn(t)
    return RunTrace.from_jsonl(t.to_jsonl())


@pytest.mark.parametrize("scheme", ["basic4", "ags4"])
def test_truncated_bob_transcript_is_caught(scheme):
    res = run(RunConfig(scheme, PI, "10", "01"))

    def cut(t):
        bob = t.steps[1]["bob"]          # state at the start of round 2
        bob["transcript"] = bob["transcript"][:-2]

    rep = verify_trace(_mutate(res.trace, cut))
    sync = rep["transcript-sync"]
    assert not sync.passed and sync.first_round == 2


def test_decremented_channel_cost_is_caught():
    res = run(RunConfig("ags4", PI, "10", "01", NoisePattern.of([3])))

    def dec(t):
        for s in t.steps:
            if s["t"] == 4:
                s["ledger"]["c_ch"] -= 1

    rep = verify_trace(_mutate(res.trace, dec))
    mono = rep["ledger-monotone"]
    assert not mono.passed and mono.first_round == 2


def test_fake_bob_reply_after_exit_is_caught():
    res = run(RunConfig("ags4", PI, "10", "01"))

    def talk(t):
        settle = [s for s in t.steps if s["settle"] and s["sender"] == "B"]
        settle[0]["sent"] = [1, 0]

    rep = verify_trace(_mutate(res.trace, talk))
    assert not rep["bob-silent-after-exit"].passed
    assert not rep["semi-termination"].passed


def test_erased_final_reply_breaks_cost_ledger():
    # the single erasure on Bob's last reply costs two extra symbols
    res = run(RunConfig("ags4", PI, "10", "01", NoisePattern.of([4])))
    rep = verify_trace(res.trace)
    assert res.correct
    assert not rep["cost-ledger"].passed and not rep["symbol-bound"].passed
    others = [c for c in rep.checks if c.name not in ("cost-ledger", "symbol-bound")]
    assert all(c.passed for c in others)


def test_scheme_mismatch():
    res = run(RunConfig("basic4", PI, "10", "01"))
    with pytest.raises(ValueError):
        verify_trace(res.trace, "ags4")


def test_report_lines():
    rep = verify_trace(run(RunConfig("basic4", PI, "10", "01")).trace)
    assert all(line.endswith("pass") for line in rep.lines())
    assert rep.to_dict()["ok"]
