import pytest
from hypothesis import given, settings, strategies as st

from erasuresim.channel import NoisePattern, greedy_adversary
from erasuresim.protocol import hashed, string_exchange
from erasuresim.sim import (HarnessError, RunConfig, RunTrace, SearchLimitError,
                            exhaustive_noise_search, pattern_count, run,
                            unsync_termination_demo)
from erasuresim.verify import verify_trace

PI = string_exchange(4)


def test_basic4_noise_free():
    res = run(RunConfig("basic4", PI, "10", "01"))
    assert res.outputs == ("1001", "1001")
    m = res.metrics
    assert (m.transmissions, m.t_a, m.t_b) == (4, 2, 3)


def test_basic4_one_erasure():
    res = run(RunConfig("basic4", PI, "10", "01", NoisePattern.of([2])))
    assert res.correct and res.metrics.transmissions == 6


def test_ags4_one_erasure():
    res = run(RunConfig("ags4", PI, "10", "01", NoisePattern.of([3])))
    assert res.correct and res.metrics.cc_sym <= 5


def test_ags4_erased_final_reply():
    # Bob's last reply is erased after he entered his termination phase;
    # the rerun costs both parties one more symbol each
    res = run(RunConfig("ags4", PI, "10", "01", NoisePattern.of([4])))
    assert res.correct
    assert res.metrics.cc_sym == 6
    assert res.metrics.rc_timesteps <= 4 + 4


def test_runs_are_deterministic():
    cfg = RunConfig("ecc3", hashed(6, 2), "101", "011", NoisePattern.of([1, 2, 9, 10, 11]))
    assert run(cfg).trace.to_jsonl() == run(cfg).trace.to_jsonl()


def test_trace_round_trip(tmp_path):
    res = run(RunConfig("ags1", PI, "10", "01", NoisePattern.of([5, 6])))
    path = tmp_path / "t.jsonl"
    res.trace.write(path)
    back = RunTrace.read(path)
    assert back.to_jsonl() == res.trace.to_jsonl()


def test_max_rounds_gives_partial_trace():
    with pytest.raises(HarnessError) as exc:
        run(RunConfig("basic4", PI, "10", "01", NoisePattern.of(range(1, 40)), max_rounds=3))
    assert len(exc.value.partial.steps) == 6


def test_search_noise_free():
    rep = exhaustive_noise_search("basic4", PI, "10", "01", 0, 8)
    assert rep.worst["transmissions"] == 4 and rep.patterns == 1


def test_search_basic4_two_erasures():
    rep = exhaustive_noise_search("basic4", PI, "10", "01", 2, 12)
    assert rep.ok
    assert rep.worst["transmissions"] <= 8
    assert rep.patterns == pattern_count(12, 2)


def test_search_ags4_two_erasures():
    rep = exhaustive_noise_search("ags4", PI, "10", "01", 2, 16)
    assert rep.worst["cc_sym"] <= 6


def test_search_limit(monkeypatch):
    monkeypatch.setenv("ERASURESIM_MAX_PATTERNS", "10")
    with pytest.raises(SearchLimitError) as exc:
        exhaustive_noise_search("basic4", PI, "10", "01", 2, 12)
    assert exc.value.required == pattern_count(12, 2)


@pytest.mark.parametrize("n", [4, 6, 8])
def test_greedy_matches_exhaustive_worst(n):
    p = string_exchange(n)
    x, y = ("10" * n)[: n // 2], ("01" * n)[: n // 2]
    for budget in (1, 2, 3):
        rep = exhaustive_noise_search("basic4", p, x, y, budget, 4 * n)
        greedy = run(RunConfig("basic4", p, x, y, greedy_adversary(budget)))
        assert greedy.metrics.transmissions == rep.worst["transmissions"] == n + 2 * budget


@pytest.mark.parametrize("gap", [1, 3, 10])
def test_unsync_demo(gap):
    pattern = unsync_termination_demo(PI, "10", "01", gap)
    assert pattern.budget == gap - 1
    res = run(RunConfig("basic4", PI, "10", "01", pattern))
    assert res.correct
    assert res.metrics.t_b - res.metrics.t_a == gap


def test_unsync_demo_rejects_ags():
    with pytest.raises(ValueError):
        unsync_termination_demo(PI, "10", "01", 2, scheme="ags4")


def test_binary_layers_match_quaternary():
    # erasing any slot of a binary2 word behaves like erasing the 4-ary timestep
    p = hashed(6, 4)
    for erased in ([2], [1, 5], [3, 4, 8]):
        quad = run(RunConfig("basic4", p, "110", "010", NoisePattern.of(erased)))
        bits = run(RunConfig("basic2", p, "110", "010",
                             NoisePattern.of(2 * t - 1 for t in erased)))
        assert [s["received"] for s in quad.trace.steps] == [s["received"] for s in bits.trace.steps]
        assert quad.metrics.transmissions == bits.metrics.transmissions
        assert bits.metrics.cc_bits == quad.metrics.cc_bits


def test_unary_layer_matches_ags4():
    p = hashed(6, 4)
    for erased in ([3], [2, 7], [4, 5, 6]):
        quad = run(RunConfig("ags4", p, "011", "100", NoisePattern.of(erased)))
        unary = run(RunConfig("ags1", p, "011", "100",
                              NoisePattern.of(4 * t - 3 for t in erased)))
        assert [s["received"] for s in quad.trace.steps] == [s["received"] for s in unary.trace.steps]
        assert unary.metrics.energy == quad.metrics.cc_sym
        assert unary.metrics.rc_timesteps == 4 * quad.metrics.rc_timesteps


def test_ecc3_absorbs_single_slot_erasures():
    p = hashed(6, 1)
    clean = run(RunConfig("ecc3", p, "101", "001"))
    # one erased slot in each of the first four words
    noisy = run(RunConfig("ecc3", p, "101", "001", NoisePattern.of([1, 5, 9, 12])))
    assert noisy.correct
    assert noisy.metrics.transmissions == clean.metrics.transmissions


@settings(max_examples=60, deadline=None)
@given(scheme=st.sampled_from(["basic4", "basic2", "ecc3"]),
       n=st.sampled_from([2, 4, 6, 8]),
       seed=st.integers(0, 10**6),
       erased=st.sets(st.integers(1, 120), max_size=12))
def test_fixed_schemes_always_correct(scheme, n, seed, erased):
    p = hashed(n, seed)
    x, y = format(seed % 16, "04b"), format(seed % 13, "04b")
    res = run(RunConfig(scheme, p, x, y, NoisePattern.of(erased)))
    assert res.correct
    assert not res.metrics.bound_failures()
    assert verify_trace(res.trace).ok


@settings(max_examples=60, deadline=None)
@given(scheme=st.sampled_from(["ags4", "ags1"]),
       n=st.sampled_from([2, 4, 6, 8]),
       seed=st.integers(0, 10**6),
       erased=st.sets(st.integers(1, 200), max_size=12))
def test_ags_schemes_semi_terminate_correctly(scheme, n, seed, erased):
    p = hashed(n, seed)
    res = run(RunConfig(scheme, p, "0110", "1011", NoisePattern.of(erased)))
    assert res.correct
    rep = verify_trace(res.trace)
    assert rep["semi-termination"].passed and rep["transcript-sync"].passed
    assert rep["round-bound"].passed
