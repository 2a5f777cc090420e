from erasuresim.ags import (SIMULATING, TERMINATION, AgsAliceState, AgsBobState, CostLedger,
                            ags_alice_even, ags_alice_odd, ags_bob_even, ags_bob_odd)
from erasuresim.channel import ERASURE, SILENCE, Symbol4
from erasuresim.protocol import ALICE, BOB, string_exchange

PI = string_exchange(4)


def test_alice_odd():
    s, tok = ags_alice_odd(AgsAliceState(), "10", PI)
    assert tok == Symbol4(1, 1) and s.r == 1
    _, tok = ags_alice_odd(AgsAliceState(last_received=ERASURE), "10", PI)
    assert tok is SILENCE
    # hearing silence is not hearing an erasure
    _, tok = ags_alice_odd(AgsAliceState(last_received=SILENCE), "10", PI)
    assert isinstance(tok, Symbol4)


def test_alice_even():
    s = ags_alice_even(AgsAliceState("", 1), Symbol4(0, 1), "10", PI)
    assert (s.transcript, s.r) == ("10", 1)
    s = ags_alice_even(AgsAliceState("", 1), SILENCE, "10", PI)
    assert (s.transcript, s.r) == ("", 0)
    s = ags_alice_even(AgsAliceState("", 1), ERASURE, "10", PI)
    assert s.r == 0
    _, tok = ags_alice_odd(s, "10", PI)
    assert tok is SILENCE


def test_bob_odd():
    s = ags_bob_odd(AgsBobState(), Symbol4(1, 1), "01", PI)
    assert (s.r, s.transcript, s.b_send) == (1, "10", 0)
    e = ags_bob_odd(s, ERASURE, "01", PI)
    assert e.transcript == "10"
    assert ags_bob_even(e, PI)[1] is SILENCE
    stale = ags_bob_odd(s, Symbol4(1, 1), "01", PI)
    assert stale.transcript == "10"
    assert ags_bob_even(stale, PI)[1] == Symbol4(0, 1)


def test_bob_termination_phase():
    done = AgsBobState("1001", 2, 1, Symbol4(0, 0), SIMULATING)
    s, tok = ags_bob_even(done, PI)
    assert tok == Symbol4(1, 0) and s.phase == TERMINATION
    again = ags_bob_odd(s, Symbol4(0, 0), "01", PI)
    assert ags_bob_even(again, PI)[1] == Symbol4(1, 0)
    quiet = ags_bob_odd(s, SILENCE, "01", PI)
    assert ags_bob_even(quiet, PI)[1] is SILENCE
    assert ags_bob_even(ags_bob_odd(s, ERASURE, "01", PI), PI)[1] is SILENCE
    assert ags_bob_even(ags_bob_odd(s, Symbol4(1, 1), "01", PI), PI)[1] is SILENCE


def test_cost_ledger():
    c = CostLedger().charge(ALICE, Symbol4(0, 1), ERASURE).charge(BOB, SILENCE, Symbol4(0, 0))
    assert (c.c_a, c.c_b, c.c_ch) == (1, 0, 1)
