import itertools

import pytest

from erasuresim.channel import ERASURE, SILENCE, ChannelError, Symbol4
from erasuresim.fixed import (ECC3_CODE, FixedAliceState, FixedBobState, SchemeError,
                              alice_even_step, alice_odd_step, bob_even_step, bob_odd_step,
                              decode_binary2, decode_ecc3, encode_binary2, encode_ecc3)
from erasuresim.protocol import string_exchange

PI = string_exchange(4)


def test_alice_odd_fresh():
    s, tok = alice_odd_step(FixedAliceState(), "10", PI)
    assert tok == Symbol4(1, 1) and s.r == 1 and s.transcript == "1"


def test_alice_odd_second_round():
    s, tok = alice_odd_step(FixedAliceState("10", 1), "10", PI)
    assert tok == Symbol4(0, 0) and s.transcript == "100"


def test_alice_even_accepts_and_rolls_back():
    s = FixedAliceState("1", 1)
    ok = alice_even_step(s, Symbol4(0, 1), PI)
    assert (ok.transcript, ok.r) == ("10", 1)
    for bad in (ERASURE, Symbol4(1, 0)):
        back = alice_even_step(s, bad, PI)
        assert (back.transcript, back.r) == ("", 0)


def test_alice_terminates_and_refuses_more_steps():
    s = alice_even_step(FixedAliceState("100", 2), Symbol4(1, 0), PI)
    assert s.terminated and s.transcript == "1001"
    with pytest.raises(SchemeError):
        alice_odd_step(s, "10", PI)


def test_bob_odd_cases():
    s = bob_odd_step(FixedBobState(), Symbol4(1, 1), "01", PI)
    assert (s.transcript, s.err) == ("1", False)
    s = bob_odd_step(FixedBobState(), ERASURE, "01", PI)
    assert (s.transcript, s.err) == ("", True)
    s = bob_odd_step(FixedBobState(), Symbol4(1, 0), "01", PI)
    assert s.err
    s = bob_odd_step(FixedBobState("10", 1), SILENCE, "01", PI)
    assert s.terminated and s.transcript == "10"


def test_bob_even_cases():
    s, tok = bob_even_step(FixedBobState("1", 0), "01", PI)
    assert tok == Symbol4(0, 1) and (s.transcript, s.r) == ("10", 1)
    s0 = FixedBobState("10", 1, err=True, saved=Symbol4(0, 1))
    s, tok = bob_even_step(s0, "01", PI)
    assert tok == Symbol4(0, 1) and s == s0
    s, tok = bob_even_step(FixedBobState(err=True), "01", PI)
    assert tok == Symbol4(0, 0)


def test_binary2():
    assert encode_binary2(Symbol4(1, 0)) == (1, 0)
    assert decode_binary2((1, 0)) == Symbol4(1, 0)
    for slots in itertools.product((0, 1, ERASURE), repeat=2):
        if ERASURE in slots:
            assert decode_binary2(slots) is ERASURE
    assert decode_binary2((SILENCE, SILENCE)) is SILENCE
    assert decode_binary2((SILENCE, ERASURE)) is ERASURE


def test_ecc3_examples():
    assert decode_ecc3((0, ERASURE, 0)) == Symbol4(0, 0)
    assert decode_ecc3((ERASURE, ERASURE, 0)) is ERASURE
    assert decode_ecc3((0, 1, 1)) == Symbol4(1, 0)
    with pytest.raises(ChannelError):
        decode_ecc3((1, 1, 1))


def test_ecc3_every_mask():
    # at most one erasure always decodes; no mask ever decodes to the wrong symbol
    for sym, word in ECC3_CODE.items():
        assert encode_ecc3(sym) == word
        for mask in itertools.product((False, True), repeat=3):
            got = decode_ecc3(tuple(ERASURE if m else b for b, m in zip(word, mask)))
            if sum(mask) <= 1:
                assert got == sym
            else:
                assert got in (sym, ERASURE)


def test_ecc3_code_has_distance_two():
    words = list(ECC3_CODE.values())
    for a, b in itertools.combinations(words, 2):
        assert sum(x != y for x, y in zip(a, b)) == 2
