"""Challenge/response scheme over a 4-ary erasure channel without silence.

Alice and Bob are pure step functions over frozen state records.  Each
message carries the info bit of the simulated protocol and the parity of
the round the sender is simulating; a parity mismatch or an erasure makes
Alice roll her last bit back and Bob repeat his saved message.  Bob exits
only once he hears Alice's silence.

The binary variants reuse the same state machines; each 4-ary symbol is
carried by two bits (``Binary2Codec``) or by a distance-2 code of length
three (``Ecc3Codec``).
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from itertools import product

from .channel import ERASURE, SILENCE, ChannelError, Symbol4, Token
from .protocol import ALICE, BOB, NoiselessProtocol


class SchemeError(RuntimeError):
    """A step function was called outside its contract."""


@dataclass(frozen=True, slots=True)
class FixedAliceState:
    transcript: str = ""
    r: int = 0
    terminated: bool = False


@dataclass(frozen=True, slots=True)
class FixedBobState:
    transcript: str = ""
    r: int = 0
    err: bool = False
    saved: Symbol4 = Symbol4(0, 0)
    terminated: bool = False


def alice_odd_step(state: FixedAliceState, x: str, protocol: NoiselessProtocol):
    if state.terminated:
        raise SchemeError("Alice has terminated")
    r = state.r + 1
    b = protocol.bit(ALICE, x, state.transcript)
    return replace(state, transcript=state.transcript + str(b), r=r), Symbol4(b, r % 2)


def alice_even_step(state: FixedAliceState, received: Token, protocol: NoiselessProtocol):
    if state.terminated:
        raise SchemeError("Alice has terminated")
    if received is SILENCE:
        raise SchemeError("Alice heard silence, but Bob never leaves before her")
    if isinstance(received, Symbol4) and received.parity == state.r % 2:
        t, r = state.transcript + str(received.info), state.r
    else:
        t, r = state.transcript[:-1], state.r - 1
    return FixedAliceState(t, r, terminated=(r == protocol.rounds))


def bob_odd_step(state: FixedBobState, received: Token, y: str, protocol: NoiselessProtocol):
    if state.terminated:
        raise SchemeError("Bob has terminated")
    if received is SILENCE:
        return replace(state, terminated=True)
    # a parity equal to Bob's own means Alice is repeating an old round
    if received is ERASURE or received.parity == state.r % 2:
        return replace(state, err=True)
    return replace(state, transcript=state.transcript + str(received.info), err=False)


def bob_even_step(state: FixedBobState, y: str, protocol: NoiselessProtocol):
    if state.terminated:
        raise SchemeError("Bob has terminated")
    if state.err:
        return state, state.saved
    b = protocol.bit(BOB, y, state.transcript)
    r = state.r + 1
    m = Symbol4(b, r % 2)
    return replace(state, transcript=state.transcript + str(b), r=r, saved=m), m


# -- symbol codecs -----------------------------------------------------------

class Codec:
    """Maps a 4-ary token to ``width`` channel slots and back."""

    name = "quaternary"
    width = 1
    bits_per_symbol = 2

    def encode(self, token: Token) -> tuple:
        if token is ERASURE:
            raise ChannelError("cannot encode an erasure mark")
        return (token,)

    def decode(self, slots: tuple) -> Token:
        (s,) = slots
        return s

    def slot_char(self, value) -> str:
        if value is ERASURE:
            return "x"
        if value is SILENCE:
            return "_"
        if isinstance(value, Symbol4):
            return str(value.code)
        return str(value)


class Binary2Codec(Codec):
    """Info bit then parity bit; any erased slot loses the symbol."""

    name = "binary2"
    width = 2
    bits_per_symbol = 2

    def encode(self, token: Token) -> tuple:
        if token is SILENCE:
            return (SILENCE, SILENCE)
        if not isinstance(token, Symbol4):
            raise ChannelError(f"cannot encode {token!r}")
        return (token.info, token.parity)

    def decode(self, slots: tuple) -> Token:
        if len(slots) != 2:
            raise ChannelError("binary2 words have two slots")
        if ERASURE in slots:
            return ERASURE
        if all(s is SILENCE for s in slots):
            return SILENCE
        if any(s is SILENCE for s in slots):
            raise ChannelError(f"half-silent binary2 word {slots!r}")
        return Symbol4(*slots)


ECC3_CODE = {
    Symbol4(0, 0): (0, 0, 0),
    Symbol4(1, 0): (0, 1, 1),
    Symbol4(0, 1): (1, 1, 0),
    Symbol4(1, 1): (1, 0, 1),
}


class Ecc3Codec(Codec):
    """Code {000, 011, 110, 101}: any single erasure is recoverable."""

    name = "ecc3"
    width = 3
    bits_per_symbol = 3

    def encode(self, token: Token) -> tuple:
        if token is SILENCE:
            return (SILENCE,) * 3
        try:
            return ECC3_CODE[token]
        except (KeyError, TypeError):
            raise ChannelError(f"cannot encode {token!r}") from None

    def decode(self, slots: tuple) -> Token:
        if len(slots) != 3:
            raise ChannelError("ecc3 words have three slots")
        if any(s is SILENCE for s in slots):
            if all(s is SILENCE for s in slots):
                return SILENCE
            if any(s in (0, 1) for s in slots):
                raise ChannelError(f"half-silent ecc3 word {slots!r}")
            # silent slots next to erased ones: the receiver cannot rule out a codeword
            return ERASURE
        matches = [sym for sym, word in ECC3_CODE.items()
                   if all(s is ERASURE or s == w for s, w in zip(slots, word))]
        if ERASURE not in slots and not matches:
            raise ChannelError(f"{slots!r} is not a codeword and the channel only erases")
        return matches[0] if len(matches) == 1 else ERASURE


QUATERNARY = Codec()
BINARY2 = Binary2Codec()
ECC3 = Ecc3Codec()


def encode_binary2(token: Token) -> tuple:
    return BINARY2.encode(token)


def decode_binary2(slots) -> Token:
    return BINARY2.decode(tuple(slots))


def encode_ecc3(token: Token) -> tuple:
    return ECC3.encode(token)


def decode_ecc3(slots) -> Token:
    return ECC3.decode(tuple(slots))


def erasure_masks(width: int):
    """All erasure masks over ``width`` slots, as tuples of booleans."""
    return list(product((False, True), repeat=width))
