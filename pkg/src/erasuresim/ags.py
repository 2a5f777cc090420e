"""Scheme for the setting where an active party may stay silent.

Silence doubles as a negative acknowledgement: a party that hears an
erasure stays silent in its next slot, asking for a repeat.  Alice exits
once she has simulated all N/2 rounds; Bob never exits.  When his own
transcript is complete he enters a termination phase in which he answers
only a matching-parity symbol and is silent otherwise, so both parties
end up silent forever (semi-termination).
"""
from __future__ import annotations

from dataclasses import dataclass, replace

from .channel import ERASURE, SILENCE, Symbol4, Token
from .fixed import SchemeError
from .protocol import ALICE, BOB, NoiselessProtocol

SIMULATING = "simulating"
TERMINATION = "termination"


@dataclass(frozen=True, slots=True)
class AgsAliceState:
    transcript: str = ""
    r: int = 0
    last_received: Token = Symbol4(0, 0)
    terminated: bool = False


@dataclass(frozen=True, slots=True)
class AgsBobState:
    transcript: str = ""
    r: int = 0
    b_send: int = 0
    last_received: Token = Symbol4(0, 0)
    phase: str = SIMULATING


@dataclass(frozen=True, slots=True)
class CostLedger:
    """Non-silent sends per party and erasures heard by either party."""

    c_a: int = 0
    c_b: int = 0
    c_ch: int = 0

    def charge(self, sender: str, sent: Token, received: Token) -> "CostLedger":
        sent_symbol = isinstance(sent, Symbol4)
        return CostLedger(
            self.c_a + (sender == ALICE and sent_symbol),
            self.c_b + (sender == BOB and sent_symbol),
            self.c_ch + (received is ERASURE),
        )


def _matches(token: Token, parity: int) -> bool:
    # silence and erasures carry no parity, so they never match
    return isinstance(token, Symbol4) and token.parity == parity


def ags_alice_odd(state: AgsAliceState, x: str, protocol: NoiselessProtocol):
    if state.terminated:
        raise SchemeError("Alice has terminated")
    r = state.r + 1
    if state.last_received is ERASURE:
        return replace(state, r=r), SILENCE
    return replace(state, r=r), Symbol4(protocol.bit(ALICE, x, state.transcript), r % 2)


def ags_alice_even(state: AgsAliceState, received: Token, x: str, protocol: NoiselessProtocol):
    if state.terminated:
        raise SchemeError("Alice has terminated")
    if _matches(received, state.r % 2):
        b = protocol.bit(ALICE, x, state.transcript)
        t, r = state.transcript + str(b) + str(received.info), state.r
    else:
        t, r = state.transcript, state.r - 1
    return AgsAliceState(t, r, received, terminated=(r == protocol.rounds))


def ags_bob_odd(state: AgsBobState, received: Token, y: str, protocol: NoiselessProtocol):
    if state.phase == TERMINATION:
        return replace(state, last_received=received)
    if _matches(received, (state.r + 1) % 2):
        t = state.transcript + str(received.info)
        b = protocol.bit(BOB, y, t)
        return AgsBobState(t + str(b), state.r + 1, b, received, SIMULATING)
    return replace(state, last_received=received)


def ags_bob_even(state: AgsBobState, protocol: NoiselessProtocol):
    """Bob's reply; the phase switch takes effect after the reply is sent."""
    if state.phase == TERMINATION:
        if _matches(state.last_received, state.r % 2):
            return state, Symbol4(state.b_send, state.r % 2)
        return state, SILENCE
    if state.last_received is ERASURE:
        token = SILENCE
    else:
        token = Symbol4(state.b_send, state.r % 2)
    if state.r == protocol.rounds:
        state = replace(state, phase=TERMINATION)
    return state, token
