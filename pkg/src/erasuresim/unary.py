"""Temporal unary encoding: one 4-ary timestep becomes a block of four
energy/silence slots owned by the same party."""
from __future__ import annotations

from .channel import ERASURE, SILENCE, ChannelError, Symbol4, Token
from .fixed import Codec

ENERGY = 1
QUIET = 0
BLOCK = 4


def encode_block(token: Token) -> tuple:
    """Energy in slot ``info + 2*parity + 1`` of the block; silence is an empty block."""
    if token is SILENCE:
        return (QUIET,) * BLOCK
    if not isinstance(token, Symbol4):
        raise ChannelError(f"cannot send {token!r} as a unary block")
    block = [QUIET] * BLOCK
    block[token.code - 1] = ENERGY
    return tuple(block)


def decode_block(block) -> Token:
    block = tuple(block)
    if len(block) != BLOCK:
        raise ChannelError(f"unary blocks have {BLOCK} slots, got {len(block)}")
    if any(s is ERASURE for s in block):
        return ERASURE
    energy = [i for i, s in enumerate(block) if s == ENERGY]
    if not energy:
        return SILENCE
    if len(energy) == 1:
        return Symbol4.from_code(energy[0] + 1)
    return ERASURE


def block_to_str(block) -> str:
    return "".join("x" if s is ERASURE else str(s) for s in block)


def block_from_str(text: str) -> tuple:
    try:
        return tuple(ERASURE if c == "x" else {"0": QUIET, "1": ENERGY}[c] for c in text)
    except KeyError:
        raise ChannelError(f"bad unary block {text!r}") from None


def energy(block) -> int:
    return sum(1 for s in block if s == ENERGY)


class UnaryCodec(Codec):
    name = "unary"
    width = BLOCK
    bits_per_symbol = 1  # one energy pulse per non-silent symbol

    def encode(self, token):
        return encode_block(token)

    def decode(self, slots):
        return decode_block(slots)

    def slot_char(self, value) -> str:
        return "x" if value is ERASURE else str(value)


UNARY = UnaryCodec()
