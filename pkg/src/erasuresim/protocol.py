"""Noiseless alternating binary protocols and their reference execution.

A protocol is a next-bit oracle: given the speaking role, that party's
input and the transcript so far, it returns the next bit.  Transcripts
and inputs are plain ``str`` objects over ``"01"``.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

ALICE = "A"
BOB = "B"

NextBit = Callable[[str, str, str], int]
Speaker = Callable[[str], str]


class ProtocolError(ValueError):
    """Raised for malformed or unsupported protocol definitions."""


def check_bits(bits: str, what: str = "bit string") -> str:
    if not isinstance(bits, str) or any(c not in "01" for c in bits):
        raise ProtocolError(f"{what} must be a string over '01', got {bits!r}")
    return bits


def alternating_speaker(transcript: str) -> str:
    # position len+1 is odd => Alice
    return ALICE if len(transcript) % 2 == 0 else BOB


@dataclass(frozen=True)
class NoiselessProtocol:
    """An N-bit protocol given as a next-bit oracle.

    ``speaker`` is None for alternating protocols (Alice at odd positions).
    ``pad_of`` is set only on protocols produced by :func:`normalize` that
    needed padding; it maps a transcript to the positions that are pads.
    """

    n_bits: int
    next_bit: NextBit = field(compare=False)
    speaker: Speaker | None = field(default=None, compare=False)
    name: str = "oracle"
    pad_of: Callable[[str], frozenset[int]] | None = field(default=None, compare=False, repr=False)
    table: Mapping[str, int] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not isinstance(self.n_bits, int) or self.n_bits <= 0:
            raise ProtocolError(f"protocol length must be a positive integer, got {self.n_bits!r}")

    @property
    def alternating(self) -> bool:
        return self.speaker is None

    @property
    def is_normalized(self) -> bool:
        return self.alternating and self.n_bits % 2 == 0

    @property
    def rounds(self) -> int:
        return self.n_bits // 2

    def who_speaks(self, transcript: str) -> str:
        if self.speaker is None:
            return alternating_speaker(transcript)
        return self.speaker(transcript)

    def bit(self, role: str, inp: str, transcript: str) -> int:
        """The bit ``role`` sends after ``transcript`` (pi(x|T) / pi(y|T))."""
        if len(transcript) >= self.n_bits:
            raise ProtocolError(f"transcript {transcript!r} already complete")
        b = self.next_bit(role, inp, transcript)
        if b not in (0, 1):
            raise ProtocolError(f"next_bit returned {b!r}, expected 0 or 1")
        return b

    def strip_padding(self, transcript: str) -> str:
        if self.pad_of is None:
            return transcript
        pads = self.pad_of(transcript)
        return "".join(c for i, c in enumerate(transcript) if i not in pads)


def normalize(raw: NoiselessProtocol) -> NoiselessProtocol:
    """Return an alternating, even-length equivalent of ``raw``.

    Alternating protocols of odd length get one constant-0 pad bit from Bob.
    Non-alternating protocols are interleaved with constant-0 dummy bits
    wherever the scheduled speaker has nothing to say; the result has
    length ``2 * raw.n_bits``.  Pad positions are recoverable through
    :meth:`NoiselessProtocol.strip_padding`.
    """
    if raw.n_bits <= 0:
        raise ProtocolError("cannot normalize an empty protocol")
    if raw.is_normalized:
        return raw
    if raw.alternating:
        n = raw.n_bits

        def padded_bit(role, inp, transcript):
            if len(transcript) >= n:
                return 0
            return raw.next_bit(role, inp, transcript)

        return NoiselessProtocol(
            n + 1, padded_bit, None, name=f"{raw.name}+pad",
            pad_of=lambda t: frozenset(range(n, len(t))),
        )

    def layout(transcript: str) -> tuple[str, frozenset[int]]:
        # replay the normalized prefix, tracking the raw prefix and pad slots
        raw_prefix = []
        pads = set()
        for pos, c in enumerate(transcript):
            if _is_pad(raw, "".join(raw_prefix), pos):
                pads.add(pos)
            else:
                raw_prefix.append(c)
        return "".join(raw_prefix), frozenset(pads)

    def interleaved_bit(role, inp, transcript):
        raw_prefix, _ = layout(transcript)
        if _is_pad(raw, raw_prefix, len(transcript)):
            return 0
        return raw.next_bit(role, inp, raw_prefix)

    return NoiselessProtocol(
        2 * raw.n_bits, interleaved_bit, None, name=f"{raw.name}+interleave",
        pad_of=lambda t: layout(t)[1],
    )


def _is_pad(raw: NoiselessProtocol, raw_prefix: str, pos: int) -> bool:
    if len(raw_prefix) >= raw.n_bits:
        return True
    scheduled = ALICE if pos % 2 == 0 else BOB
    return raw.who_speaks(raw_prefix) != scheduled


def reference_transcript(protocol: NoiselessProtocol, x: str, y: str) -> str:
    """Noise-free alternating replay of ``protocol`` on inputs (x, y)."""
    if not protocol.is_normalized:
        raise ProtocolError("reference_transcript needs a normalized protocol")
    check_bits(x, "x")
    check_bits(y, "y")
    t = ""
    while len(t) < protocol.n_bits:
        role = protocol.who_speaks(t)
        t += str(protocol.bit(role, x if role == ALICE else y, t))
    return t


def replay_raw(protocol: NoiselessProtocol, x: str, y: str) -> str:
    """Replay a possibly non-alternating protocol by asking who speaks next."""
    check_bits(x, "x")
    check_bits(y, "y")
    t = ""
    while len(t) < protocol.n_bits:
        role = protocol.who_speaks(t)
        t += str(protocol.bit(role, x if role == ALICE else y, t))
    return t


# -- builtin protocols -------------------------------------------------------

def string_exchange(n_bits: int) -> NoiselessProtocol:
    """Alice's round-r bit is x[r-1], Bob's is y[r-1]; inputs have N/2 bits."""
    if n_bits <= 0 or n_bits % 2:
        raise ProtocolError("string-exchange needs a positive even length")

    def next_bit(role, inp, transcript):
        r = len(transcript) // 2
        if r >= len(inp):
            raise ProtocolError(f"input {inp!r} too short for {n_bits}-bit string exchange")
        return int(inp[r])

    return NoiselessProtocol(n_bits, next_bit, name=f"string-exchange:{n_bits}")


def constant(n_bits: int, value: int = 0) -> NoiselessProtocol:
    return NoiselessProtocol(n_bits, lambda role, inp, t: value, name=f"constant-{value}:{n_bits}")


def hashed(n_bits: int, seed: int = 0) -> NoiselessProtocol:
    """Pseudo-random protocol whose bits depend on role, input and prefix."""

    def next_bit(role, inp, transcript):
        h = hashlib.blake2b(f"{seed}|{role}|{inp}|{transcript}".encode(), digest_size=1)
        return h.digest()[0] & 1

    return NoiselessProtocol(n_bits, next_bit, name=f"hashed:{n_bits}:{seed}")


def from_table(n_bits: int, entries: Mapping[str, int], name: str = "table") -> NoiselessProtocol:
    """Table-backed protocol.

    Keys are transcript prefixes (input-independent), or ``"<input>|<prefix>"``
    for input-dependent entries; the latter take precedence.
    """
    if not isinstance(n_bits, int) or n_bits <= 0:
        raise ProtocolError(f"n_bits must be a positive integer, got {n_bits!r}")
    if n_bits % 2:
        raise ProtocolError("table protocols must end with Bob's message (even n_bits)")
    table = {}
    for key, bit in entries.items():
        inp, _, prefix = key.rpartition("|")
        check_bits(prefix, "table prefix")
        if inp:
            check_bits(inp, "table input")
        if len(prefix) >= n_bits:
            raise ProtocolError(f"table prefix {prefix!r} is longer than the protocol")
        if bit not in (0, 1):
            raise ProtocolError(f"table entry {key!r} must map to 0 or 1")
        table[key] = bit

    def next_bit(role, inp, transcript):
        key = f"{inp}|{transcript}"
        if key in table:
            return table[key]
        try:
            return table[transcript]
        except KeyError:
            raise ProtocolError(f"table has no entry for prefix {transcript!r} (input {inp!r})") from None

    return NoiselessProtocol(n_bits, next_bit, name=name, table=table)


def random_table(n_bits: int, input_bits: int, rng) -> NoiselessProtocol:
    """Fully materialized random protocol over all inputs of ``input_bits`` bits."""
    entries = {}
    inputs = [format(v, f"0{input_bits}b") if input_bits else "" for v in range(2 ** input_bits)]
    prefixes = [""]
    for depth in range(n_bits):
        for prefix in prefixes:
            for inp in inputs:
                entries[f"{inp}|{prefix}"] = int(rng.integers(2))
        prefixes = [p + c for p in prefixes for c in "01"] if depth + 1 < n_bits else []
    return from_table(n_bits, entries, name=f"random-table:{n_bits}")


def load_protocol(path: str | Path) -> NoiselessProtocol:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ProtocolError(f"cannot read protocol file {path}: {e}") from e
    if not isinstance(doc, dict) or "n_bits" not in doc or not isinstance(doc.get("entries"), dict):
        raise ProtocolError(f"{path}: expected {{'n_bits': N, 'entries': {{...}}}}")
    return from_table(doc["n_bits"], doc["entries"], name=Path(path).name)


def dump_protocol(protocol: NoiselessProtocol, path: str | Path) -> None:
    table = protocol.table
    if table is None:
        raise ProtocolError("only table-backed protocols can be written to a file")
    Path(path).write_text(json.dumps({"n_bits": protocol.n_bits, "entries": dict(table)}, sort_keys=True))


def resolve_protocol(spec: str) -> NoiselessProtocol:
    """``builtin:string-exchange:N``, ``builtin:constant:N``, ``builtin:hashed:N[:seed]`` or a JSON path."""
    if spec.startswith("builtin:"):
        parts = spec.split(":")[1:]
        try:
            kind, n = parts[0], int(parts[1])
            if kind == "string-exchange":
                return string_exchange(n)
            if kind == "constant":
                return constant(n)
            if kind == "hashed":
                return hashed(n, int(parts[2]) if len(parts) > 2 else 0)
        except (IndexError, ValueError) as e:
            raise ProtocolError(f"bad builtin protocol spec {spec!r}") from e
        raise ProtocolError(f"unknown builtin protocol {parts[0]!r}")
    return load_protocol(spec)
