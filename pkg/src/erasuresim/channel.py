"""Erasure channel tokens, noise patterns and online adversaries.

Global timesteps (and channel slots) are 1-based; odd 4-ary timesteps
belong to Alice.  A noise source is asked once per channel slot whether
to erase it.
"""
from __future__ import annotations

import enum
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, NamedTuple


class Mark(enum.Enum):
    SILENCE = "silence"
    ERASURE = "erasure"

    def __repr__(self):
        return self.name


SILENCE = Mark.SILENCE
ERASURE = Mark.ERASURE


@dataclass(frozen=True, slots=True)
class Symbol4:
    info: int
    parity: int

    def __post_init__(self):
        if self.info not in (0, 1) or self.parity not in (0, 1):
            raise ValueError(f"Symbol4 fields must be bits, got {self.info!r}, {self.parity!r}")

    @property
    def code(self) -> int:
        """Position of this symbol in the 4-ary alphabet, 1..4 (b + 2*rho + 1)."""
        return self.info + 2 * self.parity + 1

    @classmethod
    def from_code(cls, code: int) -> "Symbol4":
        if not 1 <= code <= 4:
            raise ValueError(f"symbol code must be in 1..4, got {code}")
        return SYMBOLS[code - 1]


SYMBOLS = tuple(Symbol4(b, r) for r in (0, 1) for b in (0, 1))

Token = Symbol4 | Mark


class ChannelError(ValueError):
    """Contract violation at the channel boundary."""


def transmit(token: Token, erase: bool) -> Token:
    """Pass ``token`` through the erasure channel."""
    if token is ERASURE:
        raise ChannelError("parties never send an erasure mark")
    return ERASURE if erase else token


def token_to_json(token: Token):
    if isinstance(token, Symbol4):
        return [token.info, token.parity]
    return token.value


def token_from_json(obj) -> Token:
    if isinstance(obj, list) and len(obj) == 2:
        return Symbol4(int(obj[0]), int(obj[1]))
    try:
        return Mark(obj)
    except ValueError:
        raise ChannelError(f"not a channel token: {obj!r}") from None


# -- noise sources -----------------------------------------------------------

class Exposure(NamedTuple):
    """What an adversary sees when a channel slot is about to be delivered."""

    slot: int          # global channel-slot index (1-based)
    timestep: int      # 4-ary timestep the slot belongs to
    sub: int           # index of the slot inside its timestep, 0-based
    sender: str        # "A" or "B"
    token: Token       # 4-ary token being transmitted
    value: object      # the slot's content (token, bit, or energy flag)
    history: tuple     # (slot, erased) decisions so far, oldest first


@dataclass(frozen=True)
class NoisePattern:
    """Static, finite set of erased channel slots."""

    erased: frozenset[int] = frozenset()

    def __post_init__(self):
        bad = [t for t in self.erased if not isinstance(t, int) or t < 1]
        if bad:
            raise ChannelError(f"erased timesteps must be positive integers, got {sorted(bad)}")
        object.__setattr__(self, "erased", frozenset(self.erased))

    @classmethod
    def of(cls, timesteps: Iterable[int]) -> "NoisePattern":
        return cls(frozenset(timesteps))

    @property
    def budget(self) -> int:
        return len(self.erased)

    def fresh(self) -> "NoisePattern":
        return self

    def decide(self, exposure: Exposure) -> bool:
        return exposure.slot in self.erased

    def as_strategy(self) -> "AdversaryStrategy":
        erased = self.erased
        return AdversaryStrategy(len(erased), lambda: (lambda e: e.slot in erased), name="pattern")

    def to_json(self) -> str:
        return json.dumps({"erase": sorted(self.erased)})


@dataclass
class AdversaryStrategy:
    """Online adversary with a finite erasure budget.

    ``make_rule`` builds the (possibly stateful) decision rule for one run;
    the strategy refuses any erasure beyond the budget, so a run can never
    exceed it.
    """

    budget: int
    make_rule: Callable[[], Callable[[Exposure], bool]]
    name: str = "adversary"
    used: int = field(default=0, init=False)

    def __post_init__(self):
        if self.budget < 0:
            raise ChannelError("adversary budget must be non-negative")
        self._rule = self.make_rule()

    def fresh(self) -> "AdversaryStrategy":
        return AdversaryStrategy(self.budget, self.make_rule, self.name)

    def decide(self, exposure: Exposure) -> bool:
        if self.used >= self.budget:
            return False
        if self._rule(exposure):
            self.used += 1
            return True
        return False


def greedy_adversary(budget: int) -> AdversaryStrategy:
    """Erase the earliest slot of every round that has not been hit yet.

    At most one erasure lands in each round; that is the placement that
    costs the basic scheme a full retransmitted round per erasure.
    """

    def make_rule():
        hit_rounds: set[int] = set()

        def rule(e: Exposure) -> bool:
            rnd = (e.timestep + 1) // 2
            if rnd in hit_rounds:
                return False
            hit_rounds.add(rnd)
            return True

        return rule

    return AdversaryStrategy(budget, make_rule, name="greedy")


NoiseSource = NoisePattern | AdversaryStrategy


def random_pattern(p: float, seed: int, horizon: int) -> NoisePattern:
    if not 0 <= p <= 1:
        raise ChannelError(f"erasure probability must be in [0, 1], got {p}")
    rng = random.Random(seed)
    return NoisePattern.of(t for t in range(1, horizon + 1) if rng.random() < p)


def burst_pattern(start: int, length: int) -> NoisePattern:
    return NoisePattern.of(range(start, start + length))


def _kv(body: str) -> dict[str, str]:
    out = {}
    for part in filter(None, body.split(",")):
        k, sep, v = part.partition("=")
        out[k.strip()] = v.strip() if sep else ""
    return out


def parse_noise(spec: str) -> NoiseSource:
    """Parse a noise spec.

    ``none`` | ``file:PATH`` | ``PATH.json`` | ``random:p=0.1,seed=S,horizon=H``
    | ``burst:start=a,len=b`` | ``adversary:greedy,budget=T`` | ``erase:1,4,7``
    """
    spec = spec.strip()
    try:
        if spec in ("", "none"):
            return NoisePattern()
        kind, _, body = spec.partition(":")
        if kind == "file" or (not body and spec.endswith(".json")):
            return load_pattern(body if kind == "file" else spec)
        if kind == "erase":
            return NoisePattern.of(int(t) for t in body.split(",") if t)
        if kind == "random":
            kv = _kv(body)
            return random_pattern(float(kv["p"]), int(kv.get("seed", 0)), int(kv["horizon"]))
        if kind == "burst":
            kv = _kv(body)
            return burst_pattern(int(kv["start"]), int(kv["len"]))
        if kind == "adversary":
            name, _, rest = body.partition(",")
            kv = _kv(rest)
            if name != "greedy":
                raise ChannelError(f"unknown adversary {name!r}")
            return greedy_adversary(int(kv["budget"]))
    except (KeyError, ValueError) as e:
        raise ChannelError(f"bad noise spec {spec!r}: {e}") from e
    raise ChannelError(f"unknown noise spec {spec!r}")


def load_pattern(path: str | Path) -> NoisePattern:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ChannelError(f"cannot read noise file {path}: {e}") from e
    if not isinstance(doc, dict) or not isinstance(doc.get("erase"), list):
        raise ChannelError(f"{path}: expected {{'erase': [t1, t2, ...]}}")
    if not all(isinstance(t, int) and not isinstance(t, bool) for t in doc["erase"]):
        raise ChannelError(f"{path}: erased timesteps must be integers")
    return NoisePattern.of(doc["erase"])
