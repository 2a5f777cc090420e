"""Lockstep driver for the coding schemes.

A :class:`Simulator` advances an immutable :class:`Cursor` one 4-ary
timestep at a time: the scheduled sender speaks, its token is spread over
the codec's channel slots, the noise source erases some of them, and the
receiver hears the decoded result.  ``run`` records every timestep in a
:class:`RunTrace`; ``exhaustive_noise_search`` forks cursors to cover every
erasure pattern of bounded weight.
"""
from __future__ import annotations

import json
import math
import os
from collections import defaultdict
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Any

from . import ags, fixed
from .channel import (ERASURE, SILENCE, AdversaryStrategy, Exposure, NoisePattern,
                      NoiseSource, Symbol4, Token, token_to_json)
from .fixed import BINARY2, ECC3, QUATERNARY, Codec, SchemeError
from .protocol import ALICE, BOB, NoiselessProtocol, check_bits, reference_transcript
from .unary import UNARY

TRACE_FORMAT = 1
DEFAULT_SETTLE = 3
DEFAULT_MAX_PATTERNS = 10_000_000


class HarnessError(RuntimeError):
    """The driver gave up; ``partial`` holds whatever trace was recorded."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


# -- scheme adapters ---------------------------------------------------------

class FixedScheme:
    """Adapter giving the silence-free scheme a role-uniform interface."""

    family = "fixed"

    def __init__(self, name: str, codec: Codec):
        self.name = name
        self.codec = codec

    def initial(self, role):
        return fixed.FixedAliceState() if role == ALICE else fixed.FixedBobState()

    def speak(self, role, state, inp, protocol):
        """Returns (state, token, injected); injected tokens are not transmissions."""
        if role == ALICE:
            if state.terminated:
                return state, SILENCE, True
            return (*fixed.alice_odd_step(state, inp, protocol), False)
        return (*fixed.bob_even_step(state, inp, protocol), False)

    def listen(self, role, state, token, inp, protocol):
        if role == ALICE:
            if state.terminated:
                return state
            return fixed.alice_even_step(state, token, protocol)
        return fixed.bob_odd_step(state, token, inp, protocol)

    def snapshot(self, role, state) -> dict:
        d = {"transcript": state.transcript, "r": state.r, "terminated": state.terminated}
        if role == BOB:
            d["err"] = state.err
            d["saved"] = token_to_json(state.saved)
        return d


class AgsScheme:
    family = "ags"

    def __init__(self, name: str, codec: Codec):
        self.name = name
        self.codec = codec

    def initial(self, role):
        return ags.AgsAliceState() if role == ALICE else ags.AgsBobState()

    def speak(self, role, state, inp, protocol):
        if role == ALICE:
            if state.terminated:
                return state, SILENCE, True
            return (*ags.ags_alice_odd(state, inp, protocol), False)
        return (*ags.ags_bob_even(state, protocol), False)

    def listen(self, role, state, token, inp, protocol):
        if role == ALICE:
            if state.terminated:
                return state
            return ags.ags_alice_even(state, token, inp, protocol)
        return ags.ags_bob_odd(state, token, inp, protocol)

    def snapshot(self, role, state) -> dict:
        d = {"transcript": state.transcript, "r": state.r,
             "last_received": token_to_json(state.last_received)}
        if role == ALICE:
            d["terminated"] = state.terminated
        else:
            d["phase"] = state.phase
            d["b_send"] = state.b_send
        return d


SCHEMES = {
    "basic4": FixedScheme("basic4", QUATERNARY),
    "basic2": FixedScheme("basic2", BINARY2),
    "ecc3": FixedScheme("ecc3", ECC3),
    "ags4": AgsScheme("ags4", QUATERNARY),
    "ags1": AgsScheme("ags1", UNARY),
}


def get_scheme(name: str):
    try:
        return SCHEMES[name]
    except KeyError:
        raise ValueError(f"unknown scheme {name!r}; choose from {', '.join(SCHEMES)}") from None


# -- cursor and stepping -----------------------------------------------------

@dataclass(frozen=True, slots=True)
class Cursor:
    timestep: int                 # last completed 4-ary timestep
    alice: Any
    bob: Any
    ledger: ags.CostLedger = ags.CostLedger()
    sent: int = 0                 # symbols actually transmitted (non-silent, not injected)
    erased_slots: int = 0
    erased_units: int = 0
    t_a: int | None = None
    t_b: int | None = None


@dataclass
class RunConfig:
    scheme: str
    protocol: NoiselessProtocol
    x: str
    y: str
    noise: NoiseSource = field(default_factory=NoisePattern)
    max_rounds: int | None = None
    settle_rounds: int = DEFAULT_SETTLE

    def __post_init__(self):
        get_scheme(self.scheme)
        check_bits(self.x, "x")
        check_bits(self.y, "y")
        if self.settle_rounds < 1:
            raise ValueError("settle_rounds must be at least 1")
        if self.max_rounds is not None and self.max_rounds < self.protocol.rounds:
            raise ValueError("max_rounds must be at least N/2")


def default_max_rounds(n_bits: int, budget: int) -> int:
    return 4 * (n_bits + 4 * budget) + 16


def noise_budget(noise: NoiseSource) -> int:
    return noise.budget


class Simulator:
    """Pure stepping core shared by ``run``, the exhaustive search and tests."""

    def __init__(self, scheme: str, protocol: NoiselessProtocol, x: str, y: str):
        if not protocol.is_normalized:
            raise ValueError("protocol must be normalized (alternating, even length)")
        self.scheme = get_scheme(scheme)
        self.codec = self.scheme.codec
        self.protocol = protocol
        self.x, self.y = x, y
        self.rounds = protocol.rounds

    def start(self) -> Cursor:
        return Cursor(0, self.scheme.initial(ALICE), self.scheme.initial(BOB))

    def live(self, c: Cursor) -> bool:
        """Whether the run has not yet reached its end (basic) or semi-termination (AGS)."""
        if self.scheme.family == "fixed":
            return c.t_b is None
        return c.t_a is None

    def emit(self, c: Cursor):
        t = c.timestep + 1
        role = ALICE if t % 2 else BOB
        state = c.alice if role == ALICE else c.bob
        inp = self.x if role == ALICE else self.y
        state, token, injected = self.scheme.speak(role, state, inp, self.protocol)
        return role, state, token, injected

    def slot_range(self, timestep: int) -> range:
        w = self.codec.width
        return range((timestep - 1) * w + 1, timestep * w + 1)

    def deliver(self, c: Cursor, emitted, mask) -> tuple[Cursor, Token, tuple]:
        role, sender_state, token, injected = emitted
        t = c.timestep + 1
        sent_slots = self.codec.encode(token)
        got_slots = tuple(ERASURE if m else s for s, m in zip(sent_slots, mask))
        received = self.codec.decode(got_slots)
        receiver = BOB if role == ALICE else ALICE
        recv_state = c.bob if receiver == BOB else c.alice
        recv_state = self.scheme.listen(receiver, recv_state, received,
                                        self.y if receiver == BOB else self.x, self.protocol)
        alice, bob = (sender_state, recv_state) if role == ALICE else (recv_state, sender_state)
        rnd = (t + 1) // 2
        t_a, t_b = c.t_a, c.t_b
        if t_a is None and alice.terminated:
            t_a = rnd
        if self.scheme.family == "fixed" and t_b is None and bob.terminated:
            t_b = rnd
        transmitted = isinstance(token, Symbol4) and not injected
        nc = Cursor(
            t, alice, bob,
            c.ledger.charge(role, SILENCE if injected else token, received),
            c.sent + transmitted,
            c.erased_slots + sum(mask),
            c.erased_units + (received is ERASURE and any(mask)),
            t_a, t_b,
        )
        return nc, received, got_slots

    def step(self, c: Cursor, mask=None):
        emitted = self.emit(c)
        if mask is None:
            mask = (False,) * self.codec.width
        return self.deliver(c, emitted, mask)

    def outputs(self, c: Cursor) -> tuple[str, str]:
        return c.alice.transcript, c.bob.transcript

    def last_live_slot(self, c: Cursor) -> int:
        return c.timestep * self.codec.width

    def metrics(self, c: Cursor) -> "Metrics":
        w = self.codec.width
        if self.scheme.family == "fixed":
            rc = (2 * c.t_b - 1) * w if c.t_b else c.timestep * w
        else:
            rc = 2 * c.t_a * w if c.t_a else c.timestep * w
        return Metrics(
            scheme=self.scheme.name,
            n_bits=self.protocol.n_bits,
            t_a=c.t_a,
            t_b=c.t_b,
            semi_terminated_round=c.t_a if self.scheme.family == "ags" else None,
            transmissions=c.sent,
            cc_sym=c.sent,
            cc_bits=c.sent * self.codec.bits_per_symbol,
            energy=c.sent if self.codec is UNARY else None,
            rc_timesteps=rc,
            erasures_counted=c.erased_slots,
            erased_timesteps=c.erased_units,
        )


@dataclass
class Metrics:
    scheme: str
    n_bits: int
    t_a: int | None
    t_b: int | None
    semi_terminated_round: int | None
    transmissions: int
    cc_sym: int
    cc_bits: int
    energy: int | None
    rc_timesteps: int
    erasures_counted: int
    erased_timesteps: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    def bounds(self) -> dict[str, tuple[int, int]]:
        """Each entry is (measured, bound); the run is within bounds iff measured <= bound."""
        n, t = self.n_bits, self.erasures_counted
        if self.scheme in ("basic4", "basic2", "ecc3"):
            out = {"transmissions": (self.transmissions, n + 2 * t)}
            if self.t_a is not None and self.t_b is not None:
                out["rounds"] = (self.t_b, 1 + t + n // 2)
            return out
        if self.scheme == "ags4":
            return {"cc_sym": (self.cc_sym, n + t), "rc": (self.rc_timesteps, n + 4 * t)}
        return {"energy": (self.energy, n + t), "rc": (self.rc_timesteps, 4 * (n + 4 * t))}

    def bound_failures(self) -> list[str]:
        return [f"{k}: {m} > {b}" for k, (m, b) in self.bounds().items() if m > b]


# -- traces ------------------------------------------------------------------

@dataclass
class RunTrace:
    header: dict
    steps: list[dict]
    metrics: dict | None = None

    def to_jsonl(self) -> str:
        lines = [json.dumps(self.header, sort_keys=True)]
        lines += [json.dumps(s, sort_keys=True) for s in self.steps]
        if self.metrics is not None:
            lines.append(json.dumps({"type": "metrics", **self.metrics}, sort_keys=True))
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, text: str) -> "RunTrace":
        records = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not records or records[0].get("type") != "header":
            raise ValueError("trace must start with a header record")
        header = records[0]
        if header.get("format") != TRACE_FORMAT:
            raise ValueError(f"unsupported trace format {header.get('format')!r}")
        steps = [r for r in records[1:] if r.get("type") == "step"]
        metrics = [r for r in records[1:] if r.get("type") == "metrics"]
        unknown = [r for r in records[1:] if r.get("type") not in ("step", "metrics")]
        if unknown or not steps:
            raise ValueError("trace has no steps or unknown record types")
        m = dict(metrics[-1]) if metrics else None
        if m:
            m.pop("type")
        return cls(header, steps, m)

    @classmethod
    def read(cls, path) -> "RunTrace":
        with open(path) as fh:
            return cls.from_jsonl(fh.read())


@dataclass
class RunResult:
    trace: RunTrace
    metrics: Metrics
    outputs: tuple[str, str]
    reference: str

    @property
    def correct(self) -> bool:
        return self.outputs == (self.reference, self.reference)


def _record(sim: Simulator, prev: Cursor, c: Cursor, emitted, received, got_slots, settle, events):
    role, _, token, injected = emitted
    sent_slots = sim.codec.encode(token)
    ch = sim.codec.slot_char
    return {
        "type": "step",
        "t": c.timestep,
        "round": (c.timestep + 1) // 2,
        "sender": role,
        "sent": token_to_json(token),
        "injected": injected,
        "slots_sent": "".join(ch(s) for s in sent_slots),
        "slots_received": "".join(ch(s) for s in got_slots),
        "erased_slots": c.erased_slots - prev.erased_slots,
        "received": token_to_json(received),
        "alice": sim.scheme.snapshot(ALICE, c.alice),
        "bob": sim.scheme.snapshot(BOB, c.bob),
        "ledger": {"c_a": c.ledger.c_a, "c_b": c.ledger.c_b, "c_ch": c.ledger.c_ch},
        "settle": settle,
        "events": events,
    }


def _events(sim: Simulator, prev: Cursor, c: Cursor) -> list[str]:
    ev = []
    if prev.t_a is None and c.t_a is not None:
        ev.append("alice-exit")
    if prev.t_b is None and c.t_b is not None:
        ev.append("bob-exit")
    if sim.scheme.family == "ags" and prev.bob.phase != c.bob.phase:
        ev.append("bob-termination-phase")
    return ev


def run(config: RunConfig) -> RunResult:
    """Drive both parties against ``config.noise`` until the run ends.

    Basic schemes end when Bob hears silence.  AGS schemes end when Alice
    exits; ``settle_rounds`` further noise-free rounds are then replayed and
    must be silent on both sides, otherwise a HarnessError is raised.
    """
    sim = Simulator(config.scheme, config.protocol, config.x, config.y)
    noise = config.noise.fresh()
    max_rounds = config.max_rounds or default_max_rounds(config.protocol.n_bits, noise_budget(noise))
    reference = reference_transcript(config.protocol, config.x, config.y)
    header = {
        "type": "header", "format": TRACE_FORMAT, "scheme": config.scheme,
        "n_bits": config.protocol.n_bits, "x": config.x, "y": config.y,
        "reference": reference, "width": sim.codec.width,
        "settle_rounds": config.settle_rounds, "protocol": config.protocol.name,
    }
    steps: list[dict] = []
    history: list[tuple[int, bool]] = []
    c = sim.start()
    while sim.live(c):
        if c.timestep >= 2 * max_rounds:
            raise HarnessError(f"run exceeded max_rounds={max_rounds}", RunTrace(header, steps))
        emitted = sim.emit(c)
        t = c.timestep + 1
        mask = []
        for sub, (slot, value) in enumerate(zip(sim.slot_range(t), sim.codec.encode(emitted[2]))):
            e = Exposure(slot, t, sub, emitted[0], emitted[2], value, tuple(history))
            erase = bool(noise.decide(e))
            history.append((slot, erase))
            mask.append(erase)
        nc, received, got = sim.deliver(c, emitted, tuple(mask))
        steps.append(_record(sim, c, nc, emitted, received, got, False, _events(sim, c, nc)))
        c = nc
    live_end = c
    if sim.scheme.family == "ags":
        for _ in range(2 * config.settle_rounds):
            emitted = sim.emit(c)
            nc, received, got = sim.deliver(c, emitted, (False,) * sim.codec.width)
            steps.append(_record(sim, c, nc, emitted, received, got, True, _events(sim, c, nc)))
            c = nc
            if emitted[2] is not SILENCE:
                raise HarnessError(f"party {emitted[0]} spoke at timestep {c.timestep} after "
                                   "semi-termination", RunTrace(header, steps))
    metrics = sim.metrics(live_end)
    trace = RunTrace(header, steps, metrics.to_dict())
    return RunResult(trace, metrics, sim.outputs(c), reference)


def noise_used(trace: RunTrace) -> int:
    """Erased channel slots up to the end (or semi-termination) of the run."""
    return sum(s["erased_slots"] for s in trace.steps if not s["settle"])


# -- exhaustive search -------------------------------------------------------

def pattern_count(horizon_slots: int, budget: int) -> int:
    return sum(math.comb(horizon_slots, j) for j in range(min(budget, horizon_slots) + 1))


def max_patterns() -> int:
    raw = os.environ.get("ERASURESIM_MAX_PATTERNS")
    return int(raw) if raw else DEFAULT_MAX_PATTERNS


class SearchLimitError(ValueError):
    def __init__(self, required: int, limit: int):
        super().__init__(f"exhaustive search needs {required} patterns, limit is {limit} "
                         "(raise ERASURESIM_MAX_PATTERNS)")
        self.required = required
        self.limit = limit


@dataclass
class SearchReport:
    scheme: str
    budget: int
    horizon: int
    patterns: int = 0          # erasure patterns covered, counting multiplicities
    classes: int = 0           # distinct runs actually executed
    worst: dict = field(default_factory=dict)
    worst_pattern: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


_WORST_KEYS = ("transmissions", "cc_sym", "cc_bits", "rc_timesteps", "t_a", "t_b", "energy")


def _mask_classes(codec: Codec, token: Token, erasable: int, budget: int):
    """Group slot masks by what the receiver hears and how many slots they erase.

    Masks with the same decoded token and weight lead to identical runs and
    identical noise counts, so one representative per class suffices.
    """
    sent = codec.encode(token)
    groups: dict = defaultdict(lambda: [0, None])
    for free in product((False, True), repeat=erasable):
        weight = sum(free)
        if weight > budget:
            continue
        mask = tuple(free) + (False,) * (codec.width - erasable)
        got = codec.decode(tuple(ERASURE if m else s for s, m in zip(sent, mask)))
        g = groups[(got, weight)]
        g[0] += 1
        if g[1] is None:
            g[1] = mask
    return [(weight, count, mask) for (_, weight), (count, mask) in groups.items()]


def exhaustive_noise_search(scheme: str, protocol: NoiselessProtocol, x: str, y: str,
                            budget: int, horizon: int, *, settle_rounds: int = DEFAULT_SETTLE,
                            max_rounds: int | None = None, limit: int | None = None) -> SearchReport:
    """Run every erasure pattern with at most ``budget`` erased slots inside the
    first ``horizon`` 4-ary timesteps and report the worst metrics.

    Runs are forked at each timestep, so patterns sharing a prefix share
    work, and slot masks that the receiver cannot tell apart are merged.
    Erasures that would land after the run is over are counted as covered
    patterns but cannot change the run.  Every run's outputs and bounds are
    checked; violations end up in ``failures``.
    """
    sim = Simulator(scheme, protocol, x, y)
    w = sim.codec.width
    h_slots = horizon * w
    required = pattern_count(h_slots, budget)
    limit = max_patterns() if limit is None else limit
    if required > limit:
        raise SearchLimitError(required, limit)
    reference = reference_transcript(protocol, x, y)
    max_rounds = max_rounds or default_max_rounds(protocol.n_bits, budget)
    report = SearchReport(scheme, budget, horizon)
    mask_cache: dict = {}

    stack = [(sim.start(), budget, 1, ())]
    while stack:
        c, left, mult, erased = stack.pop()
        if not sim.live(c):
            _finish(sim, c, left, mult, erased, h_slots, reference, settle_rounds, report)
            continue
        if c.timestep >= 2 * max_rounds:
            report.failures.append({"pattern": list(erased), "error": "max_rounds exceeded"})
            continue
        emitted = sim.emit(c)
        t = c.timestep + 1
        erasable = max(0, min(w, h_slots - (t - 1) * w))
        if erasable == 0 or left == 0:
            classes = [(0, 1, (False,) * w)]
        else:
            key = (emitted[2], erasable, left)
            classes = mask_cache.get(key)
            if classes is None:
                classes = mask_cache[key] = _mask_classes(sim.codec, emitted[2], erasable, left)
        base = (t - 1) * w
        for weight, count, mask in classes:
            nc, _, _ = sim.deliver(c, emitted, mask)
            hit = erased + tuple(base + i + 1 for i, m in enumerate(mask) if m) if weight else erased
            stack.append((nc, left - weight, mult * count, hit))
    expected = required
    if report.patterns != expected and not report.failures:
        report.failures.append({"error": f"covered {report.patterns} patterns, expected {expected}"})
    return report


def _finish(sim, c, left, mult, erased, h_slots, reference, settle_rounds, report):
    tail = max(0, h_slots - sim.last_live_slot(c))
    report.patterns += mult * pattern_count(tail, left)
    report.classes += 1
    end = c
    if sim.scheme.family == "ags":
        for _ in range(2 * settle_rounds):
            emitted = sim.emit(end)
            end, _, _ = sim.deliver(end, emitted, (False,) * sim.codec.width)
            if emitted[2] is not SILENCE:
                report.failures.append({"pattern": list(erased), "error": "not silent after semi-termination"})
                break
    m = sim.metrics(c)
    if sim.outputs(end) != (reference, reference):
        report.failures.append({"pattern": list(erased), "error": "wrong output",
                                "outputs": sim.outputs(end)})
    for f in m.bound_failures():
        report.failures.append({"pattern": list(erased), "error": f})
    for k in _WORST_KEYS:
        v = getattr(m, k)
        if v is not None and v > report.worst.get(k, -1):
            report.worst[k] = v
            report.worst_pattern[k] = list(erased)


# -- unsynchronized termination ----------------------------------------------

def unsync_termination_demo(protocol: NoiselessProtocol, x: str, y: str, gap: int,
                            scheme: str = "basic4") -> NoisePattern:
    """Pattern that keeps Bob alive ``gap`` rounds after Alice exits.

    Alice's post-exit silence is erased in the first slot of each of the
    ``gap - 1`` odd timesteps following her exit.
    """
    if gap < 1:
        raise ValueError("gap must be at least 1")
    if get_scheme(scheme).family != "fixed":
        raise ValueError("the demonstrator drives a scheme in which Bob exits")
    base = run(RunConfig(scheme, protocol, x, y))
    t_a = base.metrics.t_a
    w = get_scheme(scheme).codec.width
    return NoisePattern.of((2 * (t_a + j) - 2) * w + 1 for j in range(1, gap))
