"""Offline per-round invariant checks over a recorded trace.

Every check works from the JSON trace alone: the header carries the
reference transcript, and each step record carries both parties' state
after that timestep.  "Value at the start of round i" means the snapshot
after timestep 2(i-1).
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .sim import RunTrace

FIXED_SCHEMES = ("basic4", "basic2", "ecc3")
AGS_SCHEMES = ("ags4", "ags1")

CHECKS = {
    # silence-free scheme
    "step-monotone": "per round, each party's (r, transcript) stays put or grows by one round "
                     "and the two exchanged bits, and r moves iff the transcript does",
    "transcript-sync": "up to one round after Alice exits, Bob equals Alice or is exactly one "
                       "round ahead with the correct two bits; both are prefixes of the reference",
    "post-exit-frozen": "after Alice exits, both sit at N/2 with equal transcripts until Bob exits",
    "clean-round-progress": "a round with no erasure while Alice is active advances r_A by one",
    "communication-bound": "transmissions <= N + 2T and Bob exits at most 1 + T'' rounds after Alice",
    # silence-permitting scheme
    "bob-silent-after-exit": "after Alice exits both sit at N/2 and Bob's token is silence",
    "cost-ledger": "|T_B| + c_ch >= c_A + c_B (+1 when Bob is one round ahead) at every round",
    "ledger-monotone": "recorded cost counters never decrease, match the tokens, and move by at "
                       "most one per party per round",
    "two-round-progress": "two erasure-free rounds while Alice is active advance r_A",
    "progress-lower-bound": "while Bob simulates, r_A(i) >= (i - 1) - c_ch(i)",
    "termination-stall": "once Bob is in termination phase, each erasure stalls r_A at most two rounds",
    "symbol-bound": "CC_sym <= N + T",
    "round-bound": "RC <= N + 4T (times 4 for the unary scheme)",
    "semi-termination": "settle rounds after Alice's exit are silent on both sides",
    # both
    "outputs": "both parties output the reference transcript",
}

FIXED_CHECKS = ("step-monotone", "transcript-sync", "post-exit-frozen", "clean-round-progress",
                "communication-bound", "outputs")
AGS_CHECKS = ("step-monotone", "transcript-sync", "bob-silent-after-exit", "cost-ledger",
              "ledger-monotone", "two-round-progress", "progress-lower-bound",
              "termination-stall", "symbol-bound", "round-bound", "semi-termination", "outputs")


@dataclass
class CheckResult:
    name: str
    passed: bool = True
    first_round: int | None = None
    detail: str = ""
    evaluated: int = 0

    def fail(self, rnd: int | None, detail: str):
        if self.passed:
            self.passed = False
            self.first_round = rnd
            self.detail = detail


@dataclass
class VerifyReport:
    scheme: str
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def lines(self) -> list[str]:
        out = []
        for c in self.checks:
            status = "pass" if c.passed else f"FAIL at round {c.first_round}: {c.detail}"
            out.append(f"{c.name:22s} {status}")
        return out

    def to_dict(self) -> dict:
        return {"scheme": self.scheme, "ok": self.ok,
                "checks": [c.__dict__ for c in self.checks]}


class _View:
    """Round-indexed access to a trace."""

    def __init__(self, trace: RunTrace):
        h = trace.header
        self.scheme = h["scheme"]
        self.n = h["n_bits"]
        self.half = self.n // 2
        self.ref = h["reference"]
        self.ags = self.scheme in AGS_SCHEMES
        self.live = [s for s in trace.steps if not s["settle"]]
        self.settle = [s for s in trace.steps if s["settle"]]
        self.by_t = {s["t"]: s for s in trace.steps}
        self.last_t = trace.steps[-1]["t"]
        self.rounds = (self.last_t + 1) // 2
        self.metrics = trace.metrics or {}
        self.t_a = self._exit_round("alice")
        self.t_b = None if self.ags else self._exit_round("bob")

    def _exit_round(self, who):
        for s in self.live:
            if s[who].get("terminated"):
                return s["round"]
        return None

    def start(self, i: int, who: str) -> dict:
        """Snapshot of ``who`` at the start of round ``i`` (1-based)."""
        if i <= 1:
            base = {"transcript": "", "r": 0, "terminated": False}
            if who == "bob" and self.ags:
                base["phase"] = "simulating"
            return base
        t = min(2 * (i - 1), self.last_t)
        return self.by_t[t][who]

    def ledger_start(self, i: int) -> dict:
        if i <= 1:
            return {"c_a": 0, "c_b": 0, "c_ch": 0}
        return self.by_t[min(2 * (i - 1), self.last_t)]["ledger"]

    def step(self, t: int):
        return self.by_t.get(t)

    def info(self, t: int):
        s = self.by_t.get(t)
        if s is None or not isinstance(s["sent"], list):
            return None
        return str(s["sent"][0])

    def erased(self, t: int) -> bool:
        s = self.by_t.get(t)
        return s is not None and s["received"] == "erasure"

    def round_clean(self, i: int) -> bool:
        return not self.erased(2 * i - 1) and not self.erased(2 * i)

    def costs(self, i: int) -> tuple[int, int, int]:
        """c_A, c_B, c_ch before round i, recomputed from the tokens."""
        if not hasattr(self, "_costs"):
            acc = [(0, 0, 0)]
            c_a = c_b = c_ch = 0
            for s in self.live + self.settle:
                sent = isinstance(s["sent"], list) and not s["injected"]
                if s["sender"] == "A":
                    c_a += sent
                else:
                    c_b += sent
                c_ch += s["received"] == "erasure"
                if s["t"] % 2 == 0:
                    acc.append((c_a, c_b, c_ch))
            self._costs = acc
        return self._costs[min(i - 1, len(self._costs) - 1)]

    def noise(self) -> int:
        return sum(s["erased_slots"] for s in self.live)


def verify_trace(trace: RunTrace, scheme: str | None = None) -> VerifyReport:
    """Evaluate every per-round invariant that applies to the trace's scheme."""
    v = _View(trace)
    scheme = scheme or v.scheme
    if scheme != v.scheme:
        raise ValueError(f"trace was recorded for {v.scheme}, not {scheme}")
    names = AGS_CHECKS if v.ags else FIXED_CHECKS
    report = VerifyReport(scheme, [CheckResult(n) for n in names])
    _step_monotone(v, report["step-monotone"])
    _transcript_sync(v, report["transcript-sync"])
    _outputs(v, report["outputs"])
    if v.ags:
        _bob_silent(v, report["bob-silent-after-exit"])
        _cost_ledger(v, report["cost-ledger"])
        _ledger_monotone(v, report["ledger-monotone"])
        _two_round_progress(v, report["two-round-progress"])
        _progress_lower_bound(v, report["progress-lower-bound"])
        _termination_stall(v, report["termination-stall"])
        _ags_bounds(v, report["symbol-bound"], report["round-bound"])
        _semi_termination(v, report["semi-termination"])
    else:
        _post_exit_frozen(v, report["post-exit-frozen"])
        _clean_round_progress(v, report["clean-round-progress"])
        _communication_bound(v, report["communication-bound"])
    return report


def _step_monotone(v: _View, res: CheckResult):
    for i in range(1, v.rounds + 1):
        for who in ("alice", "bob"):
            a, b = v.start(i, who), v.start(i + 1, who)
            res.evaluated += 1
            if len(a["transcript"]) != 2 * a["r"]:
                res.fail(i, f"{who}: |T| = {len(a['transcript'])} but r = {a['r']}")
                return
            dr = b["r"] - a["r"]
            grown = b["transcript"][len(a["transcript"]):]
            if dr == 0:
                if b["transcript"] != a["transcript"]:
                    res.fail(i, f"{who}: transcript changed while r stayed {a['r']}")
                    return
                continue
            if dr != 1 or not b["transcript"].startswith(a["transcript"]) or len(grown) != 2:
                res.fail(i, f"{who}: r {a['r']} -> {b['r']}, T {a['transcript']!r} -> {b['transcript']!r}")
                return
            # the new bits are the ones that actually travelled this round
            if who == "bob" or not v.ags:
                if grown[0] != v.info(2 * i - 1):
                    res.fail(i, f"{who}: appended {grown[0]} but Alice sent {v.info(2 * i - 1)}")
                    return
            if who == "alice" or not v.ags:
                if grown[1] != v.info(2 * i):
                    res.fail(i, f"{who}: appended {grown[1]} but Bob sent {v.info(2 * i)}")
                    return


def _transcript_sync(v: _View, res: CheckResult):
    last = (v.t_a + 1) if v.t_a is not None else v.rounds
    for i in range(1, min(last, v.rounds + 1) + 1):
        a, b = v.start(i, "alice"), v.start(i, "bob")
        ta, tb = a["transcript"], b["transcript"]
        res.evaluated += 1
        if not (v.ref.startswith(ta) and v.ref.startswith(tb)):
            res.fail(i, f"transcripts {ta!r}/{tb!r} are not prefixes of {v.ref!r}")
            return
        same = b["r"] == a["r"] and tb == ta
        ahead = b["r"] == a["r"] + 1 and tb == ta + v.ref[len(ta):len(ta) + 2] and len(tb) == len(ta) + 2
        if not (same or ahead):
            res.fail(i, f"r_A={a['r']} T_A={ta!r}, r_B={b['r']} T_B={tb!r}")
            return


def _outputs(v: _View, res: CheckResult):
    end_a, end_b = v.start(v.rounds + 1, "alice"), v.start(v.rounds + 1, "bob")
    res.evaluated += 1
    if end_a["transcript"] != v.ref or end_b["transcript"] != v.ref:
        res.fail(v.rounds, f"outputs {end_a['transcript']!r}/{end_b['transcript']!r}, expected {v.ref!r}")
    if v.t_a is None:
        res.fail(v.rounds, "Alice never exited")
    elif not v.ags and v.t_b is None:
        res.fail(v.rounds, "Bob never exited")


# -- silence-free scheme -----------------------------------------------------

def _post_exit_frozen(v: _View, res: CheckResult):
    if v.t_a is None or v.t_b is None:
        return
    final = None
    for i in range(v.t_a + 1, v.t_b + 1):
        a, b = v.start(i, "alice"), v.start(i, "bob")
        res.evaluated += 1
        if not (a["r"] == b["r"] == v.half and a["transcript"] == b["transcript"]):
            res.fail(i, f"r_A={a['r']} r_B={b['r']} after Alice's exit")
            return
        final = final or b["transcript"]
        if b["transcript"] != final:
            res.fail(i, "Bob's transcript moved after Alice's exit")
            return


def _clean_round_progress(v: _View, res: CheckResult):
    if v.t_a is None:
        return
    for i in range(1, v.t_a + 1):
        if not v.round_clean(i):
            continue
        res.evaluated += 1
        r0, r1 = v.start(i, "alice")["r"], v.start(i + 1, "alice")["r"]
        if r1 != r0 + 1:
            res.fail(i, f"erasure-free round left r_A at {r0} -> {r1}")
            return


def _communication_bound(v: _View, res: CheckResult):
    t = v.noise()
    sent = sum(1 for s in v.live if isinstance(s["sent"], list) and not s["injected"])
    res.evaluated += 1
    if sent > v.n + 2 * t:
        res.fail(v.rounds, f"{sent} transmissions > N + 2T = {v.n + 2 * t}")
        return
    if v.t_a is not None and v.t_b is not None:
        late = sum(s["erased_slots"] for s in v.live if s["round"] > v.t_a)
        if v.t_b - v.t_a > 1 + late:
            res.fail(v.t_b, f"Bob exited {v.t_b - v.t_a} rounds after Alice with {late} late erasures")


# -- silence-permitting scheme -----------------------------------------------

def _bob_silent(v: _View, res: CheckResult):
    if v.t_a is None:
        return
    for i in range(v.t_a + 1, v.rounds + 1):
        a, b = v.start(i, "alice"), v.start(i, "bob")
        res.evaluated += 1
        if not (a["r"] == b["r"] == v.half and a["transcript"] == b["transcript"]):
            res.fail(i, f"r_A={a['r']} r_B={b['r']} after Alice's exit")
            return
        bob_step = v.step(2 * i)
        if bob_step is not None and bob_step["sent"] != "silence":
            res.fail(i, f"Bob sent {bob_step['sent']} after Alice's exit")
            return


def _cost_ledger(v: _View, res: CheckResult):
    for i in range(1, v.rounds + 2):
        a, b = v.start(i, "alice"), v.start(i, "bob")
        c_a, c_b, c_ch = v.costs(i)
        have = len(b["transcript"]) + c_ch
        res.evaluated += 1
        if b["r"] == a["r"]:
            need = c_a + c_b
        elif b["r"] == a["r"] + 1:
            need = c_a + c_b + 1
        else:
            res.fail(i, f"r_B={b['r']} is neither r_A nor r_A + 1 (r_A={a['r']})")
            return
        if have < need:
            res.fail(i, f"|T_B| + c_ch = {have} < {need} (c_A={c_a}, c_B={c_b}, c_ch={c_ch}, "
                        f"r_A={a['r']}, r_B={b['r']})")
            return


def _ledger_monotone(v: _View, res: CheckResult):
    prev = {"c_a": 0, "c_b": 0, "c_ch": 0}
    for i in range(1, v.rounds + 1):
        cur = v.ledger_start(i + 1)
        res.evaluated += 1
        for k, cap in (("c_a", 1), ("c_b", 1), ("c_ch", 2)):
            if not 0 <= cur[k] - prev[k] <= cap:
                res.fail(i, f"{k} went {prev[k]} -> {cur[k]}")
                return
        expected = dict(zip(("c_a", "c_b", "c_ch"), v.costs(i + 1)))
        if cur != expected:
            res.fail(i, f"recorded ledger {cur} disagrees with the tokens {expected}")
            return
        prev = cur


def _r_a(v: _View, i: int) -> int:
    return v.start(min(i, v.rounds + 1), "alice")["r"]


def _two_round_progress(v: _View, res: CheckResult):
    if v.t_a is None:
        return
    for i in range(1, v.t_a + 1):
        if not (v.round_clean(i) and v.round_clean(i + 1)):
            continue
        res.evaluated += 1
        if _r_a(v, i + 2) < _r_a(v, i) + 1:
            res.fail(i, f"two clean rounds left r_A at {_r_a(v, i)} -> {_r_a(v, i + 2)}")
            return


def _progress_lower_bound(v: _View, res: CheckResult):
    last = (v.t_a + 1) if v.t_a is not None else v.rounds
    for i in range(1, min(last, v.rounds + 1) + 1):
        if v.start(i, "bob").get("phase", "simulating") != "simulating":
            break
        _, _, c_ch = v.costs(i)
        res.evaluated += 1
        if _r_a(v, i) < (i - 1) - c_ch:
            res.fail(i, f"r_A={_r_a(v, i)} < (i - 1) - c_ch = {(i - 1) - c_ch}")
            return


def _termination_stall(v: _View, res: CheckResult):
    if v.t_a is None:
        return
    s = next((i for i in range(1, v.t_a + 1) if v.start(i, "bob").get("phase") == "termination"), None)
    if s is None:
        return
    stalls = sum(1 for i in range(s, v.t_a + 1) if _r_a(v, i + 1) == _r_a(v, i))
    erasures = sum(1 for t in range(max(1, 2 * s - 2), 2 * v.t_a + 1) if v.erased(t))
    res.evaluated += 1
    if stalls > 2 * erasures:
        res.fail(s, f"{stalls} stalled rounds in termination phase with {erasures} erasures")


def _ags_bounds(v: _View, sym: CheckResult, rnd: CheckResult):
    t = v.noise()
    m = v.metrics
    sent = sum(1 for s in v.live if isinstance(s["sent"], list) and not s["injected"])
    sym.evaluated += 1
    if sent > v.n + t:
        sym.fail(v.t_a, f"CC_sym = {sent} > N + T = {v.n + t}")
    if v.t_a is not None:
        width = 4 if v.scheme == "ags1" else 1
        rc = 2 * v.t_a * width
        bound = width * (v.n + 4 * t)
        rnd.evaluated += 1
        if rc > bound:
            rnd.fail(v.t_a, f"RC = {rc} > {bound}")
        if m and m.get("rc_timesteps") not in (None, rc):
            rnd.fail(v.t_a, f"recorded rc_timesteps {m['rc_timesteps']} != {rc}")


def _semi_termination(v: _View, res: CheckResult):
    res.evaluated += 1
    if not v.settle:
        res.fail(v.rounds, "no settle rounds recorded after Alice's exit")
        return
    for s in v.settle:
        if s["sent"] != "silence":
            res.fail(s["round"], f"{s['sender']} sent {s['sent']} during settle")
            return
