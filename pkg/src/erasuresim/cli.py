"""Command line driver.  Exit codes: 0 ok, 1 invariant or bound failure, 2 usage or I/O."""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction

from .channel import ChannelError, NoisePattern, greedy_adversary, parse_noise
from .protocol import ALICE, BOB, ProtocolError, check_bits, normalize, resolve_protocol
from .sim import (SCHEMES, HarnessError, RunConfig, RunTrace, SearchLimitError,
                  exhaustive_noise_search, run, unsync_termination_demo)
from .verify import verify_trace

OK, FAILED, USAGE = 0, 1, 2

SWEEP_HEADER = ["scheme", "n_bits", "delta", "budget", "erasures", "transmissions", "cc_bits",
                "rc_timesteps", "rate", "rate_bound", "waste", "waste_marginal", "waste_bound"]
METRIC_COLUMNS = ["scheme", "n_bits", "t_a", "t_b", "transmissions", "cc_sym", "cc_bits", "energy",
                  "rc_timesteps", "erasures_counted", "erased_timesteps"]


class UsageError(Exception):
    pass


def _protocol(spec):
    try:
        return normalize(resolve_protocol(spec))
    except ProtocolError as e:
        raise UsageError(str(e)) from e


def _noise(spec):
    try:
        return parse_noise(spec)
    except ChannelError as e:
        raise UsageError(str(e)) from e


def _bits(value, what):
    try:
        return check_bits(value, what)
    except ProtocolError as e:
        raise UsageError(str(e)) from e


def default_inputs(n_bits: int) -> tuple[str, str]:
    return ("10" * n_bits)[:n_bits], ("01" * n_bits)[:n_bits]


# -- run ---------------------------------------------------------------------

def cmd_run(args) -> int:
    protocol = _protocol(args.protocol)
    x, y = _bits(args.x, "x"), _bits(args.y, "y")
    config = RunConfig(args.scheme, protocol, x, y, _noise(args.noise), args.max_rounds)
    try:
        result = run(config)
    except HarnessError as e:
        print(f"run failed: {e}", file=sys.stderr)
        if args.trace and e.partial is not None:
            e.partial.write(args.trace)
        return FAILED
    if args.trace:
        try:
            result.trace.write(args.trace)
        except OSError as e:
            raise UsageError(f"cannot write trace: {e}") from e
    report = verify_trace(result.trace)
    failures = result.metrics.bound_failures()
    ok = report.ok and not failures and result.correct
    m = result.metrics.to_dict()
    if args.out == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(METRIC_COLUMNS + ["correct", "verify"])
        w.writerow([m[k] if m[k] is not None else "" for k in METRIC_COLUMNS]
                   + [int(result.correct), "pass" if report.ok else "fail"])
        sys.stdout.write(buf.getvalue())
    else:
        doc = {"metrics": m, "outputs": {"alice": result.outputs[0], "bob": result.outputs[1]},
               "reference": result.reference, "correct": result.correct,
               "bounds": {k: {"measured": a, "bound": b} for k, (a, b) in result.metrics.bounds().items()},
               "bound_failures": failures,
               "verify": "pass" if report.ok else "fail", "checks": report.to_dict()["checks"]}
        print(json.dumps(doc, indent=2))
    return OK if ok else FAILED


# -- sweep -------------------------------------------------------------------

def budget_for_delta(delta: Fraction, n_bits: int) -> int:
    """Erasures that make up a ``delta`` fraction of N + 2T transmissions."""
    if not 0 <= delta < Fraction(1, 2):
        raise UsageError(f"delta must lie in [0, 1/2), got {float(delta)}")
    return int(delta * n_bits / (1 - 2 * delta))


def _sweep_point(job):
    scheme, proto_spec, x, y, budget, delta = job
    protocol = normalize(resolve_protocol(proto_spec))
    res = run(RunConfig(scheme, protocol, x, y, greedy_adversary(budget)))
    return budget, delta, res.metrics.to_dict()


def sweep_rows(scheme, proto_spec, x, y, points, jobs=1):
    """``points`` is a list of (budget, delta-or-None); rows come back in input order."""
    work = [(scheme, proto_spec, x, y, b, d) for b, d in points]
    base = _sweep_point((scheme, proto_spec, x, y, 0, None))[2]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            results = list(ex.map(_sweep_point, work))
    else:
        results = [_sweep_point(j) for j in work]
    rows = []
    for budget, delta, m in results:
        n = m["n_bits"]
        erased = m["erasures_counted"]
        cost = m["cc_bits"]
        if delta is None:
            # realized fraction of erased transmissions
            delta = Fraction(erased, m["transmissions"]) if m["transmissions"] else Fraction(0)
        rows.append({
            "scheme": scheme, "n_bits": n, "delta": f"{float(delta):.6g}", "budget": budget,
            "erasures": erased, "transmissions": m["transmissions"], "cc_bits": cost,
            "rc_timesteps": m["rc_timesteps"], "rate": f"{n / cost:.6f}",
            "rate_bound": f"{0.5 - float(delta):.6f}",
            "waste": f"{cost / erased:.6f}" if erased else "",
            "waste_marginal": f"{(cost - base['cc_bits']) / erased:.6f}" if erased else "",
            "waste_bound": 4,
        })
    return rows


def _parse_range(text):
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(v) for v in text.split(",") if v]


def cmd_sweep(args) -> int:
    if (args.budgets is None) == (args.deltas is None):
        raise UsageError("give exactly one of --budgets or --deltas")
    if args.n_bits % 2:
        raise UsageError("--n-bits must be even")
    if args.scheme not in ("basic4", "basic2", "ecc3"):
        raise UsageError("sweeps drive the greedy adversary, which targets the silence-free schemes")
    proto = args.protocol or f"builtin:string-exchange:{args.n_bits}"
    dx, dy = default_inputs(args.n_bits)
    x, y = _bits(args.x or dx, "x"), _bits(args.y or dy, "y")
    try:
        if args.budgets is not None:
            points = [(b, None) for b in _parse_range(args.budgets)]
        else:
            deltas = [Fraction(d) for d in args.deltas.split(",") if d]
            points = [(budget_for_delta(d, args.n_bits), d) for d in deltas]
    except ValueError as e:
        raise UsageError(f"bad sweep range: {e}") from e
    _protocol(proto)
    rows = sweep_rows(args.scheme, proto, x, y, points, args.jobs)
    w = csv.DictWriter(sys.stdout, SWEEP_HEADER, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return OK


# -- verify ------------------------------------------------------------------

def cmd_verify(args) -> int:
    try:
        trace = RunTrace.read(args.trace)
        report = verify_trace(trace)
    except OSError as e:
        raise UsageError(f"cannot read trace: {e}") from e
    except (ValueError, KeyError, TypeError, IndexError) as e:
        raise UsageError(f"trace schema error: {e}") from e
    for line in report.lines():
        print(line)
    print("verify:", "pass" if report.ok else "fail")
    return OK if report.ok else FAILED


# -- search / unsync demo ----------------------------------------------------

def cmd_search(args) -> int:
    protocol = _protocol(args.protocol)
    x, y = _bits(args.x, "x"), _bits(args.y, "y")
    horizon = args.horizon or 4 * protocol.n_bits
    try:
        rep = exhaustive_noise_search(args.scheme, protocol, x, y, args.budget, horizon)
    except SearchLimitError as e:
        raise UsageError(str(e)) from e
    print(json.dumps({"scheme": rep.scheme, "budget": rep.budget, "horizon": rep.horizon,
                      "patterns": rep.patterns, "classes": rep.classes, "worst": rep.worst,
                      "worst_pattern": rep.worst_pattern, "failures": rep.failures[:20],
                      "failure_count": len(rep.failures)}, indent=2))
    return OK if rep.ok else FAILED


def cmd_unsync(args) -> int:
    protocol = _protocol(args.protocol)
    x, y = _bits(args.x, "x"), _bits(args.y, "y")
    try:
        pattern = unsync_termination_demo(protocol, x, y, args.gap, args.scheme)
    except ValueError as e:
        raise UsageError(str(e)) from e
    res = run(RunConfig(args.scheme, protocol, x, y, pattern))
    m = res.metrics
    print(json.dumps({"t_a": m.t_a, "t_b": m.t_b, "gap": m.t_b - m.t_a,
                      "erasures": m.erasures_counted, "pattern": sorted(pattern.erased),
                      "correct": res.correct}))
    return OK if res.correct and m.t_b - m.t_a == args.gap else FAILED


# -- network -----------------------------------------------------------------

def _hostport(text):
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise UsageError(f"expected HOST:PORT, got {text!r}")
    return host or "127.0.0.1", int(port)


def cmd_serve(args) -> int:
    from .net import ProtocolViolation, TransportError, serve_party

    protocol = _protocol(args.protocol)
    inp = _bits(args.input, "input")
    host, port = _hostport(args.connect)
    role = ALICE if args.role == "alice" else BOB
    try:
        res = serve_party(role, args.scheme, protocol, inp, host, port, args.timeout)
    except TransportError as e:
        print(f"transport error: {e}", file=sys.stderr)
        return USAGE
    except ProtocolViolation as e:
        print(f"protocol violation: {e}", file=sys.stderr)
        return FAILED
    print(json.dumps(res.__dict__))
    return OK


def cmd_relay(args) -> int:
    from .net import Relay, TransportError

    noise = _noise(args.noise)
    if not isinstance(noise, NoisePattern):
        raise UsageError("the relay applies static erasure patterns only")
    try:
        rel = Relay(noise, args.a, args.b, args.host)
        print(json.dumps({"listening": {"a": rel.port_a, "b": rel.port_b}}), flush=True)
        stats = rel.serve(args.timeout)
    except (TransportError, OSError) as e:
        print(f"transport error: {e}", file=sys.stderr)
        return USAGE
    print(json.dumps({"forwarded": stats.forwarded, "erased": stats.erased,
                      "erasures": stats.erasures, "errors": stats.errors}))
    return FAILED if stats.errors else OK


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="erasuresim", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    schemes = sorted(SCHEMES)

    r = sub.add_parser("run", help="one simulated run plus per-round verification")
    r.add_argument("--scheme", choices=schemes, required=True)
    r.add_argument("--protocol", required=True, help="JSON table file or builtin:string-exchange:N")
    r.add_argument("--x", required=True)
    r.add_argument("--y", required=True)
    r.add_argument("--noise", default="none")
    r.add_argument("--out", choices=("json", "csv"), default="json")
    r.add_argument("--trace", help="write the JSON-lines trace here")
    r.add_argument("--max-rounds", type=int)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="greedy-adversary sweep over T or delta, CSV on stdout")
    s.add_argument("--scheme", choices=("basic4", "basic2", "ecc3"), default="basic4")
    s.add_argument("--n-bits", type=int, required=True)
    s.add_argument("--protocol")
    s.add_argument("--x")
    s.add_argument("--y")
    s.add_argument("--budgets", help="T values: 0..10 or 0,5,10")
    s.add_argument("--deltas", help="erasure fractions in [0, 1/2): 0,0.1,0.2")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="re-check a recorded trace")
    v.add_argument("trace")
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("search", help="exhaustive search over bounded erasure patterns")
    e.add_argument("--scheme", choices=schemes, required=True)
    e.add_argument("--protocol", required=True)
    e.add_argument("--x", required=True)
    e.add_argument("--y", required=True)
    e.add_argument("--budget", type=int, required=True)
    e.add_argument("--horizon", type=int, help="4-ary timesteps (default 4N)")
    e.set_defaults(func=cmd_search)

    u = sub.add_parser("unsync-demo", help="keep Bob running GAP rounds after Alice exits")
    u.add_argument("--scheme", choices=("basic4", "basic2", "ecc3"), default="basic4")
    u.add_argument("--protocol", required=True)
    u.add_argument("--x", required=True)
    u.add_argument("--y", required=True)
    u.add_argument("--gap", type=int, required=True)
    u.set_defaults(func=cmd_unsync)

    sv = sub.add_parser("serve", help="play one party over a socket")
    sv.add_argument("--role", choices=("alice", "bob"), required=True)
    sv.add_argument("--scheme", choices=schemes, required=True)
    sv.add_argument("--protocol", required=True)
    sv.add_argument("--input", required=True)
    sv.add_argument("--connect", required=True, help="HOST:PORT of the relay")
    sv.add_argument("--timeout", type=float, default=10.0)
    sv.set_defaults(func=cmd_serve)

    rl = sub.add_parser("relay", help="erasure-injecting frame relay")
    rl.add_argument("--a", type=int, required=True, help="port Alice connects to")
    rl.add_argument("--b", type=int, required=True, help="port Bob connects to")
    rl.add_argument("--noise", default="none")
    rl.add_argument("--host", default="127.0.0.1")
    rl.add_argument("--timeout", type=float, default=60.0)
    rl.set_defaults(func=cmd_relay)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
