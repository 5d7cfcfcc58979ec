"""Command-line entry point.  Every subcommand prints JSON and exits 0 iff all reports pass."""

from __future__ import annotations

import argparse
import json
import random
import sys
from typing import Any, Optional, Sequence

from . import coder, counter, functional, harness, tables
from .dyadic import Dyadic, is_prefix_free
from .errors import IndexOverflow, InvalidInput, InvalidMachine, NoDescription, ScheduleExhausted
from .schedule import WagerSchedule
from .tables import CapitalTable, StagedSupermartingale


def _load_json(path: str) -> Any:
    with open(path) as fh:
        return json.load(fh)


def _schedule(text: Optional[str], horizon: Optional[int] = None) -> Optional[WagerSchedule]:
    return None if text is None else WagerSchedule.parse(text, horizon)


def _reports(named: dict) -> dict:
    return {k: v.to_json() for k, v in named.items()}


def _all_ok(named: dict) -> bool:
    return all(bool(v) for v in named.values())


def _random_staged(rng: random.Random, g: Optional[WagerSchedule], depth: int) -> StagedSupermartingale:
    g = g or tables.random_schedule(rng)
    return tables.random_staged(rng, g.with_horizon(depth + 2), depth, rng.randint(1, 4))


def _staged_input(args, rng) -> StagedSupermartingale:
    g = _schedule(args.schedule)
    if args.input is None:
        return _random_staged(rng, g, args.depth if args.depth is not None else 6)
    S = StagedSupermartingale.from_json(_load_json(args.input))
    if g is not None:
        S = StagedSupermartingale(g.with_horizon(S.schedule.horizon), S.stages)
    return S


# subcommands


def cmd_check(args, rng) -> tuple[dict, bool]:
    S = _staged_input(args, rng)
    reports = {
        "staged": tables.staged_validate(S, full=True),
        "strong_granularity": tables.check_granularity(S.limit.table, S.schedule),
    }
    return {"input": S.to_json() if args.input is None else args.input, "reports": _reports(reports)}, _all_ok(reports)


def cmd_counter(args, rng) -> tuple[dict, bool]:
    S = _staged_input(args, rng)
    depth = S.depth if args.depth is None else args.depth
    if args.lazy:
        trace = harness.lazy_counter_trace(S, args.base, depth)
    else:
        trace = harness.counter_trace(counter.run_counter(S, args.base, depth))
    if args.trace:
        harness.emit_trace(trace, args.trace)
    out = {"path": trace.outputs["path"], "path_values": trace.outputs["path_values"], "summary": trace.summary}
    if not args.lazy:
        out["accesses"] = len(trace.outputs["log"])
        out["stages"] = len(trace.outputs["stages"])
    return out, trace.ok


def cmd_granularize(args, rng) -> tuple[dict, bool]:
    if args.input is None:
        g = _schedule(args.schedule) or tables.random_schedule(rng)
        depth = args.depth if args.depth is not None else 5
        N = tables.random_supermartingale(rng, WagerSchedule("const", (rng.randint(0, 4),)), depth)
    else:
        obj = _load_json(args.input)
        N = CapitalTable.from_json(obj)
        g = _schedule(args.schedule or obj.get("schedule"))
        if g is None:
            raise InvalidInput("a schedule is required (--schedule or a 'schedule' key)")
    horizon = N.depth if args.horizon is None else args.horizon
    inclusive = not args.exclusive
    out = tables.granularize(N, g.with_horizon(None), horizon, inclusive)
    reports = {
        "input_supermartingale": tables.check_supermartingale(N),
        "supermartingale": tables.check_supermartingale(out.limit.table, out.limit.tails),
        "granularity": tables.check_granularity(out.limit.table, out.schedule),
        "sandwich": tables.check_sandwich(N, out.limit.full(), out.schedule, horizon, inclusive),
    }
    return {"output": out.to_json(), "reports": _reports(reports)}, _all_ok(reports)


def _functional_input(args, rng) -> functional.ToyFunctional:
    if args.functional is not None:
        return functional.load_functional(args.functional)
    g = _schedule(getattr(args, "schedule", None)) or WagerSchedule("const", (rng.randint(0, 2),))
    return functional.random_functional(rng, g, args.depth if args.depth is not None else 4)


def cmd_bridge(args, rng) -> tuple[dict, bool]:
    phi = _functional_input(args, rng)
    valid = functional.validate_functional(phi)
    if not valid:
        return {"reports": {"functional": valid.to_json()}}, False
    hstar = functional.counting_martingale(phi)
    reports = {
        "functional": valid,
        "supermartingale": tables.check_supermartingale(hstar),
        "granularity": tables.check_granularity(hstar, phi.schedule),
        "census": functional.check_census(phi),
    }
    return {"counts": functional.preimage_census(phi), "martingale": hstar.to_json(),
            "reports": _reports(reports)}, _all_ok(reports)


def cmd_density(args, rng) -> tuple[dict, bool]:
    phi = _functional_input(args, rng)
    R = coder.load_machine(args.machine)
    trace = harness.density_trace(phi, R, args.c, args.base, args.depth if args.depth is not None else phi.depth,
                                  args.d, not args.no_vacuous)
    if args.trace:
        harness.emit_trace(trace, args.trace)
    out = {"relative_to_machine": R.name, "kind": trace.outputs["kind"], "result": trace.outputs["result"],
           "summary": trace.summary}
    # an exhausted search is a legitimate outcome; only failed checks are errors
    return out, trace.ok


def cmd_demo_gap(args, rng) -> tuple[dict, bool]:
    thresholds = [Dyadic.parse(t) for t in args.thresholds.split(",")] if args.thresholds else (1, 2, 3)
    trace = harness.scenario_divergence_gap(WagerSchedule.parse(args.g_div), WagerSchedule.parse(args.g_conv),
                                            args.depth, thresholds, args.seed)
    if args.trace:
        harness.emit_trace(trace, args.trace)
    curve_div, curve_conv = trace.outputs["div_curve"], trace.outputs["conv_curve"]
    out = {"crossings": trace.outputs["div_crossings"], "conv_limit": trace.outputs["conv_limit"],
           "G_div_final": curve_div[-1], "G_conv_final": curve_conv[-1], "summary": trace.summary}
    return out, trace.ok


def cmd_validate_trace(args, rng) -> tuple[dict, bool]:
    trace = harness.load_trace(args.file)
    summary, report = harness.validate_trace(trace)
    return {"scenario": trace.scenario, "summary": summary, "report": report.to_json()}, bool(report)


def cmd_kc(args, rng) -> tuple[dict, bool]:
    if args.requests is None:
        reqs = [(rng.randint(0, 6), i) for i in range(rng.randint(1, 12))]
    else:
        reqs = []
        for i, r in enumerate(_load_json(args.requests)):
            reqs.append((int(r[0]), r[1]) if isinstance(r, list) else (int(r), i))
    book = coder.CodeBook()
    words = coder.kc_allocate(book, reqs)
    reports = {
        "prefix_free": tables.Report(is_prefix_free(book.codewords)),
        "kraft": tables.Report(book.kraft_sum() + book.free_weight == Dyadic(1)),
    }
    out = {"requests": [[length, p] for length, p in reqs], "codewords": words, "book": book.to_json(),
           "reports": _reports(reports)}
    return out, _all_ok(reports)


def cmd_compress(args, rng) -> tuple[dict, bool]:
    M = CapitalTable.from_json(_load_json(args.table))
    res = coder.compress_high_capital(M, args.c, Dyadic.parse(args.k))
    reports = {
        "weight_bound": tables.Report(res.high.within_bound, detail=f"weight {res.high.weight}"),
        "feasible": tables.Report(res.ok, res.witness, res.reason),
    }
    out = {"high_capital": list(res.high.strings), "weight": str(res.high.weight),
           "requested_mass": str(res.requested_mass), "book": res.book.to_json(), "reports": _reports(reports)}
    return out, _all_ok(reports)


def cmd_code(args, rng) -> tuple[dict, bool]:
    phi = functional.load_functional(args.functional)
    R = coder.load_machine(args.machine)
    if args.action == "encode":
        code = coder.encode_preimage(phi, R, args.d, args.bits)
        back = coder.decode_preimage(phi, R, args.d, code)
        nu = phi(args.bits)
        ok = back == args.bits and len(code) == R.complexity(nu) + phi.schedule(len(nu)) + args.d
        return {"preimage": args.bits, "output": nu, "code": code, "length": len(code)}, ok
    mu = coder.decode_preimage(phi, R, args.d, args.bits)
    ok = coder.encode_preimage(phi, R, args.d, mu) == args.bits
    return {"code": args.bits, "preimage": mu, "output": phi(mu)}, ok


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="granular", description=__doc__)
    p.add_argument("--seed", type=int, default=0, help="seed for randomly generated inputs")
    sub = p.add_subparsers(dest="command", required=True)

    def staged_args(sp):
        sp.add_argument("--input", help="staged supermartingale JSON; random when omitted")
        sp.add_argument("--schedule", help="wager schedule, e.g. const:1, linear:1:0, log2ceil:1, table:0,1,1")
        sp.add_argument("--depth", type=int)

    sp = sub.add_parser("check", help="validate a staged supermartingale")
    staged_args(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("counter", help="build the counter-supermartingale and its path")
    staged_args(sp)
    sp.add_argument("--base", default="")
    sp.add_argument("--lazy", action="store_true", help="path-local evaluation against the final stage")
    sp.add_argument("--trace")
    sp.set_defaults(func=cmd_counter)

    sp = sub.add_parser("granularize", help="round a supermartingale table onto a schedule")
    staged_args(sp)
    sp.add_argument("--horizon", type=int)
    sp.add_argument("--exclusive", action="store_true", help="use the tail that starts one level below")
    sp.set_defaults(func=cmd_granularize)

    sp = sub.add_parser("bridge", help="counting supermartingale of a toy functional")
    sp.add_argument("--functional")
    sp.add_argument("--schedule")
    sp.add_argument("--depth", type=int)
    sp.set_defaults(func=cmd_bridge)

    sp = sub.add_parser("density", help="search for a compressible extension")
    sp.add_argument("--functional")
    sp.add_argument("--machine", required=True)
    sp.add_argument("--c", type=int, required=True)
    sp.add_argument("--base", default="")
    sp.add_argument("--depth", type=int)
    sp.add_argument("--d", type=int)
    sp.add_argument("--no-vacuous", action="store_true", help="skip candidates without preimages")
    sp.add_argument("--trace")
    sp.set_defaults(func=cmd_density)

    sp = sub.add_parser("demo-gap", help="guaranteed gain under a divergent and a convergent schedule")
    sp.add_argument("--g-div", default="log2ceil:1")
    sp.add_argument("--g-conv", default="log2ceil:2")
    sp.add_argument("--depth", type=int, default=5000)
    sp.add_argument("--thresholds", help="comma-separated dyadic thresholds (default 1,2,3)")
    sp.add_argument("--trace")
    sp.set_defaults(func=cmd_demo_gap)

    sp = sub.add_parser("validate-trace", help="re-verify a trace file")
    sp.add_argument("file")
    sp.set_defaults(func=cmd_validate_trace)

    sp = sub.add_parser("kc", help="online Kraft-Chaitin allocation")
    sp.add_argument("--requests", help="JSON list of lengths or [length, payload] pairs")
    sp.set_defaults(func=cmd_kc)

    sp = sub.add_parser("compress", help="codewords for high-capital strings")
    sp.add_argument("--table", required=True)
    sp.add_argument("--k", required=True)
    sp.add_argument("--c", type=int, required=True)
    sp.set_defaults(func=cmd_compress)

    sp = sub.add_parser("code", help="two-part preimage codes")
    sp.add_argument("--functional", required=True)
    sp.add_argument("--machine", required=True)
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("action", choices=["encode", "decode"])
    sp.add_argument("bits")
    sp.set_defaults(func=cmd_code)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    rng = random.Random(args.seed)
    try:
        out, ok = args.func(args, rng)
    except (OSError, json.JSONDecodeError, InvalidInput, InvalidMachine, ScheduleExhausted,
            IndexOverflow, NoDescription, KeyError, ValueError) as exc:
        print(json.dumps({"ok": False, "error": f"{type(exc).__name__}: {exc}"}), file=sys.stderr)
        return 2
    out["ok"] = ok
    print(json.dumps(out, indent=1, sort_keys=True, default=str))
    return 0 if ok else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
