"""Acceptance criteria, all exact.  Run directly for a pass/fail line per criterion:

    python3 tests/test_acceptance.py

Under pytest the same lines appear in the terminal summary.
"""

from __future__ import annotations

import os
import random
import sys
import tempfile
import time
from fractions import Fraction

sys.path.insert(0, os.path.dirname(__file__))

from granular.coder import (CodeBook, ReferenceMachine, decode_preimage, encode_preimage, high_capital_set)
from granular.counter import limit_counter_path, run_counter, validate_run
from granular.dyadic import Dyadic
from granular.functional import (ToyFunctional, check_census, counting_martingale, preimage_census,
                                 random_functional, restricted_enumeration)
from granular.harness import (HashedMartingale, density_trace, emit_trace,
                              gain_curve, load_trace, validate_trace)
from granular.schedule import WagerSchedule
from granular.tables import (check_granularity, check_sandwich, check_supermartingale, granularize,
                             random_schedule, random_staged, random_supermartingale)
from oracle import (fr, full_values, g_of, gain, greedy_path, is_granular, is_supermartingale,
                    minimal_above, offline_feasible, online_extendable, prefix_free, strict_floor, words,
                    words_upto)

RESULTS: dict[str, tuple[bool, str]] = {}


def record(name: str, ok: bool, detail: str) -> None:
    RESULTS[name] = (ok, detail)
    print(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
    assert ok, detail


def random_counter_input(seed: int):
    rng = random.Random(seed)
    g = random_schedule(rng)
    D = rng.randint(1, 10)
    q = tuple(Dyadic(rng.randint(0, 3), rng.randint(0, 4)) for _ in range(D + 1)) if seed % 4 == 3 else ()
    S = random_staged(rng, g, D, rng.randint(1, 5), q)
    base = "".join(rng.choice("01") for _ in range(rng.randint(0, min(3, D - 1))))
    return S, base


def test_counterstrategy_suite():
    t0 = time.perf_counter()
    n_runs, failures = 250, []
    for seed in range(n_runs):
        S, base = random_counter_input(seed)
        run = run_counter(S, base)
        reports = validate_run(run)
        bad = [k for k, r in reports.items() if not r]
        # independent recheck of the limit stage and the path
        gf = g_of(S.schedule)
        lim = run.output.limit
        full = full_values(lim.table, lim.tails)
        mlim = full_values(S.limit.table, S.limit.tails)
        m = lambda s: fr(S.limit.table[s])
        if not is_supermartingale(full, run.depth):
            bad.append("oracle supermartingale")
        if not is_granular({s: fr(v) for s, v in lim.table.values.items()}, lambda n: gf(n) + 1):
            bad.append("oracle granularity")
        if run.path != greedy_path(m, base, run.depth):
            bad.append("oracle path")
        for n in range(len(base), run.depth + 1):
            x = run.path[:n]
            if fr(lim.table[x]) < gain(gf, n) + m(x) or mlim[x] > mlim[base]:
                bad.append(f"oracle gap at {n}")
                break
        if bad:
            failures.append((seed, str(S.schedule), bad))
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 60
    record("counterstrategy suite", ok,
           f"{n_runs} runs (seeds 0..{n_runs - 1}), {len(failures)} failing {failures[:3]}, {elapsed:.1f}s < 60s")


def test_mode_agreement():
    mismatches = 0
    for seed in range(50):
        rng = random.Random(1000 + seed)
        g = random_schedule(rng)
        D = rng.randint(1, 10)
        S = random_staged(rng, g, D, rng.randint(1, 4))  # stabilizes at its final stage
        base = "".join(rng.choice("01") for _ in range(rng.randint(0, min(2, D - 1))))
        run = run_counter(S, base)
        lazy = limit_counter_path(S.limit.table, g, base, D)
        staged_vals = [run.output.limit.table[run.path[:n]] for n in range(len(base), D + 1)]
        if lazy.path != run.path or [p.nhat for p in lazy.points] != staged_vals:
            mismatches += 1
    g = WagerSchedule.parse("log2ceil:1")
    M = HashedMartingale(g, seed=0)
    t0 = time.perf_counter()
    lazy = limit_counter_path(M, g, "", 10_000)
    elapsed = time.perf_counter() - t0
    # gap(n) = G(n) + shortfall(n), G and shortfall recomputed here from their definitions
    gf = g_of(g)
    G = Fraction(0)
    exact = True
    for p in lazy.points:
        n = p.n
        G += Fraction(1, 2 ** (gf(n) + 1))
        if n == 0:
            short = Fraction(0)
        else:
            x = lazy.path[:n]
            sib = x[:-1] + ("1" if x[-1] == "0" else "0")
            short = fr(M(sib)) - fr(M(x)) - (Fraction(1, 2 ** gf(n)) if x[-1] == "1" else 0)
        if fr(p.nhat) - fr(p.mhat) != G + short or short < 0:
            exact = False
            break
    ok = mismatches == 0 and elapsed < 10 and exact and len(lazy.points) == 10_001
    record("mode agreement", ok,
           f"50 inputs, {mismatches} mismatches; lazy depth 10^4 in {elapsed:.2f}s < 10s; gap identity exact={exact}")


def test_dichotomy_numbers():
    g1 = WagerSchedule.parse("log2ceil:1")
    G6 = gain_curve(g1, 6)[6]
    ok6 = G6 == Dyadic(3, 2) and fr(G6) == gain(g_of(g1), 6) == Fraction(3, 4)

    g2 = WagerSchedule.parse("log2ceil:2")
    N = 10_000
    curve = gain_curve(g2, N)
    below = all(fr(v) < Fraction(1, 4) for v in curve)
    # grouped bound: indices with ceil(log2(i+2)) = k number 2^(k-1) and each adds 2^(-2k-1)
    gf = g_of(g2)
    groups: dict[int, list[int]] = {}
    for i in range(N + 1):
        groups.setdefault(gf(i) // 2, []).append(i)
    grouped = True
    total = Fraction(0)
    for k, idx in sorted(groups.items()):
        full_group = idx[-1] == 2 ** k - 2
        if full_group and len(idx) != 2 ** (k - 1):
            grouped = False
        s = sum(Fraction(1, 2 ** (gf(i) + 1)) for i in idx)
        if full_group and s != Fraction(1, 2 ** (k + 2)):
            grouped = False
        total += s
        # partial sums of the groups stay 2^-(k+2) short of 1/4
        if full_group and total != Fraction(1, 4) - Fraction(1, 2 ** (k + 2)):
            grouped = False
    grouped = grouped and fr(curve[-1]) == total and g2.series_limit(halved=True) == Fraction(1, 4)
    ok = ok6 and below and grouped
    record("dichotomy numbers", ok,
           f"G(6)={G6} for log2ceil(1); G(n)<1/4 for n<=10^4 under log2ceil(2): {below}; grouped bound: {grouped}")


def test_granularize_suite():
    failures = []
    for seed in range(250):
        rng = random.Random(seed)
        depth = rng.randint(0, 7)
        N = random_supermartingale(rng, WagerSchedule("const", (rng.randint(0, 5),)), depth,
                                   root_units=rng.randint(0, 40))
        g = random_schedule(rng)
        H = depth + rng.randint(0, 3)
        out = granularize(N, g, H).limit
        full = out.full()
        gf = g_of(g)
        okk = (check_supermartingale(out.table, out.tails) and check_granularity(out.table, g)
               and check_sandwich(N, full, g, H))
        vals = full_values(out.table, out.tails)
        for s in words_upto(depth):
            n = len(s)
            tail = sum(Fraction(1, 2 ** gf(i)) for i in range(n, H + 1))
            want = tail + strict_floor(fr(N[s]), Fraction(1, 2 ** gf(n)))
            step = Fraction(1, 2 ** gf(n))
            if vals[s] != want or not (tail + fr(N[s]) <= vals[s] + step) or not (vals[s] <= tail + fr(N[s])):
                okk = False
        okk = okk and is_supermartingale(vals, depth)
        if not okk:
            failures.append(seed)
    record("granularize suite", not failures, f"250 tables, failing seeds {failures[:5]}")


def test_functional_bridge():
    failures = []
    for seed in range(220):
        rng = random.Random(seed)
        g = random_schedule(rng, max_level=3)
        depth = rng.randint(0, 6)
        if depth + g(depth) > 13:
            depth = max(n for n in range(7) if n + g(n) <= 13)
        phi = random_functional(rng, g, depth, density=rng.choice([0.4, 0.8, 1.0]), bias=rng.random())
        hstar = counting_martingale(phi)
        gf = g_of(g)
        counts = {v: 0 for v in words_upto(depth)}
        for n in range(depth + 1):
            for tau in words(n + gf(n)):
                out = phi(tau)
                if out is not None:
                    counts[out] += 1
        census = all(counts[v + "0"] + counts[v + "1"] <= 2 ** (1 + gf(len(v) + 1) - gf(len(v))) * counts[v]
                     for v in words_upto(depth - 1))
        okk = (check_supermartingale(hstar) and check_granularity(hstar, g) and check_census(phi)
               and census and preimage_census(phi) == counts)
        if not okk:
            failures.append(seed)
    record("functional bridge", not failures, f"220 functionals (depth <= 6), failing seeds {failures[:5]}")


def test_coder_suite():
    rng = random.Random(2024)
    stream_fail = oracle_fail = 0
    oracle_checked = 0
    for k in range(600):
        size = rng.randint(1, 12) if k % 2 else rng.randint(1, 40)
        top = rng.randint(0, 7)
        book = CodeBook()
        accepted = []
        for i in range(size):
            length = rng.randint(0, top)
            before = list(book.codewords)
            w = book.request(length, i)
            if not prefix_free(book.codewords) or fr(book.kraft_sum()) + fr(book.free_weight) != 1 \
                    or fr(book.kraft_sum()) != sum(Fraction(1, 2 ** len(c)) for c in book.codewords):
                stream_fail += 1
            if size <= 12:
                oracle_checked += 1
                if (w is not None) != offline_feasible(accepted + [length]) or \
                        (w is not None) != online_extendable(before, length):
                    oracle_fail += 1
            if w is not None:
                accepted.append(length)

    kolmo_fail = 0
    for seed in range(60):
        r = random.Random(seed)
        depth = r.randint(0, 10)
        M = random_supermartingale(r, WagerSchedule("const", (r.randint(0, 3),)), depth, root_units=r.randint(1, 6))
        vals = {s: fr(v) for s, v in M.values.items()}
        for kk in [Dyadic(1, 1), Dyadic(1), Dyadic(3, 1), Dyadic(2), Dyadic(3), Dyadic(8)]:
            h = high_capital_set(M, kk)
            if sorted(h.strings) != sorted(minimal_above(vals, depth, fr(kk))) \
                    or sum(Fraction(1, 2 ** len(s)) for s in h.strings) * fr(kk) > vals[""]:
                kolmo_fail += 1

    code_fail = encoded = 0
    for seed in range(60):
        r = random.Random(seed)
        g = random_schedule(r, max_level=3)
        depth = r.randint(0, 4)
        phi = random_functional(r, g, depth)
        R = ReferenceMachine.self_delimiting(depth)
        d = r.randint(0, 2)
        for e in phi.entries:
            if e.oracle not in restricted_enumeration(phi, d, e.output):
                continue
            encoded += 1
            code = encode_preimage(phi, R, d, e.oracle)
            if decode_preimage(phi, R, d, code) != e.oracle or \
                    len(code) != R.complexity(e.output) + g(len(e.output)) + d:
                code_fail += 1
    ok = not (stream_fail or oracle_fail or kolmo_fail or code_fail) and oracle_checked > 0
    record("coder suite", ok,
           f"600 streams ({stream_fail} accounting failures, {oracle_checked} oracle decisions, {oracle_fail} wrong); "
           f"Kolmogorov inequality failures {kolmo_fail}; {encoded} roundtrips, {code_fail} wrong")


def _reverify(trace):
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "trace.json")
        emit_trace(trace, path)
        summary, report = validate_trace(load_trace(path))
    return bool(report) and summary == trace.summary


def test_density_pipeline():
    c1 = WagerSchedule.parse("const:1")
    c0 = WagerSchedule.parse("const:0")
    notes = []

    const = ToyFunctional.constant(c1, 4)
    t1 = density_trace(const, ReferenceMachine.self_delimiting(4), 1, "", 4)
    res1 = t1.outputs["result"]
    ok1 = t1.outputs["kind"] == "certificate" and res1["nu"] == "1" and res1["preimages"] == [] and _reverify(t1)
    notes.append(f"vacuous certificate at {res1.get('nu')!r}: {ok1}")

    ident = ToyFunctional.truncation(c0, 5)
    t2 = density_trace(ident, ReferenceMachine.self_delimiting(5), 1, "", 5)
    ok2 = t2.outputs["kind"] == "exhausted" and _reverify(t2)
    notes.append(f"identity exhausted (tightest margin {t2.outputs['result'].get('tightest_margin')}): {ok2}")

    depth = 14
    sparse = ToyFunctional.constant(c1, depth, sparse=True)
    Z = ReferenceMachine.zero_runs(depth)
    first = next(n for n in range(1, depth + 1) if Z.complexity("0" * n) + c1(n) + 0 <= n + c1(n) - 1)
    t3 = density_trace(sparse, Z, 1, "", depth, d=0, allow_vacuous=False)
    res3 = t3.outputs["result"]
    ok3 = t3.outputs["kind"] == "certificate" and res3["nu"] == "0" * first and _reverify(t3)
    notes.append(f"compact machine certificate at n={len(res3.get('nu', ''))} (scan says {first}): {ok3}")
    record("density pipeline", ok1 and ok2 and ok3, "; ".join(notes))


if __name__ == "__main__":
    tests = [v for k, v in list(globals().items()) if k.startswith("test_")]
    failed = 0
    for t in tests:
        try:
            t()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
