"""Scenario runners and self-validating JSON traces."""

from __future__ import annotations

import hashlib
import json
import math
from collections import OrderedDict
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Any, Optional, Sequence, Union

from .coder import ReferenceMachine, decode_preimage, encode_preimage
from .counter import AccessEntry, CounterRun, limit_counter_path, run_counter, validate_run
from .dyadic import Dyadic, extensions
from .errors import IndexOverflow, NoDescription
from .functional import ToyFunctional, counting_martingale, preimage_count, validate_functional
from .schedule import WagerSchedule
from .tables import CapitalTable, Report, Stage, StagedSupermartingale

TRACE_VERSION = 1


class HashedMartingale:
    """A deterministic g-granular martingale driven by a keyed hash.

    At each node the wager is a hash-chosen multiple of ``2**-g(n+1)`` up to
    the whole capital, placed on a hash-chosen side.  Values are computed
    along the query's prefixes; only a small cache is kept so deep queries
    stay cheap in memory.
    """

    def __init__(self, g: WagerSchedule, seed: int = 0, root_units: int = 4, cache_size: int = 64):
        self.g = g
        self.seed = seed
        self.root = Dyadic(root_units, g(0))
        self._cache: OrderedDict[str, tuple[Dyadic, bytes]] = OrderedDict()
        self._cache_size = cache_size
        self._root_digest = hashlib.blake2b(f"granular:{seed}".encode(), digest_size=16).digest()

    def _node(self, s: str) -> tuple[Dyadic, bytes]:
        hit = self._cache.get(s)
        if hit is not None:
            return hit
        parent = self._cache.get(s[:-1]) if s else None
        if parent is not None:
            start, (v, dig) = len(s) - 1, parent
        else:
            start, v, dig = 0, self.root, self._root_digest
        for n in range(start, len(s)):
            j = self.g(n + 1)
            u = v.units(j)
            h = int.from_bytes(dig[:8], "big")
            wager = h % (u + 1)
            up_on_zero = (h >> 63) & 1
            bit = s[n]
            gains = (bit == "0") == bool(up_on_zero)
            v = Dyadic(u + wager if gains else u - wager, j)
            dig = hashlib.blake2b(dig + bit.encode(), digest_size=16).digest()
        self._cache[s] = (v, dig)
        if len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        return v, dig

    def __call__(self, s: str) -> Dyadic:
        return self._node(s)[0]

    def table(self, depth: int) -> CapitalTable:
        return CapitalTable.from_function(depth, self)


@dataclass
class RunTrace:
    scenario: str
    inputs: dict
    outputs: dict
    summary: dict

    @property
    def ok(self) -> bool:
        return all(self.summary.values())

    def to_json(self) -> dict:
        return {"version": TRACE_VERSION, "scenario": self.scenario, "inputs": self.inputs,
                "outputs": self.outputs, "summary": self.summary}

    @classmethod
    def from_json(cls, obj: dict) -> "RunTrace":
        return cls(obj["scenario"], obj["inputs"], obj["outputs"], obj["summary"])


def emit_trace(trace: RunTrace, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(trace.to_json(), fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_trace(path: str) -> RunTrace:
    with open(path) as fh:
        return RunTrace.from_json(json.load(fh))


def _frac(x: Union[Dyadic, Fraction]) -> str:
    return str(x.to_fraction() if isinstance(x, Dyadic) else x)


# counter runs


def counter_trace(run: CounterRun) -> RunTrace:
    """Trace of a staged run: input, access log, per-stage deltas, path values."""
    deltas = []
    prev = None
    for st in run.output.stages:
        vals = st.table.values
        if prev is None:
            deltas.append({s: v.to_json() for s, v in vals.items()})
        else:
            deltas.append({s: v.to_json() for s, v in vals.items() if prev[s] != v})
        prev = vals
    nhat, mhat = run.output.limit.table, run.input.limit.table
    gaps = [[n, _frac(nhat[run.path[:n]]), _frac(mhat[run.path[:n]])]
            for n in range(len(run.base), run.depth + 1)]
    summary = {k: bool(v) for k, v in validate_run(run).items()}
    summary["replay"] = True
    return RunTrace(
        "counter",
        {"input": run.input.to_json(), "base": run.base, "depth": run.depth},
        {"log": [e.to_json() for e in run.log], "stages": deltas, "path": run.path,
         "complete": run.complete, "path_values": gaps},
        summary,
    )


def _counter_from_trace(trace: RunTrace) -> CounterRun:
    M = StagedSupermartingale.from_json(trace.inputs["input"])
    depth = int(trace.inputs["depth"])
    vals: dict = {}
    stages = []
    for k, delta in enumerate(trace.outputs["stages"]):
        vals = dict(vals)
        vals.update({s: Dyadic.from_json(v) for s, v in delta.items()})
        stages.append(Stage(CapitalTable(depth, vals), M.tails(k)))
    out = StagedSupermartingale(M.schedule.shifted(1), tuple(stages))
    log = tuple(AccessEntry.from_json(e) for e in trace.outputs["log"])
    return CounterRun(M, out, trace.inputs["base"], depth, trace.outputs["path"], log,
                      bool(trace.outputs["complete"]))


def _revalidate_counter(trace: RunTrace) -> dict:
    run = _counter_from_trace(trace)
    summary = {k: bool(v) for k, v in validate_run(run).items()}
    fresh = run_counter(run.input, run.base, run.depth)
    same = (fresh.log == run.log and fresh.path == run.path and len(fresh.output.stages) == len(run.output.stages)
            and all(a.table.values == b.table.values for a, b in zip(fresh.output.stages, run.output.stages)))
    summary["replay"] = same
    return summary


def m_shortfall(mhat, g: WagerSchedule, path: str, n: int, base_len: int = 0) -> Dyadic:
    """How far the path's capital lags its sibling at length ``n``, less one wager unit after a 1.

    Zero at the base.  The counter value on the path is exactly
    ``G(n) + shortfall + M(path[:n])``.
    """
    m = mhat if callable(mhat) else mhat.__getitem__
    if n <= base_len:
        return Dyadic(0)
    x = path[:n]
    sib = x[:-1] + ("1" if x[-1] == "0" else "0")
    diff = m(sib) - m(x)
    return diff if x[-1] == "0" else diff - g.step(n)


def lazy_counter_trace(M: StagedSupermartingale, base: str, depth: int) -> RunTrace:
    """Trace of a path-local run against the limit of ``M``."""
    trace = RunTrace("counter-lazy", {"input": M.to_json(), "base": base, "depth": depth}, {}, {})
    lazy = limit_counter_path(M.limit.table, M.schedule, base, depth)
    trace.outputs = {"path": lazy.path,
                     "path_values": [[p.n, _frac(p.nhat), _frac(p.mhat)] for p in lazy.points]}
    trace.summary = _revalidate_lazy(trace)
    return trace


def _revalidate_lazy(trace: RunTrace) -> dict:
    M = StagedSupermartingale.from_json(trace.inputs["input"])
    base, depth = trace.inputs["base"], int(trace.inputs["depth"])
    g, mhat = M.schedule, M.limit.table
    path = trace.outputs["path"]
    rows = trace.outputs["path_values"]
    shape = (len(path) == depth and path.startswith(base)
             and [r[0] for r in rows] == list(range(len(base), depth + 1)))
    greedy = shape and all(
        mhat[path[:n] + path[n]] <= mhat[path[:n] + ("1" if path[n] == "0" else "0")]
        and (path[n] == "0" or mhat[path[:n] + "1"] < mhat[path[:n] + "0"])
        for n in range(len(base), depth)
    )
    gap = shape and all(
        Fraction(nh) == (g.partial_sum(n, halved=True) + m_shortfall(mhat, g, path, n, len(base))).to_fraction()
        + Fraction(mh) and Fraction(mh) == mhat[path[:n]].to_fraction()
        for n, nh, mh in rows
    )
    return {"greedy_path": bool(greedy), "gap_identity": bool(gap)}


# divergence / convergence of the guaranteed gain


def gain_curve(g: WagerSchedule, depth: int) -> list[Dyadic]:
    """``G(n) = sum_{i<=n} 2**-(g(i)+1)`` for ``n = 0..depth``."""
    return [g.partial_sum(n, halved=True) for n in range(depth + 1)]


def crossing_depth(curve: Sequence[Dyadic], threshold: Dyadic) -> Optional[int]:
    for n, v in enumerate(curve):
        if v >= threshold:
            return n
    return None


def _exact_gap(M, g: WagerSchedule, lazy, curve: Sequence[Dyadic]) -> bool:
    return all(p.nhat == curve[p.n] + m_shortfall(M, g, lazy.path, p.n) + p.mhat for p in lazy.points)


def _sample_points(depth: int) -> list[int]:
    pts = {0, depth}
    k = 1
    while k <= depth:
        pts.add(k)
        k *= 2
    return sorted(pts)


def scenario_divergence_gap(g_div: WagerSchedule, g_conv: WagerSchedule, depth: int,
                            thresholds: Sequence[Union[int, Dyadic]] = (1, 2, 3), seed: int = 0) -> RunTrace:
    """Run the lazy counter path under a divergent and a convergent schedule."""
    g_div(depth + 1)
    g_conv(depth + 1)
    summary: dict[str, bool] = {}
    outputs: dict[str, Any] = {}
    for label, g in (("div", g_div), ("conv", g_conv)):
        M = HashedMartingale(g, seed)
        lazy = limit_counter_path(M, g, "", depth)
        curve = gain_curve(g, depth)
        ok = _exact_gap(M, g, lazy, curve)
        summary[f"{label}_path_gap"] = ok
        outputs[f"{label}_curve"] = [_frac(v) for v in curve]
        outputs[f"{label}_path_samples"] = [
            [n, _frac(lazy.points[n].nhat), _frac(lazy.points[n].mhat)] for n in _sample_points(depth)
        ]
        if label == "div":
            crossings = {}
            for T in thresholds:
                T = T if isinstance(T, Dyadic) else Dyadic(T)
                d = crossing_depth(curve, T)
                crossings[str(T)] = d
                summary[f"div_crosses_{T}"] = d is not None and lazy.gain(d) >= T
            outputs["div_crossings"] = crossings
        else:
            limit = g.series_limit(halved=True)
            outputs["conv_limit"] = None if limit is None else str(limit)
            summary["conv_below_limit"] = limit is not None and all(v.to_fraction() < limit for v in curve)
    return RunTrace(
        "divergence-gap",
        {"g_div": str(g_div), "g_conv": str(g_conv), "depth": depth, "seed": seed,
         "thresholds": [str(T) for T in thresholds]},
        outputs,
        summary,
    )


def _revalidate_divergence(trace: RunTrace) -> dict:
    inp = trace.inputs
    depth = int(inp["depth"])
    g_div, g_conv = WagerSchedule.parse(inp["g_div"]), WagerSchedule.parse(inp["g_conv"])
    summary: dict[str, bool] = {}
    for label, g in (("div", g_div), ("conv", g_conv)):
        curve = gain_curve(g, depth)
        stored = trace.outputs[f"{label}_curve"]
        curve_ok = stored == [_frac(v) for v in curve]
        M = HashedMartingale(g, int(inp["seed"]))
        lazy = limit_counter_path(M, g, "", depth)
        samples_ok = all(
            list(row) == [row[0], _frac(lazy.points[row[0]].nhat), _frac(lazy.points[row[0]].mhat)]
            for row in trace.outputs[f"{label}_path_samples"]
        )
        ok = _exact_gap(M, g, lazy, curve)
        summary[f"{label}_path_gap"] = ok and curve_ok and samples_ok
        if label == "div":
            for T in inp["thresholds"]:
                Td = Dyadic.parse(T)
                d = crossing_depth(curve, Td)
                stored_d = trace.outputs["div_crossings"].get(str(Td))
                summary[f"div_crosses_{Td}"] = d is not None and d == stored_d and lazy.gain(d) >= Td
        else:
            limit = g.series_limit(halved=True)
            summary["conv_below_limit"] = limit is not None and all(
                Fraction(v) < limit for v in stored) and curve_ok
    return summary


# density pipeline


@dataclass
class NuCheck:
    """Coding outcome for every preimage of one candidate string."""

    nu: str
    d: int
    preimages: list[str]
    codes: list[Optional[str]]
    c: int

    @property
    def margins(self) -> list[Union[int, float]]:
        return [math.inf if code is None else len(code) - (len(mu) - self.c)
                for mu, code in zip(self.preimages, self.codes)]

    @property
    def margin(self) -> Union[int, float, None]:
        m = self.margins
        return max(m) if m else None

    @property
    def ok(self) -> bool:
        return all(x <= 0 for x in self.margins)


def minimal_index_slack(h: int, g_n: int) -> int:
    """Least ``d >= 0`` with ``h < 2**(d + g_n)``."""
    return max(0, h.bit_length() - g_n)


def check_candidate(phi: ToyFunctional, R: ReferenceMachine, c: int, nu: str, d: Optional[int] = None) -> NuCheck:
    pre = phi.preimages(nu)
    if d is None:
        d = minimal_index_slack(len(pre), phi.schedule(len(nu)))
    codes = []
    for mu in pre:
        try:
            codes.append(encode_preimage(phi, R, d, mu))
        except (IndexOverflow, NoDescription):
            codes.append(None)
    return NuCheck(nu, d, pre, codes, c)


@dataclass
class DensityCertificate:
    functional: str
    c: int
    base: str
    nu: str
    d: int
    preimages: list[str]
    codes: list[str]
    checks: list[bool]
    found_by: str

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class DensityExhausted:
    functional: str
    c: int
    base: str
    candidates: int
    tightest_nu: Optional[str]
    tightest_margin: Optional[Union[int, float]]

    def to_json(self) -> dict:
        out = asdict(self)
        if out["tightest_margin"] == math.inf:
            out["tightest_margin"] = "inf"
        return out


def density_candidates(phi: ToyFunctional, base: str, depth: int) -> list[tuple[str, str]]:
    """Counter path prefixes first, then every strict extension by length then lexicographically."""
    hstar = counting_martingale(phi)
    path = limit_counter_path(hstar, phi.schedule, base, depth).path
    seen, out = set(), []
    for n in range(len(base) + 1, depth + 1):
        seen.add(path[:n])
        out.append((path[:n], "counter-path"))
    for nu in extensions(base, depth):
        if nu != base and nu not in seen:
            out.append((nu, "exhaustive"))
    return out


def scenario_density(phi: ToyFunctional, R: ReferenceMachine, c: int, base: str, depth: int,
                     d: Optional[int] = None, allow_vacuous: bool = True
                     ) -> Union[DensityCertificate, DensityExhausted]:
    """Look for an extension of ``base`` all of whose preimages compress by ``c`` bits.

    Complexity is relative to the explicit machine ``R``.  Without ``d`` the
    least index width that admits every preimage is used per candidate.
    """
    r = validate_functional(phi)
    if not r:
        raise ValueError(f"invalid functional: {r.detail}")
    depth = min(depth, phi.depth)
    best_nu, best_margin, count = None, None, 0
    for nu, how in density_candidates(phi, base, depth):
        chk = check_candidate(phi, R, c, nu, d)
        if not chk.preimages and not allow_vacuous:
            continue
        count += 1
        if chk.ok:
            return DensityCertificate(phi.name, c, base, nu, chk.d, chk.preimages,
                                      list(chk.codes), [True] * len(chk.codes), how)
        if best_margin is None or chk.margin < best_margin:
            best_nu, best_margin = nu, chk.margin
    return DensityExhausted(phi.name, c, base, count, best_nu, best_margin)


def density_trace(phi: ToyFunctional, R: ReferenceMachine, c: int, base: str, depth: int,
                  d: Optional[int] = None, allow_vacuous: bool = True) -> RunTrace:
    result = scenario_density(phi, R, c, base, depth, d, allow_vacuous)
    kind = "certificate" if isinstance(result, DensityCertificate) else "exhausted"
    trace = RunTrace(
        "density",
        {"functional": phi.to_json(), "machine": R.to_json(), "c": c, "base": base,
         "depth": depth, "d": d, "allow_vacuous": allow_vacuous},
        {"kind": kind, "result": result.to_json()},
        {},
    )
    trace.summary = _revalidate_density(trace)
    return trace


def _revalidate_density(trace: RunTrace) -> dict:
    """Re-derive everything in a density trace from the embedded functional and machine."""
    inp = trace.inputs
    phi = ToyFunctional.from_json(inp["functional"])
    R = ReferenceMachine.from_json(inp["machine"])
    c, base, depth = int(inp["c"]), inp["base"], int(inp["depth"])
    d = inp["d"]
    res = trace.outputs["result"]
    summary = {"functional_valid": bool(validate_functional(phi))}
    if trace.outputs["kind"] == "certificate":
        nu = res["nu"]
        n = len(nu)
        pre = phi.preimages(nu)
        summary["extends_base"] = nu.startswith(base) and len(nu) > len(base) and len(nu) <= depth
        summary["preimages"] = (res["preimages"] == pre and len(pre) == preimage_count(phi, nu)
                                and all(len(mu) == n + phi.schedule(n) and phi(mu) == nu for mu in pre))
        codes_ok = len(res["codes"]) == len(pre)
        for mu, code in zip(pre, res["codes"]):
            try:
                codes_ok &= encode_preimage(phi, R, res["d"], mu) == code
                codes_ok &= decode_preimage(phi, R, res["d"], code) == mu
            except (IndexOverflow, NoDescription, ValueError):
                codes_ok = False
            codes_ok &= len(code) <= len(mu) - c
        summary["codes"] = bool(codes_ok)
    else:
        best = None
        count = 0
        for nu in extensions(base, depth):
            if nu == base:
                continue
            chk = check_candidate(phi, R, c, nu, d)
            if not chk.preimages and not inp["allow_vacuous"]:
                continue
            count += 1
            if chk.ok:
                summary["no_candidate_qualifies"] = False
                break
            if best is None or chk.margin < best:
                best = chk.margin
        else:
            summary["no_candidate_qualifies"] = True
        stored = res["tightest_margin"]
        stored = math.inf if stored == "inf" else stored
        summary["tightest_margin"] = summary["no_candidate_qualifies"] and stored == best and count == res["candidates"]
    return summary


# revalidation entry point


def validate_trace(trace: RunTrace) -> tuple[dict, Report]:
    """Recompute a trace's summary; passes iff it matches and every check holds."""
    dispatch = {
        "counter": _revalidate_counter,
        "counter-lazy": _revalidate_lazy,
        "divergence-gap": _revalidate_divergence,
        "density": _revalidate_density,
    }
    if trace.scenario not in dispatch:
        return {}, Report(False, None, f"unknown scenario {trace.scenario!r}")
    try:
        summary = dispatch[trace.scenario](trace)
    except (KeyError, ValueError, TypeError, ArithmeticError, IndexError) as exc:
        return {}, Report(False, None, f"malformed trace: {exc!r}")
    if summary != trace.summary:
        diff = sorted(k for k in set(summary) | set(trace.summary) if summary.get(k) != trace.summary.get(k))
        return summary, Report(False, None, f"summary mismatch on {diff}")
    failed = sorted(k for k, v in summary.items() if not v)
    if failed:
        return summary, Report(False, None, f"failed checks {failed}")
    return summary, Report.passed()
