"""The counter-strategy: a (g+1)-granular supermartingale that beats a g-granular one.

Given a staged g-granular supermartingale ``M`` and a base string, the
construction accesses strings one per stage (least first, by length then
lexicographically) and sets the children of an accessed string ``x`` to

    N(x0) = H(|x|) + q(x) * 2**-g(|x|+1) + 2**-(g(|x|+1)+1)
    N(x1) = H(|x|) + t(x) * 2**-g(|x|+1) - 2**-(g(|x|+1)+1)

where ``H(n) = sum_{i<=n} 2**-(g(i)+1)``, ``t(x) = M(x0) / 2**-g(|x|+1)``
and ``q(x) = M(x1) / 2**-g(|x|+1)``.  Along the path that greedily
minimizes ``M`` the gap ``N - M`` never drops below ``H``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

from .dyadic import ZERO, Dyadic, extensions
from .errors import InvalidInput
from .schedule import WagerSchedule
from .tables import CapitalTable, Report, Stage, StagedSupermartingale, staged_validate, tail_function

TableLike = Union[CapitalTable, Callable[[str], Dyadic]]


@dataclass(frozen=True)
class AccessEntry:
    stage: int
    string: str
    t: int
    q: int

    def to_json(self) -> list:
        return [self.stage, self.string, str(self.t), str(self.q)]

    @classmethod
    def from_json(cls, obj: list) -> "AccessEntry":
        return cls(int(obj[0]), obj[1], int(obj[2]), int(obj[3]))


@dataclass(frozen=True)
class CounterRun:
    input: StagedSupermartingale
    output: StagedSupermartingale
    base: str
    depth: int
    path: str
    log: tuple[AccessEntry, ...]
    complete: bool = True

    @property
    def stages(self) -> int:
        return len(self.output.stages)

    def with_limit_values(self, changes: dict) -> "CounterRun":
        """Copy with the final output table patched (for negative tests)."""
        last = self.output.stages[-1]
        stage = Stage(last.table.with_values(changes), last.tails)
        out = replace(self.output, stages=self.output.stages[:-1] + (stage,))
        return replace(self, output=out)


def _ceil_units(v: Dyadic, j: int) -> int:
    if v.exp <= j:
        return v.units(j)
    return (v.num >> (v.exp - j)) + 1


def _coefficients(hat: CapitalTable, g: WagerSchedule, s: str) -> tuple[int, int]:
    j = g(len(s) + 1)
    return hat[s + "0"].units(j), hat[s + "1"].units(j)


def child_values(g: WagerSchedule, s_len: int, half_sum: Dyadic, t: int, q: int) -> tuple[Dyadic, Dyadic]:
    """The update pair for the children of an accessed string of length ``s_len``."""
    j = g(s_len + 1)
    half_step = Dyadic(1, j + 1)
    zero_child = half_sum + Dyadic(q, j) + half_step
    one_child = half_sum + Dyadic(t, j) - half_step
    return zero_child, one_child


class _Engine:
    def __init__(self, M: StagedSupermartingale, base: str, depth: int):
        self.M = M
        self.g = M.schedule
        self.base = base
        self.depth = depth
        self.half = [self.g.partial_sum(n, halved=True) for n in range(depth + 1)]

    def base_values(self, vals: dict, mhat_base: Dyadic) -> None:
        """Set the base value and the (rounded-up halving) values above it."""
        g, base = self.g, self.base
        v = mhat_base + self.half[len(base)]
        vals[base] = v
        for k in range(len(base) - 1, -1, -1):
            j = g(k) + 1
            v = Dyadic(_ceil_units(v.scale_pow2(-1), j), j)
            vals[base[:k]] = v

    def satisfied(self, nhat: dict, mhat: CapitalTable, s: str) -> bool:
        return nhat[s] >= mhat[s] + self.half[len(s)]

    def find_eligible(self, nhat: dict, mprev: CapitalTable, mnext: CapitalTable,
                      cap: int, last: dict) -> Optional[str]:
        """Least string passing the gap condition along its prefixes and needing an access."""
        D, b = self.depth, len(self.base)
        if b >= D:
            return None
        limit = min(b + cap, D - 1)
        level = [self.base]
        while level:
            nxt = []
            for s in level:
                if not self.satisfied(nhat, mprev, s):
                    continue
                coeffs = _coefficients(mnext, self.g, s)
                if last.get(s) != coeffs:
                    return s
                if len(s) < limit:
                    nxt.append(s + "0")
                    nxt.append(s + "1")
            level = nxt
        return None


def coefficient_changes(M: StagedSupermartingale, base: str, depth: int) -> int:
    """Number of (stage, string) pairs whose coefficients change between consecutive stages."""
    g = M.schedule
    count = 0
    strings = [s for s in extensions(base, depth - 1)]
    for s_idx in range(len(M.stages) - 1):
        a, b = M.stages[s_idx].table, M.stages[s_idx + 1].table
        for s in strings:
            if _coefficients(a, g, s) != _coefficients(b, g, s):
                count += 1
    return count


def run_counter(M: StagedSupermartingale, base: str = "", depth: Optional[int] = None,
                budget: Optional[int] = None, validate: bool = True) -> CounterRun:
    """Replay the counter construction against ``M`` until quiescence.

    ``budget`` caps the number of stages; ``None`` uses a bound that always
    suffices.  Running out of budget returns a run marked incomplete.
    """
    D = M.depth if depth is None else depth
    if D > M.depth:
        raise InvalidInput(f"depth {D} exceeds input depth {M.depth}")
    if len(base) > D:
        raise InvalidInput("base string longer than depth")
    g = M.schedule
    if g.horizon is not None and g.horizon < D + 1:
        raise InvalidInput(f"schedule horizon {g.horizon} below depth + 1")
    if validate:
        r = staged_validate(M)
        if not r:
            raise InvalidInput(f"input fails staged validation: {r.detail}")
    if D < M.depth:
        M = _truncate(M, D)

    eng = _Engine(M, base, D)
    S = len(M.stages)
    b = len(base)
    if budget is None:
        nodes = (1 << (D - b)) - 1
        budget = 2 * S + (D - b) + nodes + coefficient_changes(M, base, D) + 2

    zero_vals = {s: ZERO for s in M.hat(0).values}
    eng.base_values(zero_vals, M.hat(0)[base])
    tables = [zero_vals]
    log: list[AccessEntry] = []
    last: dict[str, tuple[int, int]] = {}
    complete = False
    s = 0
    while True:
        mprev, mnext = M.hat(s), M.hat(s + 1)
        cur = tables[-1]
        if mnext[base] != mprev[base]:
            new = dict(cur)
            eng.base_values(new, mnext[base])
            tables.append(new)
        else:
            sigma = eng.find_eligible(cur, mprev, mnext, s, last)
            if sigma is None:
                if s >= S - 1 and s >= D - 1 - b:
                    complete = True
                    break
                tables.append(cur)
            else:
                t, q = _coefficients(mnext, g, sigma)
                zc, oc = child_values(g, len(sigma), eng.half[len(sigma)], t, q)
                new = dict(cur)
                # stage monotonicity; a violation means the input was not monotone
                assert zc >= cur[sigma + "0"] and oc >= cur[sigma + "1"], sigma
                new[sigma + "0"] = zc
                new[sigma + "1"] = oc
                tables.append(new)
                last[sigma] = (t, q)
                log.append(AccessEntry(s + 1, sigma, t, q))
        s += 1
        if s >= budget:
            break

    g1 = g.shifted(1)
    out_stages = []
    cache: dict[int, CapitalTable] = {}
    for k, vals in enumerate(tables):
        tbl = cache.get(id(vals))
        if tbl is None:
            tbl = cache[id(vals)] = CapitalTable(D, vals)
        out_stages.append(Stage(tbl, M.tails(k)))
    out = StagedSupermartingale(g1, tuple(out_stages))
    path = extract_path(M.limit.table, base, D)
    return CounterRun(M, out, base, D, path, tuple(log), complete)


def _truncate(M: StagedSupermartingale, D: int) -> StagedSupermartingale:
    stages = tuple(
        Stage(CapitalTable(D, {s: v for s, v in st.table.values.items() if len(s) <= D}), st.tails)
        for st in M.stages
    )
    return StagedSupermartingale(M.schedule, stages)


def _lookup(table: TableLike) -> Callable[[str], Dyadic]:
    return table.__getitem__ if isinstance(table, CapitalTable) else table


def extract_path(mhat: TableLike, base: str, depth: int) -> str:
    """Extend ``base`` to length ``depth``, stepping to the child where ``mhat`` is smaller (ties to 0)."""
    m = _lookup(mhat)
    x = base
    while len(x) < depth:
        x += "0" if m(x + "0") <= m(x + "1") else "1"
    return x


def verify_path_invariant(run: CounterRun) -> Report:
    """Gap ``N(X|n) >= H(n) + M(X|n)`` and ``M(X|n) <= M(base)`` for ``|base| <= n <= depth``."""
    g = run.input.schedule
    nhat = run.output.limit.table
    mlim = run.input.limit
    mhat = mlim.table
    f = tail_function(mlim.tails, run.depth)
    x, b = run.path, len(run.base)
    if not x.startswith(run.base) or len(x) != run.depth:
        return Report(False, x, "path does not extend base to full depth")
    m_base = mhat[run.base] + f[b]
    for n in range(b, run.depth + 1):
        s = x[:n]
        if nhat[s] < g.partial_sum(n, halved=True) + mhat[s]:
            return Report(False, s, f"gap fails at n={n}: N={nhat[s]}, M={mhat[s]}", n)
        if mhat[s] + f[n] > m_base:
            return Report(False, s, f"M exceeds its base value at n={n}", n)
    return Report.passed()


def validate_run(run: CounterRun) -> dict[str, Report]:
    """Every invariant of a counter run, keyed by name."""
    M, N = run.input, run.output
    g = M.schedule
    out: dict[str, Report] = {}
    out["complete"] = Report(run.complete, None, "" if run.complete else "budget exhausted")
    out["schedule"] = Report(N.schedule == g.shifted(1), None, str(N.schedule))
    out["staged"] = staged_validate(N)
    out["nonnegative"] = Report(all(v >= 0 for st in N.stages for v in st.table.values.values()))
    strong = (not M.strongly_granular) or N.strongly_granular
    out["strong_granularity"] = Report(strong, None, "tails introduced" if not strong else "")
    out["path"] = verify_path_invariant(run)

    b = len(run.base)
    half_b = g.partial_sum(b, halved=True)
    base_ok = Report.passed()
    for k, st in enumerate(N.stages):
        if st.table[run.base] != M.hat(k)[run.base] + half_b:
            base_ok = Report(False, run.base, f"base value wrong at stage {k}", k)
            break
    out["base"] = base_ok

    log_ok = Report.passed()
    seen_stages = set()
    last: dict[str, tuple[int, int]] = {}
    for e in run.log:
        if e.stage in seen_stages:
            log_ok = Report(False, e.string, f"two accesses at stage {e.stage}", e.stage)
            break
        seen_stages.add(e.stage)
        if _coefficients(M.hat(e.stage), g, e.string) != (e.t, e.q):
            log_ok = Report(False, e.string, f"logged coefficients disagree with input at stage {e.stage}", e.stage)
            break
        if last.get(e.string) == (e.t, e.q):
            log_ok = Report(False, e.string, f"re-access without change at stage {e.stage}", e.stage)
            break
        last[e.string] = (e.t, e.q)
    out["access_log"] = log_ok

    nodes = (1 << (run.depth - b)) - 1
    changes = coefficient_changes(M, run.base, run.depth)
    bound = nodes * (1 + changes)
    out["access_bound"] = Report(len(run.log) <= bound, None, f"{len(run.log)} accesses, bound {bound}")
    return out


@dataclass(frozen=True)
class PathPoint:
    n: int
    nhat: Dyadic
    mhat: Dyadic


@dataclass(frozen=True)
class LazyPath:
    path: str
    points: tuple[PathPoint, ...] = field(repr=False)

    def gain(self, n: int) -> Dyadic:
        p = self.points[n - self.points[0].n]
        return p.nhat - p.mhat


def limit_counter_path(mhat: TableLike, g: WagerSchedule, base: str, depth: int) -> LazyPath:
    """Path-local evaluation of the stabilized construction.

    Visits only the prefixes of the path and their siblings, so it runs at
    depths where the full tree is out of reach.  ``mhat`` must already be
    the limit (a pure function of the string).
    """
    m = _lookup(mhat)
    b = len(base)
    x = base
    m_x = m(x)
    half = g.partial_sum(b, halved=True)
    points = [PathPoint(b, m_x + half, m_x)]
    parts = [base]
    for n in range(b, depth):
        j = g(n + 1)
        m0, m1 = m(x + "0"), m(x + "1")
        zc, oc = child_values(g, n, half, m0.units(j), m1.units(j))
        half = half + Dyadic(1, j + 1)
        if m0 <= m1:
            bit, nv, mv = "0", zc, m0
        else:
            bit, nv, mv = "1", oc, m1
        parts.append(bit)
        x = x + bit
        points.append(PathPoint(n + 1, nv, mv))
    return LazyPath("".join(parts), tuple(points))
