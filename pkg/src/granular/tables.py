"""Finite-depth capital tables, staged supermartingales and granularization."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence

from .dyadic import ZERO, Dyadic, floor_multiple, strings_upto
from .errors import IncompleteTable, InvalidInput
from .schedule import WagerSchedule


@dataclass(frozen=True)
class Report:
    """Outcome of a check; falsy on failure."""

    ok: bool
    where: Optional[str] = None
    detail: str = ""
    stage: Optional[int] = None

    def __bool__(self) -> bool:
        return self.ok

    @classmethod
    def passed(cls, detail: str = "") -> "Report":
        return cls(True, None, detail)

    def to_json(self) -> dict:
        return {"ok": self.ok, "where": self.where, "detail": self.detail, "stage": self.stage}


@dataclass(frozen=True)
class CapitalTable:
    """Values on every string of length at most ``depth``."""

    depth: int
    values: Mapping[str, Dyadic]

    def __getitem__(self, s: str) -> Dyadic:
        try:
            return self.values[s]
        except KeyError:
            raise IncompleteTable(f"incomplete table: no entry for {s!r}") from None

    def __len__(self) -> int:
        return len(self.values)

    @classmethod
    def from_function(cls, depth: int, fn: Callable[[str], Dyadic]) -> "CapitalTable":
        return cls(depth, {s: fn(s) for s in strings_upto(depth)})

    @classmethod
    def from_items(cls, depth: int, items: Mapping[str, object], default: Optional[Dyadic] = None) -> "CapitalTable":
        """Build from a partial map; missing strings get ``default`` (or stay missing)."""
        vals = {}
        for s in strings_upto(depth):
            if s in items:
                v = items[s]
                vals[s] = v if isinstance(v, Dyadic) else Dyadic.from_fraction(v)
            elif default is not None:
                vals[s] = default
        return cls(depth, vals)

    @classmethod
    def constant(cls, depth: int, value) -> "CapitalTable":
        v = value if isinstance(value, Dyadic) else Dyadic.from_fraction(value)
        return cls(depth, {s: v for s in strings_upto(depth)})

    def with_values(self, changes: Mapping[str, Dyadic]) -> "CapitalTable":
        vals = dict(self.values)
        vals.update(changes)
        return CapitalTable(self.depth, vals)

    def to_json(self) -> dict:
        return {"depth": self.depth, "values": {s: v.to_json() for s, v in self.values.items()}}

    @classmethod
    def from_json(cls, obj: dict) -> "CapitalTable":
        return cls(int(obj["depth"]), {s: Dyadic.from_json(v) for s, v in obj["values"].items()})


def check_supermartingale(t: CapitalTable, tails: Sequence[Dyadic] = ()) -> Report:
    """``t(s0) + t(s1) <= 2 t(s)`` at every internal node.

    With ``tails`` the checked function is ``t(s) + sum_{i >= |s|} tails[i]``.
    """
    vals = t.values
    f = tail_function(tails, t.depth)
    for s in strings_upto(t.depth - 1):
        try:
            v, a, b = vals[s], vals[s + "0"], vals[s + "1"]
        except KeyError as e:
            raise IncompleteTable(f"incomplete table: no entry for {e.args[0]!r}") from None
        n = len(s)
        if a + b + 2 * f[n + 1] > 2 * v + 2 * f[n]:
            return Report(False, s, f"supermartingale at {s!r}: {a + f[n + 1]} + {b + f[n + 1]} > 2*{v + f[n]}")
    return Report.passed()


def check_granularity(t: CapitalTable, g: WagerSchedule) -> Report:
    """Every value at length ``n`` is an integer multiple of ``2**-g(n)``."""
    for s in strings_upto(t.depth):
        if s in t.values and not t.values[s].is_multiple_of_pow2(g(len(s))):
            return Report(False, s, f"granularity at {s!r}: {t.values[s]} not a multiple of 2^-{g(len(s))}")
    return Report.passed()


def tail_function(tails: Sequence[Dyadic], depth: int) -> list[Dyadic]:
    """``f[n] = sum_{i >= n} tails[i]`` for ``0 <= n <= depth + 1``."""
    f = [ZERO] * (max(depth, len(tails)) + 2)
    for i in range(len(tails) - 1, -1, -1):
        f[i] = f[i + 1] + tails[i]
    return f[: depth + 2]


@dataclass(frozen=True)
class Stage:
    """One approximation stage: granular part plus tail coefficients."""

    table: CapitalTable
    tails: tuple[Dyadic, ...] = ()

    def full(self) -> CapitalTable:
        f = tail_function(self.tails, self.table.depth)
        if not any(f):
            return self.table
        return CapitalTable(self.table.depth, {s: v + f[len(s)] for s, v in self.table.values.items()})


@dataclass(frozen=True)
class StagedSupermartingale:
    """A finite left-c.e.-style approximation; the last stage is the limit.

    Stage ``s`` has value ``table_s(x) + f_s(|x|)`` where
    ``f_s(n) = sum_{i >= n} tails_s[i]``.
    """

    schedule: WagerSchedule
    stages: tuple[Stage, ...]

    @property
    def depth(self) -> int:
        return self.stages[0].table.depth

    @property
    def limit(self) -> Stage:
        return self.stages[-1]

    def hat(self, s: int) -> CapitalTable:
        """Granular part at stage ``s``; stages past the end repeat the limit."""
        return self.stages[min(s, len(self.stages) - 1)].table

    def tails(self, s: int) -> tuple[Dyadic, ...]:
        return self.stages[min(s, len(self.stages) - 1)].tails

    @property
    def strongly_granular(self) -> bool:
        return all(not any(st.tails) for st in self.stages)

    @classmethod
    def single(cls, table: CapitalTable, schedule: WagerSchedule, tails: Sequence[Dyadic] = ()) -> "StagedSupermartingale":
        return cls(schedule, (Stage(table, tuple(tails)),))

    @classmethod
    def from_sequence(cls, tables: Sequence[CapitalTable], schedule: WagerSchedule,
                      q: Sequence[Dyadic] = ()) -> "StagedSupermartingale":
        """Stage ``s`` sees ``q[0..s]``, so ``f_s(n) = sum_{n <= i <= s} q_i``."""
        return cls(schedule, tuple(Stage(t, tuple(q[: s + 1])) for s, t in enumerate(tables)))

    def to_json(self) -> dict:
        return {
            "schedule": str(self.schedule),
            "horizon": self.schedule.horizon,
            "depth": self.depth,
            "stages": [
                {"values": {s: v.to_json() for s, v in st.table.values.items()},
                 "tails": [q.to_json() for q in st.tails]}
                for st in self.stages
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "StagedSupermartingale":
        g = WagerSchedule.parse(obj["schedule"], obj.get("horizon"))
        depth = int(obj["depth"])
        if "stages" not in obj:
            table = CapitalTable(depth, {s: Dyadic.from_json(v) for s, v in obj["values"].items()})
            tails = tuple(Dyadic.from_json(q) for q in obj.get("tails", ()))
            return cls.single(table, g, tails)
        stages = tuple(
            Stage(CapitalTable(depth, {s: Dyadic.from_json(v) for s, v in st["values"].items()}),
                  tuple(Dyadic.from_json(q) for q in st.get("tails", ())))
            for st in obj["stages"]
        )
        return cls(g, stages)


def _changed(prev: Mapping[str, Dyadic], cur: Mapping[str, Dyadic]) -> list[str]:
    return [s for s, v in cur.items() if prev.get(s) is not v and prev.get(s) != v]


def staged_validate(S: StagedSupermartingale, full: bool = False) -> Report:
    """Check monotonicity, per-stage supermartingale inequality and granularity.

    Consecutive stages are compared on changed entries only unless ``full``;
    a stage whose tails differ from its predecessor is always checked in full.
    Tail coefficients must be nondecreasing componentwise between stages.
    """
    if not S.stages:
        raise InvalidInput("empty stage list")
    g = S.schedule
    depth = S.depth
    prev: Optional[Stage] = None
    for k, st in enumerate(S.stages):
        t = st.table
        if t.depth != depth:
            return Report(False, None, f"depth mismatch at stage {k}", k)
        if len(t.values) != (1 << (depth + 1)) - 1:
            missing = next(s for s in strings_upto(depth) if s not in t.values)
            raise IncompleteTable(f"incomplete table: stage {k} has no entry for {missing!r}")
        if prev is None or full or st.tails != prev.tails:
            if prev is not None:
                if len(st.tails) < len(prev.tails) or any(a > b for a, b in zip(prev.tails, st.tails)):
                    return Report(False, None, f"tail monotonicity at stage {k}", k)
                for s in strings_upto(depth):
                    if prev.table.values[s] > t.values[s]:
                        return Report(False, s, f"monotonicity at ({s!r}, stage {k})", k)
            r = check_supermartingale(t, st.tails)
            if not r:
                return Report(False, r.where, f"supermartingale at {r.where!r} (stage {k})", k)
            r = check_granularity(t, g)
            if not r:
                return Report(False, r.where, f"granularity at {r.where!r} (stage {k})", k)
        else:
            changed = _changed(prev.table.values, t.values)
            for s in changed:
                if prev.table.values[s] > t.values[s]:
                    return Report(False, s, f"monotonicity at ({s!r}, stage {k})", k)
                if not t.values[s].is_multiple_of_pow2(g(len(s))):
                    return Report(False, s, f"granularity at {s!r} (stage {k})", k)
            f = tail_function(st.tails, depth)
            nodes = {s[:-1] for s in changed if s} | {s for s in changed if len(s) < depth}
            for s in sorted(nodes, key=lambda x: (len(x), x)):
                n = len(s)
                v = t.values
                if v[s + "0"] + v[s + "1"] + 2 * f[n + 1] > 2 * v[s] + 2 * f[n]:
                    return Report(False, s, f"supermartingale at {s!r} (stage {k})", k)
        prev = st
    return Report.passed(f"{len(S.stages)} stages")


# granularization


def granularize(N: CapitalTable, g: WagerSchedule, horizon: int, inclusive: bool = True) -> StagedSupermartingale:
    """Round a supermartingale onto the ``g`` grid, paying with a reserved tail.

    Result value: ``tail(|x|) + S(N(x), 2**-g(|x|))`` where ``S`` is
    :func:`floor_multiple`.  With ``inclusive`` the tail is
    ``sum_{n <= i <= H} 2**-g(i)``; the exclusive tail ``sum_{n < i <= H}``
    only yields a supermartingale when ``g`` is constant on ``[0, depth]``.
    The rounded part is returned as the granular table, the tail as the
    stage's tail coefficients.
    """
    if horizon < N.depth:
        raise InvalidInput(f"horizon {horizon} below table depth {N.depth}")
    g(horizon)  # raises ScheduleExhausted early
    hat = {s: floor_multiple(v, g.step(len(s))) for s, v in N.values.items()}
    if inclusive:
        tails = tuple(g.step(i) for i in range(horizon + 1))
    else:
        tails = tuple(g.step(i + 1) for i in range(horizon))
    return StagedSupermartingale.single(CapitalTable(N.depth, hat), g, tails)


def granularize_tail(g: WagerSchedule, horizon: int, n: int, inclusive: bool = True) -> Dyadic:
    return g.tail_sum(n if inclusive else n + 1, horizon)


def check_sandwich(N: CapitalTable, M: CapitalTable, g: WagerSchedule, horizon: int,
                   inclusive: bool = True) -> Report:
    """``tail + N <= M + 2**-g`` and ``M <= tail + N`` at every string."""
    for s in strings_upto(N.depth):
        n = len(s)
        tail = granularize_tail(g, horizon, n, inclusive)
        if tail + N[s] > M[s] + g.step(n):
            return Report(False, s, f"lower sandwich at {s!r}")
        if M[s] > tail + N[s]:
            return Report(False, s, f"upper sandwich at {s!r}")
    return Report.passed()


# random models for tests and demos


def random_supermartingale(rng: random.Random, g: WagerSchedule, depth: int,
                           allowance: Sequence[Dyadic] = (), root_units: int = 8,
                           martingale_bias: float = 0.5) -> CapitalTable:
    """A random g-granular supermartingale table.

    ``allowance[n]`` is extra room ``2*q_n`` for children at level ``n``,
    used when the table is the granular part of a function with tails.
    """
    vals = {"": Dyadic(rng.randint(0, root_units), g(0))}
    for s in strings_upto(depth - 1):
        n = len(s)
        j = g(n + 1)
        extra = allowance[n] if n < len(allowance) else ZERO
        budget = (2 * vals[s] + extra)
        total = budget.num >> (budget.exp - j) if budget.exp > j else budget.units(j)
        r = rng.random()
        if r < 0.15:
            a = b = total // 2
        else:
            if r > 0.15 + martingale_bias:
                total = rng.randint(0, total)
            a = rng.randint(0, total)
            b = total - a
        vals[s + "0"] = Dyadic(a, j)
        vals[s + "1"] = Dyadic(b, j)
    return CapitalTable(depth, vals)


def _shrink(rng: random.Random, nxt: CapitalTable, g: WagerSchedule, allowance: Sequence[Dyadic],
            keep: float) -> CapitalTable:
    depth = nxt.depth
    root = nxt[""]
    if rng.random() < keep:
        vals = {"": root}
    else:
        u = root.units(g(0))
        vals = {"": Dyadic(rng.randint(0, u), g(0))}
    for s in strings_upto(depth - 1):
        n = len(s)
        j = g(n + 1)
        extra = allowance[n] if n < len(allowance) else ZERO
        budget = 2 * vals[s] + extra
        cap = budget.num >> (budget.exp - j) if budget.exp > j else budget.units(j)
        a_next, b_next = nxt[s + "0"].units(j), nxt[s + "1"].units(j)
        a = a_next if rng.random() < keep else rng.randint(0, a_next)
        a = min(a, cap)
        b = b_next if rng.random() < keep else rng.randint(0, b_next)
        b = min(b, cap - a)
        vals[s + "0"] = Dyadic(a, j)
        vals[s + "1"] = Dyadic(b, j)
    return CapitalTable(depth, vals)


def random_staged(rng: random.Random, g: WagerSchedule, depth: int, n_stages: int,
                  q: Sequence[Dyadic] = (), keep: float = 0.7) -> StagedSupermartingale:
    """Random g-granular staged supermartingale; strongly granular when ``q`` is empty.

    Stage ``s`` uses tails ``q[0..s]``; earlier stages are pointwise shrinkings
    of later ones.
    """
    def allowance(s: int) -> list[Dyadic]:
        return [2 * q[i] if i <= s else ZERO for i in range(len(q))]

    last = random_supermartingale(rng, g, depth, allowance(n_stages - 1))
    tables = [last]
    for s in range(n_stages - 2, -1, -1):
        tables.append(_shrink(rng, tables[-1], g, allowance(s), keep))
    tables.reverse()
    return StagedSupermartingale.from_sequence(tables, g, q)


def random_schedule(rng: random.Random, max_level: int = 12) -> WagerSchedule:
    """A random schedule from the text grammar."""
    kind = rng.choice(KIND_CHOICES)
    if kind == "const":
        return WagerSchedule("const", (rng.randint(0, 3),))
    if kind == "linear":
        return WagerSchedule("linear", (rng.randint(0, 1), rng.randint(0, 2)))
    if kind == "log2ceil":
        return WagerSchedule("log2ceil", (rng.randint(1, 2),))
    vals, v = [], rng.randint(0, 2)
    for _ in range(rng.randint(1, 6)):
        vals.append(v)
        v = min(v + rng.randint(0, 2), max_level)
    return WagerSchedule("table", tuple(vals))


KIND_CHOICES = ("const", "linear", "log2ceil", "table")


def load_staged(path: str) -> StagedSupermartingale:
    with open(path) as fh:
        return StagedSupermartingale.from_json(json.load(fh))
