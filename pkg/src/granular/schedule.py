"""Wager schedules: the nondecreasing granularity function ``g``.

Text grammar::

    const:<k>  linear:<a>:<b>  log2ceil:<m>  table:<v0,v1,...>

optionally followed by ``+<offset>`` (used for the shifted schedule ``g + 1``).
``log2ceil:m`` is ``g(n) = m * ceil(log2(n + 2))``; a table repeats its last value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .dyadic import Dyadic, ZERO
from .errors import ScheduleExhausted

KINDS = ("const", "linear", "log2ceil", "table")


@dataclass(frozen=True)
class WagerSchedule:
    kind: str
    params: tuple[int, ...]
    horizon: Optional[int] = None
    offset: int = 0
    _sums: list = field(default_factory=list, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        need = {"const": 1, "linear": 2, "log2ceil": 1}.get(self.kind)
        if need is not None and len(self.params) != need:
            raise ValueError(f"{self.kind} takes {need} parameter(s)")
        if self.kind == "table" and not self.params:
            raise ValueError("table schedule needs at least one value")
        if any(p < 0 for p in self.params) or self.offset < 0:
            raise ValueError("schedule parameters must be nonnegative")
        if self.kind == "table" and any(a > b for a, b in zip(self.params, self.params[1:])):
            raise ValueError("table schedule must be nondecreasing")

    @classmethod
    def parse(cls, text: str, horizon: Optional[int] = None) -> "WagerSchedule":
        text = text.strip()
        offset = 0
        if "+" in text:
            text, off = text.rsplit("+", 1)
            offset = int(off)
        kind, _, rest = text.partition(":")
        if kind == "table":
            params = tuple(int(v) for v in rest.split(",") if v.strip())
        elif kind in KINDS:
            params = tuple(int(v) for v in rest.split(":"))
        else:
            raise ValueError(f"cannot parse schedule {text!r}")
        return cls(kind, params, horizon, offset)

    def __str__(self) -> str:
        if self.kind == "table":
            body = "table:" + ",".join(map(str, self.params))
        else:
            body = self.kind + ":" + ":".join(map(str, self.params))
        return body + (f"+{self.offset}" if self.offset else "")

    def with_horizon(self, horizon: Optional[int]) -> "WagerSchedule":
        return WagerSchedule(self.kind, self.params, horizon, self.offset)

    def shifted(self, k: int = 1) -> "WagerSchedule":
        """The schedule ``n -> g(n) + k``."""
        return WagerSchedule(self.kind, self.params, self.horizon, self.offset + k)

    def __call__(self, n: int) -> int:
        if n < 0:
            raise ValueError("schedule argument must be a natural number")
        if self.horizon is not None and n > self.horizon:
            raise ScheduleExhausted(f"schedule exhausted: g({n}) beyond horizon {self.horizon}")
        kind, p = self.kind, self.params
        if kind == "const":
            v = p[0]
        elif kind == "linear":
            v = p[0] * n + p[1]
        elif kind == "log2ceil":
            v = p[0] * (n + 1).bit_length()
        else:
            v = p[min(n, len(p) - 1)]
        return v + self.offset

    def step(self, n: int) -> Dyadic:
        """The minimum wager ``2**-g(n)`` at level ``n``."""
        return Dyadic(1, self(n))

    def partial_sum(self, n: int, halved: bool = False) -> Dyadic:
        """``sum_{i<=n} 2**-g(i)``, or with an extra factor 1/2 when ``halved``."""
        if n < 0:
            return ZERO
        sums = self._sums
        while len(sums) <= n:
            i = len(sums)
            prev = sums[-1] if sums else ZERO
            sums.append(prev + self.step(i))
        s = sums[n]
        return s.scale_pow2(-1) if halved else s

    def tail_sum(self, lo: int, hi: int) -> Dyadic:
        """``sum_{lo<=i<=hi} 2**-g(i)`` (zero when the range is empty)."""
        if hi < lo:
            return ZERO
        return self.partial_sum(hi) - self.partial_sum(lo - 1)

    def series_limit(self, halved: bool = False) -> Optional[Fraction]:
        """Exact value of the infinite series, or None when it diverges."""
        kind, p = self.kind, self.params
        if kind == "linear" and p[0] >= 1:
            a, b = p
            total = Fraction(1, 2 ** b) / (1 - Fraction(1, 2 ** a))
        elif kind == "log2ceil" and p[0] >= 2:
            # 2**(k-1) indices share ceil(log2(n+2)) = k
            m = p[0]
            total = Fraction(1, 2 * (2 ** (m - 1) - 1))
        else:
            return None
        total /= 2 ** self.offset
        return total / 2 if halved else total


def schedule_eval(g: WagerSchedule, n: int) -> int:
    return g(n)


def schedule_partial_sum(g: WagerSchedule, n: int, halved: bool = False) -> Dyadic:
    return g.partial_sum(n, halved)
