"""Toy Turing functionals with oblivious use ``n + g(n)``.

A functional is given extensionally: level ``n`` maps some oracle strings of
length ``n + g(n)`` to output strings of length ``n``.  Every entry carries an
enumeration stamp; the stamps fix the order in which preimages appear.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional

from .dyadic import Dyadic, strings_of_length, strings_upto
from .schedule import WagerSchedule
from .tables import CapitalTable, Report


@dataclass(frozen=True)
class Entry:
    oracle: str
    output: str
    stamp: int


@dataclass(frozen=True)
class ToyFunctional:
    schedule: WagerSchedule
    depth: int
    entries: tuple[Entry, ...] = ()
    name: str = "functional"

    def use(self, n: int) -> int:
        return n + self.schedule(n)

    @cached_property
    def _by_oracle(self) -> dict[str, Entry]:
        return {e.oracle: e for e in self.entries}

    @cached_property
    def _by_output(self) -> dict[str, list[Entry]]:
        idx: dict[str, list[Entry]] = {}
        for e in sorted(self.entries, key=lambda e: e.stamp):
            idx.setdefault(e.output, []).append(e)
        return idx

    def __call__(self, oracle: str) -> Optional[str]:
        """Output on an oracle string of exact use length, or None where undefined."""
        e = self._by_oracle.get(oracle)
        return None if e is None else e.output

    def level(self, n: int) -> list[Entry]:
        return [e for e in self.entries if len(e.output) == n]

    def preimages(self, nu: str) -> list[str]:
        """Oracle strings mapping to ``nu``, in stamp order."""
        return [e.oracle for e in self._by_output.get(nu, ())]

    def output_level(self, oracle: str) -> Optional[int]:
        """The level ``n`` with ``n + g(n) == len(oracle)``, if any."""
        for n in range(self.depth + 1):
            u = self.use(n)
            if u == len(oracle):
                return n
            if u > len(oracle):
                return None
        return None

    # constructors

    @classmethod
    def truncation(cls, g: WagerSchedule, depth: int) -> "ToyFunctional":
        """Output the first ``n`` oracle bits; the identity when ``g`` is zero."""
        entries, stamp = [], 0
        for n in range(depth + 1):
            for tau in strings_of_length(n + g(n)):
                stamp += 1
                entries.append(Entry(tau, tau[:n], stamp))
        return cls(g, depth, tuple(entries), "identity" if all(g(n) == 0 for n in range(depth + 1)) else "truncation")

    @classmethod
    def constant(cls, g: WagerSchedule, depth: int, sparse: bool = False) -> "ToyFunctional":
        """Output ``0^n``; on every oracle, or only on the all-zero oracle when ``sparse``."""
        entries, stamp = [], 0
        for n in range(depth + 1):
            u = n + g(n)
            oracles = ["0" * u] if sparse else strings_of_length(u)
            for tau in oracles:
                stamp += 1
                entries.append(Entry(tau, "0" * n, stamp))
        return cls(g, depth, tuple(entries), "sparse-constant" if sparse else "constant")

    @classmethod
    def from_triples(cls, g: WagerSchedule, depth: int, triples: Iterable[tuple[str, str, int]],
                     name: str = "functional") -> "ToyFunctional":
        return cls(g, depth, tuple(Entry(a, b, int(c)) for a, b, c in triples), name)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "schedule": str(self.schedule),
            "horizon": self.schedule.horizon,
            "depth": self.depth,
            "entries": [[e.oracle, e.output, e.stamp] for e in self.entries],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ToyFunctional":
        g = WagerSchedule.parse(obj["schedule"], obj.get("horizon"))
        return cls.from_triples(g, int(obj["depth"]), obj["entries"], obj.get("name", "functional"))


def random_functional(rng: random.Random, g: WagerSchedule, depth: int, density: float = 0.7,
                      bias: float = 0.5) -> ToyFunctional:
    """Random consistent functional built level by level.

    Each defined oracle at level ``n`` extends to all its use-length
    extensions; each extension is defined with probability ``density`` and
    appends a bit to the parent's output (0 with probability ``bias``).
    Stamps are a random permutation.
    """
    level = {tau: "" for tau in strings_of_length(g(0)) if rng.random() < density}
    triples = [(tau, out) for tau, out in level.items()]
    for n in range(depth):
        grow = n + 1 + g(n + 1) - (n + g(n))
        nxt = {}
        for tau, out in level.items():
            for ext in strings_of_length(grow):
                if rng.random() < density:
                    nxt[tau + ext] = out + ("0" if rng.random() < bias else "1")
        level = nxt
        triples.extend(level.items())
    stamps = list(range(1, len(triples) + 1))
    rng.shuffle(stamps)
    return ToyFunctional.from_triples(g, depth, [(a, b, s) for (a, b), s in zip(triples, stamps)], "random")


def validate_functional(phi: ToyFunctional) -> Report:
    """Use lengths, monotone consistency between levels, and distinct stamps."""
    g = phi.schedule
    by_oracle: dict[str, str] = {}
    for e in phi.entries:
        n = len(e.output)
        if n > phi.depth:
            return Report(False, e.oracle, f"output {e.output!r} beyond depth {phi.depth}")
        if len(e.oracle) != n + g(n):
            return Report(False, e.oracle, f"oracle {e.oracle!r} has length {len(e.oracle)}, use is {n + g(n)}")
        if e.oracle in by_oracle:
            return Report(False, e.oracle, f"oracle {e.oracle!r} defined twice")
        by_oracle[e.oracle] = e.output
    stamps = [e.stamp for e in phi.entries]
    if len(set(stamps)) != len(stamps):
        return Report(False, None, "duplicate enumeration stamps")
    for tau, nu in by_oracle.items():
        n = len(nu)
        if n == 0:
            continue
        parent = tau[: n - 1 + g(n - 1)]
        got = by_oracle.get(parent)
        if got is None:
            return Report(False, tau, f"{tau!r} -> {nu!r} but {parent!r} is undefined")
        if got != nu[:-1]:
            return Report(False, tau, f"{tau!r} -> {nu!r} but {parent!r} -> {got!r} (prefix mismatch)")
    return Report.passed(f"{len(phi.entries)} entries")


def preimage_count(phi: ToyFunctional, nu: str) -> int:
    """Number of oracle strings of length ``|nu| + g(|nu|)`` mapping to ``nu``."""
    return sum(1 for e in phi.entries if e.output == nu)


def preimage_census(phi: ToyFunctional) -> dict[str, int]:
    counts = {s: 0 for s in strings_upto(phi.depth)}
    for e in phi.entries:
        counts[e.output] += 1
    return counts


def check_census(phi: ToyFunctional, counts: Optional[dict[str, int]] = None) -> Report:
    """``h(v0) + h(v1) <= 2**(1 + g(n+1) - g(n)) * h(v)`` at every node above the bottom level."""
    g = phi.schedule
    h = preimage_census(phi) if counts is None else counts
    for nu in strings_upto(phi.depth - 1):
        n = len(nu)
        if h[nu + "0"] + h[nu + "1"] > (h[nu] << (1 + g(n + 1) - g(n))):
            return Report(False, nu, f"census inequality at {nu!r}")
    return Report.passed()


def counting_martingale(phi: ToyFunctional) -> CapitalTable:
    """``h*(v) = 2**-g(|v|) * h(v)``, a strongly g-granular supermartingale."""
    g = phi.schedule
    counts = preimage_census(phi)
    return CapitalTable(phi.depth, {nu: Dyadic(h, g(len(nu))) for nu, h in counts.items()})


def restricted_enumeration(phi: ToyFunctional, d: int, nu: str) -> list[str]:
    """Preimages of ``nu`` in stamp order, frozen once there would be ``2**(d + g(|nu|))``."""
    cutoff = 1 << (d + phi.schedule(len(nu)))
    full = phi.preimages(nu)
    if len(full) < cutoff:
        return full
    return full[: cutoff - 1]


def load_functional(path: str) -> ToyFunctional:
    with open(path) as fh:
        return ToyFunctional.from_json(json.load(fh))
