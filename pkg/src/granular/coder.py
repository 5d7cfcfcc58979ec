"""Prefix-free coding: online Kraft-Chaitin allocation, compression of
high-capital strings, finite reference machines, and two-part preimage codes."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional, Union

from .dyadic import ONE, ZERO, Dyadic, is_prefix_free, strings_upto
from .errors import IndexOverflow, InvalidMachine, NoDescription
from .functional import ToyFunctional, restricted_enumeration
from .tables import CapitalTable


@dataclass
class CodeBook:
    """State of the online Kraft-Chaitin allocator.

    Free space is kept as aligned dyadic blocks in left-to-right order; with
    leftmost-fit their sizes stay distinct and increasing, so a request fails
    only when its mass exceeds the free weight.
    """

    assigned: list[tuple[Any, str]] = field(default_factory=list)
    free_weight: Dyadic = ONE
    _free: list[tuple[int, int]] = field(default_factory=lambda: [(0, 0)], repr=False)

    def request(self, length: int, payload: Any = None) -> Optional[str]:
        """Assign the leftmost free codeword of ``length``; None when rejected."""
        if length < 0:
            raise ValueError("codeword length must be nonnegative")
        mass = Dyadic(1, length)
        if mass > self.free_weight:
            return None
        for i, (start, exp) in enumerate(self._free):
            if exp <= length:
                break
        else:  # pragma: no cover - excluded by the block-size invariant
            raise RuntimeError("free blocks exhausted despite available weight")
        rest = []
        while exp < length:
            start <<= 1
            exp += 1
            rest.append((start + 1, exp))
        rest.reverse()
        self._free[i:i + 1] = rest
        word = format(start, f"0{length}b") if length else ""
        self.assigned.append((payload, word))
        self.free_weight = self.free_weight - mass
        return word

    @property
    def codewords(self) -> list[str]:
        return [w for _, w in self.assigned]

    def mapping(self) -> dict:
        return {p: w for p, w in self.assigned}

    def kraft_sum(self) -> Dyadic:
        total = ZERO
        for _, w in self.assigned:
            total = total + Dyadic(1, len(w))
        return total

    def to_json(self) -> dict:
        return {"assigned": [[p, w] for p, w in self.assigned], "free_weight": self.free_weight.to_json()}


def kc_allocate(book: CodeBook, requests: Iterable[tuple[int, Any]]) -> list[Optional[str]]:
    """Feed requests to the book in order; rejected ones yield None."""
    return [book.request(length, payload) for length, payload in requests]


# capital thresholds


@dataclass(frozen=True)
class HighCapital:
    strings: tuple[str, ...]
    weight: Dyadic
    root: Dyadic
    threshold: Dyadic

    @property
    def within_bound(self) -> bool:
        # weight <= M(root) / k, exactly
        return self.weight * self.threshold <= self.root


def high_capital_set(M: CapitalTable, k: Dyadic) -> HighCapital:
    """Minimal strings where ``M`` reaches ``k``, with their weight."""
    if not k:
        raise ValueError("threshold must be positive")
    found = []
    level = [""]
    while level:
        nxt = []
        for s in level:
            if M[s] >= k:
                found.append(s)
            elif len(s) < M.depth:
                nxt += [s + "0", s + "1"]
        level = nxt
    weight = ZERO
    for s in found:
        weight = weight + Dyadic(1, len(s))
    return HighCapital(tuple(found), weight, M[""], k)


@dataclass
class Compression:
    ok: bool
    book: CodeBook
    high: HighCapital
    requested_mass: Dyadic
    witness: Optional[str] = None
    reason: str = ""


def compress_high_capital(M: CapitalTable, c: int, k: Dyadic) -> Compression:
    """Give every high-capital string a codeword ``c`` bits shorter than itself."""
    high = high_capital_set(M, k)
    book = CodeBook()
    mass = ZERO
    for s in high.strings:
        if len(s) - c < 0:
            return Compression(False, book, high, mass, s, f"{s!r} would need length {len(s) - c}")
        mass = mass + Dyadic(1, len(s) - c)
    for s in high.strings:
        if book.request(len(s) - c, s) is None:
            return Compression(False, book, high, mass, s, f"Kraft overflow at {s!r}")
    return Compression(True, book, high, mass)


# reference machines


@dataclass(frozen=True)
class ReferenceMachine:
    """A finite prefix-free machine given by its table ``codeword -> output``."""

    table: dict[str, str]
    name: str = "machine"

    def __post_init__(self):
        if not is_prefix_free(self.table):
            raise InvalidMachine("machine domain is not prefix-free")

    def shortest(self, nu: str) -> str:
        best = None
        for w, out in self.table.items():
            if out == nu and (best is None or (len(w), w) < (len(best), best)):
                best = w
        if best is None:
            raise NoDescription(f"no description of {nu!r}")
        return best

    def complexity(self, nu: str) -> Union[int, float]:
        try:
            return len(self.shortest(nu))
        except NoDescription:
            return math.inf

    def read(self, bits: str) -> Optional[tuple[str, str]]:
        """The domain element that is a prefix of ``bits``, with its output."""
        for i in range(len(bits) + 1):
            out = self.table.get(bits[:i])
            if out is not None:
                return bits[:i], out
        return None

    @classmethod
    def from_codebook(cls, book: CodeBook, name: str = "machine") -> "ReferenceMachine":
        return cls({w: p for p, w in book.assigned}, name)

    @classmethod
    def from_requests(cls, requests: Iterable[tuple[int, str]], name: str = "machine") -> "ReferenceMachine":
        book = CodeBook()
        for length, out in requests:
            if book.request(length, out) is None:
                raise InvalidMachine(f"requests exceed Kraft mass at {out!r}")
        return cls.from_codebook(book, name)

    @classmethod
    def self_delimiting(cls, depth: int) -> "ReferenceMachine":
        """``1^n 0 v`` describes ``v``; every description is longer than its output."""
        return cls({"1" * len(v) + "0" + v: v for v in strings_upto(depth)}, "self-delimiting")

    @classmethod
    def zero_runs(cls, depth: int) -> "ReferenceMachine":
        """Describes ``0^n`` in ``2*floor(log2(n+1)) + 1`` bits, nothing else."""
        reqs = [(2 * ((n + 1).bit_length() - 1) + 1, "0" * n) for n in range(depth + 1)]
        return cls.from_requests(reqs, "zero-runs")

    def to_json(self) -> dict:
        return {"name": self.name, "table": dict(self.table)}

    @classmethod
    def from_json(cls, obj: dict) -> "ReferenceMachine":
        return cls(dict(obj["table"]), obj.get("name", "machine"))


def ref_complexity(R: ReferenceMachine, nu: str) -> Union[int, float]:
    """Shortest description length of ``nu``; ``math.inf`` when there is none."""
    return R.complexity(nu)


def load_machine(path: str) -> ReferenceMachine:
    with open(path) as fh:
        return ReferenceMachine.from_json(json.load(fh))


# two-part preimage codes


def index_width(phi: ToyFunctional, d: int, nu: str) -> int:
    return phi.schedule(len(nu)) + d


def encode_preimage(phi: ToyFunctional, R: ReferenceMachine, d: int, mu: str) -> str:
    """Description of ``nu = phi(mu)`` followed by the index of ``mu`` in fixed width."""
    nu = phi(mu)
    if nu is None:
        raise IndexOverflow(f"{mu!r} is not in the domain of the functional")
    listing = restricted_enumeration(phi, d, nu)
    try:
        idx = listing.index(mu)
    except ValueError:
        raise IndexOverflow(f"{mu!r} is outside the restricted enumeration of {nu!r}") from None
    head = R.shortest(nu)
    width = index_width(phi, d, nu)
    return head + (format(idx, f"0{width}b") if width else "")


def decode_preimage(phi: ToyFunctional, R: ReferenceMachine, d: int, code: str) -> str:
    got = R.read(code)
    if got is None:
        raise NoDescription(f"no machine codeword is a prefix of {code!r}")
    head, nu = got
    width = index_width(phi, d, nu)
    field_bits = code[len(head):]
    if len(field_bits) != width:
        raise ValueError(f"index field has {len(field_bits)} bits, expected {width}")
    idx = int(field_bits, 2) if width else 0
    listing = restricted_enumeration(phi, d, nu)
    if idx >= len(listing):
        raise IndexOverflow(f"index {idx} beyond {len(listing)} enumerated preimages of {nu!r}")
    return listing[idx]
