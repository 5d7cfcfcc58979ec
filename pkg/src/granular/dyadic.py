"""Exact nonnegative dyadic rationals and binary-string helpers.

A :class:`Dyadic` is ``num * 2**-exp`` with ``num >= 0`` and ``exp >= 0``.
Every capital value in this package is a Dyadic, so comparisons are exact
and equality is structural.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterator, Union

from .errors import NegativeCapital

IntLike = Union[int, "Dyadic"]


def _new(num: int, exp: int) -> "Dyadic":
    # canonicalize: strip common factors of two between num and 2**exp
    if num == 0:
        exp = 0
    elif exp and not num & 1:
        shift = min((num & -num).bit_length() - 1, exp)
        num >>= shift
        exp -= shift
    self = object.__new__(Dyadic)
    self.num = num
    self.exp = exp
    return self


class Dyadic:
    """Nonnegative rational with a power-of-two denominator.

    Canonical form: ``num`` is odd unless ``exp == 0``; zero is ``(0, 0)``.
    """

    __slots__ = ("num", "exp")

    num: int
    exp: int

    def __new__(cls, num: int = 0, exp: int = 0) -> "Dyadic":
        if num < 0:
            raise NegativeCapital(f"negative capital: {num}/2^{exp}")
        if exp < 0:
            return _new(num << -exp, 0)
        return _new(num, exp)

    @classmethod
    def pow2(cls, k: int) -> "Dyadic":
        """Return ``2**k`` for any integer ``k``."""
        return _new(1 << k, 0) if k >= 0 else _new(1, -k)

    @classmethod
    def from_fraction(cls, value: Union[Fraction, int, str]) -> "Dyadic":
        q = Fraction(value)
        if q < 0:
            raise NegativeCapital(f"negative capital: {q}")
        den = q.denominator
        if den & (den - 1):
            raise ValueError(f"{q} is not a dyadic rational")
        return _new(q.numerator, den.bit_length() - 1)

    @classmethod
    def parse(cls, text: str) -> "Dyadic":
        """Parse ``"3/4"``, ``"0.75"`` or ``"2"``."""
        return cls.from_fraction(Fraction(text.strip()))

    # conversions

    def to_fraction(self) -> Fraction:
        return Fraction(self.num, 1 << self.exp)

    def __float__(self) -> float:
        return self.num / (1 << self.exp)

    def to_json(self) -> dict:
        return {"num": str(self.num), "exp": self.exp}

    @classmethod
    def from_json(cls, obj: Union[dict, str, int]) -> "Dyadic":
        """Accepts ``{"num", "exp"}``, a string like ``"3/4"`` or ``"0.75"``, or an int."""
        if isinstance(obj, dict):
            return cls(int(obj["num"]), int(obj["exp"]))
        if isinstance(obj, bool):
            raise TypeError("booleans are not dyadic values")
        if isinstance(obj, int):
            return cls(obj)
        return cls.parse(obj)

    # granularity

    def is_multiple_of_pow2(self, j: int) -> bool:
        """True iff the value is an integer multiple of ``2**-j``."""
        if j >= 0:
            return self.exp <= j
        return self.exp == 0 and self.num % (1 << -j) == 0

    def units(self, j: int) -> int:
        """The integer ``value * 2**j``; requires granularity ``2**-j``."""
        if self.exp > j:
            raise ValueError(f"{self} is not a multiple of 2^-{j}")
        return self.num << (j - self.exp)

    def scale_pow2(self, k: int) -> "Dyadic":
        """Return ``value * 2**k``."""
        if k >= 0:
            if self.exp >= k:
                return _new(self.num, self.exp - k)
            return _new(self.num << (k - self.exp), 0)
        return _new(self.num, self.exp - k)

    # arithmetic

    def __add__(self, other: IntLike) -> "Dyadic":
        if isinstance(other, int):
            if other < 0:
                return self - (-other)
            return _new(self.num + (other << self.exp), self.exp)
        if not isinstance(other, Dyadic):
            return NotImplemented
        a, ea, b, eb = self.num, self.exp, other.num, other.exp
        if ea >= eb:
            return _new(a + (b << (ea - eb)), ea)
        return _new((a << (eb - ea)) + b, eb)

    __radd__ = __add__

    def __sub__(self, other: IntLike) -> "Dyadic":
        if isinstance(other, int):
            other = _new(other, 0) if other >= 0 else None
            if other is None:
                return NotImplemented
        if not isinstance(other, Dyadic):
            return NotImplemented
        a, ea, b, eb = self.num, self.exp, other.num, other.exp
        if ea >= eb:
            n, e = a - (b << (ea - eb)), ea
        else:
            n, e = (a << (eb - ea)) - b, eb
        if n < 0:
            raise NegativeCapital(f"negative capital: {self} - {other}")
        return _new(n, e)

    def __rsub__(self, other: int) -> "Dyadic":
        if not isinstance(other, int) or other < 0:
            return NotImplemented
        return _new(other, 0) - self

    def __mul__(self, other: int) -> "Dyadic":
        if not isinstance(other, int):
            if isinstance(other, Dyadic):
                return _new(self.num * other.num, self.exp + other.exp)
            return NotImplemented
        if other < 0:
            raise NegativeCapital(f"negative capital: {self} * {other}")
        return _new(self.num * other, self.exp)

    __rmul__ = __mul__

    # ordering

    def _cmp(self, other: IntLike) -> int:
        if isinstance(other, int):
            a, b = self.num, other << self.exp
        elif isinstance(other, Dyadic):
            ea, eb = self.exp, other.exp
            if ea >= eb:
                a, b = self.num, other.num << (ea - eb)
            else:
                a, b = self.num << (eb - ea), other.num
        else:
            raise TypeError(f"cannot compare Dyadic with {type(other).__name__}")
        return (a > b) - (a < b)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Dyadic):
            return self.num == other.num and self.exp == other.exp
        if isinstance(other, int):
            return self.exp == 0 and self.num == other
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self.num, self.exp))

    def __lt__(self, other: IntLike) -> bool:
        return self._cmp(other) < 0

    def __le__(self, other: IntLike) -> bool:
        return self._cmp(other) <= 0

    def __gt__(self, other: IntLike) -> bool:
        return self._cmp(other) > 0

    def __ge__(self, other: IntLike) -> bool:
        return self._cmp(other) >= 0

    def __bool__(self) -> bool:
        return self.num != 0

    def __repr__(self) -> str:
        return f"Dyadic({self})"

    def __str__(self) -> str:
        if self.exp == 0:
            return str(self.num)
        return f"{self.num}/{1 << self.exp}"

    def __reduce__(self):
        return (Dyadic, (self.num, self.exp))


ZERO = Dyadic(0)
ONE = Dyadic(1)


def compare(a: IntLike, b: IntLike) -> int:
    """Three-way comparison: -1, 0 or 1."""
    if isinstance(a, int):
        a = Dyadic(a)
    return a._cmp(b)


def floor_multiple(q: Dyadic, p: Dyadic) -> Dyadic:
    """Largest integer multiple of ``p`` strictly below ``q`` (0 when q is 0).

    ``p`` must be ``2**-j`` for some ``j >= 0``.
    """
    if p.num != 1:
        raise ValueError(f"step must be a power of two at most 1, got {p}")
    j = p.exp
    if not q:
        return ZERO
    if q.exp <= j:
        # q is itself a multiple: step strictly below it
        return Dyadic(q.units(j) - 1, j)
    return Dyadic(q.num >> (q.exp - j), j)


# binary strings are plain str over "01"; "" is the empty string


def is_bits(s: str) -> bool:
    return all(ch in "01" for ch in s)


def strings_of_length(n: int) -> Iterator[str]:
    """All strings of length ``n`` in lexicographic order."""
    if n == 0:
        yield ""
        return
    for i in range(1 << n):
        yield format(i, f"0{n}b")


def strings_upto(depth: int) -> Iterator[str]:
    """All strings of length at most ``depth``, by length then lexicographically."""
    for n in range(depth + 1):
        yield from strings_of_length(n)


def extensions(base: str, depth: int) -> Iterator[str]:
    """Strings extending ``base`` (inclusive) of length at most ``depth``."""
    for k in range(depth - len(base) + 1):
        for tail in strings_of_length(k):
            yield base + tail


def length_lex_key(s: str) -> tuple[int, str]:
    return (len(s), s)


def prefixes(s: str) -> Iterator[str]:
    """``"", s[:1], ..., s``."""
    for i in range(len(s) + 1):
        yield s[:i]


def is_prefix_free(words) -> bool:
    """Pairwise prefix-incomparability by sorting (a prefix sorts just before its extensions)."""
    ws = sorted(words)
    for a, b in zip(ws, ws[1:]):
        if b.startswith(a):
            return False
    return True
