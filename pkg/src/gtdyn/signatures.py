"""Signatures of U(N), interlacing, Gelfand-Tsetlin patterns and finite boxes.

A signature is stored as a plain tuple of ints (weakly decreasing, entries may
be negative). Helpers here validate, encode and enumerate them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from math import comb, prod
from typing import Iterable, Sequence

Signature = tuple[int, ...]
XConfig = tuple[int, ...]


def signature(parts: Iterable[int]) -> Signature:
    """Validate ``parts`` and return it as a signature tuple."""
    lam = tuple(int(p) for p in parts)
    if not lam:
        raise ValueError("a signature needs at least one part")
    if any(a < b for a, b in zip(lam, lam[1:])):
        raise ValueError(f"signature {lam} is not weakly decreasing")
    return lam


def format_signature(lam: Sequence[int]) -> str:
    return ",".join(str(int(p)) for p in lam)


def parse_signature(text: str) -> Signature:
    text = text.strip()
    if not text or " " in text:
        raise ValueError(f"bad signature encoding {text!r}")
    return signature(int(p) for p in text.split(","))


def size(lam: Sequence[int]) -> int:
    return sum(lam)


def shift(lam: Sequence[int], k: int) -> Signature:
    return tuple(p + k for p in lam)


def interlaces(mu: Sequence[int], lam: Sequence[int]) -> bool:
    """True iff ``mu`` interlaces ``lam`` (mu one part shorter, lam_1 >= mu_1 >= lam_2 ...)."""
    if len(lam) - len(mu) != 1:
        raise ValueError(
            f"interlacing needs lengths differing by one, got {len(mu)} and {len(lam)}"
        )
    return all(lam[i] >= mu[i] >= lam[i + 1] for i in range(len(mu)))


def to_xconfig(lam: Sequence[int]) -> XConfig:
    """Particle coordinates x_k = lam_{n-k+1} - n + k - 1, strictly increasing."""
    n = len(lam)
    return tuple(lam[n - k] - n + k - 1 for k in range(1, n + 1))


def from_xconfig(x: Sequence[int]) -> Signature:
    n = len(x)
    if any(a >= b for a, b in zip(x, x[1:])):
        raise ValueError(f"configuration {tuple(x)} is not strictly increasing")
    # inverse of x_k = lam_{n-k+1} - n + k - 1 with j = n - k + 1
    return tuple(x[n - j] + j for j in range(1, n + 1))


def xconfig_interlaces(y: Sequence[int], x: Sequence[int]) -> bool:
    """x_1 < y_1 <= x_2 < y_2 <= ... <= x_n, the coordinate form of interlacing."""
    if len(x) - len(y) != 1:
        raise ValueError("interlacing needs lengths differing by one")
    return all(x[k] < y[k] <= x[k + 1] for k in range(len(y)))


def enumerate_interlacing(lam: Sequence[int]) -> list[Signature]:
    """All mu of length N-1 with mu interlacing lam, in lexicographic-descending order."""
    if len(lam) < 2:
        raise ValueError("enumerate_interlacing needs a signature of length >= 2")
    ranges = [range(lam[i], lam[i + 1] - 1, -1) for i in range(len(lam) - 1)]
    return [tuple(mu) for mu in product(*ranges)]


def interlacing_count(lam: Sequence[int]) -> int:
    return prod(lam[i] - lam[i + 1] + 1 for i in range(len(lam) - 1))


def enumerate_range(n: int, lo: int, hi: int) -> list[Signature]:
    """Signatures of length n with all parts in [lo, hi], lexicographic descending."""
    out: list[Signature] = []

    def rec(prefix: list[int], top: int) -> None:
        if len(prefix) == n:
            out.append(tuple(prefix))
            return
        for v in range(top, lo - 1, -1):
            prefix.append(v)
            rec(prefix, v)
            prefix.pop()

    rec([], hi)
    return out


@dataclass(frozen=True)
class SignatureBox:
    """All signatures of length ``N`` with parts in ``[lo, hi]``.

    ``states`` is in lexicographic-descending order, which fixes matrix indices.
    """

    N: int
    lo: int
    hi: int
    states: tuple[Signature, ...] = field(repr=False, compare=False)
    _index: dict = field(repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.states)

    def __iter__(self):
        return iter(self.states)

    def __contains__(self, lam) -> bool:
        return tuple(lam) in self._index

    def index(self, lam: Sequence[int]) -> int:
        try:
            return self._index[tuple(lam)]
        except KeyError:
            raise KeyError(f"{tuple(lam)} is outside box N={self.N} [{self.lo},{self.hi}]")

    def inner(self, margin_lo: int, margin_hi: int) -> list[Signature]:
        """States whose parts stay ``margin_lo`` above lo and ``margin_hi`` below hi."""
        return [
            s for s in self.states if s[-1] >= self.lo + margin_lo and s[0] <= self.hi - margin_hi
        ]


def enumerate_box(N: int, lo: int, hi: int) -> SignatureBox:
    if N < 1:
        raise ValueError("box level must be >= 1")
    if lo > hi:
        raise ValueError(f"empty box: lo={lo} > hi={hi}")
    states = tuple(enumerate_range(N, lo, hi))
    assert len(states) == comb(hi - lo + N, N)
    return SignatureBox(N, lo, hi, states, {s: i for i, s in enumerate(states)})


@dataclass(frozen=True)
class GTPattern:
    """Interlacing tower lambda^(1) < ... < lambda^(N); ``levels[n-1]`` has length n."""

    levels: tuple[Signature, ...]

    def __post_init__(self):
        levels = tuple(signature(lv) for lv in self.levels)
        object.__setattr__(self, "levels", levels)
        for n, lv in enumerate(levels, start=1):
            if len(lv) != n:
                raise ValueError(f"level {n} has length {len(lv)}")
        for lower, upper in zip(levels, levels[1:]):
            if not interlaces(lower, upper):
                raise ValueError(f"{lower} does not interlace {upper}")

    @property
    def depth(self) -> int:
        return len(self.levels)

    @property
    def top(self) -> Signature:
        return self.levels[-1]

    def to_lists(self) -> list[list[int]]:
        return [list(lv) for lv in self.levels]

    @classmethod
    def constant(cls, N: int, value: int = 0) -> "GTPattern":
        return cls(tuple((value,) * n for n in range(1, N + 1)))


def enumerate_patterns(top: Sequence[int]) -> list[GTPattern]:
    """Every Gelfand-Tsetlin pattern with the given top row."""
    top = signature(top)

    def rec(lam: Signature) -> list[list[Signature]]:
        if len(lam) == 1:
            return [[lam]]
        return [chain + [lam] for mu in enumerate_interlacing(lam) for chain in rec(mu)]

    return [GTPattern(tuple(chain)) for chain in rec(top)]
