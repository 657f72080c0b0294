"""Multi-indices, lexicographic ordering and flattening maps.

Multi-indices are 1-based (``1 <= k_r <= n_r``) as in the usual notation
for d-level matrices; linear indices are 0-based so they can address numpy
arrays directly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np


class MultiIndex(tuple):
    """Immutable d-dimensional integer index.

    Behaves like a tuple of ints, with componentwise arithmetic instead of
    tuple concatenation.

    Examples
    --------
    >>> MultiIndex((1, 2)) + MultiIndex((3, -1))
    MultiIndex(4, 1)
    """

    def __new__(cls, entries: Sequence[int] | int):
        if isinstance(entries, (int, np.integer)):
            entries = (int(entries),)
        entries = tuple(int(e) for e in entries)
        if len(entries) == 0:
            raise ValueError("a multi-index needs at least one entry")
        return super().__new__(cls, entries)

    @property
    def d(self) -> int:
        return len(self)

    def _check(self, other) -> "MultiIndex":
        other = other if isinstance(other, MultiIndex) else MultiIndex(other)
        if len(other) != len(self):
            raise ValueError(f"dimension mismatch: {len(self)} vs {len(other)}")
        return other

    def __add__(self, other):
        other = self._check(other)
        return MultiIndex(a + b for a, b in zip(self, other))

    def __sub__(self, other):
        other = self._check(other)
        return MultiIndex(a - b for a, b in zip(self, other))

    def __neg__(self):
        return MultiIndex(-a for a in self)

    def __abs__(self):
        return MultiIndex(abs(a) for a in self)

    def hadamard(self, other) -> "MultiIndex":
        other = self._check(other)
        return MultiIndex(a * b for a, b in zip(self, other))

    def is_zero(self) -> bool:
        return all(a == 0 for a in self)

    def __repr__(self) -> str:
        return f"MultiIndex{tuple(self)!r}".replace(",)", ")")


def lex_compare(i: Sequence[int], j: Sequence[int]) -> int:
    """Compare two multi-indices lexicographically.

    Returns -1, 0 or 1 for less, equal and greater. The first differing
    component decides.
    """
    if len(i) != len(j):
        raise ValueError(f"dimension mismatch: {len(i)} vs {len(j)}")
    for a, b in zip(i, j):
        if a < b:
            return -1
        if a > b:
            return 1
    return 0


def _positive_first(t: Sequence[int]) -> bool:
    for a in t:
        if a != 0:
            return a > 0
    return False


@dataclass(frozen=True)
class DirectionClass:
    """Sign pattern ``[t]_alpha`` of an offset, modulo global negation.

    ``representative`` is the "+" element (first nonzero entry positive);
    the class is ``{+representative, -representative}``.
    """

    representative: MultiIndex

    def __post_init__(self):
        rep = MultiIndex(self.representative)
        if rep.is_zero():
            raise ValueError("zero offset has no direction class")
        if not _positive_first(rep):
            rep = -rep
        object.__setattr__(self, "representative", rep)

    @property
    def plus(self) -> MultiIndex:
        return self.representative

    @property
    def minus(self) -> MultiIndex:
        return -self.representative

    @property
    def elements(self) -> tuple[MultiIndex, MultiIndex]:
        return (self.plus, self.minus)

    def sign_of(self, diff: Sequence[int]) -> int:
        """+1 or -1 if ``diff`` is the plus or minus element, 0 otherwise."""
        diff = tuple(diff)
        if diff == tuple(self.plus):
            return 1
        if diff == tuple(self.minus):
            return -1
        return 0

    def __contains__(self, diff) -> bool:
        return self.sign_of(diff) != 0


def directions_of(t: Sequence[int]) -> list[DirectionClass]:
    """All direction classes of a nonnegative, nonzero offset ``t``.

    There are ``2**(z-1)`` classes, ``z`` being the number of nonzero
    entries. They are returned ordered by their representatives' sign
    patterns, with the all-positive class first.
    """
    t = MultiIndex(t)
    if any(a < 0 for a in t):
        raise ValueError("offset must be componentwise nonnegative")
    if t.is_zero():
        raise ValueError("zero offset has no directions")
    nz = [r for r, a in enumerate(t) if a != 0]
    classes = []
    # the first nonzero entry keeps its sign, the others range over +-1
    for signs in itertools.product((1, -1), repeat=len(nz) - 1):
        e = list(t)
        for r, s in zip(nz[1:], signs):
            e[r] = s * e[r]
        classes.append(DirectionClass(MultiIndex(e)))
    return classes


@dataclass(frozen=True)
class IndexRange:
    """The box ``1 <= k <= n`` (componentwise), enumerated lexicographically."""

    n: MultiIndex

    def __post_init__(self):
        n = MultiIndex(self.n)
        if any(a < 1 for a in n):
            raise ValueError("range bounds must be >= 1")
        object.__setattr__(self, "n", n)

    @property
    def d(self) -> int:
        return len(self.n)

    @property
    def size(self) -> int:
        return int(np.prod(self.n))

    def __len__(self) -> int:
        return self.size

    def __iter__(self) -> Iterator[MultiIndex]:
        for k in itertools.product(*(range(1, a + 1) for a in self.n)):
            yield MultiIndex(k)

    def __contains__(self, k) -> bool:
        return len(k) == self.d and all(1 <= a <= b for a, b in zip(k, self.n))

    def all_indices(self) -> np.ndarray:
        """(size, d) array of all 1-based indices in lexicographic order."""
        grids = np.meshgrid(*(np.arange(1, a + 1) for a in self.n), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)


def flatten(k: Sequence[int], rng: IndexRange | Sequence[int]) -> int:
    """0-based linear position of the 1-based index ``k`` inside ``rng``."""
    rng = rng if isinstance(rng, IndexRange) else IndexRange(MultiIndex(rng))
    if k not in rng:
        raise IndexError(f"{tuple(k)} outside 1..{tuple(rng.n)}")
    return int(np.ravel_multi_index(tuple(a - 1 for a in k), tuple(rng.n)))


def unflatten(pos: int, rng: IndexRange | Sequence[int]) -> MultiIndex:
    """Inverse of :func:`flatten`."""
    rng = rng if isinstance(rng, IndexRange) else IndexRange(MultiIndex(rng))
    if not 0 <= pos < rng.size:
        raise IndexError(f"linear index {pos} outside 0..{rng.size - 1}")
    return MultiIndex(a + 1 for a in np.unravel_index(pos, tuple(rng.n)))


def flatten_diamond(k: Sequence[int], r: int, rng: IndexRange | Sequence[int], nu: int) -> int:
    """Linear index of node ``(k, r)`` (slot ``r`` in 1..nu) of a diamond graph."""
    if not 1 <= r <= nu:
        raise IndexError(f"slot {r} outside 1..{nu}")
    return flatten(k, rng) * nu + (r - 1)


def unflatten_diamond(pos: int, rng: IndexRange | Sequence[int], nu: int) -> tuple[MultiIndex, int]:
    q, r = divmod(pos, nu)
    return unflatten(q, rng), r + 1
