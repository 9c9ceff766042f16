"""
Splits (leaf-label bipartitions) and their compatibility combinatorics.

A split is stored as a bitmask over the label set {0..r}, always keeping the
side that contains label 0.  Bitmasks make equality/hashing O(1) and the
compatibility test a few word operations, which matters because compatibility
is the innermost loop of geodesic computation.

Instances of :class:`Split` and :class:`Orthant` are immutable and safe to
share between threads.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass
from typing import FrozenSet, Iterable

import numpy as np

__all__ = [
    "Split",
    "Orthant",
    "splits_compatible",
    "is_compatible_set",
    "enumerate_interior_splits",
    "pendant_split",
    "all_pendant_splits",
]


class Split:
    """
    A bipartition of the leaf labels {0..leaf_count-1}.

    The stored side (``zero_side``) always contains label 0; the other side is
    implicit.  Two splits are equal iff their zero sides are equal.  A split is
    *interior* when both sides have at least two labels; single-leaf sides give
    pendant splits, which are representable but flagged via ``is_pendant``.
    """

    __slots__ = ("mask", "leaf_count", "_hash")

    def __init__(self, zero_side: Iterable[int], leaf_count: int):
        if leaf_count < 2:
            raise ValueError("a split needs at least two leaf labels")
        full = (1 << leaf_count) - 1
        mask = 0
        for label in zero_side:
            if not 0 <= label < leaf_count:
                raise ValueError(f"label {label} outside 0..{leaf_count - 1}")
            mask |= 1 << label
        if not mask & 1:
            mask = full & ~mask  # store the side containing label 0
        if mask == full or mask == 0:
            raise ValueError("a split must have two nonempty sides")
        self.mask = mask
        self.leaf_count = leaf_count
        self._hash = hash((mask, leaf_count))

    @classmethod
    def _from_mask(cls, mask: int, leaf_count: int) -> "Split":
        s = object.__new__(cls)
        s.mask = mask
        s.leaf_count = leaf_count
        s._hash = hash((mask, leaf_count))
        return s

    @property
    def zero_side(self) -> FrozenSet[int]:
        return frozenset(i for i in range(self.leaf_count) if self.mask >> i & 1)

    @property
    def other_side(self) -> FrozenSet[int]:
        return frozenset(i for i in range(self.leaf_count) if not self.mask >> i & 1)

    @property
    def is_pendant(self) -> bool:
        n = self.mask.bit_count()
        return n == 1 or n == self.leaf_count - 1

    @property
    def is_interior(self) -> bool:
        return not self.is_pendant

    @property
    def pendant_leaf(self) -> int:
        """The single leaf cut off by a pendant split."""
        if not self.is_pendant:
            raise ValueError("not a pendant split")
        if self.mask.bit_count() == 1:
            return 0
        full = (1 << self.leaf_count) - 1
        return (full & ~self.mask).bit_length() - 1

    def compatible_with(self, other: "Split") -> bool:
        return splits_compatible(self, other)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Split)
            and self.mask == other.mask
            and self.leaf_count == other.leaf_count
        )

    def __hash__(self) -> int:
        return self._hash

    def __lt__(self, other: "Split") -> bool:
        return self.mask < other.mask

    def __repr__(self) -> str:
        zs = ",".join(map(str, sorted(self.zero_side)))
        os_ = ",".join(map(str, sorted(self.other_side)))
        return f"{{{zs}}}|{{{os_}}}"


def splits_compatible(a: Split, b: Split) -> bool:
    """
    True iff *a* and *b* can coexist in one tree.

    Two splits are compatible when one side of one nests inside a side of the
    other, equivalently when at least one of the four pairwise side
    intersections is empty.  The zero sides always share label 0, so only the
    three remaining intersections need testing.
    """
    if a.leaf_count != b.leaf_count:
        raise ValueError("splits are over different leaf sets")
    full = (1 << a.leaf_count) - 1
    am, bm = a.mask, b.mask
    return am & ~bm == 0 or bm & ~am == 0 or am | bm == full


def is_compatible_set(splits: Iterable[Split]) -> bool:
    """True iff every pair in *splits* is compatible (empty set included)."""
    items = list(splits)
    return all(splits_compatible(a, b) for a, b in itertools.combinations(items, 2))


def enumerate_interior_splits(r: int) -> list[Split]:
    """
    All interior splits of the label set {0..r}, in deterministic (bitmask)
    order.  There are 2**r - r - 2 of them.
    """
    if r < 3:
        raise ValueError("interior splits need r >= 3")
    leaf_count = r + 1
    out = []
    for rest in range(1, 1 << r):
        mask = 1 | rest << 1
        n = mask.bit_count()
        if 2 <= n <= r - 1:
            out.append(Split._from_mask(mask, leaf_count))
    return out


def pendant_split(leaf: int, leaf_count: int) -> Split:
    """The split cutting off the single leaf *leaf*."""
    if not 0 <= leaf < leaf_count:
        raise ValueError(f"leaf {leaf} outside 0..{leaf_count - 1}")
    full = (1 << leaf_count) - 1
    mask = 1 if leaf == 0 else full & ~(1 << leaf)
    return Split._from_mask(mask, leaf_count)


def all_pendant_splits(leaf_count: int) -> list[Split]:
    return [pendant_split(i, leaf_count) for i in range(leaf_count)]


@dataclass(frozen=True)
class Orthant:
    """
    The nonnegative coordinate cone spanned by a compatible set of interior
    splits.  Its dimension is the number of splits; pendant coordinates are
    implicit (they exist in every orthant).
    """

    edges: FrozenSet[Split]
    leaf_count: int

    def __post_init__(self):
        object.__setattr__(self, "edges", frozenset(self.edges))
        for s in self.edges:
            if s.leaf_count != self.leaf_count:
                raise ValueError("split leaf count differs from orthant leaf count")
            if s.is_pendant:
                raise ValueError("orthant edges must be interior splits")
        if not is_compatible_set(self.edges):
            raise ValueError("orthant edges must be pairwise compatible")

    @property
    def dimension(self) -> int:
        return len(self.edges)

    def __contains__(self, split: Split) -> bool:
        return split in self.edges


# ---------------------------------------------------------------------------
# Split interning.  A per-leaf-count universe assigns small integer ids to
# splits and maintains the pairwise compatibility table those ids index into.
# The numeric kernels work exclusively on ids + this table.
# ---------------------------------------------------------------------------


class SplitUniverse:
    """Grow-only registry of splits for one leaf count, with compat table."""

    def __init__(self, leaf_count: int):
        self.leaf_count = leaf_count
        self._ids: dict[int, int] = {}  # mask -> id
        self._masks: list[int] = []
        self._cap = 64
        self.compat = np.zeros((self._cap, self._cap), dtype=np.bool_)
        self._lock = threading.Lock()

    def intern(self, split: Split) -> int:
        sid = self._ids.get(split.mask)
        if sid is not None:
            return sid
        with self._lock:
            sid = self._ids.get(split.mask)
            if sid is not None:
                return sid
            sid = len(self._masks)
            if sid >= self._cap:
                self._cap *= 2
                table = np.zeros((self._cap, self._cap), dtype=np.bool_)
                table[:sid, :sid] = self.compat[:sid, :sid]
                self.compat = table
            full = (1 << self.leaf_count) - 1
            m = split.mask
            for j, other in enumerate(self._masks):
                ok = m & ~other == 0 or other & ~m == 0 or m | other == full
                self.compat[sid, j] = ok
                self.compat[j, sid] = ok
            self.compat[sid, sid] = True
            self._masks.append(m)
            self._ids[m] = sid
            return sid

    def split(self, sid: int) -> Split:
        return Split._from_mask(self._masks[sid], self.leaf_count)

    def __len__(self) -> int:
        return len(self._masks)


_universes: dict[int, SplitUniverse] = {}
_universes_lock = threading.Lock()


def universe(leaf_count: int) -> SplitUniverse:
    uni = _universes.get(leaf_count)
    if uni is None:
        with _universes_lock:
            uni = _universes.setdefault(leaf_count, SplitUniverse(leaf_count))
    return uni
