"""
Trees as points in BHV treespace.

A :class:`Tree` is a compatible set of interior splits with strictly positive
lengths, plus one nonnegative pendant length per leaf.  Interior lengths at or
below ``LENGTH_TOL`` are contracted away on construction, so a tree always
lies in the open face spanned by its own splits.

Trees are immutable after construction and safe to share read-only across
concurrent workers.
"""

from __future__ import annotations

import json
from functools import cached_property
from typing import Dict, Mapping, Sequence, Set, Tuple

import numpy as np

from .splits import (
    Split,
    all_pendant_splits,
    is_compatible_set,
    pendant_split,
    splits_compatible,
    universe,
)

__all__ = [
    "Tree",
    "SquaredPoint",
    "LENGTH_TOL",
    "common_edges",
    "squaring_map",
    "unsquare",
    "tree_to_json",
    "tree_from_json",
    "trees_close",
]

# Absolute tolerance below which an interior edge counts as contracted.
LENGTH_TOL = 1e-12


class Tree:
    """
    A phylogenetic tree with ``leaf_count`` labeled leaves.

    Parameters
    ----------
    interior : mapping Split -> float
        Interior edge lengths.  Pairs must be compatible; entries <= LENGTH_TOL
        are dropped.
    pendants : sequence of float, length ``leaf_count``
        Pendant edge lengths, one per leaf label, each >= 0.
    """

    __slots__ = ("interior", "pendants", "leaf_count", "_hash", "__dict__")

    def __init__(self, interior: Mapping[Split, float], pendants: Sequence[float]):
        pend = tuple(float(v) for v in pendants)
        leaf_count = len(pend)
        if leaf_count < 3:
            raise ValueError("a tree needs at least three leaves")
        if any(v < 0 for v in pend):
            raise ValueError("pendant lengths must be nonnegative")
        kept: Dict[Split, float] = {}
        for s, v in interior.items():
            if s.leaf_count != leaf_count:
                raise ValueError("split leaf count differs from pendant count")
            if not s.is_interior:
                raise ValueError(f"{s} is a pendant split; use the pendants array")
            v = float(v)
            if v < 0:
                raise ValueError(f"negative length {v} on {s}")
            if v > LENGTH_TOL:
                kept[s] = v
        if len(kept) > leaf_count - 3:
            raise ValueError(
                f"{len(kept)} interior splits exceeds the maximum "
                f"{leaf_count - 3} for {leaf_count} leaves"
            )
        if not is_compatible_set(kept):
            raise ValueError("interior splits are not pairwise compatible")
        self.interior: Dict[Split, float] = dict(
            sorted(kept.items(), key=lambda kv: kv[0].mask)
        )
        self.pendants = pend
        self.leaf_count = leaf_count
        self._hash = hash(
            (leaf_count, pend, tuple((s.mask, v) for s, v in self.interior.items()))
        )

    # -- identity ----------------------------------------------------------

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Tree)
            and self.leaf_count == other.leaf_count
            and self.pendants == other.pendants
            and self.interior == other.interior
        )

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        edges = ", ".join(f"{s}:{v:g}" for s, v in self.interior.items())
        return f"Tree({self.leaf_count} leaves; {edges or 'star'})"

    # -- views -------------------------------------------------------------

    @property
    def splits(self) -> Set[Split]:
        return set(self.interior)

    def length_of(self, split: Split) -> float:
        """Length of *split* in this tree (0.0 when absent), pendants included."""
        if split.is_pendant:
            return self.pendants[split.pendant_leaf]
        return self.interior.get(split, 0.0)

    @cached_property
    def _rep(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(interior split ids, interior lengths, pendant lengths) arrays."""
        uni = universe(self.leaf_count)
        ids = np.array([uni.intern(s) for s in self.interior], dtype=np.int64)
        lens = np.array(list(self.interior.values()), dtype=np.float64)
        return ids, lens, np.array(self.pendants, dtype=np.float64)

    # -- derived points ----------------------------------------------------

    def with_lengths(
        self, interior: Mapping[Split, float], pendants: Sequence[float] | None = None
    ) -> "Tree":
        return Tree(interior, self.pendants if pendants is None else pendants)


def common_edges(x: Tree, t: Tree) -> Set[Split]:
    """
    The common-edge set C of the pair: splits of either tree compatible with
    every split of the other, plus all pendant splits (pendants exist in every
    topology and always interpolate linearly).
    """
    if x.leaf_count != t.leaf_count:
        raise ValueError("trees have different leaf counts")
    out: Set[Split] = set(all_pendant_splits(x.leaf_count))
    for s in x.interior:
        if all(splits_compatible(s, u) for u in t.interior):
            out.add(s)
    for u in t.interior:
        if all(splits_compatible(u, s) for s in x.interior):
            out.add(u)
    return out


class SquaredPoint:
    """Image of a tree under coordinate-wise squaring (xi_e = x_e**2)."""

    __slots__ = ("coords", "leaf_count")

    def __init__(self, coords: Mapping[Split, float], leaf_count: int):
        for s, v in coords.items():
            if v < 0:
                raise ValueError(f"negative squared coordinate {v} on {s}")
        self.coords = dict(coords)
        self.leaf_count = leaf_count

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SquaredPoint)
            and self.leaf_count == other.leaf_count
            and self.coords == other.coords
        )


def squaring_map(t: Tree) -> SquaredPoint:
    """Square every coordinate (interior and pendant)."""
    coords: Dict[Split, float] = {s: v * v for s, v in t.interior.items()}
    for leaf, v in enumerate(t.pendants):
        coords[pendant_split(leaf, t.leaf_count)] = v * v
    return SquaredPoint(coords, t.leaf_count)


def unsquare(p: SquaredPoint) -> Tree:
    """Inverse of :func:`squaring_map`."""
    interior: Dict[Split, float] = {}
    pendants = [0.0] * p.leaf_count
    for s, v in p.coords.items():
        if v < 0:
            raise ValueError(f"negative squared coordinate {v} on {s}")
        if s.is_pendant:
            pendants[s.pendant_leaf] = float(np.sqrt(v))
        else:
            interior[s] = float(np.sqrt(v))
    return Tree(interior, pendants)


def trees_close(a: Tree, b: Tree, tol: float = 1e-9) -> bool:
    """Coordinate-wise closeness over the union of both trees' coordinates."""
    if a.leaf_count != b.leaf_count:
        return False
    for s in set(a.interior) | set(b.interior):
        if abs(a.length_of(s) - b.length_of(s)) > tol:
            return False
    return all(abs(u - v) <= tol for u, v in zip(a.pendants, b.pendants))


# -- JSON ------------------------------------------------------------------


def tree_to_json(t: Tree) -> str:
    doc = {
        "leaf_count": t.leaf_count,
        "interior": [
            {"zero_side": sorted(s.zero_side), "length": v}
            for s, v in t.interior.items()
        ],
        "pendants": list(t.pendants),
    }
    return json.dumps(doc)


def tree_from_json(text: str) -> Tree:
    doc = json.loads(text)
    leaf_count = int(doc["leaf_count"])
    interior = {
        Split(entry["zero_side"], leaf_count): float(entry["length"])
        for entry in doc["interior"]
    }
    return Tree(interior, [float(v) for v in doc["pendants"]])
