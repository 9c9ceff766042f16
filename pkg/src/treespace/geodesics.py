"""
Geodesics between points of treespace.

A geodesic between trees x and t is encoded by its support sequence: ordered
pairs (A_l, B_l) partitioning the mutually incompatible edges of the two
trees, telling which edges of x vanish before which edges of t appear.  A
support corresponds to a geodesic precisely when

  (P1) A_i is compatible with B_j for i > j,
  (P2) the ratios ||A_l||_x / ||B_l||_t are nondecreasing in l,
  (P3) no pair admits a compatible sub-partition with a strictly smaller
       leading ratio (equivalently: the minimum-weight vertex cover of the
       pair's incompatibility graph, with weights |e|^2/||A||^2 and
       |f|^2/||B||^2, has weight >= 1).

:func:`compute_geodesic` finds the support by successive refinement (split a
pair whenever its min cover drops below 1), which the kernels in
:mod:`treespace._kernels` implement.  :func:`brute_force_geodesic` is the
independent oracle: it enumerates every ordered paired partition directly.

All operations are pure functions of immutable inputs and safe to run in
parallel over many tree pairs.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from typing import FrozenSet, Iterable, Sequence, Set, Tuple

import numpy as np

from . import _kernels
from .splits import Split, all_pendant_splits, splits_compatible, universe
from .trees import Tree, common_edges

__all__ = [
    "SupportPair",
    "SupportSequence",
    "SupportClassification",
    "Geodesic",
    "compute_geodesic",
    "distance",
    "point_at",
    "leg_index",
    "validate_support",
    "brute_force_geodesic",
    "RATIO_EQ_TOL",
]

# Relative tolerance under which two support ratios count as equal; governs
# the FacetInterior / CellBoundary classification.
RATIO_EQ_TOL = 1e-10

# Pairs up to this size have (P3) checked by exhaustive sub-partition
# enumeration; larger pairs use the max-flow certificate.
P3_EXHAUSTIVE_LIMIT = 12


@dataclass(frozen=True)
class SupportPair:
    """One support pair: edges of x in *a*, edges of t in *b*."""

    a: FrozenSet[Split]
    b: FrozenSet[Split]

    def __post_init__(self):
        object.__setattr__(self, "a", frozenset(self.a))
        object.__setattr__(self, "b", frozenset(self.b))
        if not self.a or not self.b:
            raise ValueError("support pair sides must be nonempty")


class SupportSequence:
    """Ordered support pairs; the a-sets partition E_x \\ C, b-sets E_t \\ C."""

    __slots__ = ("pairs",)

    def __init__(self, pairs: Iterable[SupportPair]):
        self.pairs: Tuple[SupportPair, ...] = tuple(pairs)

    @property
    def k(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def __getitem__(self, i):
        return self.pairs[i]

    def __eq__(self, other) -> bool:
        return isinstance(other, SupportSequence) and self.pairs == other.pairs

    def __repr__(self) -> str:
        return f"SupportSequence({list(self.pairs)!r})"


class SupportClassification(Enum):
    FacetInterior = "facet_interior"  # every (P2)/(P3) inequality strict
    CellBoundary = "cell_boundary"  # valid, with at least one equality
    Invalid = "invalid"


def _norm(splits: Iterable[Split], tree: Tree) -> float:
    return math.sqrt(sum(tree.length_of(s) ** 2 for s in splits))


@dataclass(frozen=True)
class Geodesic:
    """A geodesic: endpoints, support sequence, common edges, and length."""

    x: Tree
    t: Tree
    support: SupportSequence
    common: FrozenSet[Split]
    length: float

    def ratios(self) -> list[float]:
        """||A_l||_x / ||B_l||_t per support pair."""
        return [
            _norm(p.a, self.x) / _norm(p.b, self.t) for p in self.support
        ]

    def to_json_dict(self) -> dict:
        def split_list(splits):
            return [sorted(s.zero_side) for s in sorted(splits)]

        return {
            "distance": self.length,
            "support": [
                {"A": split_list(p.a), "B": split_list(p.b)} for p in self.support
            ],
            "common": split_list(self.common),
        }


def _pathlength(
    x: Tree, t: Tree, pairs: Sequence[Tuple[Set[Split], Set[Split]]], common: Set[Split]
) -> float:
    total = 0.0
    for a, b in pairs:
        s = _norm(a, x) + _norm(b, t)
        total += s * s
    for c in common:
        total += (x.length_of(c) - t.length_of(c)) ** 2
    return math.sqrt(total)


def compute_geodesic(x: Tree, t: Tree) -> Geodesic:
    """
    The geodesic from *x* to *t*, computed by successive support refinement
    starting from the single cone pair.  Deterministic for fixed input.
    """
    if x.leaf_count != t.leaf_count:
        raise ValueError("trees have different leaf counts")
    uni = universe(x.leaf_count)
    x_ids, x_len, _ = x._rep
    t_ids, t_len, _ = t._rep
    compat = uni.compat  # grab after interning both trees
    (
        a_idx,
        labels_a,
        b_idx,
        labels_b,
        k,
        com_ids,
        com_x,
        com_t,
        norm_a,
        norm_b,
    ) = _kernels.geodesic_support(compat, x_ids, x_len, t_ids, t_len)

    x_splits = list(x.interior)
    t_splits = list(t.interior)
    pairs = []
    for l in range(k):
        a = frozenset(x_splits[a_idx[i]] for i in range(len(a_idx)) if labels_a[i] == l)
        b = frozenset(t_splits[b_idx[j]] for j in range(len(b_idx)) if labels_b[j] == l)
        pairs.append(SupportPair(a, b))
    common = frozenset(uni.split(int(i)) for i in com_ids) | frozenset(
        all_pendant_splits(x.leaf_count)
    )

    d2 = 0.0
    for l in range(k):
        s = norm_a[l] + norm_b[l]
        d2 += s * s
    for c in range(len(com_ids)):
        diff = com_x[c] - com_t[c]
        d2 += diff * diff
    for px, pt in zip(x.pendants, t.pendants):
        d2 += (px - pt) ** 2
    return Geodesic(x, t, SupportSequence(pairs), common, float(math.sqrt(d2)))


def distance(x: Tree, t: Tree) -> float:
    """Geodesic distance between *x* and *t*."""
    if x.leaf_count != t.leaf_count:
        raise ValueError("trees have different leaf counts")
    uni = universe(x.leaf_count)
    x_ids, x_len, x_pend = x._rep
    t_ids, t_len, t_pend = t._rep
    compat = uni.compat
    return float(
        _kernels.pair_distance(compat, x_ids, x_len, x_pend, t_ids, t_len, t_pend)
    )


def point_at(g: Geodesic, lam: float) -> Tree:
    """
    The tree at parameter *lam* on the geodesic.  Edges of A_l are present
    while (1-lam)||A_l|| > lam||B_l||, edges of B_l after; common edges
    interpolate linearly.  lam=0 and lam=1 return the endpoints exactly.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda {lam} outside [0, 1]")
    if lam == 0.0:
        return g.x
    if lam == 1.0:
        return g.t
    interior = {}
    for pair in g.support:
        na = _norm(pair.a, g.x)
        nb = _norm(pair.b, g.t)
        coeff_a = (1.0 - lam) * na - lam * nb
        if coeff_a > 0.0:
            for s in pair.a:
                interior[s] = coeff_a / na * g.x.length_of(s)
        coeff_b = lam * nb - (1.0 - lam) * na
        if coeff_b > 0.0:
            for s in pair.b:
                interior[s] = coeff_b / nb * g.t.length_of(s)
    for s in g.common:
        if s.is_pendant:
            continue
        v = (1.0 - lam) * g.x.length_of(s) + lam * g.t.length_of(s)
        if v > 0.0:
            interior[s] = v
    pendants = [
        (1.0 - lam) * px + lam * pt for px, pt in zip(g.x.pendants, g.t.pendants)
    ]
    return Tree(interior, pendants)


def leg_index(g: Geodesic, lam: float) -> int:
    """
    Index l in {0..k} of the geodesic leg containing parameter *lam*:
    lam/(1-lam) lies between the l-th and (l+1)-th support ratios.  At a
    boundary the lower leg wins.
    """
    if lam >= 1.0:
        return g.support.k
    if lam <= 0.0:
        return 0
    rho = lam / (1.0 - lam)
    return sum(1 for r in g.ratios() if r < rho)


# ---------------------------------------------------------------------------
# Support validation
# ---------------------------------------------------------------------------


def _p3_subsets(
    a: Sequence[Split],
    b: Sequence[Split],
    x: Tree,
    t: Tree,
) -> Tuple[bool, bool]:
    """
    Exhaustive (P3) scan of one pair.  Returns (valid, has_equality) over all
    nonempty I subset A, J subset B with I union J compatible, testing
    ||A\\I|| * ||B\\J|| >= ||I|| * ||J||.
    """
    a2 = [x.length_of(s) ** 2 for s in a]
    b2 = [t.length_of(s) ** 2 for s in b]
    has_eq = False
    for i_mask in range(1, 1 << len(a)):
        members_i = [a[i] for i in range(len(a)) if i_mask >> i & 1]
        wi = sum(a2[i] for i in range(len(a)) if i_mask >> i & 1)
        # complement sums are taken directly: subtracting from the total
        # cancels catastrophically when the subset dominates it
        wi_rest = sum(a2[i] for i in range(len(a)) if not i_mask >> i & 1)
        for j_mask in range(1, 1 << len(b)):
            members_j = [b[j] for j in range(len(b)) if j_mask >> j & 1]
            if not all(
                splits_compatible(si, sj)
                for si in members_i
                for sj in members_j
            ):
                continue
            wj = sum(b2[j] for j in range(len(b)) if j_mask >> j & 1)
            wj_rest = sum(b2[j] for j in range(len(b)) if not j_mask >> j & 1)
            lhs = math.sqrt(wi_rest * wj_rest)
            rhs = math.sqrt(wi * wj)
            scale = max(lhs, rhs, 1e-300)
            if lhs < rhs - RATIO_EQ_TOL * scale:
                return False, has_eq
            if abs(lhs - rhs) <= RATIO_EQ_TOL * scale:
                has_eq = True
    return True, has_eq


def _p3_maxflow(
    a: Sequence[Split], b: Sequence[Split], x: Tree, t: Tree
) -> Tuple[bool, bool]:
    """(P3) via the max-flow certificate, for pairs past the exhaustive limit."""
    na, nb = len(a), len(b)
    inc = np.empty((na, nb), dtype=np.bool_)
    for i, si in enumerate(a):
        for j, sj in enumerate(b):
            inc[i, j] = not splits_compatible(si, sj)
    wa = np.array([x.length_of(s) ** 2 for s in a])
    wb = np.array([t.length_of(s) ** 2 for s in b])
    wa = wa / wa.sum()
    wb = wb / wb.sum()
    weight, _, _ = _kernels.min_cover(inc, wa, wb)
    if weight < 1.0 - RATIO_EQ_TOL:
        return False, False
    # Valid.  An equality boundary means some *nontrivial* cover also reaches
    # weight 1: a cover omitting A-vertex i and B-vertex j exists iff forcing
    # the neighborhoods N(i) into the B side and N(j) into the A side still
    # yields total weight 1.
    for i in range(na):
        for j in range(nb):
            if inc[i, j]:
                continue
            forced_b = set(np.nonzero(inc[i])[0])
            forced_a = set(np.nonzero(inc[:, j])[0])
            if i in forced_a or j in forced_b:
                continue
            base = wa[list(forced_a)].sum() + wb[list(forced_b)].sum()
            if base > 1.0 + RATIO_EQ_TOL:
                continue
            rest_a = [p for p in range(na) if p != i and p not in forced_a]
            rest_b = [q for q in range(nb) if q != j and q not in forced_b]
            # the forced vertices cover every edge leaving the rest sets,
            # so only the induced subgraph still needs covering
            sub = inc[np.ix_(rest_a, rest_b)].copy() if rest_a and rest_b else np.zeros((0, 0), dtype=np.bool_)
            if sub.any():
                w2, _, _ = _kernels.min_cover(sub, wa[rest_a], wb[rest_b])
            else:
                w2 = 0.0
            if base + w2 <= 1.0 + RATIO_EQ_TOL:
                return True, True
    return True, False


def validate_support(x: Tree, t: Tree, s: SupportSequence) -> SupportClassification:
    """
    Classify a candidate support for the pair (x, t):

    * ``Invalid`` when (P1) fails or any (P2)/(P3) inequality fails,
    * ``FacetInterior`` when every (P2) and (P3) inequality holds strictly,
    * ``CellBoundary`` when all hold but at least one with equality.

    Raises ValueError when the pairs do not partition the incompatible edge
    sets of the two trees.
    """
    c = common_edges(x, t)
    a_all = x.splits - c
    b_all = t.splits - c
    seen_a: Set[Split] = set()
    seen_b: Set[Split] = set()
    for pair in s:
        if seen_a & pair.a or seen_b & pair.b:
            raise ValueError("support pairs overlap")
        seen_a |= pair.a
        seen_b |= pair.b
    if seen_a != a_all or seen_b != b_all:
        raise ValueError("support does not partition the incompatible edge sets")

    # (P1)
    for i in range(len(s)):
        for j in range(i):
            for si in s[i].a:
                for sj in s[j].b:
                    if not splits_compatible(si, sj):
                        return SupportClassification.Invalid

    has_eq = False
    ratios = [_norm(p.a, x) / _norm(p.b, t) for p in s]
    for r0, r1 in zip(ratios, ratios[1:]):
        scale = max(r0, r1, 1e-300)
        if abs(r0 - r1) <= RATIO_EQ_TOL * scale:
            has_eq = True
        elif r0 > r1:
            return SupportClassification.Invalid

    for pair in s:
        a = sorted(pair.a)
        b = sorted(pair.b)
        if len(a) + len(b) <= P3_EXHAUSTIVE_LIMIT:
            ok, eq = _p3_subsets(a, b, x, t)
        else:
            ok, eq = _p3_maxflow(a, b, x, t)
        if not ok:
            return SupportClassification.Invalid
        has_eq = has_eq or eq
    return (
        SupportClassification.CellBoundary
        if has_eq
        else SupportClassification.FacetInterior
    )


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------


def _ordered_partitions(items: Sequence, k: int):
    """All ways to split *items* into k ordered nonempty blocks."""
    n = len(items)
    if k > n:
        return
    for assignment in itertools.product(range(k), repeat=n):
        blocks = [tuple(items[i] for i in range(n) if assignment[i] == b) for b in range(k)]
        if all(blocks):
            # emit only canonical assignments: block b must first appear
            # before block b+1 does, to avoid duplicate unordered labelings
            yield [frozenset(b) for b in blocks]


def brute_force_geodesic(x: Tree, t: Tree, max_edges: int = 4) -> Geodesic:
    """
    Exhaustive-geodesic oracle: enumerate every ordered paired partition of
    the incompatible edge sets, check (P1)-(P3) directly, and return the
    shortest valid support.  Also verifies that the shortest valid support
    attains the minimum path length over all (P1)+(P2) path-space supports.
    Independent of the refinement algorithm in :func:`compute_geodesic`.
    """
    if x.leaf_count != t.leaf_count:
        raise ValueError("trees have different leaf counts")
    c = common_edges(x, t)
    a_all = sorted(x.splits - c)
    b_all = sorted(t.splits - c)
    if len(a_all) > max_edges or len(b_all) > max_edges:
        raise ValueError(
            f"{len(a_all)}x{len(b_all)} incompatible edges exceeds max_edges={max_edges}"
        )
    common = frozenset(c)
    if not a_all:
        length = _pathlength(x, t, [], common)
        return Geodesic(x, t, SupportSequence([]), common, length)

    compat_cache = {}

    def compat(si: Split, sj: Split) -> bool:
        key = (si.mask, sj.mask)
        hit = compat_cache.get(key)
        if hit is None:
            hit = splits_compatible(si, sj)
            compat_cache[key] = hit
        return hit

    def p1_ok(pa, pb) -> bool:
        for i in range(len(pa)):
            for j in range(i):
                for si in pa[i]:
                    for sj in pb[j]:
                        if not compat(si, sj):
                            return False
        return True

    def p2_ok(pa, pb) -> bool:
        ratios = [_norm(a, x) / _norm(b, t) for a, b in zip(pa, pb)]
        return all(r0 <= r1 + 1e-15 for r0, r1 in zip(ratios, ratios[1:]))

    def p3_ok(pa, pb) -> bool:
        for a, b in zip(pa, pb):
            ok, _ = _p3_subsets(sorted(a), sorted(b), x, t)
            if not ok:
                return False
        return True

    best_path = math.inf
    best_valid = math.inf
    best_support = None
    for k in range(1, min(len(a_all), len(b_all)) + 1):
        for pa in _ordered_partitions(a_all, k):
            for pb in _ordered_partitions(b_all, k):
                if not p1_ok(pa, pb):
                    continue
                if not p2_ok(pa, pb):
                    continue
                length = _pathlength(x, t, list(zip(pa, pb)), common)
                best_path = min(best_path, length)
                if length < best_valid and p3_ok(pa, pb):
                    best_valid = length
                    best_support = list(zip(pa, pb))
    if best_support is None:
        raise RuntimeError("no valid support found (oracle inconsistency)")
    if best_valid > best_path + 1e-9 * max(1.0, best_path):
        raise RuntimeError(
            "shortest valid support does not attain the path-space minimum"
        )
    support = SupportSequence(SupportPair(a, b) for a, b in best_support)
    return Geodesic(x, t, support, common, best_valid)
