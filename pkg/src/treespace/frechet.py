"""
The Frechet function F(X) = sum of squared geodesic distances to a fixed
sample of trees, with its full first- and second-order calculus:

* restricted gradient and restricted Hessian on the orthant containing X,
* one-sided directional derivatives F'(X, Y) toward any Y whose orthant
  contains X's (these exist even where the gradient does not),
* the parallel/perpendicular decomposition of F'(X, Y),
* the rate of change of F'(X, Y) as Y itself moves (the derivative used by
  the simplex optimality conditions).

Gradient conventions: every derivative here carries the factor 2 coming from
differentiating squared distances, so values match finite differences of F.

Supports entering the derivative formulas are taken at a probe point a small
step along the segment from X toward Y; near X that segment stays inside one
multi-vistal cell, so the probe realizes the cell without any symbolic cell
arithmetic.  Derivative values are independent of which valid support the
probe lands on.

Per-data-tree terms are independent; evaluation maps over the sample (thread
pool capped by TREESPACE_THREADS) and reduces in data order, so results are
reproducible.
"""

from __future__ import annotations

import math
import os
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

import numpy as np

from . import _kernels
from .geodesics import Geodesic, SupportPair, compute_geodesic
from .splits import Split, pendant_split, universe
from .trees import LENGTH_TOL, Tree

__all__ = [
    "FrechetProblem",
    "DirectionVector",
    "GradientView",
    "HessianView",
    "frechet_value",
    "restricted_gradient",
    "restricted_hessian",
    "directional_derivative",
    "decompose_direction",
    "dir_deriv_of_dir_deriv",
    "local_support_pairs",
    "apply_direction",
    "PROBE_ALPHA",
]

# Relative step to the probe point realizing the multi-vistal cell at X.
PROBE_ALPHA = 1e-7


class FrechetProblem:
    """A fixed sample T^1..T^n, with per-point geodesic-support caching."""

    def __init__(self, data: Iterable[Tree]):
        trees = tuple(data)
        if not trees:
            raise ValueError("need at least one data tree")
        leaf_count = trees[0].leaf_count
        if any(t.leaf_count != leaf_count for t in trees):
            raise ValueError("data trees have different leaf counts")
        self.data: Tuple[Tree, ...] = trees
        self.n = len(trees)
        self.leaf_count = leaf_count
        self._cache: "OrderedDict[Tree, list]" = OrderedDict()

    def __repr__(self) -> str:
        return f"FrechetProblem(n={self.n}, leaves={self.leaf_count})"

    # -- support plumbing ----------------------------------------------------

    def _supports_at(self, x: Tree, cache: bool = True) -> list:
        """Kernel support data for the geodesics from x to every data tree."""
        if cache:
            hit = self._cache.get(x)
            if hit is not None:
                self._cache.move_to_end(x)
                return hit
        uni = universe(self.leaf_count)
        x_ids, x_len, _ = x._rep
        reps = [t._rep for t in self.data]
        compat = uni.compat
        out = _map_data(
            lambda rep: _kernels.geodesic_support(compat, x_ids, x_len, rep[0], rep[1]),
            reps,
        )
        if cache:
            self._cache[x] = out
            while len(self._cache) > 16:
                self._cache.popitem(last=False)
        return out

    def geodesics(self, x: Tree) -> List[Geodesic]:
        return [compute_geodesic(x, t) for t in self.data]


def _map_data(fn, items):
    threads = int(os.environ.get("TREESPACE_THREADS", "1") or "1")
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class DirectionVector:
    """
    Per-coordinate displacement p_e = |e|_Y - |e|_X; splits absent from X
    carry p_e = |e|_Y >= 0.  Keys cover interior and pendant splits.
    """

    p: Mapping[Split, float]

    def __post_init__(self):
        object.__setattr__(self, "p", dict(self.p))

    def get(self, s: Split) -> float:
        return self.p.get(s, 0.0)

    def inf_norm(self) -> float:
        return max((abs(v) for v in self.p.values()), default=0.0)

    def dot(self, grad: "GradientView") -> float:
        return sum(v * grad.get(s) for s, v in self.p.items())


class GradientView:
    """Restricted gradient: partials on positive coordinates, 0 elsewhere."""

    __slots__ = ("partials", "leaf_count")

    def __init__(self, partials: Mapping[Split, float], leaf_count: int):
        self.partials = dict(partials)
        self.leaf_count = leaf_count

    def get(self, s: Split) -> float:
        return self.partials.get(s, 0.0)

    def pendant(self, leaf: int) -> float:
        return self.get(pendant_split(leaf, self.leaf_count))

    def inf_norm(self) -> float:
        return max((abs(v) for v in self.partials.values()), default=0.0)

    def __repr__(self) -> str:
        body = ", ".join(f"{s}:{v:.3g}" for s, v in self.partials.items())
        return f"GradientView({body})"


class HessianView:
    """Restricted Hessian as an ordered coordinate list plus dense matrix."""

    __slots__ = ("coords", "matrix", "__dict__")

    def __init__(self, coords: Sequence[Split], matrix: np.ndarray):
        self.coords = tuple(coords)
        self.matrix = matrix

    def entry(self, e: Split, f: Split) -> float:
        try:
            i = self.coords.index(e)
            j = self.coords.index(f)
        except ValueError:
            return 0.0
        return float(self.matrix[i, j])

    @cached_property
    def entries(self) -> Dict[Tuple[Split, Split], float]:
        out = {}
        for i, e in enumerate(self.coords):
            for j, f in enumerate(self.coords):
                out[(e, f)] = float(self.matrix[i, j])
        return out

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])


# ---------------------------------------------------------------------------
# Value, gradient, Hessian
# ---------------------------------------------------------------------------


def frechet_value(prob: FrechetProblem, x: Tree) -> float:
    """F(x) = sum of squared geodesic distances from x to the data trees."""
    supports = prob._supports_at(x)
    total = 0.0
    for t, sup in zip(prob.data, supports):
        total += _dist_sq_from_support(x, t, sup)
    return float(total)


def _dist_sq_from_support(x: Tree, t: Tree, sup) -> float:
    _, _, _, _, k, _, com_x, com_t, norm_a, norm_b = sup
    d2 = 0.0
    for l in range(k):
        s = norm_a[l] + norm_b[l]
        d2 += s * s
    d2 += float(np.sum((com_x - com_t) ** 2))
    for px, pt in zip(x.pendants, t.pendants):
        d2 += (px - pt) ** 2
    return d2


def restricted_gradient(prob: FrechetProblem, x: Tree) -> GradientView:
    """
    Partial derivatives of F on the coordinates of x:

      [grad F]_e = 2 sum_i { |e|_x (1 + ||B_l||/||A_l||)   e in A_l of tree i
                           { |e|_x - |e|_{T^i}             e common with tree i

    Entries for zero-length coordinates are 0 (and absent from the view).
    """
    supports = prob._supports_at(x)
    x_splits = list(x.interior)
    x_lens = list(x.interior.values())
    grad = np.zeros(len(x_splits))
    pend = np.zeros(x.leaf_count)
    for t, sup in zip(prob.data, supports):
        a_idx, labels_a, _, _, k, com_ids, com_x, com_t, norm_a, norm_b = sup
        for i in range(len(a_idx)):
            e = a_idx[i]
            l = labels_a[i]
            grad[e] += 2.0 * x_lens[e] * (1.0 + norm_b[l] / norm_a[l])
        xid_pos = {int(i): pos for pos, i in enumerate(x._rep[0])}
        for c in range(len(com_ids)):
            pos = xid_pos.get(int(com_ids[c]))
            if pos is not None:
                grad[pos] += 2.0 * (com_x[c] - com_t[c])
        for leaf in range(x.leaf_count):
            pend[leaf] += 2.0 * (x.pendants[leaf] - t.pendants[leaf])
    partials = {s: float(g) for s, g in zip(x_splits, grad)}
    for leaf in range(x.leaf_count):
        if x.pendants[leaf] > 0.0:
            partials[pendant_split(leaf, x.leaf_count)] = float(pend[leaf])
    return GradientView(partials, x.leaf_count)


def restricted_hessian(prob: FrechetProblem, x: Tree) -> HessianView:
    """
    Second-order partials of F on x's coordinates (times 2, summed over the
    sample).  For a support pair (A_l, B_l) of tree i, with norms at x and
    T^i respectively:

      d2/de2   = 1 + ||B||/||A|| - ||B|| x_e^2 / ||A||^3    e in A_l, |A_l|>1
      d2/de2   = 1                                          A_l = {e}
      d2/de2   = 1                                          e common
      d2/dedf  = -||B|| x_e x_f / ||A||^3                   e != f in A_l
    """
    supports = prob._supports_at(x)
    coords = _coords_of(x)
    m = len(coords)
    n_int = len(x.interior)
    x_lens = list(x.interior.values())
    H = np.zeros((m, m))
    xid_pos = {int(i): pos for pos, i in enumerate(x._rep[0])}
    for t, sup in zip(prob.data, supports):
        a_idx, labels_a, _, _, k, com_ids, com_x, com_t, norm_a, norm_b = sup
        members: List[List[int]] = [[] for _ in range(k)]
        for i in range(len(a_idx)):
            members[labels_a[i]].append(int(a_idx[i]))
        for l in range(k):
            na = norm_a[l]
            nb = norm_b[l]
            group = members[l]
            if len(group) == 1:
                e = group[0]
                H[e, e] += 2.0
                continue
            for e in group:
                xe = x_lens[e]
                H[e, e] += 2.0 * (1.0 + nb / na - nb * xe * xe / na**3)
                for f in group:
                    if f != e:
                        H[e, f] += -2.0 * nb * xe * x_lens[f] / na**3
        for c in range(len(com_ids)):
            pos = xid_pos.get(int(com_ids[c]))
            if pos is not None:
                H[pos, pos] += 2.0
        for leaf in range(x.leaf_count):
            H[n_int + leaf, n_int + leaf] += 2.0
    return HessianView(coords, H)


def _coords_of(x: Tree) -> List[Split]:
    return list(x.interior) + [pendant_split(i, x.leaf_count) for i in range(x.leaf_count)]


# ---------------------------------------------------------------------------
# Directional derivatives
# ---------------------------------------------------------------------------


def _require_nested(x: Tree, y: Tree):
    if x.leaf_count != y.leaf_count:
        raise ValueError("trees have different leaf counts")
    if not set(x.interior) <= set(y.interior):
        raise ValueError("orthant of x is not contained in orthant of y")


def _supports_for_arrays(prob: FrechetProblem, ids: np.ndarray, lens: np.ndarray):
    """
    Support data for geodesics from an id/length point to every data tree.
    Probe points go through here rather than through Tree, which would
    contract their legitimately tiny coordinates.
    """
    uni = universe(prob.leaf_count)
    reps = [t._rep for t in prob.data]
    compat = uni.compat
    return _map_data(
        lambda rep: _kernels.geodesic_support(compat, ids, lens, rep[0], rep[1]),
        reps,
    )


def directional_derivative(prob: FrechetProblem, x: Tree, y: Tree) -> float:
    """
    One-sided derivative of F at x along the segment toward y (which must
    satisfy O(x) subset-of O(y)).  Per data tree, with supports taken at a
    probe point a small step along the segment and norms ||A_l|| at x,
    ||B_l|| at T^i:

      2 sum_{e common} p_e (|e|_x - |e|_{T^i})
      + 2 sum_{l: ||A_l||_x > 0} sum_{e in A_l} p_e |e|_x (1 + ||B_l||/||A_l||_x)
      + 2 sum_{l: ||A_l||_x = 0} ||B_l|| sqrt(sum_{e in A_l} p_e^2)
    """
    _require_nested(x, y)
    y_ids, y_lens, _ = y._rep
    xval = {int(i): v for i, v in zip(x._rep[0], x._rep[1])}
    probe_lens = np.empty_like(y_lens)
    pbyid = {}
    for pos in range(len(y_ids)):
        sid = int(y_ids[pos])
        xv = xval.get(sid, 0.0)
        probe_lens[pos] = xv + PROBE_ALPHA * (y_lens[pos] - xv)
        pbyid[sid] = y_lens[pos] - xv
    supports = _supports_for_arrays(prob, y_ids, probe_lens)

    total = 0.0
    for t, sup in zip(prob.data, supports):
        a_idx, labels_a, _, _, k, com_ids, _, com_t, _, norm_b = sup
        # common coordinates (interior): 2 p_e (|e|_x - |e|_t)
        for c in range(len(com_ids)):
            sid = int(com_ids[c])
            pe = pbyid.get(sid)
            if pe:
                total += 2.0 * pe * (xval.get(sid, 0.0) - com_t[c])
        # support pairs, split by whether they vanish at x
        ax_sq = np.zeros(k)
        for i in range(len(a_idx)):
            sid = int(y_ids[a_idx[i]])
            xv = xval.get(sid, 0.0)
            ax_sq[labels_a[i]] += xv * xv
        for l in range(k):
            if ax_sq[l] > 0.0:
                nax = math.sqrt(ax_sq[l])
                for i in range(len(a_idx)):
                    if labels_a[i] != l:
                        continue
                    sid = int(y_ids[a_idx[i]])
                    xv = xval.get(sid, 0.0)
                    if xv > 0.0:
                        total += 2.0 * pbyid[sid] * xv * (1.0 + norm_b[l] / nax)
            else:
                p_sq = 0.0
                for i in range(len(a_idx)):
                    if labels_a[i] == l:
                        p_sq += pbyid[int(y_ids[a_idx[i]])] ** 2
                total += 2.0 * norm_b[l] * math.sqrt(p_sq)
        for leaf in range(x.leaf_count):
            pe = y.pendants[leaf] - x.pendants[leaf]
            if pe:
                total += 2.0 * pe * (x.pendants[leaf] - t.pendants[leaf])
    return float(total)


def decompose_direction(x: Tree, y: Tree) -> Tuple[Tree, Tree]:
    """
    Split y into its projection onto O(x) and onto the orthogonal space at x:
    y_parallel keeps y's values on x's coordinates and drops new edges;
    y_perp restores x's values on x's coordinates and keeps new edges.
    F'(x, y) = F'(x, y_parallel) + F'(x, y_perp).
    """
    _require_nested(x, y)
    parallel = Tree({s: y.interior[s] for s in x.interior}, y.pendants)
    perp_interior = {
        s: (x.interior[s] if s in x.interior else v) for s, v in y.interior.items()
    }
    perp = Tree(perp_interior, x.pendants)
    return parallel, perp


def dir_deriv_of_dir_deriv(
    prob: FrechetProblem, x: Tree, y: Tree, y_prime: Tree
) -> float:
    """
    Rate of change of F'(x, .) at y in the direction of y_prime, for nested
    orthants O(x) subset O(y) subset O(y_prime): the limit of
    (F'(x, y + a(y' - y)) - F'(x, y)) / a as a -> 0+.

    Assembled in closed form on the support structure that F'(x, .) itself is
    evaluated in (cells at x, realized by a probe from x toward a point just
    past y in the y' direction).  Per data tree, writing p = y - x and
    d = y' - y per coordinate:

      2 sum_{e common}            d_e (|e|_x - |e|_{T^i})
      2 sum_{l: ||A_l||_x > 0}    sum_e d_e |e|_x (1 + ||B_l||/||A_l||_x)
      2 sum_{l: ||A_l||_x = 0,
              ||A_l||_p > 0}      ||B_l|| (sum_e p_e d_e) / ||A_l||_p
      2 sum_{l: ||A_l||_p = 0}    ||B_l|| ||A_l||_d

    The gradient-of-F'(x, y) partials and the perpendicular term F'(y, .) of
    the decomposition are the per-coordinate and norm-growth pieces above; a
    new edge entering a support pair that already has y-positive members
    only changes F'(x, .) at second order.
    """
    _require_nested(x, y)
    _require_nested(y, y_prime)
    # Realize the cell of x toward "y, then slightly toward y_prime".
    yp_ids, yp_lens, _ = y_prime._rep
    xval = {int(i): v for i, v in zip(x._rep[0], x._rep[1])}
    yval = {int(i): y.interior.get(s, 0.0) for i, s in zip(yp_ids, y_prime.interior)}
    probe_lens = np.empty_like(yp_lens)
    pval = {}
    dval = {}
    for pos in range(len(yp_ids)):
        sid = int(yp_ids[pos])
        xv = xval.get(sid, 0.0)
        yv = yval[sid]
        mid = yv + PROBE_ALPHA * (yp_lens[pos] - yv)
        probe_lens[pos] = xv + PROBE_ALPHA * (mid - xv)
        pval[sid] = yv - xv
        dval[sid] = yp_lens[pos] - yv
    supports = _supports_for_arrays(prob, yp_ids, probe_lens)

    total = 0.0
    for t, sup in zip(prob.data, supports):
        a_idx, labels_a, _, _, k, com_ids, _, com_t, _, norm_b = sup
        for c in range(len(com_ids)):
            sid = int(com_ids[c])
            de = dval.get(sid)
            if de:
                total += 2.0 * de * (xval.get(sid, 0.0) - com_t[c])
        ax_sq = np.zeros(k)
        ap_sq = np.zeros(k)
        pd_dot = np.zeros(k)
        for i in range(len(a_idx)):
            sid = int(yp_ids[a_idx[i]])
            l = labels_a[i]
            xv = xval.get(sid, 0.0)
            ax_sq[l] += xv * xv
            ap_sq[l] += pval[sid] * pval[sid]
            pd_dot[l] += pval[sid] * dval[sid]
        for i in range(len(a_idx)):
            l = labels_a[i]
            if ax_sq[l] <= 0.0:
                continue
            sid = int(yp_ids[a_idx[i]])
            xv = xval.get(sid, 0.0)
            if xv > 0.0 and dval[sid]:
                total += (
                    2.0 * dval[sid] * xv * (1.0 + norm_b[l] / math.sqrt(ax_sq[l]))
                )
        for l in range(k):
            if ax_sq[l] > 0.0:
                continue
            if ap_sq[l] > 0.0:
                total += 2.0 * norm_b[l] * pd_dot[l] / math.sqrt(ap_sq[l])
            else:
                d_sq = 0.0
                for i in range(len(a_idx)):
                    if labels_a[i] == l:
                        d_sq += dval[int(yp_ids[a_idx[i]])] ** 2
                total += 2.0 * norm_b[l] * math.sqrt(d_sq)
        for leaf in range(x.leaf_count):
            dp = y_prime.pendants[leaf] - y.pendants[leaf]
            if dp:
                total += 2.0 * dp * (x.pendants[leaf] - t.pendants[leaf])
    return float(total)


def local_support_pairs(x: Tree, y: Tree, t: Tree) -> List[SupportPair]:
    """
    The leading support pairs of the geodesic from y to t whose A-side norm
    vanishes at x.  Their A-sets partition the edges of y incompatible with
    something in t but nothing in x, and their B-sets partition the edges of
    t incompatible with y but compatible with all of x.
    """
    _require_nested(x, y)
    g = compute_geodesic(y, t)
    out = []
    for pair in g.support:
        if all(s not in x.interior for s in pair.a):
            out.append(pair)
    return out


def apply_direction(x: Tree, d: DirectionVector, alpha: float) -> Tree:
    """The tree x + alpha * d, clipping float dust at the boundary to 0."""
    interior = dict(x.interior)
    pendants = list(x.pendants)
    for s, v in d.p.items():
        if s.is_pendant:
            leaf = s.pendant_leaf
            pendants[leaf] = max(0.0, pendants[leaf] + alpha * v)
        else:
            newv = interior.get(s, 0.0) + alpha * v
            if newv > LENGTH_TOL:
                interior[s] = newv
            else:
                interior.pop(s, None)
    return Tree(interior, pendants)
