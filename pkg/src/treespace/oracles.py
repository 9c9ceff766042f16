"""
Independent numerical oracles used by the test and acceptance suites.

These deliberately avoid the code paths they validate: they depend only on
tree construction, :func:`frechet_value`, and (in tests) the brute-force
geodesic enumerator.  Geodesic points are evaluated here with a local copy of
the leg formula rather than through :func:`treespace.geodesics.point_at`.
Finite differences are central with one Richardson extrapolation step, so
their own error is well below the tolerances they arbitrate (which are kept
10x looser than library-vs-library checks).

Not part of the library API proper; pure functions throughout.
"""

from __future__ import annotations

import math
from typing import Dict, Optional, Sequence, Tuple

from .frechet import FrechetProblem, GradientView, frechet_value
from .geodesics import Geodesic
from .splits import Split, pendant_split
from .trees import Tree

__all__ = ["fd_gradient", "fd_directional", "geodesic_grid_min"]


def _with_coord(x: Tree, s: Split, value: float) -> Tree:
    if s.is_pendant:
        pend = list(x.pendants)
        pend[s.pendant_leaf] = value
        return Tree(x.interior, pend)
    interior = dict(x.interior)
    interior[s] = value
    return Tree(interior, x.pendants)


def fd_gradient(prob: FrechetProblem, x: Tree, h: Optional[float] = None) -> GradientView:
    """
    Central-difference gradient of F at x with Richardson extrapolation,
    step 1e-5 * (1 + |coordinate|) unless *h* is given.
    """
    partials: Dict[Split, float] = {}
    coords = list(x.interior) + [
        pendant_split(i, x.leaf_count) for i in range(x.leaf_count)
    ]
    for s in coords:
        v = x.length_of(s)
        if v <= 0.0:
            continue
        step = h if h is not None else 1e-5 * (1.0 + abs(v))
        step = min(step, 0.25 * v)  # keep both probes strictly positive

        def central(hh: float) -> float:
            fp = frechet_value(prob, _with_coord(x, s, v + hh))
            fm = frechet_value(prob, _with_coord(x, s, v - hh))
            return (fp - fm) / (2.0 * hh)

        d1 = central(step)
        d2 = central(step / 2.0)
        partials[s] = (4.0 * d2 - d1) / 3.0
    return GradientView(partials, x.leaf_count)


def fd_directional(
    prob: FrechetProblem,
    x: Tree,
    y: Tree,
    alphas: Sequence[float] = (1e-5,),
) -> float:
    """
    One-sided difference quotient of F along the straight segment from x
    toward y (valid when x's orthant is contained in y's), extrapolated to
    alpha -> 0 with the two-point rule 2 D(a/2) - D(a).
    """
    if not set(x.interior) <= set(y.interior):
        raise ValueError("orthant of x is not contained in orthant of y")
    f0 = frechet_value(prob, x)

    def at(alpha: float) -> Tree:
        interior = {}
        for s, v in y.interior.items():
            xv = x.interior.get(s, 0.0)
            nv = xv + alpha * (v - xv)
            if nv > 0.0:
                interior[s] = nv
        pend = [
            px + alpha * (py - px) for px, py in zip(x.pendants, y.pendants)
        ]
        return Tree(interior, pend)

    def quotient(alpha: float) -> float:
        return (frechet_value(prob, at(alpha)) - f0) / alpha

    estimates = []
    for alpha in alphas:
        estimates.append(2.0 * quotient(alpha / 2.0) - quotient(alpha))
    return sum(estimates) / len(estimates)


def _gamma_point(g: Geodesic, lam: float) -> Tree:
    # local copy of the three-case leg formula (independent of point_at)
    if lam <= 0.0:
        return g.x
    if lam >= 1.0:
        return g.t
    interior = {}
    for pair in g.support:
        na = math.sqrt(sum(g.x.length_of(s) ** 2 for s in pair.a))
        nb = math.sqrt(sum(g.t.length_of(s) ** 2 for s in pair.b))
        up = (1.0 - lam) * na - lam * nb
        if up > 0.0:
            for s in pair.a:
                interior[s] = up / na * g.x.length_of(s)
        down = lam * nb - (1.0 - lam) * na
        if down > 0.0:
            for s in pair.b:
                interior[s] = down / nb * g.t.length_of(s)
    for s in g.common:
        if s.is_pendant:
            continue
        v = (1.0 - lam) * g.x.length_of(s) + lam * g.t.length_of(s)
        if v > 0.0:
            interior[s] = v
    pend = [
        (1.0 - lam) * px + lam * pt for px, pt in zip(g.x.pendants, g.t.pendants)
    ]
    return Tree(interior, pend)


def geodesic_grid_min(
    prob: FrechetProblem, g: Geodesic, points: int = 65
) -> Tuple[float, float]:
    """
    Minimize F along the geodesic: coarse grid of *points* values of lambda
    to bracket the minimum (valid because F restricted to a geodesic is
    strictly convex), then golden-section refinement.  Returns (lambda*, F*).
    """
    if points < 3:
        raise ValueError("need at least 3 grid points")
    grid = [i / (points - 1) for i in range(points)]
    vals = [frechet_value(prob, _gamma_point(g, lam)) for lam in grid]
    i = min(range(points), key=vals.__getitem__)
    lo = grid[max(0, i - 1)]
    hi = grid[min(points - 1, i + 1)]

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc = frechet_value(prob, _gamma_point(g, c))
    fd = frechet_value(prob, _gamma_point(g, d))
    for _ in range(80):
        if b - a < 1e-13:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = frechet_value(prob, _gamma_point(g, c))
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = frechet_value(prob, _gamma_point(g, d))
    lam = (a + b) / 2.0
    return lam, frechet_value(prob, _gamma_point(g, lam))
