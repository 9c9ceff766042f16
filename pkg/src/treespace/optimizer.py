"""
Minimizing the Frechet function over a fixed closed orthant.

Three layers:

* damped Newton with an Armijo/curvature line search for the smooth interior
  problem, removing edges that collapse below epsilon (delta-epsilon stopping);
* a convex subproblem minimizing the directional derivative F'(Y, .) over the
  unit simplex of candidate new edges (projected subgradient with Polyak
  steps, refined by a pattern search) -- this is how descent into faces the
  gradient cannot see is detected;
* the recursive certificate: a chain Y^0 subset ... subset Y^k of simplex
  minimizers whose values f*_i = F'(Y^{i-1}, Y^i) are all nonnegative iff Y^0
  minimizes F over the closed orthant.  A negative value at the first level
  is a genuine descent direction; deeper negatives mean an earlier level was
  solved inaccurately and trigger a warm-started repair.

Only relative (single closed orthant) optimality is certified here; global
certification across all orthants is out of scope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np

from .frechet import (
    DirectionVector,
    FrechetProblem,
    apply_direction,
    directional_derivative,
    frechet_value,
    restricted_gradient,
    restricted_hessian,
)
from .splits import Orthant, Split, pendant_split, splits_compatible
from .trees import Tree

__all__ = [
    "NewtonConfig",
    "NewtonResult",
    "OptReport",
    "OptimalityCertificate",
    "ChainLevel",
    "SimplexResult",
    "LineSearchStall",
    "BudgetExceeded",
    "init_quadratic_minimizer",
    "newton_direction",
    "line_search",
    "damped_newton",
    "check_delta_eps_optimality",
    "minimize_dir_deriv_on_simplex",
    "minimize_in_closed_orthant",
    "certify_relative_optimality",
]


class LineSearchStall(RuntimeError):
    """No acceptable step length; the point is converged or on a support
    boundary pathology."""


class BudgetExceeded(RuntimeError):
    """Iteration budget exhausted before a certificate could be produced."""


@dataclass(frozen=True)
class NewtonConfig:
    """
    Tolerances and line-search constants.  delta bounds acceptable partial
    derivatives, epsilon is the edge-removal threshold, c0 damps steps that
    hit the orthant boundary, c1/c2 are the sufficient-decrease and curvature
    constants (0 < c1 < c2 < 1).
    """

    delta: float = 1e-8
    epsilon: float = 1e-9
    c0: float = 0.99
    c1: float = 1e-4
    c2: float = 0.9
    max_iters: int = 200

    def __post_init__(self):
        if not (0.0 < self.c1 < self.c2 < 1.0):
            raise ValueError("need 0 < c1 < c2 < 1")
        if not (0.0 < self.c0 < 1.0):
            raise ValueError("need 0 < c0 < 1")
        if self.delta <= 0 or self.epsilon <= 0:
            raise ValueError("delta and epsilon must be positive")


@dataclass
class NewtonResult:
    tree: Tree
    grad_norm: float
    iters: int
    converged: bool
    f_value: float


@dataclass
class OptReport:
    """Outcome of the delta-epsilon check; lists the violating edges."""

    ok: bool
    violations: List[Tuple[Split, float, float, int]]  # (split, len, partial, clause)


@dataclass
class LineSearchResult:
    alpha: float
    f_new: float
    curvature_ok: bool
    evals: int


@dataclass(frozen=True)
class ChainLevel:
    """One level of the certificate chain: the simplex minimizer above the
    previous level's face, its support, and its value."""

    point: Tree
    new_edges: FrozenSet[Split]
    f_star: float


@dataclass
class OptimalityCertificate:
    point: Tree
    chain: Tuple[ChainLevel, ...]
    verdict: str  # "optimal" | "descent"
    grad_norm: float
    iters: int
    descent: Optional[DirectionVector] = None
    descent_value: Optional[float] = None

    @property
    def is_optimal(self) -> bool:
        return self.verdict == "optimal"

    def to_json_dict(self) -> dict:
        doc = {
            "verdict": self.verdict,
            "chain": [
                {
                    "face": [sorted(s.zero_side) for s in sorted(level.new_edges)],
                    "f_star": level.f_star,
                }
                for level in self.chain
            ],
            "grad_norm": self.grad_norm,
            "iters": self.iters,
        }
        if self.descent is not None:
            doc["descent"] = {
                repr(s): v for s, v in sorted(self.descent.p.items())
            }
            doc["descent_value"] = self.descent_value
        return doc


# ---------------------------------------------------------------------------
# Interior Newton
# ---------------------------------------------------------------------------


def init_quadratic_minimizer(
    prob: FrechetProblem, orthant: Orthant
) -> Tuple[Tree, Dict[Split, Tuple[float, float]]]:
    """
    Minimizer of the quadratic part of F on the orthant: each coordinate is
    the arithmetic mean of that edge's lengths over the data (zero counts for
    absence).  Also returns the per-edge box [0, mean] that must contain the
    true minimizer, since the non-quadratic remainder has nonnegative
    gradient.
    """
    interior = {}
    box: Dict[Split, Tuple[float, float]] = {}
    for s in sorted(orthant.edges):
        mean = sum(t.length_of(s) for t in prob.data) / prob.n
        box[s] = (0.0, mean)
        if mean > 0.0:
            interior[s] = mean
    pendants = [
        sum(t.pendants[leaf] for t in prob.data) / prob.n
        for leaf in range(prob.leaf_count)
    ]
    for leaf in range(prob.leaf_count):
        box[pendant_split(leaf, prob.leaf_count)] = (0.0, pendants[leaf])
    return Tree(interior, pendants), box


def _coords(x: Tree) -> List[Split]:
    return list(x.interior) + [pendant_split(i, x.leaf_count) for i in range(x.leaf_count)]


def newton_direction(prob: FrechetProblem, x: Tree) -> DirectionVector:
    """
    Solve grad^2 F(x) p = -grad F(x) on x's positive coordinates.  Falls back
    to steepest descent when the Hessian is ill-conditioned (cond > 1e12).
    """
    grad = restricted_gradient(prob, x)
    hess = restricted_hessian(prob, x)
    coords = list(hess.coords)
    g = np.array([grad.get(s) for s in coords])
    H = hess.matrix
    use_newton = True
    try:
        if not np.all(np.isfinite(H)) or np.linalg.cond(H) > 1e12:
            use_newton = False
    except np.linalg.LinAlgError:
        use_newton = False
    if use_newton:
        p = np.linalg.solve(H, -g)
    else:
        p = -g
    return DirectionVector({s: float(v) for s, v in zip(coords, p) if v != 0.0})


def _max_feasible_step(x: Tree, p: DirectionVector) -> float:
    alpha0 = math.inf
    for s, v in p.p.items():
        if v < 0.0:
            cur = x.length_of(s)
            alpha0 = min(alpha0, cur / -v)
    return alpha0


def line_search(
    prob: FrechetProblem,
    x: Tree,
    p: DirectionVector,
    cfg: NewtonConfig,
    f0: Optional[float] = None,
    slope: Optional[float] = None,
) -> LineSearchResult:
    """
    Backtracking step along descent direction p.  The step is capped at
    c0 * alpha0 where alpha0 is the largest feasible step keeping every
    coordinate nonnegative; the returned step satisfies sufficient decrease
    F(x + a p) <= F(x) + c1 a grad.p.  The curvature condition
    grad(x + a p).p >= c2 grad.p is evaluated and reported, not enforced
    (it can be infeasible under the boundary cap).
    """
    if f0 is None:
        f0 = frechet_value(prob, x)
    if slope is None:
        slope = p.dot(restricted_gradient(prob, x))
    if slope >= 0.0:
        raise ValueError("line_search requires a descent direction")
    alpha0 = _max_feasible_step(x, p)
    cap = cfg.c0 * alpha0
    alpha = min(1.0, cap)
    evals = 0
    # Near the minimizer the true decrease falls below the float resolution
    # of F itself; without this floor the Armijo test backtracks into noise
    # and rejects perfectly good Newton steps.
    noise = 4.0 * np.finfo(float).eps * (1.0 + abs(f0))
    while True:
        trial = apply_direction(x, p, alpha)
        f_new = frechet_value(prob, trial)
        evals += 1
        if f_new <= f0 + cfg.c1 * alpha * slope + noise:
            break
        alpha *= 0.5
        if alpha < 1e-16:
            raise LineSearchStall(
                f"no step above 1e-16 gives sufficient decrease (slope {slope:.3e})"
            )
    curvature_ok = p.dot(restricted_gradient(prob, trial)) >= cfg.c2 * slope
    return LineSearchResult(alpha, f_new, curvature_ok, evals)


def check_delta_eps_optimality(
    prob: FrechetProblem, x: Tree, cfg: NewtonConfig
) -> Tuple[bool, OptReport]:
    """
    The delta-epsilon conditions on x's coordinates: long edges (> epsilon)
    need |partial| < delta; short edges need partial >= 0 or |partial| <
    delta.  Returns the verdict plus the violating edges.
    """
    grad = restricted_gradient(prob, x)
    violations = []
    for s in _coords(x):
        v = x.length_of(s)
        ge = grad.get(s)
        if v > cfg.epsilon:
            if abs(ge) >= cfg.delta:
                violations.append((s, v, ge, 1))
        else:
            if ge < 0.0 and abs(ge) >= cfg.delta:
                violations.append((s, v, ge, 2))
    return not violations, OptReport(not violations, violations)


def _drop_short_edges(x: Tree, eps: float) -> Tree:
    short = [s for s, v in x.interior.items() if v < eps]
    if not short:
        return x
    return Tree({s: v for s, v in x.interior.items() if v >= eps}, x.pendants)


def damped_newton(
    prob: FrechetProblem, orthant: Orthant, x0: Tree, cfg: NewtonConfig
) -> NewtonResult:
    """
    Interior-point loop on the face of *orthant* spanned by x0's edges:
    Newton direction, capped Armijo step, removal of edges shorter than
    epsilon, until the delta-epsilon conditions hold.  Returns the final
    point with a non-converged flag when the iteration budget runs out.
    """
    if not x0.splits <= set(orthant.edges):
        raise ValueError("x0 lies outside the given orthant")
    x = _drop_short_edges(x0, cfg.epsilon)
    iters = 0
    converged = False
    while iters < cfg.max_iters:
        ok, _ = check_delta_eps_optimality(prob, x, cfg)
        if ok:
            converged = True
            break
        grad = restricted_gradient(prob, x)
        p = newton_direction(prob, x)
        slope = p.dot(grad)
        if slope >= 0.0:
            p = DirectionVector({s: -grad.get(s) for s in _coords(x)})
            slope = p.dot(grad)
            if slope >= -1e-300:
                converged = True
                break
        try:
            ls = line_search(prob, x, p, cfg, slope=slope)
        except LineSearchStall:
            break
        x = _drop_short_edges(apply_direction(x, p, ls.alpha), cfg.epsilon)
        iters += 1
    grad = restricted_gradient(prob, x)
    if not converged:
        converged, _ = check_delta_eps_optimality(prob, x, cfg)
    return NewtonResult(x, grad.inf_norm(), iters, converged, frechet_value(prob, x))


# ---------------------------------------------------------------------------
# Directional-derivative minimization over the unit simplex
# ---------------------------------------------------------------------------


@dataclass
class SimplexResult:
    y_star: Tree
    f_star: float
    weights: Dict[Split, float]
    evals: int


def _project_simplex(w: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {w >= 0, sum w = 1}."""
    u = np.sort(w)[::-1]
    css = np.cumsum(u)
    rho = np.nonzero(u + (1.0 - css) / np.arange(1, len(w) + 1) > 0)[0][-1]
    theta = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(w - theta, 0.0)


def minimize_dir_deriv_on_simplex(
    prob: FrechetProblem,
    y_prev: Tree,
    new_edges: Set[Split],
    warm: Optional[Mapping[Split, float]] = None,
) -> SimplexResult:
    """
    Minimize the convex function F'(y_prev, y_prev + P) over the unit simplex
    on *new_edges* (P supported on the new edges only; existing coordinates
    are pinned).  Solved by projected subgradient with Polyak steps from the
    barycenter, refined by a pattern search over vertex pulls and pairwise
    mass transfers.  *warm* adds an extra starting point.
    """
    edges = sorted(new_edges)
    if not edges:
        raise ValueError("new_edges must be nonempty")
    for e in edges:
        if e in y_prev.interior:
            raise ValueError(f"{e} is already an edge of the base point")
        for s in y_prev.interior:
            if not splits_compatible(e, s):
                raise ValueError(f"{e} incompatible with base edge {s}")
    if not all(
        splits_compatible(a, b)
        for i, a in enumerate(edges)
        for b in edges[i + 1 :]
    ):
        raise ValueError("new_edges are not pairwise compatible")
    d = len(edges)
    evals = 0

    def tree_of(w: np.ndarray) -> Tree:
        interior = dict(y_prev.interior)
        for e, we in zip(edges, w):
            if we > 0.0:
                interior[e] = we
        return Tree(interior, y_prev.pendants)

    def phi(w: np.ndarray) -> float:
        nonlocal evals
        evals += 1
        return directional_derivative(prob, y_prev, tree_of(w))

    if d == 1:
        w = np.array([1.0])
        f = phi(w)
        return SimplexResult(tree_of(w), f, {edges[0]: 1.0}, evals)

    best_w = np.full(d, 1.0 / d)
    best_f = phi(best_w)
    for i in range(d):
        w = np.zeros(d)
        w[i] = 1.0
        f = phi(w)
        if f < best_f:
            best_f, best_w = f, w
    if warm:
        w = np.array([max(0.0, float(warm.get(e, 0.0))) for e in edges])
        if w.sum() > 0:
            w /= w.sum()
            f = phi(w)
            if f < best_f:
                best_f, best_w = f, w

    # Polyak subgradient phase (exact gradient in the open simplex).
    w = np.full(d, 1.0 / d)
    f_w = phi(w)
    for _ in range(40):
        g = _simplex_gradient(prob, y_prev, edges, w)
        gn2 = float(g @ g)
        if gn2 < 1e-24:
            break
        target = min(best_f, f_w) - max(0.05 * abs(best_f), 1e-4)
        step = (f_w - target) / gn2
        w = _project_simplex(w - step * g)
        f_w = phi(w)
        if f_w < best_f:
            best_f, best_w = f_w, w.copy()

    # Pattern search: vertex pulls and mass transfers with shrinking step.
    w = best_w.copy()
    s = 0.25
    while s > 1e-10:
        improved = False
        for j in range(d):
            cand = (1.0 - s) * w
            cand[j] += s
            f = phi(cand)
            if f < best_f - 1e-15:
                best_f, w = f, cand
                improved = True
        for i in range(d):
            if w[i] <= 0.0:
                continue
            for j in range(d):
                if i == j:
                    continue
                t = min(s, w[i])
                cand = w.copy()
                cand[i] -= t
                cand[j] += t
                f = phi(cand)
                if f < best_f - 1e-15:
                    best_f, w = f, cand
                    improved = True
        if not improved:
            s *= 0.5
    weights = {e: float(we) for e, we in zip(edges, w) if we > 1e-12}
    return SimplexResult(tree_of(w), best_f, weights, evals)


def _simplex_gradient(
    prob: FrechetProblem, y_prev: Tree, edges: Sequence[Split], w: np.ndarray
) -> np.ndarray:
    """
    Gradient of F'(y_prev, y_prev + P) in the simplex weights, valid where
    all weights are positive: per data tree, 2 p_e ||B_l|| / ||A_l||_P for an
    edge in a vanishing support pair, -2 |e|_{T^i} for an edge the tree
    shares.  Absent (zero-weight) edges get component 0.
    """
    import numpy as _np

    from .frechet import PROBE_ALPHA, _supports_for_arrays
    from .splits import universe

    uni = universe(y_prev.leaf_count)
    base_ids, base_lens, _ = y_prev._rep
    edge_ids = [uni.intern(e) for e in edges]
    pid_arr = _np.concatenate([base_ids, _np.array(edge_ids, dtype=_np.int64)])
    plen_arr = _np.concatenate([base_lens, PROBE_ALPHA * _np.asarray(w)])
    keep = plen_arr > 0.0
    pid_arr = pid_arr[keep]
    plen_arr = plen_arr[keep]
    supports = _supports_for_arrays(prob, pid_arr, plen_arr)
    id_to_edge = {sid: j for j, sid in enumerate(edge_ids)}
    g = np.zeros(len(edges))
    for t, sup in zip(prob.data, supports):
        a_idx, labels_a, _, _, k, com_ids, _, com_t, norm_a, norm_b = sup
        for c in range(len(com_ids)):
            j = id_to_edge.get(int(com_ids[c]))
            if j is not None and com_t[c] > 0.0:
                g[j] += -2.0 * com_t[c]
        # only pairs made purely of simplex edges vanish at y_prev and
        # contribute the norm-ratio term; mixed pairs have coefficient 0
        local = np.ones(k, dtype=bool)
        for i in range(len(a_idx)):
            if int(pid_arr[a_idx[i]]) not in id_to_edge:
                local[labels_a[i]] = False
        for i in range(len(a_idx)):
            l = labels_a[i]
            if not local[l]:
                continue
            j = id_to_edge[int(pid_arr[a_idx[i]])]
            g[j] += 2.0 * plen_arr[a_idx[i]] * norm_b[l] / norm_a[l]
    return g


# ---------------------------------------------------------------------------
# Closed-orthant minimization with certificate
# ---------------------------------------------------------------------------


def certify_relative_optimality(
    prob: FrechetProblem, x: Tree, orthant: Orthant, cfg: NewtonConfig
) -> OptimalityCertificate:
    """
    Build the recursive certificate at *x* for the closed orthant: first the
    gradient conditions on x's own face, then the chain of simplex minimizers
    over the still-missing edges.  Any negative first-level value is returned
    as a descent verdict with its direction; negatives at deeper levels mean
    an earlier simplex solve was inaccurate and are repaired by re-solving
    with the improving direction folded into the warm start.
    """
    if not x.splits <= set(orthant.edges):
        raise ValueError("x lies outside the given orthant")
    grad = restricted_gradient(prob, x)
    ok, report = check_delta_eps_optimality(prob, x, cfg)
    if not ok:
        p = newton_direction(prob, x)
        return OptimalityCertificate(
            point=x,
            chain=(),
            verdict="descent",
            grad_norm=grad.inf_norm(),
            iters=0,
            descent=p,
            descent_value=p.dot(grad),
        )

    warm_hints: List[Dict[Split, float]] = []
    for _ in range(cfg.max_iters):
        chain: List[ChainLevel] = []
        y_prev = x
        missing = set(orthant.edges) - x.splits
        repair = False
        while missing:
            level = len(chain)
            warm = warm_hints[level] if level < len(warm_hints) else None
            res = minimize_dir_deriv_on_simplex(prob, y_prev, missing, warm=warm)
            if res.f_star < -cfg.delta:
                if not chain:
                    direction = DirectionVector(res.weights)
                    return OptimalityCertificate(
                        point=x,
                        chain=(),
                        verdict="descent",
                        grad_norm=grad.inf_norm(),
                        iters=0,
                        descent=direction,
                        descent_value=res.f_star,
                    )
                # A deeper level found the previous simplex solution to be
                # improvable: fold the improving direction into the previous
                # level's warm start and rebuild the chain.
                prev = chain[-1]
                merged: Dict[Split, float] = {}
                for e in prev.new_edges:
                    merged[e] = prev.point.length_of(e)
                for e, we in res.weights.items():
                    merged[e] = merged.get(e, 0.0) + we
                warm_hints = warm_hints[: level - 1] + [merged]
                repair = True
                break
            chain.append(
                ChainLevel(res.y_star, frozenset(res.weights), res.f_star)
            )
            y_prev = res.y_star
            missing -= set(res.weights)
        if repair:
            continue
        return OptimalityCertificate(
            point=x,
            chain=tuple(chain),
            verdict="optimal",
            grad_norm=grad.inf_norm(),
            iters=0,
        )
    raise BudgetExceeded("certificate chain did not stabilize")


def minimize_in_closed_orthant(
    prob: FrechetProblem,
    orthant: Orthant,
    cfg: NewtonConfig,
    x0: Optional[Tree] = None,
) -> Tuple[Tree, OptimalityCertificate]:
    """
    Minimizer of F over the closure of *orthant*: alternate interior Newton
    on the current face with the certificate construction; whenever the
    certificate finds a descent direction into missing edges, take an
    Armijo step along it (the removal threshold shrinks to half the step so
    freshly added edges survive) and re-enter Newton on the expanded face.
    """
    if x0 is None:
        x0, _ = init_quadratic_minimizer(prob, orthant)
    import dataclasses

    eps_cur = cfg.epsilon
    x = x0
    total_iters = 0
    for _ in range(cfg.max_iters):
        run_cfg = cfg if eps_cur == cfg.epsilon else dataclasses.replace(
            cfg, epsilon=eps_cur
        )
        res = damped_newton(prob, orthant, x, run_cfg)
        x = res.tree
        total_iters += res.iters
        cert = certify_relative_optimality(prob, x, orthant, cfg)
        if cert.is_optimal:
            cert.iters = total_iters
            return x, cert
        if cert.descent_value is None or cert.descent is None:
            raise BudgetExceeded("descent verdict without a direction")
        f0 = frechet_value(prob, x)
        slope = cert.descent_value
        alpha = 1.0
        trial = None
        while alpha >= 1e-16:
            trial = apply_direction(x, cert.descent, alpha)
            if frechet_value(prob, trial) <= f0 + cfg.c1 * alpha * slope:
                break
            alpha *= 0.5
        else:
            raise BudgetExceeded("no acceptable step along certified descent")
        x = trial
        weights = list(cert.descent.p.values())
        if weights and all(v > 0.0 for v in weights):
            # simplex descent adds edges of size alpha * w; shrink the removal
            # threshold so they survive the next Newton pass
            eps_cur = min(cfg.epsilon, 0.5 * alpha * min(weights))
        total_iters += 1
    raise BudgetExceeded(f"no certificate within {cfg.max_iters} outer rounds")
