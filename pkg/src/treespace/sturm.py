"""
Split proximal-point iteration for the global Frechet mean.

Each step k picks one data tree T^{i_k} and solves the penalized problem
min_x d^2(x, T^{i_k}) + alpha_k d^2(x_{k-1}, x), whose solution lies on the
geodesic from x_{k-1} to T^{i_k} at proportion t = 1/(1 + alpha_k).  With the
default alpha_k = k this is the classical inductive mean (t_k = 1/(k+1)),
which converges globally to the Frechet mean on nonpositively curved spaces.

The iteration is strictly sequential; independent runs (different seeds) may
execute concurrently.  A fixed seed reproduces the iterate sequence bit for
bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from . import _kernels
from .frechet import FrechetProblem, frechet_value
from .trees import LENGTH_TOL, Tree
from .splits import universe

__all__ = ["ProximalSchedule", "SturmResult", "proximal_step", "global_mean"]


@dataclass(frozen=True)
class ProximalSchedule:
    """
    Index rule ('cyclic' or 'random' with a seed), penalty sequence alpha_k
    (default alpha_k = k), step budget, and the movement tolerance under
    which 2n consecutive quiet steps stop the run.
    """

    rule: str = "cyclic"
    seed: Optional[int] = None
    alpha: Optional[Callable[[int], float]] = None
    max_steps: int = 10**6
    tol: float = 1e-10

    def __post_init__(self):
        if self.rule not in ("cyclic", "random"):
            raise ValueError(f"unknown schedule rule {self.rule!r}")

    def step_length(self, k: int) -> float:
        """Proportion along the geodesic at step k (1-based)."""
        alpha = float(k) if self.alpha is None else float(self.alpha(k))
        t = 1.0 / (1.0 + alpha)
        return min(1.0, max(0.0, t))

    def indices(self, n: int, steps: int) -> np.ndarray:
        if self.rule == "cyclic":
            return np.arange(steps, dtype=np.int64) % n
        rng = np.random.default_rng(self.seed)
        return rng.integers(0, n, size=steps, dtype=np.int64)


@dataclass
class SturmResult:
    tree: Tree
    steps: int
    f_value: float
    trace: Optional[List[Tuple[int, float, float]]] = None  # (step, F, move)


def _tree_from_arrays(uni, ids, lens, pend) -> Tree:
    interior = {uni.split(int(i)): float(v) for i, v in zip(ids, lens) if v > LENGTH_TOL}
    return Tree(interior, [float(v) for v in pend])


def proximal_step(x_prev: Tree, t: Tree, alpha: float) -> Tree:
    """
    Solution of the single proximal subproblem: the point at proportion
    1/(1 + alpha) along the geodesic from x_prev to t.
    """
    if x_prev.leaf_count != t.leaf_count:
        raise ValueError("trees have different leaf counts")
    step = 1.0 / (1.0 + float(alpha))
    step = min(1.0, max(0.0, step))
    uni = universe(x_prev.leaf_count)
    x_ids, x_len, x_pend = x_prev._rep
    t_ids, t_len, t_pend = t._rep
    compat = uni.compat
    ids, lens, pend, _ = _kernels.geodesic_interp(
        compat, x_ids, x_len, x_pend, t_ids, t_len, t_pend, step
    )
    return _tree_from_arrays(uni, ids, lens, pend)


def global_mean(
    prob: FrechetProblem,
    sched: ProximalSchedule = ProximalSchedule(),
    start: Optional[Tree] = None,
    collect_trace: bool = False,
) -> SturmResult:
    """
    Iterate :func:`proximal_step` over the scheduled data indices.  Stops
    when the movement stays below sched.tol for 2n consecutive steps or the
    step budget runs out.  With collect_trace the per-step Frechet value and
    movement are recorded (slower: one extra F evaluation per step).
    """
    x0 = start if start is not None else prob.data[0]
    if x0.leaf_count != prob.leaf_count:
        raise ValueError("start tree has a different leaf count")
    uni = universe(prob.leaf_count)
    x_ids, x_len, x_pend = x0._rep
    reps = [t._rep for t in prob.data]
    max_e = max((r[0].shape[0] for r in reps), default=0)
    n = prob.n
    data_ids = np.zeros((n, max_e), dtype=np.int64)
    data_len = np.zeros((n, max_e), dtype=np.float64)
    data_ne = np.zeros(n, dtype=np.int64)
    data_pend = np.zeros((n, prob.leaf_count), dtype=np.float64)
    for i, (ids, lens, pend) in enumerate(reps):
        data_ne[i] = ids.shape[0]
        data_ids[i, : ids.shape[0]] = ids
        data_len[i, : lens.shape[0]] = lens
        data_pend[i] = pend
    compat = uni.compat
    steps = sched.max_steps
    order = sched.indices(n, steps)
    tsteps = np.array([sched.step_length(k) for k in range(1, steps + 1)])
    stall_needed = 2 * n

    if not collect_trace:
        ids, lens, pend, done = _kernels.sturm_loop(
            compat,
            data_ids,
            data_ne,
            data_len,
            data_pend,
            x_ids,
            x_len,
            x_pend,
            order,
            tsteps,
            sched.tol,
            stall_needed,
        )
        tree = _tree_from_arrays(uni, ids, lens, pend)
        return SturmResult(tree, int(done), frechet_value(prob, tree))

    trace: List[Tuple[int, float, float]] = []
    cur = (x_ids.copy(), x_len.copy(), x_pend.copy())
    stall = 0
    done = 0
    for s in range(steps):
        i = int(order[s])
        ne = int(data_ne[i])
        nids, nlens, npend, dist = _kernels.geodesic_interp(
            compat,
            cur[0],
            cur[1],
            cur[2],
            data_ids[i, :ne],
            data_len[i, :ne],
            data_pend[i],
            tsteps[s],
        )
        cur = (nids, nlens, npend)
        done = s + 1
        move = tsteps[s] * dist
        tree = _tree_from_arrays(uni, *cur)
        trace.append((done, frechet_value(prob, tree), float(move)))
        if move < sched.tol:
            stall += 1
            if stall >= stall_needed:
                break
        else:
            stall = 0
    tree = _tree_from_arrays(uni, *cur)
    return SturmResult(tree, done, frechet_value(prob, tree), trace)
