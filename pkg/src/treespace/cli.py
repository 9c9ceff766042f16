"""
Command-line front end: distances, geodesic points, Frechet means, and
relative-optimality verification over Newick files.

Multi-tree files hold one Newick string per line; lines starting with '#'
are comments.  Exit codes are a stable contract: 0 success (or verified
optimal), 1 non-optimal verdict from `verify`, 2 usage or data errors.
All randomized behavior is reproducible from --seed.

Mean algorithms:
  sturm    split proximal-point iteration only (global, slow tail)
  orthant  quadratic initialization + closed-orthant Newton in the orthant
           spanned by the dominant data splits
  hybrid   sturm warmup to locate the orthant, then certified orthant
           minimization with cross-orthant descent probes over the orthants
           spanned by data splits (the mean's splits always lie there)

`verify` enumerates the maximal orthants containing the candidate (capped;
degenerate candidates near the star have combinatorially many) and runs the
certificate in each.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .frechet import DirectionVector, FrechetProblem, frechet_value
from .geodesics import compute_geodesic, point_at
from .newick import NewickError, parse_newick, write_newick
from .optimizer import (
    BudgetExceeded,
    NewtonConfig,
    OptimalityCertificate,
    apply_direction,
    certify_relative_optimality,
    init_quadratic_minimizer,
    minimize_dir_deriv_on_simplex,
    minimize_in_closed_orthant,
)
from .splits import Orthant, Split, enumerate_interior_splits, splits_compatible
from .sturm import ProximalSchedule, global_mean
from .trees import Tree

__all__ = ["main", "compute_mean", "verify_candidate", "load_trees"]

SCHEMA = 1
VERIFY_ORTHANT_CAP = 4096


def load_trees(path: str) -> List[Tree]:
    trees = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            trees.append(parse_newick(line))
    if not trees:
        raise NewickError(f"no trees in {path}")
    return trees


# ---------------------------------------------------------------------------
# Mean pipelines
# ---------------------------------------------------------------------------


def _data_splits(prob: FrechetProblem) -> List[Split]:
    """Splits present in the sample, heaviest (by summed length) first."""
    weight: Dict[Split, float] = {}
    for t in prob.data:
        for s, v in t.interior.items():
            weight[s] = weight.get(s, 0.0) + v
    return sorted(weight, key=lambda s: (-weight[s], s.mask))


def _greedy_orthant(prob: FrechetProblem, base: Set[Split]) -> Orthant:
    chosen = set(base)
    for s in _data_splits(prob):
        if s not in chosen and all(splits_compatible(s, c) for c in chosen):
            chosen.add(s)
    return Orthant(frozenset(chosen), prob.leaf_count)


def _maximal_cliques(required: Set[Split], candidates: Sequence[Split], cap: int):
    """Maximal compatible extensions of *required* inside *candidates*."""
    cand = [
        s
        for s in candidates
        if s not in required and all(splits_compatible(s, r) for r in required)
    ]
    out: List[frozenset] = []

    def grow(clique: Set[Split], rest: List[Split], excluded: List[Split]):
        # excluded holds vertices compatible with the whole clique that were
        # already tried: if any remain, this clique is not maximal
        if len(out) >= cap:
            return
        if not rest:
            if not excluded:
                out.append(frozenset(clique))
            return
        for i, s in enumerate(rest):
            new_rest = [u for u in rest[i + 1 :] if splits_compatible(u, s)]
            new_excl = [u for u in excluded if splits_compatible(u, s)]
            grow(clique | {s}, new_rest, new_excl)
            excluded = excluded + [s]

    grow(set(required), cand, [])
    if not out:
        out.append(frozenset(required))
    return out


def _candidate_orthants(
    prob: FrechetProblem, x: Tree, cap: int = 64
) -> List[Orthant]:
    """Maximal orthants over the data splits (plus x's own) containing x."""
    pool = sorted(set(_data_splits(prob)) | x.splits)
    cliques = _maximal_cliques(x.splits, pool, cap)
    return [Orthant(c, prob.leaf_count) for c in cliques]


def compute_mean(
    prob: FrechetProblem,
    algo: str = "hybrid",
    cfg: Optional[NewtonConfig] = None,
    sched: Optional[ProximalSchedule] = None,
    warmup_steps: int = 3000,
    collect_trace: bool = False,
):
    """
    Frechet mean by the chosen algorithm.  Returns (tree, f_value, steps,
    certificate-or-None, trace-or-None).
    """
    cfg = cfg or NewtonConfig()
    if algo == "sturm":
        res = global_mean(
            prob, sched or ProximalSchedule(), collect_trace=collect_trace
        )
        return res.tree, res.f_value, res.steps, None, res.trace

    if algo == "orthant":
        orthant = _greedy_orthant(prob, set())
        tree, cert = minimize_in_closed_orthant(prob, orthant, cfg)
        return tree, frechet_value(prob, tree), cert.iters, cert, None

    if algo != "hybrid":
        raise ValueError(f"unknown mean algorithm {algo!r}")

    warm_sched = replace(
        sched or ProximalSchedule(), max_steps=warmup_steps
    )
    x = global_mean(prob, warm_sched).tree
    steps = warmup_steps
    cert: Optional[OptimalityCertificate] = None
    for _ in range(16):
        cands = _candidate_orthants(prob, x)
        scored = sorted(
            cands,
            key=lambda o: (
                frechet_value(prob, init_quadratic_minimizer(prob, o)[0]),
                tuple(sorted(s.mask for s in o.edges)),
            ),
        )
        x, cert = minimize_in_closed_orthant(prob, scored[0], cfg)
        steps += cert.iters
        # cross-orthant probe: any descent into a sibling orthant of the
        # data-split complex contradicts global optimality
        descent = None
        for orthant in _candidate_orthants(prob, x):
            missing = set(orthant.edges) - x.splits
            if not missing:
                continue
            res = minimize_dir_deriv_on_simplex(prob, x, missing)
            if res.f_star < -cfg.delta:
                descent = res
                break
        if descent is None:
            return x, frechet_value(prob, x), steps, cert, None
        f0 = frechet_value(prob, x)
        alpha = 1.0
        direction = DirectionVector(descent.weights)
        while alpha >= 1e-16:
            trial = apply_direction(x, direction, alpha)
            if frechet_value(prob, trial) <= f0 + cfg.c1 * alpha * descent.f_star:
                x = trial
                break
            alpha *= 0.5
        else:
            break  # no usable step; accept the current point
    return x, frechet_value(prob, x), steps, cert, None


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------


def verify_candidate(
    prob: FrechetProblem, candidate: Tree, cfg: Optional[NewtonConfig] = None
) -> Tuple[bool, List[OptimalityCertificate], int]:
    """
    Certify the candidate as the relative minimizer in every maximal orthant
    containing it (capped at VERIFY_ORTHANT_CAP).  Returns (all_optimal,
    certificates, orthants_checked); stops at the first descent verdict.
    """
    cfg = cfg or NewtonConfig()
    r = candidate.leaf_count - 1
    pool = enumerate_interior_splits(r) if r >= 3 else []
    pool = [
        s
        for s in pool
        if all(splits_compatible(s, c) for c in candidate.splits)
    ]
    cliques = _maximal_cliques(candidate.splits, pool, VERIFY_ORTHANT_CAP)
    certs: List[OptimalityCertificate] = []
    for clique in cliques:
        orthant = Orthant(clique, prob.leaf_count)
        cert = certify_relative_optimality(prob, candidate, orthant, cfg)
        certs.append(cert)
        if not cert.is_optimal:
            return False, certs, len(certs)
    return True, certs, len(certs)


# ---------------------------------------------------------------------------
# Command implementations
# ---------------------------------------------------------------------------


def _cfg_from_args(args) -> NewtonConfig:
    return NewtonConfig(
        delta=args.delta,
        epsilon=args.eps,
        c1=args.c1,
        c2=args.c2,
        max_iters=args.max_iters,
    )


def _sched_from_args(args) -> ProximalSchedule:
    rule = "random" if args.seed is not None else "cyclic"
    return ProximalSchedule(
        rule=rule, seed=args.seed, max_steps=args.max_steps, tol=args.tol
    )


def _cmd_dist(args) -> int:
    a = parse_newick(_read(args.a))
    b = parse_newick(_read(args.b))
    g = compute_geodesic(a, b)
    if args.format == "json":
        print(json.dumps({"schema": SCHEMA, **g.to_json_dict()}))
    else:
        print(f"distance: {g.length!r}")
        for i, pair in enumerate(g.support):
            pa = " ".join(repr(s) for s in sorted(pair.a))
            pb = " ".join(repr(s) for s in sorted(pair.b))
            print(f"pair {i + 1}: A = {pa} | B = {pb}")
        commons = " ".join(repr(s) for s in sorted(g.common) if s.is_interior)
        print(f"common: {commons or '(pendants only)'}")
    return 0


def _cmd_geodesic(args) -> int:
    a = parse_newick(_read(args.a))
    b = parse_newick(_read(args.b))
    lam = args.lam
    if not 0.0 <= lam <= 1.0:
        print(f"error: --lambda {lam} outside [0, 1]", file=sys.stderr)
        return 2
    g = compute_geodesic(a, b)
    print(write_newick(point_at(g, lam)))
    return 0


def _cmd_mean(args) -> int:
    prob = FrechetProblem(load_trees(args.trees))
    tree, f, steps, cert, trace = compute_mean(
        prob,
        algo=args.algo,
        cfg=_cfg_from_args(args),
        sched=_sched_from_args(args),
        collect_trace=args.trace is not None and args.algo == "sturm",
    )
    if args.trace and trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            fh.write("step,f_value,move\n")
            for step, fval, move in trace:
                fh.write(f"{step},{fval!r},{move!r}\n")
    if args.format == "json":
        doc = {
            "schema": SCHEMA,
            "mean": write_newick(tree),
            "f_value": f,
            "steps": steps,
        }
        if cert is not None:
            doc["certificate"] = cert.to_json_dict()
        print(json.dumps(doc))
    else:
        print(write_newick(tree))
        print(f"F: {f!r}")
        print(f"steps: {steps}")
        if cert is not None:
            print(f"certificate: {cert.verdict} (chain length {len(cert.chain)})")
    return 0


def _cmd_verify(args) -> int:
    prob = FrechetProblem(load_trees(args.trees))
    candidate = parse_newick(_read(args.candidate))
    if candidate.leaf_count != prob.leaf_count:
        print("error: candidate leaf count differs from data", file=sys.stderr)
        return 2
    ok, certs, checked = verify_candidate(prob, candidate, _cfg_from_args(args))
    doc = {
        "schema": SCHEMA,
        "verdict": "optimal" if ok else "descent",
        "orthants_checked": checked,
        "certificates": [c.to_json_dict() for c in certs],
    }
    print(json.dumps(doc))
    return 0 if ok else 1


def _read(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treespace",
        description="Geodesics and Frechet means in BHV treespace.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--format", choices=["text", "json"], default="text")
        p.add_argument("--tol", type=float, default=1e-10,
                       help="movement tolerance of the proximal iteration")
        p.add_argument("--delta", type=float, default=1e-8,
                       help="gradient tolerance")
        p.add_argument("--eps", type=float, default=1e-9,
                       help="edge-removal threshold")
        p.add_argument("--c1", type=float, default=1e-4)
        p.add_argument("--c2", type=float, default=0.9)
        p.add_argument("--max-iters", type=int, default=200)
        p.add_argument("--max-steps", type=int, default=10**5,
                       help="proximal-point step budget")
        p.add_argument("--seed", type=int, default=None,
                       help="seed; also switches the schedule to random")

    p = sub.add_parser("dist", help="geodesic distance and support")
    p.add_argument("a")
    p.add_argument("b")
    common(p)
    p.set_defaults(fn=_cmd_dist)

    p = sub.add_parser("geodesic", help="point on the geodesic as Newick")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    common(p)
    p.set_defaults(fn=_cmd_geodesic)

    p = sub.add_parser("mean", help="Frechet mean of a tree file")
    p.add_argument("trees")
    p.add_argument("--algo", choices=["sturm", "orthant", "hybrid"],
                   default="hybrid")
    p.add_argument("--trace", default=None,
                   help="CSV trace path (sturm only)")
    common(p)
    p.set_defaults(fn=_cmd_mean)

    p = sub.add_parser("verify", help="certify relative optimality")
    p.add_argument("trees")
    p.add_argument("candidate")
    common(p)
    p.set_defaults(fn=_cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (NewickError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
