"""
Shared fixtures: random tree generators and the canonical three-ray datasets.

Random topologies come from recursive random bipartition of the non-zero
leaf labels, which yields a maximal (binary) topology; callers may subsample
splits for points on lower-dimensional faces.  Everything is seeded, so test
values are reproducible run to run.
"""

import pytest

from treespace import Split, Tree
from treespace.frechet import FrechetProblem


def random_far_sides(rng, labels):
    """Far sides (not containing leaf 0) of a random maximal topology."""
    out = []

    def rec(lab):
        if len(lab) < 2:
            return
        perm = rng.permutation(len(lab))
        cut = int(rng.integers(1, len(lab)))
        left = [lab[int(i)] for i in perm[:cut]]
        right = [lab[int(i)] for i in perm[cut:]]
        for side in (left, right):
            if len(side) >= 2:
                out.append(frozenset(side))
                rec(side)

    rec(list(labels))
    return out


def random_tree(rng, r, keep_prob=1.0):
    """
    Random tree on leaves {0..r}: maximal random topology, lengths uniform
    in [0.2, 2.0), pendants uniform in [0.5, 1.5).  With keep_prob < 1 each
    interior split survives independently (a point on a face).
    """
    far = random_far_sides(rng, range(1, r + 1))
    interior = {}
    for f in far:
        if rng.random() <= keep_prob:
            interior[Split(f, r + 1)] = float(rng.uniform(0.2, 2.0))
    return Tree(interior, rng.uniform(0.5, 1.5, r + 1))


def nested_pair(rng, r):
    """(x, y) with the splits of x a subset of y's and independent lengths."""
    y = random_tree(rng, r)
    splits = sorted(y.interior)
    keep = [s for s in splits if rng.random() < 0.5]
    x = Tree(
        {s: float(rng.uniform(0.2, 2.0)) for s in keep},
        rng.uniform(0.5, 1.5, r + 1),
    )
    return x, y


def nested_triple(rng, r):
    """(x, y, y') with strictly growing split sets where possible."""
    y_prime = random_tree(rng, r)
    splits = sorted(y_prime.interior)
    keep_x = [s for s in splits if rng.random() < 0.4]
    mid = sorted(set(s for s in splits if rng.random() < 0.5) | set(keep_x))
    x = Tree(
        {s: float(rng.uniform(0.2, 2.0)) for s in keep_x},
        rng.uniform(0.5, 1.5, r + 1),
    )
    y = Tree(
        {s: y_prime.interior[s] * float(rng.uniform(0.5, 1.5)) for s in mid},
        rng.uniform(0.5, 1.5, r + 1),
    )
    return x, y, y_prime


# -- canonical instances -----------------------------------------------------

LEAVES5 = 5
RAY_A = Split({0, 1}, LEAVES5)
RAY_B = Split({0, 2}, LEAVES5)
RAY_C = Split({0, 3}, LEAVES5)
UNIT_PENDANTS = (1.0,) * LEAVES5


def ray_tree(split, length):
    return Tree({split: length}, UNIT_PENDANTS)


def star_tree():
    return Tree({}, UNIT_PENDANTS)


@pytest.fixture(scope="session")
def three_ray_symmetric():
    """Three unit points on mutually incompatible rays; mean is the star."""
    return FrechetProblem([ray_tree(RAY_A, 1.0), ray_tree(RAY_B, 1.0), ray_tree(RAY_C, 1.0)])


@pytest.fixture(scope="session")
def three_ray_asymmetric():
    """Ray lengths (5, 1, 1); mean sits at coordinate 1 on ray a."""
    return FrechetProblem([ray_tree(RAY_A, 5.0), ray_tree(RAY_B, 1.0), ray_tree(RAY_C, 1.0)])
