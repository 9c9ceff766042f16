"""
Geodesic computation: the cone-path example, oracle equivalence, metric
axioms, CAT(0) convexity, leg evaluation, and support classification.
"""

import math

import numpy as np
import pytest

from treespace import (
    Split,
    SupportClassification,
    SupportPair,
    SupportSequence,
    Tree,
    brute_force_geodesic,
    compute_geodesic,
    distance,
    enumerate_interior_splits,
    leg_index,
    point_at,
    splits_compatible,
    validate_support,
)
from treespace.trees import trees_close
from conftest import random_tree


PEND5 = [1.0] * 5


def cone_pair():
    """One interior edge each side, mutually incompatible, lengths 3 and 4."""
    x = Tree({Split({0, 1}, 5): 3.0}, PEND5)
    t = Tree({Split({0, 2}, 5): 4.0}, PEND5)
    return x, t


def random_completion(rng, x, r):
    """A random tree whose orthant contains x's splits."""
    pool = list(enumerate_interior_splits(r))
    rng.shuffle(pool)
    chosen = dict(x.interior)
    for s in pool:
        if s not in chosen and all(splits_compatible(s, c) for c in chosen):
            chosen[s] = float(rng.uniform(0.2, 2.0))
    return Tree(chosen, rng.uniform(0.5, 1.5, r + 1))


class TestConeExample:
    def test_single_pair_support(self):
        x, t = cone_pair()
        g = compute_geodesic(x, t)
        assert g.support.k == 1
        assert g.support[0].a == {Split({0, 1}, 5)}
        assert g.support[0].b == {Split({0, 2}, 5)}

    def test_distance_is_three_plus_four(self):
        x, t = cone_pair()
        assert distance(x, t) == pytest.approx(7.0, abs=1e-12)

    def test_star_at_three_sevenths(self):
        x, t = cone_pair()
        g = compute_geodesic(x, t)
        mid = point_at(g, 3.0 / 7.0)
        assert not mid.interior  # both edges vanish at the leg boundary

    def test_leg_index_around_boundary(self):
        x, t = cone_pair()
        g = compute_geodesic(x, t)
        assert leg_index(g, 0.0) == 0
        assert leg_index(g, 0.3) == 0
        assert leg_index(g, 0.5) == 1
        assert leg_index(g, 1.0) == 1


class TestIdentityAndEndpoints:
    def test_same_tree(self):
        rng = np.random.default_rng(1)
        x = random_tree(rng, 6)
        g = compute_geodesic(x, x)
        assert g.support.k == 0
        assert g.length == 0.0
        assert distance(x, x) == 0.0

    def test_endpoints_exact(self):
        rng = np.random.default_rng(2)
        x, t = random_tree(rng, 5), random_tree(rng, 5)
        g = compute_geodesic(x, t)
        assert point_at(g, 0.0) == x
        assert point_at(g, 1.0) == t

    def test_lambda_out_of_range(self):
        rng = np.random.default_rng(3)
        g = compute_geodesic(random_tree(rng, 5), random_tree(rng, 5))
        with pytest.raises(ValueError):
            point_at(g, 1.5)

    def test_same_topology_is_euclidean(self):
        rng = np.random.default_rng(4)
        y = random_tree(rng, 6)
        z = Tree(
            {s: float(rng.uniform(0.2, 2.0)) for s in y.interior},
            rng.uniform(0.5, 1.5, 7),
        )
        expect = math.sqrt(
            sum((y.interior[s] - z.interior[s]) ** 2 for s in y.interior)
            + sum((a - b) ** 2 for a, b in zip(y.pendants, z.pendants))
        )
        assert distance(y, z) == pytest.approx(expect, rel=1e-12)
        assert compute_geodesic(y, z).support.k == 0


class TestOracleEquivalence:
    @pytest.mark.parametrize("r,seed", [(5, 10), (5, 11), (6, 12), (6, 13)])
    def test_matches_brute_force(self, r, seed):
        rng = np.random.default_rng(seed)
        for _ in range(30):
            x = random_tree(rng, r, keep_prob=0.9)
            t = random_tree(rng, r, keep_prob=0.9)
            g = compute_geodesic(x, t)
            bf = brute_force_geodesic(x, t)
            assert abs(g.length - bf.length) < 1e-10

    def test_supports_classify_valid(self):
        rng = np.random.default_rng(14)
        for _ in range(40):
            x, t = random_tree(rng, 6), random_tree(rng, 6)
            g = compute_geodesic(x, t)
            cls = validate_support(x, t, g.support)
            assert cls != SupportClassification.Invalid

    def test_p2_ratios_monotone(self):
        rng = np.random.default_rng(15)
        for _ in range(40):
            g = compute_geodesic(random_tree(rng, 6), random_tree(rng, 6))
            ratios = g.ratios()
            assert all(
                r0 <= r1 * (1 + 1e-10) for r0, r1 in zip(ratios, ratios[1:])
            )


class TestMetricAxioms:
    def test_symmetry_and_triangle(self):
        rng = np.random.default_rng(16)
        for _ in range(40):
            x = random_tree(rng, 6, keep_prob=0.9)
            y = random_tree(rng, 6, keep_prob=0.9)
            z = random_tree(rng, 6, keep_prob=0.9)
            dxy = distance(x, y)
            assert abs(dxy - distance(y, x)) < 1e-12
            assert distance(x, z) <= dxy + distance(y, z) + 1e-10

    def test_positivity(self):
        rng = np.random.default_rng(17)
        x, y = random_tree(rng, 5), random_tree(rng, 5)
        assert distance(x, y) > 0


class TestGeodesicParameterization:
    def test_arc_length_proportional(self):
        rng = np.random.default_rng(18)
        for _ in range(10):
            x, t = random_tree(rng, 6), random_tree(rng, 6)
            g = compute_geodesic(x, t)
            for lam in (0.1, 0.25, 0.5, 0.8):
                p = point_at(g, lam)
                assert distance(x, p) == pytest.approx(lam * g.length, abs=1e-9)
                assert distance(p, t) == pytest.approx(
                    (1 - lam) * g.length, abs=1e-9
                )

    def test_cat0_convexity_on_grid(self):
        rng = np.random.default_rng(19)
        for _ in range(10):
            x = random_tree(rng, 5)
            g = compute_geodesic(random_tree(rng, 5), random_tree(rng, 5))
            vals = [
                distance(point_at(g, i / 32), x) ** 2 for i in range(33)
            ]
            seconds = [
                vals[i - 1] - 2 * vals[i] + vals[i + 1] for i in range(1, 32)
            ]
            assert min(seconds) >= -1e-9

    def test_geodesic_triangle_lemma(self):
        # interpolation commutes: the point at proportion alpha toward
        # Y^t equals the t-interpolation of the alpha-points toward Y^0, Y^1
        rng = np.random.default_rng(20)
        for _ in range(8):
            x = random_tree(rng, 5, keep_prob=0.3)
            y0 = random_completion(rng, x, 5)
            y1 = random_completion(rng, x, 5)
            for t_frac in (0.3, 0.7):
                yt = point_at(compute_geodesic(y0, y1), t_frac)
                for alpha in (0.2, 0.6):
                    lhs = point_at(compute_geodesic(x, yt), alpha)
                    za = point_at(compute_geodesic(x, y0), alpha)
                    zb = point_at(compute_geodesic(x, y1), alpha)
                    rhs = point_at(compute_geodesic(za, zb), t_frac)
                    assert trees_close(lhs, rhs, tol=1e-9)


class TestValidateSupport:
    def _two_pair_instance(self, len_e1=1.0):
        e1, e2 = Split({0, 1}, 6), Split({0, 1, 2, 3}, 6)
        f1, f2 = Split({0, 2}, 6), Split({0, 2, 4}, 6)
        x = Tree({e1: len_e1, e2: 1.0}, [1.0] * 6)
        t = Tree({f1: 1.0, f2: 1.0}, [1.0] * 6)
        support = SupportSequence(
            [SupportPair({e1}, {f1}), SupportPair({e2}, {f2})]
        )
        return x, t, support

    def test_single_pair_facet_interior(self):
        x, t = cone_pair()
        g = compute_geodesic(x, t)
        assert validate_support(x, t, g.support) == SupportClassification.FacetInterior

    def test_equal_ratios_cell_boundary(self):
        x, t, support = self._two_pair_instance(1.0)
        assert validate_support(x, t, support) == SupportClassification.CellBoundary

    def test_ratio_inversion_invalid(self):
        x, t, support = self._two_pair_instance(2.0)
        assert validate_support(x, t, support) == SupportClassification.Invalid

    def test_partition_mismatch_raises(self):
        x, t = cone_pair()
        wrong = SupportSequence(
            [SupportPair({Split({0, 1}, 5)}, {Split({0, 3}, 5)})]
        )
        with pytest.raises(ValueError):
            validate_support(x, t, wrong)

    def test_p3_violation_invalid(self):
        # merging two separable pairs into one violates (P3)
        x, t, _ = self._two_pair_instance(0.2)
        e1, e2 = Split({0, 1}, 6), Split({0, 1, 2, 3}, 6)
        f1, f2 = Split({0, 2}, 6), Split({0, 2, 4}, 6)
        merged = SupportSequence([SupportPair({e1, e2}, {f1, f2})])
        assert validate_support(x, t, merged) == SupportClassification.Invalid


class TestBruteForce:
    def test_size_limit(self):
        rng = np.random.default_rng(21)
        x, t = random_tree(rng, 8), random_tree(rng, 8)
        with pytest.raises(ValueError):
            brute_force_geodesic(x, t, max_edges=4)

    def test_identity(self):
        rng = np.random.default_rng(22)
        x = random_tree(rng, 5)
        assert brute_force_geodesic(x, x).support.k == 0

    def test_cone_unique(self):
        x, t = cone_pair()
        bf = brute_force_geodesic(x, t)
        assert bf.support.k == 1
        assert bf.length == pytest.approx(7.0, abs=1e-12)


class TestP3MaxflowCertificate:
    def test_agrees_with_exhaustive_scan(self):
        # the max-flow certificate (used past the exhaustive size limit)
        # must give the same verdict and boundary flag as subset enumeration
        from treespace.geodesics import _p3_maxflow, _p3_subsets

        rng = np.random.default_rng(30)
        checked = 0
        while checked < 60:
            x = random_tree(rng, 6, keep_prob=0.9)
            t = random_tree(rng, 6, keep_prob=0.9)
            g = compute_geodesic(x, t)
            for pair in g.support:
                a, b = sorted(pair.a), sorted(pair.b)
                if len(a) + len(b) < 3:
                    continue
                checked += 1
                assert _p3_maxflow(a, b, x, t) == _p3_subsets(a, b, x, t)

    def test_detects_violation(self):
        # a merged pair that should be split: exhaustive and max-flow agree
        from treespace.geodesics import _p3_maxflow, _p3_subsets

        e1, e2 = Split({0, 1}, 6), Split({0, 1, 2, 3}, 6)
        f1, f2 = Split({0, 2}, 6), Split({0, 2, 4}, 6)
        x = Tree({e1: 0.2, e2: 1.0}, [1.0] * 6)
        t = Tree({f1: 1.0, f2: 1.0}, [1.0] * 6)
        a, b = sorted({e1, e2}), sorted({f1, f2})
        assert _p3_subsets(a, b, x, t)[0] is False
        assert _p3_maxflow(a, b, x, t)[0] is False

    def test_detects_equality_boundary(self):
        from treespace.geodesics import _p3_maxflow, _p3_subsets

        e1, e2 = Split({0, 1}, 6), Split({0, 1, 2, 3}, 6)
        f1, f2 = Split({0, 2}, 6), Split({0, 2, 4}, 6)
        # ratios of the separable halves tie exactly: valid, with equality
        x = Tree({e1: 1.0, e2: 1.0}, [1.0] * 6)
        t = Tree({f1: 1.0, f2: 1.0}, [1.0] * 6)
        a, b = sorted({e1, e2}), sorted({f1, f2})
        assert _p3_subsets(a, b, x, t) == (True, True)
        assert _p3_maxflow(a, b, x, t) == (True, True)
