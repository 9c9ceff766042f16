"""Tree construction, common edges, squaring map, JSON round trip."""

import numpy as np
import pytest

from treespace import (
    Split,
    Tree,
    common_edges,
    pendant_split,
    splits_compatible,
    squaring_map,
    tree_from_json,
    tree_to_json,
    unsquare,
)
from conftest import random_tree


A = Split({0, 1}, 5)
B = Split({0, 1, 2}, 5)
CROSS = Split({0, 2}, 5)


class TestTreeInvariants:
    def test_basic_construction(self):
        t = Tree({A: 2.0, B: 3.0}, [1, 1, 1, 1, 1])
        assert t.interior[A] == 2.0
        assert t.leaf_count == 5
        assert t.length_of(pendant_split(2, 5)) == 1.0
        assert t.length_of(CROSS) == 0.0

    def test_rejects_incompatible_splits(self):
        with pytest.raises(ValueError):
            Tree({A: 1.0, CROSS: 1.0}, [1] * 5)

    def test_rejects_negative_lengths(self):
        with pytest.raises(ValueError):
            Tree({A: -0.5}, [1] * 5)
        with pytest.raises(ValueError):
            Tree({}, [1, 1, -1, 1, 1])

    def test_contracts_tiny_interior_edges(self):
        t = Tree({A: 1e-13, B: 3.0}, [1] * 5)
        assert A not in t.interior
        assert B in t.interior

    def test_too_many_interior_splits(self):
        # 5 leaves allow at most 2 interior splits
        trio = {A: 1.0, B: 1.0, Split({0, 1, 2, 3}, 5): 1.0}
        with pytest.raises(ValueError):
            Tree(trio, [1] * 5)

    def test_equality_and_hash(self):
        t1 = Tree({A: 2.0}, [1] * 5)
        t2 = Tree({A: 2.0}, [1] * 5)
        assert t1 == t2 and hash(t1) == hash(t2)
        assert t1 != Tree({A: 2.5}, [1] * 5)


class TestCommonEdges:
    def test_identical_trees(self):
        t = Tree({A: 2.0, B: 3.0}, [1] * 5)
        c = common_edges(t, t)
        assert {s for s in c if s.is_interior} == {A, B}
        assert sum(1 for s in c if s.is_pendant) == 5

    def test_fully_incompatible_pair(self):
        x = Tree({A: 1.0}, [1] * 5)
        t = Tree({CROSS: 1.0}, [1] * 5)
        c = common_edges(x, t)
        assert all(s.is_pendant for s in c)

    def test_matches_pairwise_scan(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            x = random_tree(rng, 5, keep_prob=0.8)
            t = random_tree(rng, 5, keep_prob=0.8)
            got = {s for s in common_edges(x, t) if s.is_interior}
            expect = set()
            for s in x.interior:
                if all(splits_compatible(s, u) for u in t.interior):
                    expect.add(s)
            for u in t.interior:
                if all(splits_compatible(u, s) for s in x.interior):
                    expect.add(u)
            assert got == expect


class TestSquaringMap:
    def test_squares_coordinates(self):
        t = Tree({A: 3.0, B: 4.0}, [1, 2, 3, 4, 5])
        sq = squaring_map(t)
        assert sq.coords[A] == 9.0
        assert sq.coords[B] == 16.0
        assert sq.coords[pendant_split(4, 5)] == 25.0

    def test_star_all_zero_pendants(self):
        t = Tree({}, [0.0] * 5)
        sq = squaring_map(t)
        assert all(v == 0.0 for v in sq.coords.values())

    def test_round_trip(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            t = random_tree(rng, 6)
            back = unsquare(squaring_map(t))
            for s, v in t.interior.items():
                assert back.interior[s] == pytest.approx(v, rel=1e-12)
            assert back.pendants == pytest.approx(t.pendants, rel=1e-12)

    def test_unsquare_rejects_negative(self):
        sq = squaring_map(Tree({A: 1.0}, [1] * 5))
        sq.coords[A] = -1.0
        with pytest.raises(ValueError):
            unsquare(sq)


class TestJson:
    def test_round_trip(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            t = random_tree(rng, 5)
            assert tree_from_json(tree_to_json(t)) == t

    def test_schema_fields(self):
        import json

        doc = json.loads(tree_to_json(Tree({A: 2.0}, [1] * 5)))
        assert doc["leaf_count"] == 5
        assert doc["interior"] == [{"zero_side": [0, 1], "length": 2.0}]
        assert doc["pendants"] == [1.0] * 5
