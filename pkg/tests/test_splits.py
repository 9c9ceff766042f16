"""Split combinatorics: compatibility, enumeration, orthants."""

import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from treespace import (
    Orthant,
    Split,
    enumerate_interior_splits,
    is_compatible_set,
    pendant_split,
    splits_compatible,
)

# The ten interior splits of the five-label set {0..4}, written by zero side.
T4_SPLITS = [
    {0, 1},
    {0, 1, 2},
    {0, 2},
    {0, 2, 4},
    {0, 1, 3},
    {0, 1, 4},
    {0, 2, 3},
    {0, 3},
    {0, 3, 4},
    {0, 4},
]


class TestSplitBasics:
    def test_zero_side_normalized(self):
        s = Split({2, 3, 4}, 5)
        assert s.zero_side == {0, 1}
        assert s.other_side == {2, 3, 4}

    def test_equality_is_by_zero_side(self):
        assert Split({0, 1}, 5) == Split({2, 3, 4}, 5)
        assert hash(Split({0, 1}, 5)) == hash(Split({2, 3, 4}, 5))

    def test_pendant_flagging(self):
        assert pendant_split(0, 5).is_pendant
        assert pendant_split(3, 5).pendant_leaf == 3
        assert not Split({0, 1}, 5).is_pendant
        assert Split({0, 1}, 5).is_interior

    @pytest.mark.parametrize("bad", [set(), {0, 1, 2, 3, 4}])
    def test_rejects_improper_sides(self, bad):
        with pytest.raises(ValueError):
            Split(bad, 5)


class TestCompatibility:
    def test_nested_pair_compatible(self):
        # {0,1}|{2,3,4} and {0,1,2}|{3,4} co-occur in a 5-leaf topology
        assert splits_compatible(Split({0, 1}, 5), Split({0, 1, 2}, 5))

    def test_crossing_pair_incompatible(self):
        # all four side intersections nonempty, checked by hand:
        # {0}|{1}, {1}|{2}, {2}|{3,4} pattern
        assert not splits_compatible(Split({0, 1}, 5), Split({0, 2}, 5))

    def test_split_is_self_compatible(self):
        s = Split({0, 1}, 5)
        assert splits_compatible(s, s)

    def test_mismatched_leaf_count_raises(self):
        with pytest.raises(ValueError):
            splits_compatible(Split({0, 1}, 5), Split({0, 1}, 6))

    def test_matches_four_intersection_oracle(self):
        # brute-force definition: some pairwise side intersection is empty
        for a, b in itertools.combinations(enumerate_interior_splits(4), 2):
            sides_a = (a.zero_side, a.other_side)
            sides_b = (b.zero_side, b.other_side)
            expected = any(not (sa & sb) for sa in sides_a for sb in sides_b)
            assert splits_compatible(a, b) == expected

    @settings(max_examples=200, deadline=None)
    @given(
        st.sets(st.integers(0, 5), min_size=1, max_size=5),
        st.sets(st.integers(0, 5), min_size=1, max_size=5),
    )
    def test_symmetry(self, side_a, side_b):
        if len(side_a) == 6 or len(side_b) == 6:
            return
        a, b = Split(side_a, 6), Split(side_b, 6)
        assert splits_compatible(a, b) == splits_compatible(b, a)

    def test_pendants_compatible_with_everything(self):
        for r in (3, 4, 5, 6):
            interior = enumerate_interior_splits(r)
            for leaf in range(r + 1):
                p = pendant_split(leaf, r + 1)
                assert all(splits_compatible(p, s) for s in interior)


class TestCompatibleSets:
    def test_empty_set(self):
        assert is_compatible_set([])

    def test_known_pair(self):
        assert is_compatible_set([Split({0, 1}, 5), Split({0, 1, 2}, 5)])

    def test_crossing_pair_in_set(self):
        trio = [Split({0, 1}, 5), Split({0, 1, 2}, 5), Split({0, 2}, 5)]
        assert not is_compatible_set(trio)


class TestEnumeration:
    def test_t4_split_table(self):
        got = {s.zero_side for s in enumerate_interior_splits(4)}
        assert got == {frozenset(z) for z in T4_SPLITS}

    @pytest.mark.parametrize("r", [3, 4, 5, 6, 7])
    def test_count_formula(self, r):
        assert len(enumerate_interior_splits(r)) == 2**r - r - 2

    def test_r3_by_hand(self):
        got = {frozenset(s.zero_side) for s in enumerate_interior_splits(3)}
        assert got == {frozenset({0, 1}), frozenset({0, 2}), frozenset({0, 3})}

    def test_small_r_rejected(self):
        with pytest.raises(ValueError):
            enumerate_interior_splits(2)

    def test_t4_fifteen_topologies(self):
        splits = enumerate_interior_splits(4)
        pairs = [
            (a, b)
            for a, b in itertools.combinations(splits, 2)
            if splits_compatible(a, b)
        ]
        assert len(pairs) == 15
        # every split sits in exactly three maximal topologies
        for s in splits:
            assert sum(1 for a, b in pairs if s in (a, b)) == 3

    def test_deterministic_order(self):
        assert enumerate_interior_splits(5) == enumerate_interior_splits(5)


class TestOrthant:
    def test_dimension(self):
        o = Orthant(frozenset({Split({0, 1}, 5), Split({0, 1, 2}, 5)}), 5)
        assert o.dimension == 2
        assert Split({0, 1}, 5) in o

    def test_rejects_incompatible_edges(self):
        with pytest.raises(ValueError):
            Orthant(frozenset({Split({0, 1}, 5), Split({0, 2}, 5)}), 5)

    def test_rejects_pendants(self):
        with pytest.raises(ValueError):
            Orthant(frozenset({pendant_split(1, 5)}), 5)
