"""Tests for finitary automorphisms."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.autom import (
    FinitaryAutomorphism,
    Flavor,
    apply,
    apply_inverse,
    aut_distance,
    base_generators,
    base_perms,
    commutator,
    compose,
    conjugate,
    graft,
    haar_sample,
    haar_sample_at,
    inverse,
    is_alternating,
    order,
    perm_then,
    power,
    section,
    truncate,
)
from src.errors import EqualElements, InvalidAddress
from src.groups import TruncatedWreathGroup
from src.tree import RootedTree

seeds = st.integers(min_value=0, max_value=2**32 - 1)
shapes = st.sampled_from([(2, 3), (3, 2)])


def _random(d, n, seed, flavor=Flavor.SYMMETRIC):
    return haar_sample(d, n, flavor, np.random.default_rng(seed))


def _distance(a, b):
    return Fraction(0) if a == b else aut_distance(a, b)


class TestPermutations:
    """Tests for base permutations."""

    def test_perm_then(self):
        """p first, then q."""
        assert perm_then((1, 0, 2), (0, 2, 1)) == (2, 0, 1)

    def test_base_group_sizes(self):
        """S_3 has 6 elements, A_3 has 3."""
        assert len(base_perms(3, Flavor.SYMMETRIC)) == 6
        assert len(base_perms(3, Flavor.ALTERNATING)) == 3

    def test_alternating_two_is_trivial(self):
        """A_2 holds only the identity and has no generators."""
        assert base_perms(2, Flavor.ALTERNATING) == ((0, 1),)
        assert base_generators(2, Flavor.ALTERNATING) == ()


class TestPortrait:
    """Tests for portrait construction and serialization."""

    def test_identity_entries_dropped(self):
        """An identity permutation does not enter the portrait."""
        g = FinitaryAutomorphism.from_portrait(2, {"": [0, 1], "1": [1, 0]})
        assert g.support() == ["1"]

    def test_equal_portraits_equal(self):
        """Equality ignores the declared depth."""
        a = FinitaryAutomorphism.from_portrait(2, {"0": [1, 0]}, 3)
        b = FinitaryAutomorphism.from_portrait(2, {"0": [1, 0]})
        assert a == b
        assert hash(a) == hash(b)

    def test_invalid_permutation(self):
        """[0, 0] is not a permutation."""
        with pytest.raises(InvalidAddress):
            FinitaryAutomorphism.from_portrait(2, {"": [0, 0]})

    def test_entry_below_depth(self):
        """A declared depth bounds the portrait."""
        with pytest.raises(InvalidAddress):
            FinitaryAutomorphism.from_portrait(2, {"01": [1, 0]}, 2)

    def test_json(self):
        """JSON form follows the portrait schema."""
        g = FinitaryAutomorphism.from_portrait(3, {"2": [1, 2, 0]}, 2)
        assert g.to_json() == {"d": 3, "depth": 2, "perms": {"2": [1, 2, 0]}}
        assert FinitaryAutomorphism.from_json(g.to_json()) == g

    def test_malformed_json(self):
        """Missing arity is reported as a malformed portrait."""
        with pytest.raises(InvalidAddress):
            FinitaryAutomorphism.from_json({"perms": {}})

    def test_key_orders_portraits(self):
        """Keys are stable text."""
        g = FinitaryAutomorphism.from_portrait(2, {"1": [1, 0], "": [1, 0]})
        assert g.key == ":10|1:10"


class TestAction:
    """Tests for apply, compose and inverse."""

    def test_root_swap(self, root_swap):
        """The root swap exchanges first digits only."""
        assert apply(root_swap, "0") == "1"
        assert apply(root_swap, "01") == "11"

    def test_permutation_at_original_prefix(self):
        """Digit i is moved by the permutation at the original prefix."""
        g = FinitaryAutomorphism.from_portrait(2, {"": [1, 0], "0": [1, 0]})
        assert apply(g, "00") == "11"
        assert apply(g, "10") == "00"

    def test_compose_is_right_action(self, root_swap, swap_at_0):
        """compose(a, b) applies a first."""
        ab = compose(swap_at_0, root_swap)
        assert apply(ab, "00") == apply(root_swap, apply(swap_at_0, "00")) == "11"

    def test_apply_inverse(self):
        """apply_inverse undoes apply."""
        g = _random(3, 2, 5)
        for w in RootedTree(3).level(2):
            assert apply_inverse(g, apply(g, w)) == w

    @settings(derandomize=True, max_examples=60, deadline=None)
    @given(shapes, seeds)
    def test_prefix_compatible(self, shape, s):
        """The image of a parent is the parent of the image."""
        d, n = shape
        g = _random(d, n, s)
        for w in RootedTree(d).vertices(n + 1):
            if w:
                assert apply(g, w)[:-1] == apply(g, w[:-1])

    @settings(derandomize=True, max_examples=60, deadline=None)
    @given(shapes, seeds, seeds)
    def test_composition_matches_action(self, shape, s1, s2):
        """Composite action equals successive actions on every leaf."""
        d, n = shape
        a, b = _random(d, n, s1), _random(d, n, s2)
        ab = compose(a, b)
        for w in RootedTree(d).level(n):
            assert apply(ab, w) == apply(b, apply(a, w))

    @settings(derandomize=True, max_examples=60, deadline=None)
    @given(shapes, seeds, seeds, seeds)
    def test_associative(self, shape, s1, s2, s3):
        """(ab)c == a(bc)."""
        d, n = shape
        a, b, c = _random(d, n, s1), _random(d, n, s2), _random(d, n, s3)
        assert compose(compose(a, b), c) == compose(a, compose(b, c))

    @settings(derandomize=True, max_examples=60, deadline=None)
    @given(shapes, seeds)
    def test_inverse(self, shape, s):
        """a a^-1 is the identity on both sides."""
        d, n = shape
        a = _random(d, n, s)
        assert compose(a, inverse(a)).is_identity
        assert compose(inverse(a), a).is_identity

    @settings(derandomize=True, max_examples=40, deadline=None)
    @given(seeds, seeds)
    def test_conjugation_is_homomorphism(self, s1, s2):
        """(ab)^g == a^g b^g."""
        a, b, g = _random(2, 3, s1), _random(2, 3, s2), _random(2, 3, s1 ^ s2)
        assert conjugate(compose(a, b), g) == compose(conjugate(a, g), conjugate(b, g))


class TestGroupOperations:
    """Tests for conjugates, commutators and orders."""

    def test_conjugate_moves_support(self, root_swap, swap_at_0):
        """Conjugating by the root swap moves the permutation from 0 to 1."""
        assert conjugate(swap_at_0, root_swap) == FinitaryAutomorphism.from_portrait(2, {"1": [1, 0]})

    def test_disjoint_supports_commute(self, swap_at_0):
        """Elements below different siblings commute."""
        b = FinitaryAutomorphism.from_portrait(2, {"1": [1, 0], "10": [1, 0]})
        assert commutator(swap_at_0, b).is_identity

    def test_order_of_swap(self, root_swap):
        """The root swap is an involution."""
        assert order(root_swap) == 2

    def test_order_of_three_cycle(self):
        """A root 3-cycle has order 3."""
        assert order(FinitaryAutomorphism.from_portrait(3, {"": [1, 2, 0]})) == 3

    def test_product_of_involutions(self, root_swap, swap_at_0):
        """The swap at 0 followed by the root swap has order 4."""
        assert order(compose(swap_at_0, root_swap)) == 4

    def test_order_limit(self):
        """The order search stops at the limit."""
        g = FinitaryAutomorphism.from_portrait(3, {"": [1, 2, 0]})
        with pytest.raises(ArithmeticError):
            order(g, limit=2)

    def test_power(self):
        """g^3 of a 3-cycle is trivial and g^-1 is the inverse."""
        g = FinitaryAutomorphism.from_portrait(3, {"": [1, 2, 0]})
        assert power(g, 3).is_identity
        assert power(g, -1) == inverse(g)

    def test_alternating(self):
        """A 3-cycle is even, a transposition is not."""
        assert is_alternating(FinitaryAutomorphism.from_portrait(3, {"": [1, 2, 0]}))
        assert not is_alternating(FinitaryAutomorphism.from_portrait(3, {"1": [1, 0, 2]}))


class TestSections:
    """Tests for section, graft and truncate."""

    def test_section(self):
        """The section at 0 reads the portrait below 0."""
        g = FinitaryAutomorphism.from_portrait(2, {"": [1, 0], "0": [1, 0], "01": [1, 0]}, 3)
        assert section(g, "0") == FinitaryAutomorphism.from_portrait(2, {"": [1, 0], "1": [1, 0]})
        assert section(g, "0").depth == 2

    def test_graft_inverts_section(self):
        """Grafting the section back gives an element supported below v."""
        g = FinitaryAutomorphism.from_portrait(2, {"1": [1, 0], "10": [1, 0]})
        assert graft(section(g, "1"), "1") == g

    def test_section_product_rule(self):
        """(ab)_u == a_u b_{u^a}."""
        rng = np.random.default_rng(3)
        a, b = haar_sample(3, 2, Flavor.SYMMETRIC, rng), haar_sample(3, 2, Flavor.SYMMETRIC, rng)
        for u in RootedTree(3).level(1):
            assert section(compose(a, b), u) == compose(section(a, u), section(b, apply(a, u)))

    def test_truncate(self):
        """Truncation drops deep permutations."""
        g = FinitaryAutomorphism.from_portrait(2, {"": [1, 0], "01": [1, 0]})
        assert truncate(g, 1) == FinitaryAutomorphism.from_portrait(2, {"": [1, 0]})


class TestDistance:
    """Tests for the automorphism distance."""

    def test_root_swap_at_distance_one(self, root_swap):
        """Identity and root swap differ on level 1."""
        assert aut_distance(FinitaryAutomorphism.identity(2), root_swap) == 1

    def test_deep_difference(self):
        """A permutation at level 2 keeps levels 0..2 equal."""
        g = FinitaryAutomorphism.from_portrait(2, {"01": [1, 0]})
        assert aut_distance(FinitaryAutomorphism.identity(2), g) == Fraction(1, 4)

    def test_equal_elements(self, root_swap):
        """Equal elements have no positive distance."""
        with pytest.raises(EqualElements):
            aut_distance(root_swap, root_swap)

    @settings(derandomize=True, max_examples=100, deadline=None)
    @given(seeds, seeds, seeds)
    def test_ultrametric(self, s1, s2, s3):
        """d(a, c) <= max(d(a, b), d(b, c))."""
        a, b, c = (_random(2, 4, s) for s in (s1, s2, s3))
        assert _distance(a, c) <= max(_distance(a, b), _distance(b, c))

    @settings(derandomize=True, max_examples=60, deadline=None)
    @given(seeds, seeds, seeds)
    def test_translation_invariant(self, s1, s2, s3):
        """Right multiplication keeps distances."""
        a, b, g = (_random(2, 3, s) for s in (s1, s2, s3))
        assert _distance(compose(a, g), compose(b, g)) == _distance(a, b)


class TestHaar:
    """Tests for Haar sampling."""

    def test_samples_lie_in_group(self, rng):
        """Symmetric samples lie in the symmetric group."""
        G = TruncatedWreathGroup(2, 3)
        assert all(G.contains(haar_sample(2, 3, Flavor.SYMMETRIC, rng)) for _ in range(50))

    def test_alternating_samples(self, rng):
        """Alternating samples only use even permutations."""
        assert all(is_alternating(haar_sample(3, 2, Flavor.ALTERNATING, rng)) for _ in range(50))

    def test_sample_at_vertices(self, rng):
        """Sampling at given vertices stays on them."""
        g = haar_sample_at(2, ["0", "01"], Flavor.SYMMETRIC, rng, depth=3)
        assert set(g.support()) <= {"0", "01"}
        assert g.depth == 3

    def test_seeded(self):
        """Equal seeds give equal samples."""
        assert _random(3, 2, 11) == _random(3, 2, 11)
