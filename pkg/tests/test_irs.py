"""Tests for IRS samplers, fingerprints and distributions."""

from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.autom import FinitaryAutomorphism, Flavor, compose, haar_sample
from src.boundary import ClosedSetApprox
from src.config import (
    ClosedSetSpec,
    CoupledSpec,
    FixedRaySpec,
    LevelSpec,
    PieceSpec,
    StabilizerSpec,
    UniformConjugateSpec,
)
from src.errors import DepthExceeded, NotInAmbient, PreconditionViolated
from src.groups import GeneratedSubgroup, TruncatedWreathGroup, fixed_vertices, level_stabilizer_gens
from src.irs import (
    CoupledIRS,
    DiracSubgroup,
    EmpiricalDistribution,
    FixedRayIRS,
    HangingPiece,
    LevelIRS,
    StabilizerOfRandomSet,
    UniformConjugate,
    build_sampler,
    conjugated_exact_distribution,
    estimate_atom_mass,
    exact_distribution,
    fingerprint,
    fix_set_of_sample,
    invariance_test,
    invariance_threshold,
    sample_distribution,
    total_variation,
)


class TestFingerprint:
    """Tests for subgroup fingerprints."""

    def test_exact_fingerprint(self, s2_2, swap_at_0):
        """An enumerable subgroup lists its truncated elements."""
        fp = fingerprint(GeneratedSubgroup(s2_2, (swap_at_0,)), 2)
        assert fp.exact
        assert fp.order == 2

    def test_truncation_collapses(self, s2_2, swap_at_0):
        """At depth 1 the swap at 0 is invisible."""
        assert fingerprint(GeneratedSubgroup(s2_2, (swap_at_0,)), 1).order == 1

    def test_equal_subgroups_equal_digests(self, s2_2, swap_at_0):
        """Different generator lists of one subgroup share a digest."""
        swap_at_1 = FinitaryAutomorphism.from_portrait(2, {"1": [1, 0]})
        A = GeneratedSubgroup(s2_2, (swap_at_0, swap_at_1))
        B = GeneratedSubgroup(s2_2, (swap_at_0, compose(swap_at_0, swap_at_1)))
        assert fingerprint(A, 2).digest == fingerprint(B, 2).digest

    def test_signature_fallback(self, s2_3):
        """Past the order cap the fingerprint falls back to orbits."""
        H = GeneratedSubgroup(s2_3, tuple(s2_3.elementary_generators(s2_3.vertices())), order_cap=10)
        fp = fingerprint(H, 3)
        assert not fp.exact
        assert fp.order is None
        assert fp.to_json()["orbits"][3] == [["000", "001", "010", "011", "100", "101", "110", "111"]]

    def test_cap_does_not_leak_between_fingerprints(self, s2_3):
        """The same subgroup with a larger cap is fingerprinted exactly."""
        gens = tuple(s2_3.elementary_generators(s2_3.vertices()))
        assert not fingerprint(GeneratedSubgroup(s2_3, gens, order_cap=10), 3).exact
        assert fingerprint(GeneratedSubgroup(s2_3, gens), 3).exact

    def test_translate(self, s2_2, swap_at_0, root_swap):
        """Translating a fingerprint equals fingerprinting the conjugate."""
        H = GeneratedSubgroup(s2_2, (swap_at_0,))
        assert fingerprint(H, 2).translate(root_swap) == fingerprint(H.conjugate_by(root_swap), 2)

    def test_depth_range(self, s2_2):
        """Depth beyond the ambient group is rejected."""
        with pytest.raises(DepthExceeded):
            fingerprint(GeneratedSubgroup(s2_2), 3)


class TestUniformConjugate:
    """Tests for uniform conjugates and Dirac samplers."""

    def test_exact_distribution(self, s2_2, swap_at_0):
        """<swap at 0> and <swap at 1> each carry half the mass."""
        dist = exact_distribution(UniformConjugate(GeneratedSubgroup(s2_2, (swap_at_0,))), 2)
        assert sorted(dist.values()) == [Fraction(1, 2), Fraction(1, 2)]

    def test_invariant_under_conjugation(self, s2_2, swap_at_0, root_swap):
        """A uniform conjugate is exactly invariant."""
        sampler = UniformConjugate(GeneratedSubgroup(s2_2, (swap_at_0,)))
        moved = conjugated_exact_distribution(sampler, root_swap, 2)
        assert total_variation(exact_distribution(sampler, 2), moved) == 0

    def test_dirac_of_normal_subgroup(self, s2_2, root_swap):
        """A normal subgroup gives an invariant point mass."""
        sampler = DiracSubgroup(level_stabilizer_gens(s2_2, 1))
        assert list(exact_distribution(sampler, 2).values()) == [1]
        assert total_variation(exact_distribution(sampler, 2), conjugated_exact_distribution(sampler, root_swap, 2)) == 0

    def test_dirac_of_non_normal_subgroup(self, s2_2, swap_at_0, root_swap):
        """<swap at 0> is moved off itself by the root swap."""
        sampler = DiracSubgroup(GeneratedSubgroup(s2_2, (swap_at_0,)))
        moved = conjugated_exact_distribution(sampler, root_swap, 2)
        assert total_variation(exact_distribution(sampler, 2), moved) == 1

    def test_describe(self, s2_2, swap_at_0):
        """Descriptions name the kind."""
        assert UniformConjugate(GeneratedSubgroup(s2_2, (swap_at_0,))).describe()["kind"] == "uniform_conjugate"

    def test_atom_mass(self, s2_2, swap_at_0, rng):
        """Two conjugates share the sampled mass about equally."""
        sampler = UniformConjugate(GeneratedSubgroup(s2_2, (swap_at_0,)))
        estimate = estimate_atom_mass(sampler, 4000, 2, rng)
        assert estimate.support_size == 2
        assert abs(estimate.max_frequency - Fraction(1, 2)) < Fraction(1, 20)


class TestStabilizerOfRandomSet:
    """Tests for stabilizers of random translates."""

    def test_point_stabilizers(self):
        """Stabilizers of the three level-1 points of the ternary tree."""
        sampler = StabilizerOfRandomSet(ClosedSetApprox.ray(3, "0"), TruncatedWreathGroup(3, 1))
        assert sorted(exact_distribution(sampler, 1).values()) == [Fraction(1, 3)] * 3

    def test_pointwise_order(self, s2_2, rng):
        """The stabilizer of a leaf of S_2^wr(2) has order 2."""
        sampler = StabilizerOfRandomSet(ClosedSetApprox.ray(2, "00"), s2_2)
        assert sampler.sample(rng).order() == 2

    def test_setwise(self, s2_2, rng):
        """The setwise stabilizer of two opposite leaves has order 2."""
        C = ClosedSetApprox.from_leaves(2, 2, ["00", "11"])
        assert StabilizerOfRandomSet(C, s2_2, "setwise").sample(rng).order() == 2

    def test_short_set_is_read_at_ambient_depth(self, s2_2):
        """Sh("0") is read at depth 2, where its pointwise stabilizer has order 2."""
        sampler = StabilizerOfRandomSet(ClosedSetApprox.ray(2, "0"), s2_2)
        assert sampler.sample_given(s2_2.identity()).order() == 2

    def test_bad_mode(self, s2_2):
        """Only pointwise and setwise modes exist."""
        with pytest.raises(PreconditionViolated):
            StabilizerOfRandomSet(ClosedSetApprox.ray(2, "00"), s2_2, "orbitwise")

    def test_set_deeper_than_group(self, s2_2):
        """The set must fit the ambient depth."""
        with pytest.raises(DepthExceeded):
            StabilizerOfRandomSet(ClosedSetApprox.ray(2, "000"), s2_2)

    def test_fix_set_of_sample(self, s2_2, rng):
        """A leaf stabilizer fixes the leaf."""
        H = StabilizerOfRandomSet(ClosedSetApprox.ray(2, "00"), s2_2).sample_given(s2_2.identity())
        assert "00" in fix_set_of_sample(H).leaves


class TestLevelIRS:
    """Tests for level IRS's."""

    def test_trivial_top(self, s2_3, rng):
        """With a trivial top the sample is Stab(L_1)."""
        sampler = LevelIRS(s2_3, 1, GeneratedSubgroup(s2_3.truncated(1)))
        assert sampler.sample(rng).order() == 64

    def test_full_top(self, s2_3, rng):
        """With the whole top the sample is the whole group."""
        sampler = LevelIRS(s2_3, 1, s2_3.truncated(1).full())
        assert sampler.sample(rng).order() == 128

    def test_exact_distribution(self, s2_3):
        """Stab(L_1) is normal, so the level IRS is a point mass."""
        sampler = LevelIRS(s2_3, 1, GeneratedSubgroup(s2_3.truncated(1)))
        assert list(exact_distribution(sampler, 3).values()) == [1]

    def test_top_must_match_level(self, s2_3):
        """The top subgroup lives in the depth-level group."""
        with pytest.raises(NotInAmbient):
            LevelIRS(s2_3, 1, GeneratedSubgroup(s2_3.truncated(2)))

    def test_level_too_deep(self, s2_3):
        """The level lies inside the ambient depth."""
        with pytest.raises(DepthExceeded):
            LevelIRS(s2_3, 4, GeneratedSubgroup(s2_3))

    @settings(derandomize=True, max_examples=30, deadline=None)
    @given(st.integers(min_value=0, max_value=2**32 - 1))
    def test_fixed_vertices_follow_top(self, seed):
        """At the level, a sample fixes what the conjugated top fixes."""
        G = TruncatedWreathGroup(2, 3)
        top = GeneratedSubgroup(G.truncated(2), (FinitaryAutomorphism.from_portrait(2, {"0": [1, 0]}),))
        gamma = haar_sample(2, 2, Flavor.SYMMETRIC, np.random.default_rng(seed))
        fixed = fixed_vertices(LevelIRS(G, 2, top).sample_given(gamma), 2)
        assert fixed.members == fixed_vertices(top.conjugate_by(gamma), 2).members
        assert len(fixed.members) == 2


class TestFixedRay:
    """Tests for fixed-ray and coupled IRS's."""

    def test_fixes_exactly_one_leaf(self, rng):
        """The default fixed-ray IRS on the ternary tree fixes one leaf."""
        sampler = FixedRayIRS(TruncatedWreathGroup(3, 2))
        for _ in range(5):
            assert len(fix_set_of_sample(sampler.sample(rng)).leaves) == 1

    def test_piece_must_fix_ray_child(self, s2_3, root_swap):
        """A top generator moving the ray child is rejected."""
        with pytest.raises(NotInAmbient):
            FixedRayIRS(s2_3, ((0, HangingPiece(1, (root_swap,))),))

    def test_piece_index_range(self, s2_3):
        """Hanging trees are indexed 0..n-1."""
        with pytest.raises(DepthExceeded):
            FixedRayIRS(s2_3, ((3, HangingPiece()),))

    def test_unlisted_pieces_are_whole(self, s2_3):
        """Pieces not given are whole hanging groups."""
        assert FixedRayIRS(s2_3).piece(2) == HangingPiece()

    def test_coupled_fixes_one_leaf(self, rng):
        """The coupled IRS still fixes exactly one ray."""
        sampler = CoupledIRS(TruncatedWreathGroup(3, 3))
        for _ in range(3):
            assert len(fix_set_of_sample(sampler.sample(rng)).leaves) == 1

    def test_coupled_needs_two_trees(self):
        """Coupling needs two hanging trees."""
        with pytest.raises(DepthExceeded):
            CoupledIRS(TruncatedWreathGroup(2, 1))

    def test_coupled_describe(self):
        """The coupled pieces are described separately."""
        info = CoupledIRS(TruncatedWreathGroup(3, 3)).describe()
        assert info["kind"] == "coupled"
        assert set(info["pieces"]) == {"2"}

    def test_no_exact_distribution(self, s2_3):
        """Fixed-ray samplers are not driven by a single group element."""
        with pytest.raises(PreconditionViolated):
            exact_distribution(FixedRayIRS(s2_3), 3)


class TestDistributions:
    """Tests for empirical distributions and invariance testing."""

    def test_sample_distribution_counts(self, s2_2, swap_at_0, rng):
        """Trials add up and the support is at most two."""
        dist = sample_distribution(UniformConjugate(GeneratedSubgroup(s2_2, (swap_at_0,))), 100, 2, rng)
        assert dist.trials == 100
        assert dist.support_size == 2

    def test_needs_trials(self, s2_2, rng):
        """Zero trials are rejected."""
        with pytest.raises(PreconditionViolated):
            sample_distribution(DiracSubgroup(GeneratedSubgroup(s2_2)), 0, 2, rng)

    def test_merge(self):
        """Merging adds counts."""
        a = EmpiricalDistribution(2, counts=Counter({"x": 2}))
        b = EmpiricalDistribution(2, counts=Counter({"x": 1, "y": 1}))
        assert a.merge(b).counts == Counter({"x": 3, "y": 1})

    def test_merge_depth_mismatch(self):
        """Distributions of different depth do not merge."""
        with pytest.raises(PreconditionViolated):
            EmpiricalDistribution(2).merge(EmpiricalDistribution(3))

    def test_atom_mass_of_point_mass(self, s2_2, rng):
        """A Dirac sampler has a single atom of mass 1."""
        estimate = estimate_atom_mass(DiracSubgroup(level_stabilizer_gens(s2_2, 1)), 20, 2, rng)
        assert estimate.max_frequency == 1
        assert estimate.support_size == 1

    def test_total_variation(self):
        """TV of disjoint point masses is 1."""
        assert total_variation({"a": Fraction(1)}, {"b": Fraction(1)}) == 1

    def test_threshold(self):
        """4 sqrt(support / trials)."""
        assert invariance_threshold(4, 400) == pytest.approx(0.4)

    def test_invariant_sampler_passes(self, s2_2, swap_at_0, root_swap, rng):
        """A uniform conjugate passes the invariance test."""
        sampler = UniformConjugate(GeneratedSubgroup(s2_2, (swap_at_0,)))
        assert invariance_test(sampler, root_swap, 400, rng).passed

    def test_non_invariant_sampler_fails(self, s2_2, swap_at_0, root_swap, rng):
        """A Dirac mass at a non-normal subgroup fails."""
        result = invariance_test(DiracSubgroup(GeneratedSubgroup(s2_2, (swap_at_0,))), root_swap, 100, rng)
        assert not result.passed
        assert result.statistic == 1

    def test_conjugator_in_ambient(self, s2_2, rng):
        """The conjugator must lie in the ambient group."""
        deep = FinitaryAutomorphism.from_portrait(2, {"00": [1, 0]})
        with pytest.raises(NotInAmbient):
            invariance_test(DiracSubgroup(GeneratedSubgroup(s2_2)), deep, 10, rng)

    def test_distribution_json(self, s2_2, rng):
        """JSON lists the support by digest."""
        data = sample_distribution(DiracSubgroup(GeneratedSubgroup(s2_2)), 5, 2, rng, seed=3).to_json()
        assert data["trials"] == 5
        assert data["seed"] == 3
        assert data["support"][0]["count"] == 5


class TestBuildSampler:
    """Tests for building samplers from config entries."""

    def test_level(self, s2_3):
        """Level entries build level IRS's."""
        sampler = build_sampler(LevelSpec(kind="level", level=1), s2_3)
        assert isinstance(sampler, LevelIRS)
        assert sampler.level == 1

    def test_stabilizer(self, s2_3):
        """Set entries are resolved against the arity."""
        spec = StabilizerSpec(kind="stabilizer_of_random_set", set=ClosedSetSpec(ray="01"))
        sampler = build_sampler(spec, s2_3)
        assert sampler.C == ClosedSetApprox.ray(2, "01")

    def test_fixed_ray_pieces(self, s2_3):
        """Piece entries are keyed by hanging tree."""
        sampler = build_sampler(FixedRaySpec(kind="fixed_ray", pieces={1: PieceSpec(level=1)}), s2_3)
        assert sampler.piece(1).level == 1

    def test_coupled(self):
        """Coupled entries carry the coupled top."""
        sampler = build_sampler(CoupledSpec(kind="coupled"), TruncatedWreathGroup(3, 3))
        assert isinstance(sampler, CoupledIRS)
        assert sampler.coupling is None

    def test_generator_outside_ambient(self, s2_2):
        """Generators are checked against the ambient group."""
        spec = UniformConjugateSpec(kind="uniform_conjugate", generators=[{"00": [1, 0]}])
        with pytest.raises(NotInAmbient):
            build_sampler(spec, s2_2)

    def test_seeded_sampling_is_reproducible(self, s2_3):
        """Equal seeds give equal distributions."""
        sampler = FixedRayIRS(s2_3)
        a = sample_distribution(sampler, 10, 3, np.random.default_rng(5))
        b = sample_distribution(sampler, 10, 3, np.random.default_rng(5))
        assert a.counts == b.counts
