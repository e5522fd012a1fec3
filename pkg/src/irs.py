"""Invariant random subgroup samplers, subgroup fingerprints and empirical distributions.

Every sampler draws a subgroup of a truncated wreath group. Samplers whose
only randomness is one uniform element of a finite group expose it as
``conjugator_group`` and ``sample_given``, which makes their exact
distribution computable by enumeration.
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Iterable, Mapping, Protocol

import numpy as np

from src.autom import (
    FinitaryAutomorphism,
    apply,
    base_generators,
    base_perms,
    conjugate,
    graft,
    haar_sample,
    haar_sample_at,
    truncate,
)
from src.boundary import ClosedSetApprox, fixed_boundary, translate_set
from src.config import closed_set_from_spec
from src.errors import DepthExceeded, NotInAmbient, OrderCapExceeded, PreconditionViolated
from src.groups import (
    GeneratedSubgroup,
    TruncatedWreathGroup,
    current_order_cap,
    fixed_vertices,
    level_stabilizer_gens,
    orbits,
    perms_fixing,
    pointwise_stabilizer_gens,
    setwise_stabilizer,
)
from src.tree import LevelSet, VertexAddress
from src.utils import canonical_json, sha256_hex

logger = logging.getLogger(__name__)


# --- fingerprints -----------------------------------------------------------


@dataclass(frozen=True)
class SubgroupFingerprint:
    """Canonical image of a subgroup in the depth truncation.

    ``members`` lists the truncated elements when the subgroup could be
    enumerated; otherwise it is empty and ``signature`` holds the orbit
    partitions and fixed sets of levels 0..depth instead.
    """

    depth: int
    members: tuple[FinitaryAutomorphism, ...] = ()
    signature: tuple = ()

    @property
    def exact(self) -> bool:
        return bool(self.members)

    @property
    def order(self) -> int | None:
        return len(self.members) if self.members else None

    def translate(self, g: FinitaryAutomorphism) -> "SubgroupFingerprint":
        """Fingerprint of H^g given the fingerprint of H."""
        g = truncate(g, self.depth)
        if self.exact:
            return SubgroupFingerprint(self.depth, _sorted_members(conjugate(h, g) for h in self.members))
        partitions, fixed = self.signature
        moved_partitions = tuple(
            tuple(sorted(tuple(sorted(apply(g, v) for v in block)) for block in blocks)) for blocks in partitions
        )
        moved_fixed = tuple(tuple(sorted(apply(g, v) for v in level)) for level in fixed)
        return SubgroupFingerprint(self.depth, (), (moved_partitions, moved_fixed))

    def to_json(self) -> dict:
        if self.exact:
            return {"depth": self.depth, "order": self.order, "elements": [h.key for h in self.members]}
        partitions, fixed = self.signature
        return {
            "depth": self.depth,
            "order": None,
            "orbits": [[list(b) for b in blocks] for blocks in partitions],
            "fixed": [list(level) for level in fixed],
        }

    @cached_property
    def digest(self) -> str:
        return sha256_hex(canonical_json(self.to_json()))


def _sorted_members(elements: Iterable[FinitaryAutomorphism]) -> tuple[FinitaryAutomorphism, ...]:
    unique = {g.key: g for g in elements}
    return tuple(unique[k] for k in sorted(unique))


def _check_depth(H: GeneratedSubgroup, depth: int) -> None:
    if depth < 0 or depth > H.ambient.n:
        raise DepthExceeded(f"Fingerprint depth {depth} outside ambient depth {H.ambient.n}")


@lru_cache(maxsize=4096)
def _fingerprint(H: GeneratedSubgroup, depth: int, order_cap: int) -> SubgroupFingerprint:
    try:
        elements = H.enumerate().elements
    except OrderCapExceeded as e:
        logger.warning(f"Fingerprint falls back to orbit signature: {e}")
        partitions = tuple(tuple(orbits(H, k).sorted_blocks()) for k in range(depth + 1))
        partitions = tuple(tuple(tuple(b) for b in blocks) for blocks in partitions)
        fixed = tuple(tuple(fixed_vertices(H, k)) for k in range(depth + 1))
        return SubgroupFingerprint(depth, (), (partitions, fixed))
    return SubgroupFingerprint(depth, _sorted_members(truncate(h, depth) for h in elements))


def fingerprint(H: GeneratedSubgroup, depth: int) -> SubgroupFingerprint:
    """Canonical encoding of the image of H at levels <= depth."""
    _check_depth(H, depth)
    # order_cap is not part of subgroup equality
    return _fingerprint(H, depth, H.order_cap)


# --- samplers ---------------------------------------------------------------


class IRSSampler(Protocol):
    ambient: TruncatedWreathGroup

    def sample(self, rng: np.random.Generator) -> GeneratedSubgroup: ...

    def describe(self) -> dict: ...


@dataclass(frozen=True)
class UniformConjugate:
    """L^gamma for a Haar-random gamma of the ambient group."""

    L: GeneratedSubgroup

    @property
    def ambient(self) -> TruncatedWreathGroup:
        return self.L.ambient

    @property
    def conjugator_group(self) -> TruncatedWreathGroup:
        return self.ambient

    def sample_given(self, gamma: FinitaryAutomorphism) -> GeneratedSubgroup:
        return self.L.conjugate_by(gamma)

    def sample(self, rng: np.random.Generator) -> GeneratedSubgroup:
        G = self.ambient
        return self.sample_given(haar_sample(G.d, G.n, G.flavor, rng))

    def describe(self) -> dict:
        return {"kind": "uniform_conjugate", "subgroup": self.L.describe()}


@dataclass(frozen=True)
class DiracSubgroup:
    """Always L. Invariant only when L is normal."""

    L: GeneratedSubgroup

    @property
    def ambient(self) -> TruncatedWreathGroup:
        return self.L.ambient

    @property
    def conjugator_group(self) -> TruncatedWreathGroup:
        return self.ambient

    def sample_given(self, gamma: FinitaryAutomorphism) -> GeneratedSubgroup:
        return self.L

    def sample(self, rng: np.random.Generator) -> GeneratedSubgroup:
        return self.L

    def describe(self) -> dict:
        return {"kind": "dirac", "subgroup": self.L.describe()}


@lru_cache(maxsize=1024)
def _setwise_stabilizer(full: GeneratedSubgroup, V: LevelSet) -> GeneratedSubgroup:
    return setwise_stabilizer(full, V)


@dataclass(frozen=True)
class StabilizerOfRandomSet:
    """Stabilizer of a Haar-random translate of C.

    C is read at the ambient depth (the shadow of its leaves), so the sample
    is the stabilizer of the clopen set the truncation stands for.
    """

    C: ClosedSetApprox
    ambient: TruncatedWreathGroup
    mode: str = "pointwise"

    def __post_init__(self):
        if self.mode not in ("pointwise", "setwise"):
            raise PreconditionViolated(f"Unknown stabilizer mode {self.mode!r}")
        if self.C.d != self.ambient.d:
            raise PreconditionViolated(f"Closed set has d={self.C.d}, ambient has d={self.ambient.d}")
        if self.C.depth > self.ambient.n:
            raise DepthExceeded(f"Closed set depth {self.C.depth} exceeds ambient depth {self.ambient.n}")

    @property
    def conjugator_group(self) -> TruncatedWreathGroup:
        return self.ambient

    def translated_set(self, gamma: FinitaryAutomorphism) -> ClosedSetApprox:
        return translate_set(self.C, gamma)

    def sample_given(self, gamma: FinitaryAutomorphism) -> GeneratedSubgroup:
        G = self.ambient
        shadow = self.translated_set(gamma).extend(G.n).leaves
        if self.mode == "pointwise":
            return pointwise_stabilizer_gens(G, shadow)
        return _setwise_stabilizer(G.full(), shadow)

    def sample(self, rng: np.random.Generator) -> GeneratedSubgroup:
        G = self.ambient
        return self.sample_given(haar_sample(G.d, G.n, G.flavor, rng))

    def describe(self) -> dict:
        return {"kind": "stabilizer_of_random_set", "mode": self.mode, "set": self.C.to_json()}


def _lift(G: TruncatedWreathGroup, g: FinitaryAutomorphism) -> FinitaryAutomorphism:
    if not G.contains(g):
        raise NotInAmbient(f"{g!r} is not in {G.describe()}")
    return FinitaryAutomorphism._trusted(G.d, g.portrait, G.n)


@dataclass(frozen=True)
class LevelIRS:
    """A uniform conjugate of L_top extended by the level-n stabilizer."""

    ambient: TruncatedWreathGroup
    level: int
    L_top: GeneratedSubgroup

    def __post_init__(self):
        if self.level > self.ambient.n:
            raise DepthExceeded(f"Level {self.level} below ambient depth {self.ambient.n}")
        top = self.ambient.truncated(self.level)
        if self.L_top.ambient != top:
            raise NotInAmbient(f"Top subgroup must live in {top.describe()}")

    @property
    def conjugator_group(self) -> TruncatedWreathGroup:
        return self.ambient.truncated(self.level)

    def sample_given(self, gamma: FinitaryAutomorphism) -> GeneratedSubgroup:
        G = self.ambient
        gens = [_lift(G, conjugate(t, gamma)) for t in self.L_top.generators]
        gens.extend(level_stabilizer_gens(G, self.level).generators)
        return GeneratedSubgroup(G, tuple(gens))

    def sample(self, rng: np.random.Generator) -> GeneratedSubgroup:
        top = self.conjugator_group
        return self.sample_given(haar_sample(top.d, top.n, top.flavor, rng))

    def describe(self) -> dict:
        return {"kind": "level", "level": self.level, "top": self.L_top.describe()}


@dataclass(frozen=True)
class _HangingTree:
    """The tree T_i hanging off the ray 0^N at u_i = 0^i, in the ambient group.

    Elements are written relative to u_i: the root permutation must fix the
    digit 0 and nothing is supported below the child 0.
    """

    ambient: TruncatedWreathGroup
    index: int

    @property
    def root(self) -> VertexAddress:
        return "0" * self.index

    def relative_vertices(self, start: int, stop: int) -> list[VertexAddress]:
        """Relative addresses at relative levels [start, stop) that fall above the ambient depth."""
        G = self.ambient
        stop = min(stop, G.n - self.index)
        out = []
        for k in range(max(start, 0), stop):
            if k == 0:
                out.append("")
            else:
                out.extend(w for w in G.tree.level(k) if w[0] != "0")
        return out

    def contains_relative(self, t: FinitaryAutomorphism, depth: int) -> bool:
        root_perm = t.portrait.get("")
        if root_perm is not None and root_perm[0] != 0:
            return False
        if any(v.startswith("0") or len(v) >= depth for v in t.portrait):
            return False
        return TruncatedWreathGroup(self.ambient.d, max(depth, 0), self.ambient.flavor).contains(t)

    def lift(self, t: FinitaryAutomorphism) -> FinitaryAutomorphism:
        return _lift(self.ambient, graft(t, self.root))

    def top_haar(self, depth: int, rng: np.random.Generator) -> FinitaryAutomorphism:
        """Uniform element of the piece's top group of the given relative depth, relative form."""
        G = self.ambient
        vertices = self.relative_vertices(0, depth)
        if not vertices:
            return FinitaryAutomorphism.identity(G.d)
        portrait = {}
        if vertices[0] == "":
            attach = [p for p in base_perms(G.d, G.flavor) if p[0] == 0]
            p = attach[int(rng.integers(len(attach)))]
            if p != tuple(range(G.d)):
                portrait[""] = p
            vertices = vertices[1:]
        rest = haar_sample_at(G.d, vertices, G.flavor, rng)
        portrait.update(rest.portrait)
        return FinitaryAutomorphism._trusted(G.d, portrait, max(len(v) + 1 for v in [""] + vertices))

    def top_generators(self, depth: int) -> list[FinitaryAutomorphism]:
        """Generators of the whole top group of the given relative depth, relative form."""
        G = self.ambient
        gens = []
        for w in self.relative_vertices(0, depth):
            perms = perms_fixing(G.d, G.flavor, frozenset([0])) if w == "" else base_generators(G.d, G.flavor)
            gens.extend(FinitaryAutomorphism.elementary(G.d, w, p) for p in perms)
        return gens

    def stabilizer_gens(self, level: int) -> list[FinitaryAutomorphism]:
        """Generators (absolute) of the piece's stabilizer of relative level m; m = 0 is the whole piece."""
        return [self.lift(t) for t in self.top_generators(self.ambient.n) if _relative_level(t) >= level]


def _relative_level(t: FinitaryAutomorphism) -> int:
    return len(t.support()[0])


@dataclass(frozen=True)
class HangingPiece:
    """Per-piece data: top depth m and the top subgroup, in relative form."""

    level: int = 0
    generators: tuple[FinitaryAutomorphism, ...] = ()

    def to_json(self) -> dict:
        return {"level": self.level, "generators": [g.to_json()["perms"] for g in self.generators]}


def _check_piece(tree: _HangingTree, piece: HangingPiece) -> None:
    for t in piece.generators:
        if not tree.contains_relative(t, piece.level):
            raise NotInAmbient(f"{t!r} is not in the top group of hanging tree {tree.index} at depth {piece.level}")


@dataclass(frozen=True)
class FixedRayIRS:
    """Direct sum of independent level IRS's on the trees hanging off a random ray.

    Pieces not listed contribute their whole hanging group.
    """

    ambient: TruncatedWreathGroup
    pieces: tuple[tuple[int, HangingPiece], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "pieces", tuple(sorted(dict(self.pieces).items())))
        for i, piece in self.pieces:
            if not 0 <= i < self.ambient.n:
                raise DepthExceeded(f"Hanging tree {i} is below ambient depth {self.ambient.n}")
            _check_piece(_HangingTree(self.ambient, i), piece)

    def piece(self, i: int) -> HangingPiece:
        return dict(self.pieces).get(i, HangingPiece())

    def _piece_gens(self, i: int, rng: np.random.Generator) -> list[FinitaryAutomorphism]:
        tree = _HangingTree(self.ambient, i)
        piece = self.piece(i)
        tau = tree.top_haar(piece.level, rng)
        gens = [tree.lift(conjugate(t, tau)) for t in piece.generators]
        gens.extend(tree.stabilizer_gens(piece.level))
        return gens

    def _ray_gens(self, rng: np.random.Generator, skip: Iterable[int] = ()) -> list[FinitaryAutomorphism]:
        skip = set(skip)
        gens = []
        for i in range(self.ambient.n):
            if i not in skip:
                gens.extend(self._piece_gens(i, rng))
        return gens

    def _globally_conjugated(self, gens: list[FinitaryAutomorphism], rng: np.random.Generator) -> GeneratedSubgroup:
        G = self.ambient
        gamma = haar_sample(G.d, G.n, G.flavor, rng)
        return GeneratedSubgroup(G, tuple(conjugate(g, gamma) for g in gens))

    def sample(self, rng: np.random.Generator) -> GeneratedSubgroup:
        return self._globally_conjugated(self._ray_gens(rng), rng)

    def describe(self) -> dict:
        return {
            "kind": "fixed_ray",
            "ambient": self.ambient.describe(),
            "pieces": {str(i): self.piece(i).to_json() for i in range(self.ambient.n)},
        }


@dataclass(frozen=True)
class CoupledIRS(FixedRayIRS):
    """Like FixedRayIRS, but the tops of the first two hanging trees are coupled.

    The top subgroup on T_0 x T_1 is the twisted diagonal {(t, t^tau)} for t in
    ``coupled`` (the whole top group when empty), randomized by an independent
    conjugator on each side.
    """

    coupled: HangingPiece = HangingPiece(level=1)
    coupling: FinitaryAutomorphism | None = None

    def __post_init__(self):
        super().__post_init__()
        if self.ambient.n < 2:
            raise DepthExceeded("Coupling needs at least two hanging trees")
        for i in (0, 1):
            _check_piece(_HangingTree(self.ambient, i), self.coupled)
        if self.coupling is not None and not _HangingTree(self.ambient, 0).contains_relative(
            self.coupling, self.coupled.level
        ):
            raise NotInAmbient("Coupling automorphism must lie in the coupled top group")

    def _diagonal_gens(self, rng: np.random.Generator) -> list[FinitaryAutomorphism]:
        first, second = _HangingTree(self.ambient, 0), _HangingTree(self.ambient, 1)
        m = self.coupled.level
        sources = list(self.coupled.generators) or first.top_generators(m)
        tau = self.coupling or FinitaryAutomorphism.identity(self.ambient.d)
        gamma0, gamma1 = first.top_haar(m, rng), second.top_haar(m, rng)
        gens = []
        for t in sources:
            left = first.lift(conjugate(t, gamma0))
            right = second.lift(conjugate(conjugate(t, tau), gamma1))
            gens.append(_lift(self.ambient, _product(left, right)))
        gens.extend(first.stabilizer_gens(m))
        gens.extend(second.stabilizer_gens(m))
        return gens

    def sample(self, rng: np.random.Generator) -> GeneratedSubgroup:
        gens = self._diagonal_gens(rng) + self._ray_gens(rng, skip=(0, 1))
        return self._globally_conjugated(gens, rng)

    def describe(self) -> dict:
        info = super().describe()
        info["kind"] = "coupled"
        info["coupled"] = self.coupled.to_json()
        info["coupling"] = self.coupling.to_json()["perms"] if self.coupling else {}
        for i in ("0", "1"):
            info["pieces"].pop(i, None)
        return info


def _product(a: FinitaryAutomorphism, b: FinitaryAutomorphism) -> FinitaryAutomorphism:
    # disjoint supports, so the portraits simply merge
    return FinitaryAutomorphism._trusted(a.d, {**a.portrait, **b.portrait}, max(a.depth, b.depth))


# --- distributions ----------------------------------------------------------


@dataclass
class EmpiricalDistribution:
    """Counts of sampled fingerprints, keyed by digest."""

    depth: int
    seed: int | None = None
    counts: Counter = field(default_factory=Counter)
    fingerprints: dict[str, SubgroupFingerprint] = field(default_factory=dict)

    @property
    def trials(self) -> int:
        return sum(self.counts.values())

    def add(self, fp: SubgroupFingerprint, count: int = 1) -> None:
        self.counts[fp.digest] += count
        self.fingerprints.setdefault(fp.digest, fp)

    def merge(self, other: "EmpiricalDistribution") -> "EmpiricalDistribution":
        if other.depth != self.depth:
            raise PreconditionViolated(f"Cannot merge depth {other.depth} into depth {self.depth}")
        merged = EmpiricalDistribution(self.depth, self.seed, Counter(self.counts), dict(self.fingerprints))
        merged.counts.update(other.counts)
        for digest, fp in other.fingerprints.items():
            merged.fingerprints.setdefault(digest, fp)
        return merged

    @property
    def support_size(self) -> int:
        return len(self.counts)

    def frequencies(self) -> dict[str, Fraction]:
        total = self.trials
        return {digest: Fraction(c, total) for digest, c in self.counts.items()}

    def max_frequency(self) -> Fraction:
        if not self.counts:
            return Fraction(0)
        return Fraction(max(self.counts.values()), self.trials)

    def to_json(self) -> dict:
        return {
            "depth": self.depth,
            "trials": self.trials,
            "seed": self.seed,
            "support": [
                {"fingerprint_hash": digest, "count": self.counts[digest]} for digest in sorted(self.counts)
            ],
        }


def sample_distribution(
    sampler: IRSSampler, trials: int, depth: int, rng: np.random.Generator, seed: int | None = None
) -> EmpiricalDistribution:
    """Fingerprints of `trials` independent samples."""
    if trials < 1:
        raise PreconditionViolated(f"Need at least one trial, got {trials}")
    dist = EmpiricalDistribution(depth, seed)
    for _ in range(trials):
        dist.add(fingerprint(sampler.sample(rng), depth))
    logger.debug(f"{trials} samples at depth {depth}: support {dist.support_size}")
    return dist


@dataclass(frozen=True)
class AtomMassEstimate:
    max_frequency: Fraction
    support_size: int
    distribution: EmpiricalDistribution = field(compare=False, repr=False)

    def to_json(self) -> dict:
        return {
            **self.distribution.to_json(),
            "max_frequency": str(self.max_frequency),
            "support_size": self.support_size,
        }


def estimate_atom_mass(
    sampler: IRSSampler, trials: int, depth: int, rng: np.random.Generator, seed: int | None = None
) -> AtomMassEstimate:
    """Empirical largest point mass and number of distinct fingerprints."""
    dist = sample_distribution(sampler, trials, depth, rng, seed)
    return AtomMassEstimate(dist.max_frequency(), dist.support_size, dist)


def exact_distribution(sampler, depth: int) -> dict[str, Fraction]:
    """Exact fingerprint distribution of a sampler driven by one uniform group element."""
    group = getattr(sampler, "conjugator_group", None)
    if group is None:
        raise PreconditionViolated(f"{type(sampler).__name__} has no finite conjugator group")
    counts: Counter = Counter()
    for gamma in group.elements():
        counts[fingerprint(sampler.sample_given(gamma), depth).digest] += 1
    total = sum(counts.values())
    return {digest: Fraction(c, total) for digest, c in counts.items()}


def total_variation(p: Mapping[str, Fraction], q: Mapping[str, Fraction]) -> Fraction:
    """Half the L1 distance between two distributions over fingerprint digests."""
    keys = set(p) | set(q)
    return sum((abs(p.get(k, Fraction(0)) - q.get(k, Fraction(0))) for k in keys), Fraction(0)) / 2


def conjugated_exact_distribution(sampler, gamma: FinitaryAutomorphism, depth: int) -> dict[str, Fraction]:
    """Exact distribution of sample^gamma."""
    group = getattr(sampler, "conjugator_group", None)
    if group is None:
        raise PreconditionViolated(f"{type(sampler).__name__} has no finite conjugator group")
    counts: Counter = Counter()
    for g in group.elements():
        counts[fingerprint(sampler.sample_given(g).conjugate_by(gamma), depth).digest] += 1
    total = sum(counts.values())
    return {digest: Fraction(c, total) for digest, c in counts.items()}


@dataclass(frozen=True)
class InvarianceResult:
    statistic: Fraction
    threshold: float
    passed: bool
    support_size: int
    trials: int

    def to_json(self) -> dict:
        return {
            "statistic": str(self.statistic),
            "statistic_decimal": float(self.statistic),
            "threshold": self.threshold,
            "pass": self.passed,
            "support_size": self.support_size,
            "trials": self.trials,
        }


def invariance_threshold(support_size: int, trials: int) -> float:
    return 4 * math.sqrt(support_size / trials)


def invariance_test(
    sampler: IRSSampler,
    gamma: FinitaryAutomorphism,
    trials: int,
    rng: np.random.Generator,
    depth: int | None = None,
) -> InvarianceResult:
    """Total variation between samples and independently drawn conjugated samples."""
    G = sampler.ambient
    if not G.contains(gamma):
        raise NotInAmbient(f"{gamma!r} is not in {G.describe()}")
    depth = G.n if depth is None else depth
    gamma = _lift(G, gamma)
    plain = sample_distribution(sampler, trials, depth, rng)
    moved = EmpiricalDistribution(depth)
    for _ in range(trials):
        moved.add(fingerprint(sampler.sample(rng).conjugate_by(gamma), depth))
    statistic = total_variation(plain.frequencies(), moved.frequencies())
    support = len(set(plain.counts) | set(moved.counts))
    threshold = invariance_threshold(support, trials)
    logger.info(f"Invariance statistic {float(statistic):.4f} against threshold {threshold:.4f}")
    return InvarianceResult(statistic, threshold, statistic < threshold, support, trials)


def fix_set_of_sample(H: GeneratedSubgroup) -> ClosedSetApprox:
    """Fixed boundary of a sampled subgroup, read at the ambient depth."""
    return fixed_boundary(H)


# --- construction from config ----------------------------------------------


def _portraits(d: int, portraits: Iterable[Mapping]) -> tuple[FinitaryAutomorphism, ...]:
    return tuple(FinitaryAutomorphism.from_portrait(d, p) for p in portraits)


def _subgroup(G: TruncatedWreathGroup, portraits: Iterable[Mapping], order_cap: int) -> GeneratedSubgroup:
    return GeneratedSubgroup(G, tuple(_lift(G, g) for g in _portraits(G.d, portraits)), None, order_cap)


def _piece(d: int, spec) -> HangingPiece:
    return HangingPiece(spec.level, _portraits(d, spec.generators))


def build_sampler(spec, ambient: TruncatedWreathGroup, order_cap: int | None = None):
    """Turn a validated sampler spec from the experiment config into a sampler."""
    cap = order_cap or current_order_cap()
    d = ambient.d
    if spec.kind == "uniform_conjugate":
        return UniformConjugate(_subgroup(ambient, spec.generators, cap))
    if spec.kind == "dirac":
        return DiracSubgroup(_subgroup(ambient, spec.generators, cap))
    if spec.kind == "stabilizer_of_random_set":
        return StabilizerOfRandomSet(closed_set_from_spec(spec.set, d), ambient, spec.mode)
    if spec.kind == "level":
        top = ambient.truncated(spec.level)
        return LevelIRS(ambient, spec.level, _subgroup(top, spec.generators, cap))
    pieces = tuple((int(i), _piece(d, p)) for i, p in spec.pieces.items())
    if spec.kind == "fixed_ray":
        return FixedRayIRS(ambient, pieces)
    if spec.kind == "coupled":
        coupling = FinitaryAutomorphism.from_portrait(d, spec.coupling) if spec.coupling else None
        return CoupledIRS(ambient, pieces, _piece(d, spec.coupled), coupling)
    raise PreconditionViolated(f"Unknown sampler kind {spec.kind!r}")
