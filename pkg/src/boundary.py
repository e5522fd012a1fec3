"""Closed subsets of the tree boundary, their 3-coloring, and the tree decomposition they induce.

A ``ClosedSetApprox`` of depth N stores C_0..C_N, where C_k holds the level-k
vertices whose shadow meets the set. At depth N it stands for the clopen set
covered by the shadows of C_N.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping

from src.autom import FinitaryAutomorphism, apply, base_generators
from src.errors import DepthExceeded, InvalidAddress, PreconditionViolated
from src.groups import GeneratedSubgroup, TruncatedWreathGroup, below, perms_fixing
from src.tree import LevelDistance, LevelSet, RootedTree, VertexAddress

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClosedSetApprox:
    """Level-consistent vertex sets C_0..C_N approximating a closed boundary set."""

    d: int
    depth: int
    levels: tuple[LevelSet, ...]

    def __post_init__(self):
        if len(self.levels) != self.depth + 1:
            raise InvalidAddress(f"Expected {self.depth + 1} levels, got {len(self.levels)}")
        for k, level in enumerate(self.levels):
            if level.d != self.d or level.level != k:
                raise InvalidAddress(f"Level set {k} does not match d={self.d}")
        for k in range(self.depth):
            if {v[:-1] for v in self.levels[k + 1].members} != set(self.levels[k].members):
                raise InvalidAddress(f"Levels {k} and {k + 1} are inconsistent")

    # construction

    @classmethod
    def from_leaves(cls, d: int, depth: int, leaves: Iterable[VertexAddress]) -> "ClosedSetApprox":
        leaves = frozenset(leaves)
        levels = tuple(LevelSet(d, k, frozenset(v[:k] for v in leaves)) for k in range(depth + 1))
        return cls(d, depth, levels)

    @classmethod
    def empty(cls, d: int, depth: int) -> "ClosedSetApprox":
        return cls.from_leaves(d, depth, ())

    @classmethod
    def full(cls, d: int, depth: int) -> "ClosedSetApprox":
        return cls.from_leaves(d, depth, RootedTree(d).level(depth))

    @classmethod
    def from_shadows(cls, d: int, depth: int, vertices: Iterable[VertexAddress]) -> "ClosedSetApprox":
        """Union of the shadows of the given vertices (each at level <= depth)."""
        tree = RootedTree(d)
        leaves = set()
        for v in vertices:
            leaves |= tree.shadow_at_level(v, depth).members
        return cls.from_leaves(d, depth, leaves)

    @classmethod
    def ray(cls, d: int, digits: VertexAddress) -> "ClosedSetApprox":
        """A single boundary point truncated at len(digits)."""
        RootedTree(d).validate(digits)
        return cls.from_leaves(d, len(digits), [digits])

    @classmethod
    def initial_segment(cls, d: int, depth: int, r: Fraction) -> "ClosedSetApprox":
        """The closed set of measure r swept out by leftmost shadows, level by level.

        Its points are the rays lexicographically at most the d-adic expansion
        of r; when that expansion terminates the set is clopen.
        """
        r = Fraction(r)
        if not 0 <= r <= 1:
            raise PreconditionViolated(f"Measure must lie in [0, 1], got {r}")
        scaled = r * d**depth
        if scaled.denominator == 1:
            count = int(scaled)
        else:
            count = int(scaled) + 1
        words = RootedTree(d).level(depth)[:count]
        return cls.from_leaves(d, depth, words)

    # access

    @property
    def leaves(self) -> LevelSet:
        return self.levels[self.depth]

    def __getitem__(self, k: int) -> LevelSet:
        return self.levels[k]

    @property
    def is_empty(self) -> bool:
        return not self.levels[0].members

    @property
    def is_full(self) -> bool:
        return len(self.leaves) == self.d**self.depth

    def measure_upper(self) -> Fraction:
        """Measure of the clopen set the truncation stands for."""
        return self.leaves.measure()

    def truncate(self, depth: int) -> "ClosedSetApprox":
        if depth > self.depth:
            raise DepthExceeded(f"Set is only known to depth {self.depth}")
        return ClosedSetApprox(self.d, depth, self.levels[: depth + 1])

    def extend(self, depth: int) -> "ClosedSetApprox":
        """The same clopen set read at a deeper level."""
        if depth < self.depth:
            return self.truncate(depth)
        return ClosedSetApprox.from_shadows(self.d, depth, self.leaves.members)

    def union(self, other: "ClosedSetApprox") -> "ClosedSetApprox":
        _check_compatible(self, other)
        return ClosedSetApprox.from_leaves(self.d, self.depth, self.leaves.members | other.leaves.members)

    def translate(self, g: FinitaryAutomorphism) -> "ClosedSetApprox":
        return translate_set(self, g)

    def to_json(self) -> dict:
        return {"d": self.d, "depth": self.depth, "levels": [level.to_json() for level in self.levels]}

    @classmethod
    def from_json(cls, data: Mapping) -> "ClosedSetApprox":
        try:
            d, depth = int(data["d"]), int(data["depth"])
            levels = tuple(LevelSet(d, k, frozenset(members)) for k, members in enumerate(data["levels"]))
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidAddress(f"Malformed closed set: {e}") from e
        return cls(d, depth, levels)


def _check_compatible(C1: ClosedSetApprox, C2: ClosedSetApprox) -> None:
    if C1.d != C2.d or C1.depth != C2.depth:
        raise PreconditionViolated(
            f"Closed sets differ in arity or depth: ({C1.d}, {C1.depth}) vs ({C2.d}, {C2.depth})"
        )


def translate_set(C: ClosedSetApprox, g: FinitaryAutomorphism) -> ClosedSetApprox:
    """Image of C under g, level by level."""
    return ClosedSetApprox.from_leaves(C.d, C.depth, (apply(g, v) for v in C.leaves.members))


# --- coloring ---------------------------------------------------------------


class Color(str, Enum):
    RED = "r"
    GREEN = "g"
    BLUE = "b"


@dataclass(frozen=True)
class Coloring:
    """Red/green/blue vertex coloring of levels 0..N."""

    d: int
    depth: int
    colors: tuple[tuple[VertexAddress, Color], ...]

    @cached_property
    def mapping(self) -> dict[VertexAddress, Color]:
        return dict(self.colors)

    def __getitem__(self, v: VertexAddress) -> Color:
        return self.mapping[v]

    def at_level(self, k: int, color: Color) -> list[VertexAddress]:
        return [v for v, c in self.colors if len(v) == k and c is color]

    def translate(self, g: FinitaryAutomorphism) -> "Coloring":
        """The coloring v^g -> color(v)."""
        moved = {apply(g, v): c for v, c in self.colors}
        return Coloring(self.d, self.depth, tuple(sorted(moved.items())))

    def heredity_violations(self) -> list[VertexAddress]:
        """Vertices breaking: red below red, blue below blue, green above green."""
        bad = []
        for v, c in self.colors:
            if len(v) < self.depth and c is not Color.GREEN:
                if any(self.mapping[v + str(y)] is not c for y in range(self.d)):
                    bad.append(v)
            if c is Color.GREEN and v and self.mapping[v[:-1]] is not Color.GREEN:
                bad.append(v)
        return bad

    def non_blue(self) -> list[LevelSet]:
        return [
            LevelSet(self.d, k, frozenset(v for v, c in self.colors if len(v) == k and c is not Color.BLUE))
            for k in range(self.depth + 1)
        ]


def coloring_from_set(C: ClosedSetApprox) -> Coloring:
    """Red: shadow inside C; blue: shadow misses C; green: both."""
    tree = RootedTree(C.d)
    counts: dict[VertexAddress, int] = {v: 1 for v in C.leaves.members}
    for k in range(C.depth - 1, -1, -1):
        for v in C.levels[k].members:
            counts[v] = sum(counts.get(c, 0) for c in tree.children(v))
    colors = []
    for v in tree.vertices(C.depth + 1):
        hit = counts.get(v, 0)
        if hit == 0:
            colors.append((v, Color.BLUE))
        elif hit == C.d ** (C.depth - len(v)):
            colors.append((v, Color.RED))
        else:
            colors.append((v, Color.GREEN))
    return Coloring(C.d, C.depth, tuple(sorted(colors)))


def is_clopen_at_depth(C: ClosedSetApprox, k: int) -> bool:
    """True iff no vertex of level k is green."""
    if k > C.depth:
        raise DepthExceeded(f"Level {k} below depth {C.depth}")
    return not coloring_from_set(C).at_level(k, Color.GREEN)


def hausdorff_distance_approx(C1: ClosedSetApprox, C2: ClosedSetApprox) -> LevelDistance:
    """1/2^k with k the deepest level on which the two level sets agree."""
    _check_compatible(C1, C2)
    if C1.is_empty or C2.is_empty:
        raise PreconditionViolated("Hausdorff distance needs two nonempty sets")
    for k in range(C1.depth + 1):
        if C1.levels[k].members != C2.levels[k].members:
            return LevelDistance.from_agreement(k - 1, C1.depth)
    return LevelDistance.from_agreement(C1.depth, C1.depth)


def find_green_ray(C: ClosedSetApprox) -> VertexAddress | None:
    """First vertex of C_N all of whose proper prefixes are green, or None."""
    coloring = coloring_from_set(C)
    if C.depth == 0:
        return None
    for v in sorted(C.leaves.members):
        if all(coloring[v[:i]] is Color.GREEN for i in range(C.depth)):
            return v
    return None


def class_distance_at_depth(C1: ClosedSetApprox, C2: ClosedSetApprox, G: GeneratedSubgroup) -> LevelDistance:
    """Minimum Hausdorff distance between C2 and the G-translates of C1."""
    best = None
    for g in G.sorted_elements():
        dist = hausdorff_distance_approx(translate_set(C1, g), C2)
        if best is None or dist.agreement_level > best.agreement_level:
            best = dist
        if best.equal_at_truncation:
            break
    return best


# --- decomposition ----------------------------------------------------------


@dataclass(frozen=True)
class SubtreeDescriptor:
    """The piece T~_i: the first i levels of the tree of C plus what hangs off F_i = C_i."""

    closed_set: ClosedSetApprox = field(repr=False)
    attach_level: int
    whole_tree: bool = False

    @property
    def root_set(self) -> LevelSet:
        if self.whole_tree:
            return LevelSet(self.closed_set.d, 0, frozenset([""]))
        return self.closed_set.levels[self.attach_level]

    def on_spine(self, v: VertexAddress) -> bool:
        C = self.closed_set
        if len(v) <= C.depth:
            return v in C.levels[len(v)]
        return v[: C.depth] in C.leaves

    def hanging(self, v: VertexAddress) -> bool:
        """v lies strictly below level i and left the tree of C right after level i."""
        if self.whole_tree:
            return len(v) > 0
        C, i = self.closed_set, self.attach_level
        if i >= C.depth or len(v) <= i:
            return False
        return v[:i] in C.levels[i] and v[: i + 1] not in C.levels[i + 1]

    def contains(self, v: VertexAddress) -> bool:
        if self.whole_tree:
            return True
        if len(v) <= self.attach_level:
            return self.on_spine(v)
        return self.hanging(v)

    def hanging_roots(self) -> list[VertexAddress]:
        if self.whole_tree:
            return [""]
        C, i = self.closed_set, self.attach_level
        if i >= C.depth:
            return []
        tree = RootedTree(C.d)
        return sorted(c for x in C.levels[i] for c in tree.children(x) if c not in C.levels[i + 1])

    def boundary_piece(self) -> LevelSet:
        """Level-N vertices in the hanging part."""
        C = self.closed_set
        tree = RootedTree(C.d)
        members = frozenset(v for v in tree.level(C.depth) if self.hanging(v) or (self.whole_tree and C.depth == 0))
        return LevelSet(C.d, C.depth, members)

    def to_json(self) -> dict:
        return {
            "attach_level": self.attach_level,
            "root_set": self.root_set.to_json(),
            "hanging_roots": self.hanging_roots(),
            "boundary_piece": self.boundary_piece().to_json(),
        }


def decompose(C: ClosedSetApprox) -> list[SubtreeDescriptor]:
    """Descriptors T~_0..T~_N; an empty C gives the whole tree as T~_0."""
    if C.is_empty:
        return [SubtreeDescriptor(C, 0, whole_tree=True)]
    return [SubtreeDescriptor(C, i) for i in range(C.depth + 1)]


def hanging_subtrees(C: ClosedSetApprox) -> list[VertexAddress]:
    """Roots of the components of T minus the tree of C (full subtrees T_r)."""
    if C.is_empty:
        return [""]
    return [r for piece in decompose(C) for r in piece.hanging_roots()]


# --- generalized congruence and rigid level stabilizers --------------------


@dataclass(frozen=True)
class CongruenceSpec:
    """Relative level m_i for each piece T~_i, indexed by attach level."""

    depths: tuple[int, ...] = ()
    default: int = 0

    def __post_init__(self):
        if any(m < 0 for m in self.depths) or self.default < 0:
            raise PreconditionViolated("Subtree levels must be non-negative")

    def level_for(self, i: int) -> int:
        return self.depths[i] if i < len(self.depths) else self.default


def truncated_attachments(C: ClosedSetApprox, spec: CongruenceSpec, G: TruncatedWreathGroup) -> list[int]:
    """Attach levels whose hanging part has no vertex permutations above the ambient depth."""
    return [
        piece.attach_level
        for piece in decompose(C)
        if piece.hanging_roots() and piece.attach_level + max(spec.level_for(piece.attach_level), 1) >= G.n
    ]


def _check_fits(C: ClosedSetApprox, G: TruncatedWreathGroup) -> None:
    if C.d != G.d:
        raise PreconditionViolated(f"Closed set has d={C.d}, group has d={G.d}")
    if C.depth > G.n:
        raise DepthExceeded(f"Closed set depth {C.depth} exceeds ambient depth {G.n}")


def _hanging_vertices(piece: SubtreeDescriptor, G: TruncatedWreathGroup, start: int) -> list[VertexAddress]:
    """Hanging vertices of a piece at absolute levels start..n-1."""
    return [v for root in piece.hanging_roots() for v in below(G, root) if len(v) >= start]


def _attachment_gens(piece: SubtreeDescriptor, G: TruncatedWreathGroup, x: VertexAddress) -> list:
    C = piece.closed_set
    pinned = frozenset(int(c[-1]) for c in G.tree.children(x) if c in C.levels[len(x) + 1])
    return [G.elementary(x, p) for p in perms_fixing(G.d, G.flavor, pinned)]


def generalized_congruence_gens(C: ClosedSetApprox, spec: CongruenceSpec, G: TruncatedWreathGroup) -> GeneratedSubgroup:
    """Direct sum over pieces T~_i of the stabilizers of their relative level m_i."""
    _check_fits(C, G)
    flagged = truncated_attachments(C, spec, G)
    if flagged:
        logger.warning(f"Pieces attached at levels {flagged} contribute trivially at depth {G.n}")
    gens = []
    free = base_generators(G.d, G.flavor)
    for piece in decompose(C):
        i, m = piece.attach_level, spec.level_for(piece.attach_level)
        if piece.whole_tree:
            gens.extend(G.elementary(v, p) for v in G.vertices(m) for p in free)
            continue
        if m == 0 and i < C.depth:
            for x in sorted(piece.root_set):
                gens.extend(_attachment_gens(piece, G, x))
        start = i + max(m, 1)
        gens.extend(G.elementary(v, p) for v in _hanging_vertices(piece, G, start) for p in free)
    return GeneratedSubgroup(G, tuple(gens))


def generalized_rigid_gens(C: ClosedSetApprox, spec: CongruenceSpec, G: TruncatedWreathGroup) -> GeneratedSubgroup:
    """Direct sum over pieces of the rigid stabilizers of their level-m_i vertices."""
    _check_fits(C, G)
    gens = []
    free = base_generators(G.d, G.flavor)
    for piece in decompose(C):
        i, m = piece.attach_level, spec.level_for(piece.attach_level)
        if piece.whole_tree:
            tops = G.tree.level(m) if m <= G.n else []
            gens.extend(G.elementary(v, p) for u in tops for v in below(G, u) for p in free)
            continue
        if i >= C.depth:
            continue
        if m == 0:
            # Rst of an attachment vertex inside its piece
            for x in sorted(piece.root_set):
                gens.extend(_attachment_gens(piece, G, x))
                roots = [r for r in piece.hanging_roots() if r.startswith(x)]
                gens.extend(G.elementary(v, p) for r in roots for v in below(G, r) for p in free)
            continue
        tops = [v for v in _hanging_vertices(piece, G, i + m) if len(v) == i + m]
        gens.extend(G.elementary(v, p) for u in tops for v in below(G, u) for p in free)
    return GeneratedSubgroup(G, tuple(gens))


def fixed_boundary(S: GeneratedSubgroup) -> ClosedSetApprox:
    """Fix(S) exactly: fixed vertices of the deepest level together with their ancestors."""
    G = S.ambient
    fixed = [v for v in G.tree.level(G.n) if all(apply(g, v) == v for g in S.generators)]
    return ClosedSetApprox.from_leaves(G.d, G.n, fixed)
