"""Truncated wreath-product groups and their subgroups.

Subgroups are given by generators and enumerated by plain breadth-first
closure. Orbits and fixed vertices only need the generators; stabilizer
filters need an enumeration. Every enumeration stops at ``order_cap``.
"""

import itertools
import logging
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, field, replace
from functools import cached_property, lru_cache
from typing import Iterable, Iterator, Sequence

from src.autom import (
    FinitaryAutomorphism,
    Flavor,
    apply,
    base_generators,
    base_perms,
    commutator,
    compose,
    conjugate,
    is_alternating,
    is_identity_perm,
    truncate,
)
from src.errors import DepthExceeded, InvalidAddress, NotInAmbient, OrderCapExceeded
from src.tree import LevelDistance, LevelSet, RootedTree, VertexAddress, check_arity

logger = logging.getLogger(__name__)

DEFAULT_ORDER_CAP = 200_000

_order_cap: ContextVar[int] = ContextVar("order_cap", default=DEFAULT_ORDER_CAP)


def current_order_cap() -> int:
    return _order_cap.get()


@contextmanager
def order_cap_scope(cap: int | None) -> Iterator[int]:
    """Order cap for subgroups built inside the block that do not name their own; None keeps the current one."""
    if cap is None:
        yield current_order_cap()
        return
    token = _order_cap.set(cap)
    try:
        yield cap
    finally:
        _order_cap.reset(token)


@dataclass(frozen=True)
class TruncatedWreathGroup:
    """S_d^wr(n) or A_d^wr(n): all finitary automorphisms of depth <= n with the parity rule."""

    d: int
    n: int
    flavor: Flavor = Flavor.SYMMETRIC

    def __post_init__(self):
        check_arity(self.d)
        if self.n < 0:
            raise DepthExceeded(f"Depth must be non-negative, got {self.n}")
        object.__setattr__(self, "flavor", Flavor(self.flavor))

    @cached_property
    def tree(self) -> RootedTree:
        return RootedTree(self.d)

    @property
    def base(self) -> tuple:
        return base_perms(self.d, self.flavor)

    @property
    def vertex_count(self) -> int:
        return self.tree.count_vertices(0, self.n)

    @property
    def order(self) -> int:
        return len(self.base) ** self.vertex_count

    def vertices(self, start: int = 0, stop: int | None = None) -> list[VertexAddress]:
        stop = self.n if stop is None else min(stop, self.n)
        return [v for k in range(start, stop) for v in self.tree.level(k)]

    def identity(self) -> FinitaryAutomorphism:
        return FinitaryAutomorphism.identity(self.d, self.n)

    def contains(self, g: FinitaryAutomorphism) -> bool:
        if g.d != self.d or any(len(v) >= self.n for v in g.portrait):
            return False
        return self.flavor is Flavor.SYMMETRIC or is_alternating(g)

    def elementary(self, v: VertexAddress, p) -> FinitaryAutomorphism:
        return FinitaryAutomorphism.elementary(self.d, v, tuple(p), self.n)

    def elementary_generators(self, vertices: Iterable[VertexAddress]) -> list[FinitaryAutomorphism]:
        """Base-group generators placed at each of the given vertices."""
        gens = base_generators(self.d, self.flavor)
        return [self.elementary(v, p) for v in vertices for p in gens]

    def elements(self) -> Iterator[FinitaryAutomorphism]:
        """Every element, as a product over vertices (no closure needed)."""
        vertices = self.vertices()
        for choice in itertools.product(self.base, repeat=len(vertices)):
            portrait = {v: p for v, p in zip(vertices, choice) if not is_identity_perm(p)}
            yield FinitaryAutomorphism._trusted(self.d, portrait, self.n)

    def truncated(self, depth: int) -> "TruncatedWreathGroup":
        return TruncatedWreathGroup(self.d, min(depth, self.n), self.flavor)

    def full(self, order_cap: int | None = None) -> "GeneratedSubgroup":
        """The whole group as an enumerated subgroup."""
        order_cap = order_cap or current_order_cap()
        if self.order > order_cap:
            raise OrderCapExceeded(0, order_cap)
        return GeneratedSubgroup(
            self,
            tuple(self.elementary_generators(self.vertices())),
            _full_elements(self),
            order_cap,
        )

    def describe(self) -> dict:
        return {"d": self.d, "n": self.n, "flavor": self.flavor.value}


@lru_cache(maxsize=16)
def _full_elements(G: TruncatedWreathGroup) -> frozenset:
    logger.info(f"Listing all {G.order} elements of {G.flavor.value} wreath group d={G.d} n={G.n}")
    return frozenset(G.elements())


def group_order(G: TruncatedWreathGroup) -> int:
    """|base|^((d^n - 1)/(d - 1))."""
    return G.order


def _closure(
    d: int,
    depth: int,
    generators: tuple[FinitaryAutomorphism, ...],
    order_cap: int,
) -> frozenset:
    identity = FinitaryAutomorphism.identity(d, depth)
    seen = {identity}
    frontier = [identity]
    while frontier:
        discovered = []
        for x in frontier:
            for g in generators:
                y = compose(x, g)
                if y not in seen:
                    seen.add(y)
                    discovered.append(y)
                    if len(seen) > order_cap:
                        raise OrderCapExceeded(len(seen), order_cap)
        frontier = discovered
    return frozenset(seen)


_closure_cached = lru_cache(maxsize=512)(_closure)


@dataclass(frozen=True)
class GeneratedSubgroup:
    """Subgroup of an ambient wreath group, given by generators and optionally enumerated."""

    ambient: TruncatedWreathGroup
    generators: tuple[FinitaryAutomorphism, ...] = ()
    elements: frozenset | None = field(default=None, compare=False, repr=False)
    order_cap: int | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.order_cap is None:
            object.__setattr__(self, "order_cap", current_order_cap())
        canonical = {}
        for g in self.generators:
            if not self.ambient.contains(g):
                raise NotInAmbient(f"{g!r} is not in {self.ambient.describe()}")
            if not g.is_identity:
                canonical[g.key] = g
        object.__setattr__(self, "generators", tuple(canonical[k] for k in sorted(canonical)))

    @property
    def is_enumerated(self) -> bool:
        return self.elements is not None

    def enumerate(self) -> "GeneratedSubgroup":
        """Breadth-first closure; returns self when already enumerated."""
        if self.elements is not None:
            return self
        G = self.ambient
        elements = _closure_cached(G.d, G.n, self.generators, self.order_cap)
        logger.debug(f"Enumerated subgroup with {len(self.generators)} generators: order {len(elements)}")
        return replace(self, elements=elements)

    def order(self) -> int:
        return len(self.enumerate().elements)

    def __contains__(self, g: FinitaryAutomorphism) -> bool:
        return g in self.enumerate().elements

    def sorted_elements(self) -> list[FinitaryAutomorphism]:
        return sorted(self.enumerate().elements, key=lambda g: g.key)

    def conjugate_by(self, g: FinitaryAutomorphism) -> "GeneratedSubgroup":
        """H^g, generated by the conjugated generators."""
        gens = tuple(conjugate(h, g) for h in self.generators)
        elements = None
        if self.elements is not None:
            elements = frozenset(conjugate(h, g) for h in self.elements)
        return GeneratedSubgroup(self.ambient, gens, elements, self.order_cap)

    def describe(self) -> dict:
        return {
            "ambient": self.ambient.describe(),
            "generators": [g.to_json()["perms"] for g in self.generators],
        }


def enumerate_subgroup(S: GeneratedSubgroup) -> GeneratedSubgroup:
    return S.enumerate()


def subgroup_from_elements(
    ambient: TruncatedWreathGroup, elements: Iterable[FinitaryAutomorphism], order_cap: int | None = None
) -> GeneratedSubgroup:
    """Wrap a set already known to be a subgroup; all non-identity elements become generators."""
    elements = frozenset(elements)
    return GeneratedSubgroup(ambient, tuple(elements), elements, order_cap)


# --- partitions and orbits --------------------------------------------------


class UnionFind:
    """Disjoint sets over level vertices."""

    def __init__(self, items: Iterable):
        self.parent = {x: x for x in items}

    def find(self, x):
        root = self.parent[x]
        if root != x:
            root = self.parent[x] = self.find(root)
        return root

    def union(self, x, y) -> bool:
        x, y = self.find(x), self.find(y)
        if x == y:
            return False
        if y < x:
            x, y = y, x
        self.parent[y] = x
        return True

    def groups(self) -> list[frozenset]:
        blocks: dict = {}
        for x in self.parent:
            blocks.setdefault(self.find(x), set()).add(x)
        return [frozenset(b) for b in blocks.values()]


@dataclass(frozen=True)
class LevelPartition:
    """Partition of the vertices of one level into blocks."""

    d: int
    level: int
    blocks: frozenset[frozenset[VertexAddress]]

    def __post_init__(self):
        blocks = frozenset(frozenset(b) for b in self.blocks)
        object.__setattr__(self, "blocks", blocks)
        covered = [v for b in blocks for v in b]
        expected = RootedTree(self.d).level(self.level)
        if any(not b for b in blocks) or sorted(covered) != expected:
            raise InvalidAddress(f"Blocks do not partition level {self.level} of the {self.d}-ary tree")

    @classmethod
    def singletons(cls, d: int, level: int) -> "LevelPartition":
        return cls(d, level, frozenset(frozenset([v]) for v in RootedTree(d).level(level)))

    @cached_property
    def block_index(self) -> dict[VertexAddress, frozenset]:
        return {v: b for b in self.blocks for v in b}

    def block_of(self, v: VertexAddress) -> frozenset:
        return self.block_index[v]

    def __len__(self) -> int:
        return len(self.blocks)

    def sorted_blocks(self) -> list[list[VertexAddress]]:
        return sorted(sorted(b) for b in self.blocks)

    def translate(self, g: FinitaryAutomorphism) -> "LevelPartition":
        return LevelPartition(self.d, self.level, frozenset(frozenset(apply(g, v) for v in b) for b in self.blocks))

    def to_json(self) -> dict:
        return {"level": self.level, "blocks": self.sorted_blocks()}

    @classmethod
    def from_json(cls, data: dict, d: int) -> "LevelPartition":
        try:
            return cls(d, int(data["level"]), frozenset(frozenset(b) for b in data["blocks"]))
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidAddress(f"Malformed level partition: {e}") from e


def is_projective(partitions: Sequence[LevelPartition]) -> bool:
    """Parents of vertices sharing a block share a block one level up."""
    for upper, lower in zip(partitions, partitions[1:]):
        for block in lower.blocks:
            if len({upper.block_of(v[:-1]) for v in block}) > 1:
                return False
    return True


def _check_level(S: GeneratedSubgroup, level: int) -> None:
    if level < 0 or level > S.ambient.n:
        raise DepthExceeded(f"Level {level} outside ambient depth {S.ambient.n}")


def orbits(S: GeneratedSubgroup, level: int) -> LevelPartition:
    """Orbits of the generators' action on L_level."""
    _check_level(S, level)
    space = S.ambient.tree.level(level)
    uf = UnionFind(space)
    for g in S.generators:
        for v in space:
            uf.union(v, apply(g, v))
    return LevelPartition(S.ambient.d, level, frozenset(uf.groups()))


def orbit_partitions(S: GeneratedSubgroup, depth: int) -> list[LevelPartition]:
    return [orbits(S, k) for k in range(depth + 1)]


def partition_distance(P: Sequence[LevelPartition], Q: Sequence[LevelPartition]) -> LevelDistance:
    """1/2^k with k the deepest level at which the two sequences coincide."""
    depth = min(len(P), len(Q)) - 1
    for k in range(depth + 1):
        if P[k].blocks != Q[k].blocks:
            if k == 0:
                logger.warning("Partition sequences already differ at the root level")
            return LevelDistance.from_agreement(k - 1, depth)
    return LevelDistance.from_agreement(depth, depth)


def fixed_vertices(S: GeneratedSubgroup, level: int) -> LevelSet:
    """Level vertices fixed by every generator."""
    _check_level(S, level)
    fixed = [v for v in S.ambient.tree.level(level) if all(apply(g, v) == v for g in S.generators)]
    return LevelSet(S.ambient.d, level, frozenset(fixed))


# --- stabilizers ------------------------------------------------------------


def level_stabilizer_gens(G: TruncatedWreathGroup, m: int) -> GeneratedSubgroup:
    """Pointwise stabilizer of L_m: elementary permutations at levels m..n-1."""
    if m > G.n:
        raise DepthExceeded(f"Level {m} below ambient depth {G.n}")
    return GeneratedSubgroup(G, tuple(G.elementary_generators(G.vertices(m))))


def below(G: TruncatedWreathGroup, v: VertexAddress) -> list[VertexAddress]:
    """v and its descendants above the ambient depth."""
    return [v + w for k in range(G.n - len(v)) for w in G.tree.level(k)]


def rigid_stabilizer_gens(G: TruncatedWreathGroup, V: LevelSet | Iterable[VertexAddress]) -> GeneratedSubgroup:
    """Product of the rigid stabilizers of the vertices in V."""
    vertices = [u for v in sorted(V) for u in below(G, v)]
    return GeneratedSubgroup(G, tuple(G.elementary_generators(vertices)))


@lru_cache(maxsize=None)
def perms_fixing(d: int, flavor: Flavor, fixed: frozenset[int]) -> tuple:
    return tuple(
        p for p in base_perms(d, flavor) if not is_identity_perm(p) and all(p[y] == y for y in fixed)
    )


def pointwise_stabilizer_gens(G: TruncatedWreathGroup, V: LevelSet) -> GeneratedSubgroup:
    """Generators of the pointwise stabilizer of V, read off the tree spanned by V.

    A vertex on a path to V may only permute children off those paths; every
    other vertex is unconstrained.
    """
    k = V.level
    if k > G.n:
        raise DepthExceeded(f"Level {k} below ambient depth {G.n}")
    spanned = {v[:i] for v in V.members for i in range(k + 1)}
    free = base_generators(G.d, G.flavor)
    gens = []
    for x in G.vertices():
        if len(x) < k and x in spanned:
            pinned = frozenset(int(c[-1]) for c in G.tree.children(x) if c in spanned)
            gens.extend(G.elementary(x, p) for p in perms_fixing(G.d, G.flavor, pinned))
        else:
            gens.extend(G.elementary(x, p) for p in free)
    return GeneratedSubgroup(G, tuple(gens))


def _filtered(S: GeneratedSubgroup, keep) -> GeneratedSubgroup:
    S = S.enumerate()
    return subgroup_from_elements(S.ambient, (g for g in S.elements if keep(g)), S.order_cap)


def pointwise_stabilizer(S: GeneratedSubgroup, V: LevelSet) -> GeneratedSubgroup:
    """Elements of S fixing every vertex of V."""
    members = sorted(V.members)
    return _filtered(S, lambda g: all(apply(g, v) == v for v in members))


def setwise_stabilizer(S: GeneratedSubgroup, V: LevelSet) -> GeneratedSubgroup:
    """Elements of S mapping V onto itself."""
    members = V.members
    return _filtered(S, lambda g: all(apply(g, v) in members for v in members))


def restrict_depth(S: GeneratedSubgroup, n: int) -> GeneratedSubgroup:
    """Elements of S supported above L_n (the finite Gamma_n)."""
    return _filtered(S, lambda g: all(len(v) < n for v in g.portrait))


def derived_subgroup(S: GeneratedSubgroup) -> GeneratedSubgroup:
    """Commutator subgroup: normal closure of the generator commutators."""
    S = S.enumerate()
    G = S.ambient
    gens = {}
    for a, b in itertools.combinations(S.generators, 2):
        c = commutator(a, b)
        if not c.is_identity:
            gens[c.key] = c
    elements = _closure(G.d, G.n, tuple(gens.values()), S.order_cap)
    changed = True
    while changed:
        changed = False
        for h in list(gens.values()):
            for s in S.generators:
                c = conjugate(h, s)
                if c not in elements:
                    gens[c.key] = c
                    elements = _closure(G.d, G.n, tuple(gens.values()), S.order_cap)
                    changed = True
    logger.debug(f"Derived subgroup of an order-{len(S.elements)} group has order {len(elements)}")
    return GeneratedSubgroup(G, tuple(gens.values()), elements, S.order_cap)


# --- witnesses --------------------------------------------------------------


def find_witness(target: LevelPartition, G: TruncatedWreathGroup) -> GeneratedSubgroup | None:
    """Generators whose orbits on the target's level are exactly its blocks, or None."""
    k = target.level
    if k > G.n:
        raise DepthExceeded(f"Level {k} below ambient depth {G.n}")
    space = G.tree.level(k)
    candidates = [
        g
        for g in G.truncated(k).full().sorted_elements()
        if all(target.block_of(apply(g, v)) == target.block_of(v) for v in space)
    ]
    uf = UnionFind(space)
    witness = []
    components = len(space)
    for g in candidates:
        if components == len(target):
            break
        merged = False
        for v in space:
            if uf.union(v, apply(g, v)):
                components -= 1
                merged = True
        if merged:
            witness.append(g)
    if components != len(target):
        logger.info(f"No subgroup of {G.describe()} realizes the target partition at level {k}")
        return None
    return GeneratedSubgroup(G, tuple(FinitaryAutomorphism._trusted(G.d, g.portrait, G.n) for g in witness))


def find_fix_witness(V: LevelSet, G: TruncatedWreathGroup) -> GeneratedSubgroup | None:
    """Generators whose fixed vertices on V's level are exactly V, or None."""
    k = V.level
    if k > G.n:
        raise DepthExceeded(f"Level {k} below ambient depth {G.n}")
    outside = set(G.tree.level(k)) - V.members
    moved: set = set()
    witness = []
    for g in G.truncated(k).full().sorted_elements():
        if moved == outside:
            break
        if any(apply(g, v) != v for v in V.members):
            continue
        newly = {v for v in outside - moved if apply(g, v) != v}
        if newly:
            moved |= newly
            witness.append(g)
    if moved != outside:
        return None
    return GeneratedSubgroup(G, tuple(FinitaryAutomorphism._trusted(G.d, g.portrait, G.n) for g in witness))


def index_in(S: GeneratedSubgroup, K: GeneratedSubgroup) -> int:
    return S.order() // K.order()


def level_images(S: GeneratedSubgroup, k: int) -> list[tuple[FinitaryAutomorphism, tuple[VertexAddress, ...]]]:
    """Each element of an enumerated subgroup with its images of L_k in canonical order."""
    space = S.ambient.tree.level(k)
    return [(g, tuple(apply(g, v) for v in space)) for g in S.sorted_elements()]


def truncate_subgroup(S: GeneratedSubgroup, depth: int) -> GeneratedSubgroup:
    """Image of S in the depth-truncated group."""
    G = S.ambient.truncated(depth)
    gens = tuple(truncate(g, depth) for g in S.generators)
    return GeneratedSubgroup(G, tuple(FinitaryAutomorphism._trusted(G.d, g.portrait, G.n) for g in gens))
