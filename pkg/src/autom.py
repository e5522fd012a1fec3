"""Finitary tree automorphisms stored as sparse portraits.

Conventions
-----------
Automorphisms act on the right: ``apply(compose(a, b), w) == apply(b, apply(a, w))``.
Conjugation is ``s^g = g^-1 s g`` and commutators are ``[a, b] = a^-1 b^-1 a b``.

A portrait maps vertex addresses to permutations of ``0..d-1`` written in
one-line notation (``p[y]`` is the image of digit ``y``). Identity entries are
dropped, so two portraits compare equal exactly when the automorphisms do.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Iterable, Mapping

import numpy as np
from sympy.combinatorics import AlternatingGroup, Permutation, SymmetricGroup

from src.errors import ArityMismatch, EqualElements, InvalidAddress
from src.tree import RootedTree, VertexAddress, check_arity

logger = logging.getLogger(__name__)

Perm = tuple[int, ...]


class Flavor(str, Enum):
    """Which base group sits at every vertex."""

    SYMMETRIC = "symmetric"
    ALTERNATING = "alternating"


# --- permutations of 0..d-1 -------------------------------------------------


def identity_perm(d: int) -> Perm:
    return tuple(range(d))


def is_identity_perm(p: Perm) -> bool:
    return all(i == y for i, y in enumerate(p))


def perm_then(p: Perm, q: Perm) -> Perm:
    """Apply p first, then q."""
    return tuple(q[y] for y in p)


@lru_cache(maxsize=None)
def perm_inverse(p: Perm) -> Perm:
    inv = [0] * len(p)
    for y, image in enumerate(p):
        inv[image] = y
    return tuple(inv)


@lru_cache(maxsize=None)
def is_even(p: Perm) -> bool:
    return Permutation(list(p)).is_even


def validate_perm(p: Iterable[int], d: int) -> Perm:
    p = tuple(int(y) for y in p)
    if len(p) != d or sorted(p) != list(range(d)):
        raise InvalidAddress(f"{list(p)} is not a permutation of 0..{d - 1}")
    return p


def _sympy_group(d: int, flavor: Flavor):
    return SymmetricGroup(d) if flavor is Flavor.SYMMETRIC else AlternatingGroup(d)


@lru_cache(maxsize=None)
def base_perms(d: int, flavor: Flavor) -> tuple[Perm, ...]:
    """All elements of S_d or A_d, sorted."""
    check_arity(d)
    flavor = Flavor(flavor)
    if flavor is Flavor.ALTERNATING and d < 3:
        logger.warning(f"A_{d} is trivial; the alternating tree group is trivial")
        return (identity_perm(d),)
    group = _sympy_group(d, flavor)
    return tuple(sorted(tuple(Permutation(g.array_form, size=d).array_form) for g in group.generate()))


@lru_cache(maxsize=None)
def base_generators(d: int, flavor: Flavor) -> tuple[Perm, ...]:
    """A small generating set of S_d or A_d (empty when the base is trivial)."""
    flavor = Flavor(flavor)
    if flavor is Flavor.ALTERNATING and d < 3:
        return ()
    group = _sympy_group(d, flavor)
    gens = {tuple(Permutation(g.array_form, size=d).array_form) for g in group.generators}
    return tuple(sorted(p for p in gens if not is_identity_perm(p)))


# --- automorphisms ----------------------------------------------------------


@dataclass(frozen=True)
class FinitaryAutomorphism:
    """Automorphism with nontrivial vertex permutations only above ``depth``."""

    d: int
    perms: tuple[tuple[VertexAddress, Perm], ...] = ()
    depth: int = field(default=0, compare=False)

    def __post_init__(self):
        tree = RootedTree(self.d)
        canonical = {}
        for v, p in dict(self.perms).items():
            tree.validate(v)
            p = validate_perm(p, self.d)
            if not is_identity_perm(p):
                canonical[v] = p
        deepest = max((len(v) + 1 for v in canonical), default=0)
        if self.depth and deepest > self.depth:
            raise InvalidAddress(f"Portrait entry below declared depth {self.depth}")
        object.__setattr__(self, "perms", tuple(sorted(canonical.items())))
        object.__setattr__(self, "depth", max(self.depth, deepest))

    @classmethod
    def from_portrait(
        cls, d: int, portrait: Mapping[VertexAddress, Iterable[int]], depth: int = 0
    ) -> "FinitaryAutomorphism":
        return cls(d, tuple(portrait.items()), depth)

    @classmethod
    def _trusted(cls, d: int, portrait: dict[VertexAddress, Perm], depth: int) -> "FinitaryAutomorphism":
        # portrait must already be canonical (valid, no identities)
        obj = object.__new__(cls)
        object.__setattr__(obj, "d", d)
        object.__setattr__(obj, "perms", tuple(sorted(portrait.items())))
        object.__setattr__(obj, "depth", depth)
        obj.__dict__["portrait"] = portrait
        return obj

    @classmethod
    def identity(cls, d: int, depth: int = 0) -> "FinitaryAutomorphism":
        return cls._trusted(d, {}, depth)

    @classmethod
    def elementary(cls, d: int, v: VertexAddress, p: Perm, depth: int = 0) -> "FinitaryAutomorphism":
        """The automorphism whose only vertex permutation is p at v."""
        return cls(d, ((v, p),), depth)

    @cached_property
    def portrait(self) -> dict[VertexAddress, Perm]:
        return dict(self.perms)

    @property
    def is_identity(self) -> bool:
        return not self.perms

    def support(self) -> list[VertexAddress]:
        return [v for v, _ in self.perms]

    @cached_property
    def key(self) -> str:
        """Stable text form used for hashing and canonical ordering."""
        return "|".join(f"{v}:{''.join(map(str, p))}" for v, p in self.perms)

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "depth": self.depth,
            "perms": {v: list(p) for v, p in self.perms},
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "FinitaryAutomorphism":
        try:
            return cls.from_portrait(int(data["d"]), data.get("perms", {}), int(data.get("depth", 0)))
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidAddress(f"Malformed portrait: {e}") from e

    def __repr__(self) -> str:
        return f"FinitaryAutomorphism(d={self.d}, {{{self.key}}})"


def apply(g: FinitaryAutomorphism, w: VertexAddress) -> VertexAddress:
    """Image of w: digit i is moved by the permutation at the original prefix w[:i]."""
    portrait = g.portrait
    if not portrait:
        return w
    out = []
    for i, ch in enumerate(w):
        p = portrait.get(w[:i]) if i < g.depth else None
        out.append(str(p[int(ch)]) if p else ch)
    return "".join(out)


def apply_inverse(g: FinitaryAutomorphism, x: VertexAddress) -> VertexAddress:
    """The unique w with apply(g, w) == x."""
    portrait = g.portrait
    if not portrait:
        return x
    w = ""
    for i, ch in enumerate(x):
        p = portrait.get(w) if i < g.depth else None
        w += str(perm_inverse(p)[int(ch)]) if p else ch
    return w


def compose(a: FinitaryAutomorphism, b: FinitaryAutomorphism) -> FinitaryAutomorphism:
    """The product ab: first a, then b."""
    if a.d != b.d:
        raise ArityMismatch(f"Cannot compose d={a.d} with d={b.d}")
    pa, pb = a.portrait, b.portrait
    depth = max(a.depth, b.depth)
    if not pa:
        return FinitaryAutomorphism._trusted(b.d, pb, depth)
    if not pb:
        return FinitaryAutomorphism._trusted(a.d, pa, depth)
    vertices = set(pa)
    vertices.update(apply_inverse(a, x) for x in pb)
    result = {}
    for w in vertices:
        p = pa.get(w)
        q = pb.get(apply(a, w))
        if p is None:
            c = q
        elif q is None:
            c = p
        else:
            c = perm_then(p, q)
        if c is not None and not is_identity_perm(c):
            result[w] = c
    return FinitaryAutomorphism._trusted(a.d, result, depth)


def inverse(a: FinitaryAutomorphism) -> FinitaryAutomorphism:
    result = {apply(a, w): perm_inverse(p) for w, p in a.perms}
    return FinitaryAutomorphism._trusted(a.d, result, a.depth)


def conjugate(s: FinitaryAutomorphism, g: FinitaryAutomorphism) -> FinitaryAutomorphism:
    """s^g = g^-1 s g."""
    return compose(compose(inverse(g), s), g)


def commutator(a: FinitaryAutomorphism, b: FinitaryAutomorphism) -> FinitaryAutomorphism:
    """[a, b] = a^-1 b^-1 a b."""
    return compose(compose(inverse(a), inverse(b)), compose(a, b))


def power(g: FinitaryAutomorphism, k: int) -> FinitaryAutomorphism:
    base = g if k >= 0 else inverse(g)
    result = FinitaryAutomorphism.identity(g.d, g.depth)
    for _ in range(abs(k)):
        result = compose(result, base)
    return result


def order(g: FinitaryAutomorphism, limit: int = 100_000) -> int:
    """Order by iterated composition."""
    current, k = g, 1
    while not current.is_identity:
        current = compose(current, g)
        k += 1
        if k > limit:
            raise ArithmeticError(f"Order exceeds {limit}")
    return k


def section(g: FinitaryAutomorphism, v: VertexAddress) -> FinitaryAutomorphism:
    """Restriction of the portrait below v, read as an automorphism of the whole tree."""
    cut = len(v)
    result = {w[cut:]: p for w, p in g.perms if w.startswith(v)}
    return FinitaryAutomorphism._trusted(g.d, result, max(g.depth - cut, 0))


def graft(g: FinitaryAutomorphism, v: VertexAddress) -> FinitaryAutomorphism:
    """Copy g into the subtree below v; the result is supported in T_v."""
    result = {v + w: p for w, p in g.perms}
    return FinitaryAutomorphism._trusted(g.d, result, g.depth + len(v))


def truncate(g: FinitaryAutomorphism, depth: int) -> FinitaryAutomorphism:
    """Drop every vertex permutation at level >= depth."""
    result = {w: p for w, p in g.perms if len(w) < depth}
    return FinitaryAutomorphism._trusted(g.d, result, min(g.depth, depth))


def is_alternating(g: FinitaryAutomorphism) -> bool:
    return all(is_even(p) for _, p in g.perms)


def aut_distance(a: FinitaryAutomorphism, b: FinitaryAutomorphism) -> Fraction:
    """1/2^k with k the deepest level on which a and b act identically.

    a and b agree on L_n exactly when a b^-1 has no vertex permutation above L_n.
    """
    if a.d != b.d:
        raise ArityMismatch(f"Cannot compare d={a.d} with d={b.d}")
    if a == b:
        raise EqualElements("Elements are equal; distance is zero")
    quotient = compose(a, inverse(b))
    k = min(len(w) for w in quotient.portrait)
    return Fraction(1, 2**k)


def haar_sample_at(
    d: int,
    vertices: list[VertexAddress],
    flavor: Flavor,
    rng: np.random.Generator,
    depth: int = 0,
) -> FinitaryAutomorphism:
    """Independent uniform base permutations at the given vertices."""
    base = base_perms(d, Flavor(flavor))
    if not vertices or len(base) == 1:
        return FinitaryAutomorphism.identity(d, depth)
    choices = rng.integers(len(base), size=len(vertices))
    result = {}
    for v, i in zip(vertices, choices):
        p = base[int(i)]
        if not is_identity_perm(p):
            result[v] = p
    deepest = max((len(v) + 1 for v in vertices), default=0)
    return FinitaryAutomorphism._trusted(d, result, max(depth, deepest))


def haar_sample(d: int, n: int, flavor: Flavor, rng: np.random.Generator) -> FinitaryAutomorphism:
    """Uniform element of S_d^wr(n) or A_d^wr(n)."""
    vertices = list(RootedTree(d).vertices(n))
    return haar_sample_at(d, vertices, flavor, rng, depth=n)
