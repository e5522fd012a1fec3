"""Addressing, levels, shadows and the boundary metric of the d-ary rooted tree.

Vertices are digit strings over 0..d-1; the root is the empty string. All
measures and distances are exact ``Fraction`` values.
"""

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Iterator

from src.errors import ArityMismatch, EqualPrefixes, InvalidAddress, LevelTooShallow

logger = logging.getLogger(__name__)

VertexAddress = str

ROOT: VertexAddress = ""
MAX_ARITY = 10  # one decimal digit per letter


def check_arity(d: int) -> int:
    """Validate a tree degree and return it."""
    if not isinstance(d, int) or d < 2 or d > MAX_ARITY:
        raise ArityMismatch(f"Arity must be an integer in 2..{MAX_ARITY}, got {d!r}")
    return d


def common_prefix_length(p: VertexAddress, q: VertexAddress) -> int:
    """Length of the longest common prefix of two words."""
    k = 0
    for a, b in zip(p, q):
        if a != b:
            break
        k += 1
    return k


@dataclass(frozen=True)
class RootedTree:
    """The d-ary rooted tree, addressed by digit strings."""

    d: int

    def __post_init__(self):
        check_arity(self.d)

    @cached_property
    def alphabet(self) -> str:
        return "".join(str(y) for y in range(self.d))

    def validate(self, v: VertexAddress) -> VertexAddress:
        """Return v if every digit is below d, raise InvalidAddress otherwise."""
        if not isinstance(v, str) or any(ch not in self.alphabet for ch in v):
            raise InvalidAddress(f"{v!r} is not a vertex of the {self.d}-ary tree")
        return v

    def navigate(self, v: VertexAddress) -> dict:
        """Parent, children in digit order, and level of a vertex."""
        self.validate(v)
        return {
            "parent": v[:-1] if v else None,
            "children": [v + y for y in self.alphabet],
            "level": len(v),
        }

    def children(self, v: VertexAddress) -> list[VertexAddress]:
        return [v + y for y in self.alphabet]

    def level(self, n: int) -> list[VertexAddress]:
        """All vertices of level n in lexicographic order."""
        return ["".join(w) for w in itertools.product(self.alphabet, repeat=n)]

    def vertices(self, upto: int) -> Iterator[VertexAddress]:
        """Vertices of levels 0..upto-1, level by level."""
        for n in range(upto):
            yield from self.level(n)

    def count_vertices(self, start: int, stop: int) -> int:
        """Number of vertices with level in [start, stop)."""
        return sum(self.d**k for k in range(start, stop))

    def shadow_at_level(self, v: VertexAddress, n: int) -> "LevelSet":
        """All level-n descendants of v (v itself when n equals its level)."""
        self.validate(v)
        if n < len(v):
            raise LevelTooShallow(f"Level {n} is above vertex {v!r}")
        tails = self.level(n - len(v))
        return LevelSet(self.d, n, frozenset(v + t for t in tails))

    def shadow_measure(self, v: VertexAddress) -> Fraction:
        """Boundary measure of the shadow of v: 1 / d^level(v)."""
        self.validate(v)
        return Fraction(1, self.d ** len(v))

    def full_level(self, n: int) -> "LevelSet":
        return LevelSet(self.d, n, frozenset(self.level(n)))

    def index(self, v: VertexAddress) -> int:
        """Position of v within its level in lexicographic order."""
        return int(v, self.d) if v else 0


@dataclass(frozen=True)
class LevelSet:
    """A set of vertices that all sit on one level."""

    d: int
    level: int
    members: frozenset[VertexAddress] = field(default_factory=frozenset)

    def __post_init__(self):
        tree = RootedTree(self.d)
        members = frozenset(self.members)
        object.__setattr__(self, "members", members)
        for v in members:
            tree.validate(v)
            if len(v) != self.level:
                raise InvalidAddress(f"{v!r} is not on level {self.level}")

    @classmethod
    def of(cls, d: int, level: int, members: Iterable[VertexAddress]) -> "LevelSet":
        return cls(d, level, frozenset(members))

    def __iter__(self) -> Iterator[VertexAddress]:
        return iter(sorted(self.members))

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, v: object) -> bool:
        return v in self.members

    def measure(self) -> Fraction:
        """Boundary measure of the union of shadows."""
        return Fraction(len(self.members), self.d**self.level)

    def parents(self) -> "LevelSet":
        if self.level == 0:
            raise LevelTooShallow("The root level has no parent level")
        return LevelSet(self.d, self.level - 1, frozenset(v[:-1] for v in self.members))

    def to_json(self) -> list[str]:
        return sorted(self.members)


@dataclass(frozen=True)
class LevelDistance:
    """Result of a level-truncated ultrametric distance."""

    value: Fraction
    agreement_level: int
    equal_at_truncation: bool = False

    @property
    def no_agreement(self) -> bool:
        return self.agreement_level < 0

    @classmethod
    def from_agreement(cls, level: int, depth: int) -> "LevelDistance":
        """Distance 1/2^level; agreement through depth sets the truncation flag."""
        if level < 0:
            return cls(Fraction(1), level, False)
        return cls(Fraction(1, 2**level), level, level >= depth)

    def to_json(self) -> dict:
        return {
            "value": str(self.value),
            "decimal": format_decimal(self.value),
            "agreement_level": self.agreement_level,
            "equal_at_truncation": self.equal_at_truncation,
        }


def format_decimal(value: Fraction, places: int = 12) -> str:
    """Fixed-point rendering of an exact rational, trailing zeros trimmed."""
    sign = "-" if value < 0 else ""
    value = abs(value)
    whole, rest = divmod(value.numerator, value.denominator)
    digits = []
    for _ in range(places):
        rest *= 10
        digit, rest = divmod(rest, value.denominator)
        digits.append(str(digit))
    frac = "".join(digits).rstrip("0")
    return f"{sign}{whole}.{frac}" if frac else f"{sign}{whole}"


def ray_distance(p: VertexAddress, q: VertexAddress) -> Fraction:
    """Distance 1/2^k between two truncated rays, k = their common prefix length."""
    if len(p) != len(q):
        raise InvalidAddress(f"Rays truncated at different depths: {p!r}, {q!r}")
    if p == q:
        raise EqualPrefixes(f"Rays agree through depth {len(p)}")
    return Fraction(1, 2 ** common_prefix_length(p, q))
