"""Brute-force and constructive checks of the finite ingredients behind the IRS results.

Every check returns a ``CheckReport``. Exact checks fail with a concrete
counterexample; statistical checks never fail, they report ``inconclusive``
when the evidence is weak or contradicts the expectation.
"""

import itertools
import logging
import math
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from typing import Any, Callable, Iterable, Sequence

import numpy as np
from pydantic import ValidationError
from scipy.stats import chisquare
from sympy.combinatorics import Permutation, PermutationGroup

from src.autom import (
    FinitaryAutomorphism,
    Flavor,
    apply,
    base_perms,
    commutator,
    compose,
    conjugate,
    haar_sample,
    haar_sample_at,
    inverse,
    is_identity_perm,
    order,
    section,
)
from src.boundary import (
    ClosedSetApprox,
    Color,
    coloring_from_set,
    find_green_ray,
    fixed_boundary,
    translate_set,
)
from src.config import ClosedSetSpec, closed_set_from_spec
from src.errors import (
    BudgetExceeded,
    ConfigError,
    NotInAmbient,
    OrderCapExceeded,
    PreconditionViolated,
    RigidTrivial,
    TreeIRSError,
    UnknownCheck,
)
from src.groups import (
    GeneratedSubgroup,
    TruncatedWreathGroup,
    below,
    level_images,
    order_cap_scope,
    pointwise_stabilizer,
    pointwise_stabilizer_gens,
    restrict_depth,
    rigid_stabilizer_gens,
)
from src.irs import (
    DiracSubgroup,
    StabilizerOfRandomSet,
    UniformConjugate,
    conjugated_exact_distribution,
    estimate_atom_mass,
    exact_distribution,
    invariance_test,
    total_variation,
)
from src.tree import LevelSet, RootedTree, VertexAddress
from src.utils import derive_rng

logger = logging.getLogger(__name__)

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class CheckReport:
    name: str
    params: dict = field(default_factory=dict)
    verdict: str = PASS
    counterexample: Any = None
    details: dict = field(default_factory=dict)
    seed: int | None = None
    ms: float | None = None

    @property
    def failed(self) -> bool:
        return self.verdict == FAIL

    def to_json(self, timings: bool = False) -> dict:
        out = {
            "check": self.name,
            "params": self.params,
            "seed": self.seed,
            "verdict": self.verdict,
            "counterexample": self.counterexample,
            "details": self.details,
        }
        if timings and self.ms is not None:
            out["ms"] = round(self.ms, 3)
        return out


def _exact(name: str, params: dict, counterexample, details: dict | None = None) -> CheckReport:
    verdict = FAIL if counterexample is not None else PASS
    return CheckReport(name, params, verdict, counterexample, details or {})


def _statistical(name: str, params: dict, consistent: bool, enough: bool, details: dict) -> CheckReport:
    verdict = PASS if consistent and enough else INCONCLUSIVE
    return CheckReport(name, params, verdict, None, details)


def _combine(name: str, params: dict, reports: Sequence[CheckReport]) -> CheckReport:
    """One report for several cases: the first failure wins, then any inconclusive case."""
    cases = [{"params": r.params, "verdict": r.verdict, "details": r.details} for r in reports]
    for r in reports:
        if r.verdict == FAIL:
            return CheckReport(name, params, FAIL, {"case": r.params, "counterexample": r.counterexample}, {"cases": cases})
    verdict = INCONCLUSIVE if any(r.verdict == INCONCLUSIVE for r in reports) else PASS
    return CheckReport(name, params, verdict, None, {"cases": cases})


def _portrait(g: FinitaryAutomorphism) -> dict:
    return g.to_json()["perms"]


# --- sections ---------------------------------------------------------------


def check_conjugate_sections(
    d: int, n: int, k: int, trials: int, rng: np.random.Generator, flavor: Flavor = Flavor.SYMMETRIC, formula: str = "general"
) -> CheckReport:
    """Sections of s^sigma at L_k against sigma_u^-1 [s]_u sigma_{u^s}, sigma in Rst(L_k).

    ``formula="naive"`` uses sigma_u on both sides and is expected to fail.
    """
    params = {"d": d, "n": n, "k": k, "trials": trials, "flavor": Flavor(flavor).value, "formula": formula}
    if not 0 <= k < n:
        raise PreconditionViolated(f"Need 0 <= k < n, got k={k}, n={n}")
    G = TruncatedWreathGroup(d, n, flavor)
    rigid_vertices = G.vertices(k)
    level = G.tree.level(k)
    for _ in range(trials):
        s = haar_sample(d, n, G.flavor, rng)
        sigma = haar_sample_at(d, rigid_vertices, G.flavor, rng, depth=n)
        conj = conjugate(s, sigma)
        for u in level:
            target = apply(s, u) if formula == "general" else u
            expected = compose(compose(inverse(section(sigma, u)), section(s, u)), section(sigma, target))
            actual = section(conj, u)
            if actual != expected:
                return _exact(
                    "conjugate_sections",
                    params,
                    {"s": _portrait(s), "sigma": _portrait(sigma), "u": u, "section": _portrait(actual), "formula": _portrait(expected)},
                )
    return _exact("conjugate_sections", params, None, {"instances": trials, "vertices_per_instance": len(level)})


def _cycle_element(G: TruncatedWreathGroup, cycles: Sequence[Sequence[VertexAddress]]) -> FinitaryAutomorphism:
    """Element cycling each list of sibling vertices in order."""
    portrait = {}
    for cycle in cycles:
        parents = {u[:-1] for u in cycle}
        if len(parents) != 1 or len(set(cycle)) != len(cycle) or len(cycle) < 3:
            raise PreconditionViolated(f"{list(cycle)} is not a cycle of at least 3 distinct siblings")
        parent = parents.pop()
        if parent in portrait:
            raise PreconditionViolated(f"Two cycles share the parent {parent!r}")
        p = list(range(G.d))
        for a, b in zip(cycle, list(cycle[1:]) + [cycle[0]]):
            p[int(a[-1])] = int(b[-1])
        portrait[parent] = tuple(p)
    s = FinitaryAutomorphism.from_portrait(G.d, portrait, G.n)
    if not G.contains(s):
        raise NotInAmbient(f"The cycling element {s!r} is not in {G.describe()}")
    return s


def check_sections_surjective(
    d: int,
    n: int,
    k: int,
    cycles: Sequence[Sequence[VertexAddress]],
    flavor: Flavor = Flavor.ALTERNATING,
    discard_first: bool = True,
) -> CheckReport:
    """Sections of s^sigma over D, sigma running through Rst(C), cover Rst(D) with equal fibers.

    D drops the first vertex of every cycle; with ``discard_first=False`` D is
    all of C, which cannot be covered.
    """
    if isinstance(cycles[0], str):
        cycles = [cycles]
    params = {"d": d, "n": n, "k": k, "cycles": [list(c) for c in cycles], "flavor": Flavor(flavor).value, "discard_first": discard_first}
    G = TruncatedWreathGroup(d, n, flavor)
    if any(len(u) != k for c in cycles for u in c):
        raise PreconditionViolated(f"Cycle vertices must lie on level {k}")
    s = _cycle_element(G, cycles)
    C = [u for c in cycles for u in c]
    D = [u for c in cycles for u in (c[1:] if discard_first else c)]
    rigid = rigid_stabilizer_gens(G, C).enumerate()
    fibers: dict[tuple, int] = {}
    for sigma in rigid.sorted_elements():
        conj = conjugate(s, sigma)
        image = tuple(section(conj, u).key for u in D)
        fibers[image] = fibers.get(image, 0) + 1
    target = TruncatedWreathGroup(d, n - k, flavor).order ** len(D)
    sizes = sorted(set(fibers.values()))
    details = {
        "rst_c_order": rigid.order(),
        "rst_d_order": target,
        "image_size": len(fibers),
        "fiber_sizes": sizes,
    }
    counterexample = None
    if len(fibers) != target or len(sizes) != 1:
        counterexample = {"s": _portrait(s), "D": D, "image_size": len(fibers), "expected": target}
    return _exact("sections_surjective", params, counterexample, details)


def check_def_cover(cycle_lengths: Sequence[int], same_discard: bool = False) -> CheckReport:
    """(D & E) | (E & F) | (D & F) == C when D, E, F drop the first, second and third point of each cycle."""
    params = {"cycle_lengths": list(cycle_lengths), "same_discard": same_discard}
    if any(length < 3 for length in cycle_lengths):
        raise PreconditionViolated(f"Cycle lengths must be at least 3, got {list(cycle_lengths)}")
    C = {(i, j) for i, length in enumerate(cycle_lengths) for j in range(length)}

    def drop(position: int) -> set:
        return {(i, j) for i, j in C if j != position}

    D, E, F = drop(0), drop(0 if same_discard else 1), drop(2)
    covered = (D & E) | (E & F) | (D & F)
    missing = sorted(C - covered)
    misses = {p: sum(p not in X for X in (D, E, F)) for p in C}
    details = {"points": len(C), "max_missing_from": max(misses.values()) if misses else 0}
    counterexample = {"uncovered": [list(p) for p in missing]} if missing else None
    return _exact("def_cover", params, counterexample, details)


def check_grigorchuk_commutator(
    d: int,
    n: int,
    trials: int,
    rng: np.random.Generator,
    u: VertexAddress = "",
    w: VertexAddress = "0",
    phi_moves: bool = True,
    flavor: Flavor = Flavor.SYMMETRIC,
) -> CheckReport:
    """[[phi, f], g] == [f, g] for phi in Rst(u) moving uw and f, g in Rst(uw).

    With ``phi_moves=False`` phi is the identity, which breaks the hypothesis.
    """
    params = {"d": d, "n": n, "trials": trials, "u": u, "w": w, "phi_moves": phi_moves, "flavor": Flavor(flavor).value}
    G = TruncatedWreathGroup(d, n, flavor)
    uw = u + w
    G.tree.validate(uw)
    if len(uw) >= n:
        raise PreconditionViolated(f"Rst({uw!r}) is trivial at depth {n}")
    upper, lower = below(G, u), below(G, uw)
    for _ in range(trials):
        if phi_moves:
            for _ in range(1000):
                phi = haar_sample_at(d, upper, G.flavor, rng, depth=n)
                if apply(phi, uw) != uw:
                    break
            else:
                raise BudgetExceeded(f"No element of Rst({u!r}) moving {uw!r} found")
        else:
            phi = G.identity()
        f = haar_sample_at(d, lower, G.flavor, rng, depth=n)
        g = haar_sample_at(d, lower, G.flavor, rng, depth=n)
        left = commutator(commutator(phi, f), g)
        right = commutator(f, g)
        if left != right:
            return _exact(
                "grigorchuk_commutator",
                params,
                {"phi": _portrait(phi), "f": _portrait(f), "g": _portrait(g), "left": _portrait(left), "right": _portrait(right)},
            )
    return _exact("grigorchuk_commutator", params, None, {"instances": trials})


# --- fixed sets and translates ---------------------------------------------


def check_fix_stab(C: ClosedSetApprox, G: TruncatedWreathGroup) -> CheckReport:
    """Fix(Stab_G(C)) == C level by level, with one level of headroom below C."""
    params = {"d": G.d, "n": G.n, "flavor": G.flavor.value, "set": C.to_json()}
    if C.d != G.d:
        raise PreconditionViolated(f"Closed set has d={C.d}, group has d={G.d}")
    if G.n < C.depth + 1:
        raise PreconditionViolated(f"Ambient depth {G.n} leaves no headroom below depth {C.depth}")
    shadow = C.extend(G.n).leaves
    filtered = pointwise_stabilizer(G.full(), shadow)
    structural = pointwise_stabilizer_gens(G, shadow)
    fixed = fixed_boundary(filtered).truncate(C.depth)
    mismatched = [k for k in range(C.depth + 1) if fixed[k].members != C[k].members]
    details = {"stabilizer_order": filtered.order(), "structural_order": structural.order()}
    counterexample = None
    if mismatched or details["stabilizer_order"] != details["structural_order"]:
        counterexample = {
            "levels": mismatched,
            "fixed": fixed.to_json()["levels"],
            "orders": [details["stabilizer_order"], details["structural_order"]],
        }
    return _exact("fix_stab", params, counterexample, details)


def _blue_descendant(coloring, top: VertexAddress, depth: int) -> VertexAddress | None:
    for k in range(len(top) + 1, depth + 1):
        for v in coloring.at_level(k, Color.BLUE):
            if v.startswith(top):
                return v
    return None


def _moving_perm(d: int, flavor: Flavor, a: int, b: int) -> tuple[int, ...]:
    """A base permutation sending a to b."""
    for p in base_perms(d, flavor):
        if p[a] == b:
            return p
    raise PreconditionViolated(f"The {flavor.value} base group of degree {d} is not transitive")


def check_infinite_translates(C: ClosedSetApprox, count: int, G: TruncatedWreathGroup | None = None) -> CheckReport:
    """Builds count translates gamma_i with phi^gamma_i(u_{n_j}) green for j < i and blue at j = i."""
    G = G or TruncatedWreathGroup(C.d, C.depth)
    params = {"set": C.to_json(), "count": count, "flavor": G.flavor.value}
    ray = find_green_ray(C)
    if ray is None:
        raise PreconditionViolated("Closed set has no green ray at this depth")
    coloring = coloring_from_set(C)
    levels, gammas = [0], []
    for i in range(1, count + 1):
        top = ray[: levels[-1]]
        w = _blue_descendant(coloring, top, C.depth)
        if w is None or len(w) > C.depth or levels[-1] >= C.depth:
            raise BudgetExceeded(f"Depth {C.depth} hosts only {i - 1} of {count} translates")
        portrait = {}
        for j in range(len(top), len(w)):
            if w[j] != ray[j]:
                portrait[w[:j]] = _moving_perm(G.d, G.flavor, int(w[j]), int(ray[j]))
        gamma = FinitaryAutomorphism.from_portrait(G.d, portrait, G.n)
        if not G.contains(gamma):
            raise NotInAmbient(f"Translate {i} is not in {G.describe()}")
        levels.append(len(w))
        gammas.append(gamma)
    moved = [coloring.translate(g) for g in gammas]
    counterexample = None
    for i, phi in enumerate(moved, start=1):
        expected = [Color.GREEN] * (i - 1) + [Color.BLUE]
        seen = [phi[ray[: levels[j]]] for j in range(1, i + 1)]
        if seen != expected:
            counterexample = {"translate": i, "gamma": _portrait(gammas[i - 1]), "colors": [c.value for c in seen]}
            break
    distinct = len(set(moved)) == len(moved)
    if counterexample is None and not distinct:
        counterexample = {"reason": "translates are not pairwise distinct"}
    details = {"ray": ray, "levels": levels[1:], "distinct": len(set(moved))}
    return _exact("infinite_translates", params, counterexample, details)


# --- measure lemmas ---------------------------------------------------------


def check_intersection_probability(space_size: int, sets: Sequence[Iterable[int]], p: Fraction) -> CheckReport:
    """Among ceil(2/p) sets of measure p some pair meets in measure >= p^3/6."""
    p = Fraction(p)
    sets = [frozenset(s) for s in sets]
    params = {"space_size": space_size, "sets": [sorted(s) for s in sets], "p": str(p)}
    if len(sets) != math.ceil(2 / p):
        raise PreconditionViolated(f"Need ceil(2/p) = {math.ceil(2 / p)} sets, got {len(sets)}")
    if any(Fraction(len(s), space_size) != p for s in sets):
        raise PreconditionViolated(f"Every set must have measure exactly {p}")
    best = max(Fraction(len(a & b), space_size) for a, b in itertools.combinations(sets, 2))
    bound = p**3 / 6
    counterexample = None if best >= bound else {"max_intersection": str(best), "bound": str(bound)}
    return _exact("intersection_probability", params, counterexample, {"max_intersection": str(best), "bound": str(bound)})


def random_intersection_families(
    families: int, rng: np.random.Generator, ps: Sequence[Fraction] = (Fraction(1, 2), Fraction(1, 3), Fraction(1, 4)), max_size: int = 60
) -> CheckReport:
    """The intersection bound on random families, exact rationals throughout."""
    params = {"families": families, "ps": [str(p) for p in ps], "max_size": max_size}
    worst = None
    for _ in range(families):
        p = Fraction(ps[int(rng.integers(len(ps)))])
        q = p.denominator
        size = q * int(rng.integers(1, max_size // q + 1))
        r = math.ceil(2 / p)
        sets = [rng.choice(size, size=int(p * size), replace=False).tolist() for _ in range(r)]
        report = check_intersection_probability(size, sets, p)
        if report.failed:
            return _exact("intersection_probability", params, report.counterexample | {"sets": report.params["sets"]})
        ratio = Fraction(report.details["max_intersection"]) / (p**3 / 6)
        worst = ratio if worst is None else min(worst, ratio)
    return _exact("intersection_probability", params, None, {"min_ratio_to_bound": str(worst)})


def check_component_mass(weights: Sequence[Fraction], probs: Sequence[Fraction], p: Fraction) -> CheckReport:
    """Components holding S with probability >= p/2 carry mass >= p/2."""
    weights = [Fraction(w) for w in weights]
    probs = [Fraction(q) for q in probs]
    p = Fraction(p)
    params = {"weights": [str(w) for w in weights], "probs": [str(q) for q in probs], "p": str(p)}
    if sum(weights) != 1 or any(w < 0 for w in weights):
        raise PreconditionViolated("Weights must be non-negative and sum to 1")
    if any(not 0 <= q <= 1 for q in probs) or len(probs) != len(weights):
        raise PreconditionViolated("Need one probability in [0, 1] per component")
    if sum(w * q for w, q in zip(weights, probs)) != p:
        raise PreconditionViolated(f"Weighted probability is not {p}")
    mass = sum((w for w, q in zip(weights, probs) if q >= p / 2), Fraction(0))
    counterexample = None if mass >= p / 2 else {"qualifying_mass": str(mass)}
    return _exact("component_mass", params, counterexample, {"qualifying_mass": str(mass), "slack": str(mass - p / 2)})


def component_mass_grid(steps: int = 10) -> CheckReport:
    """Every two-component family with weights and probabilities on a 1/steps grid."""
    params = {"steps": steps}
    families, tightest = 0, None
    for i in range(1, steps):
        w = Fraction(i, steps)
        for a, b in itertools.product(range(steps + 1), repeat=2):
            q1, q2 = Fraction(a, steps), Fraction(b, steps)
            p = w * q1 + (1 - w) * q2
            if p == 0:
                continue
            report = check_component_mass([w, 1 - w], [q1, q2], p)
            families += 1
            if report.failed:
                return _exact("component_mass", params, report.params)
            slack = Fraction(report.details["slack"])
            if tightest is None or slack < tightest[0]:
                tightest = (slack, report.params)
    return _exact("component_mass", params, None, {"families": families, "min_slack": str(tightest[0]), "tightest": tightest[1]})


# --- rigid stabilizers ------------------------------------------------------


@lru_cache(maxsize=None)
def _perm_order(p: tuple[int, ...]) -> int:
    return Permutation(list(p)).order()


def check_order3_in_rst(G: TruncatedWreathGroup, v: VertexAddress) -> CheckReport:
    """Finds g in Rst(v) of order >= 3, directly or as hg with h in Rst(v0)."""
    params = {"d": G.d, "n": G.n, "flavor": G.flavor.value, "v": v}
    G.tree.validate(v)
    vertices = below(G, v)
    if not vertices or len(G.base) == 1:
        raise RigidTrivial(f"Rst({v!r}) is trivial in {G.describe()}")
    details: dict = {}
    found = None
    for w in vertices:
        for p in G.base:
            if _perm_order(p) >= 3:
                found, details["construction"] = G.elementary(w, p), "direct"
                break
        if found:
            break
    child = v + "0"
    if found is None and len(child) < G.n:
        nontrivial = [p for p in G.base if not is_identity_perm(p)]
        g, h = G.elementary(v, nontrivial[0]), G.elementary(child, nontrivial[0])
        found, details["construction"] = compose(h, g), "hg"
    rst = rigid_stabilizer_gens(G, [v])
    members = None
    try:
        members = rst.enumerate().elements
        details["exhaustive_count"] = sum(1 for x in members if order(x) >= 3)
    except OrderCapExceeded:
        logger.info(f"Rst({v!r}) too large for the exhaustive cross-check")
    if found is None:
        reason = {"reason": f"Rst({v!r}) has only involutions at depth {G.n}"}
        if details.get("exhaustive_count"):
            reason = {"reason": "construction missed elements the exhaustive search found"}
        return _exact("order3_in_rst", params, reason, details)
    k = order(found)
    details.update({"element": _portrait(found), "order": k})
    counterexample = None
    if k < 3:
        counterexample = {"element": _portrait(found), "order": k}
    elif members is not None and found not in members:
        counterexample = {"element": _portrait(found), "reason": f"not in Rst({v!r})"}
    elif members is not None and details["exhaustive_count"] == 0:
        counterexample = {"element": _portrait(found), "reason": "exhaustive search found no element of order >= 3"}
    return _exact("order3_in_rst", params, counterexample, details)


def _word_elements(S: GeneratedSubgroup, budget: int) -> list[FinitaryAutomorphism]:
    seen = {S.ambient.identity()}
    frontier = list(seen)
    for _ in range(budget):
        discovered = []
        for x in frontier:
            for g in S.generators:
                y = compose(x, g)
                if y not in seen:
                    seen.add(y)
                    discovered.append(y)
        frontier = discovered
    return sorted(seen, key=lambda g: g.key)


def check_long_cycles(S: GeneratedSubgroup, U: LevelSet, word_budget: int = 6) -> CheckReport:
    """Every u in U has some s in S with u, u^s, u^{s^2} distinct."""
    params = {"subgroup": S.describe(), "U": U.to_json(), "word_budget": word_budget}
    for g in S.generators:
        if any(apply(g, u) not in U.members for u in U.members):
            raise PreconditionViolated("U is not invariant under S")
    try:
        candidates = S.sorted_elements()
        source = "enumeration"
    except OrderCapExceeded:
        candidates = _word_elements(S, word_budget)
        source = "words"
    uncovered = []
    witnesses = {}
    for u in sorted(U.members):
        for s in candidates:
            a = apply(s, u)
            if a != u and apply(s, a) not in (u, a):
                witnesses[u] = _portrait(s)
                break
        else:
            uncovered.append(u)
    counterexample = {"uncovered": uncovered} if uncovered else None
    return _exact("long_cycles", params, counterexample, {"source": source, "witnesses": witnesses})


def check_index_bound(G: TruncatedWreathGroup, K: GeneratedSubgroup) -> CheckReport:
    """[Gamma_n : K & Gamma_n] <= [G : K] once a transversal of K lives in Gamma_n."""
    params = {"ambient": G.describe(), "subgroup": K.describe()}
    full = G.full()
    K = K.enumerate()
    index = full.order() // K.order()
    cosets: dict[frozenset, int] = {}
    for g in full.sorted_elements():
        coset = frozenset(compose(k, g) for k in K.elements)
        height = max((len(v) + 1 for v in g.portrait), default=0)
        cosets[coset] = min(cosets.get(coset, height), height)
    threshold = max(cosets.values())
    indices = {}
    counterexample = None
    for n in range(G.n + 1):
        gamma_n = restrict_depth(full, n)
        local = gamma_n.order() // restrict_depth(K, n).order()
        indices[str(n)] = local
        if n >= threshold and local > index and counterexample is None:
            counterexample = {"n": n, "local_index": local, "index": index}
    return _exact("index_bound", params, counterexample, {"index": index, "transversal_depth": threshold, "local_indices": indices})


# --- statistical checks -----------------------------------------------------


@lru_cache(maxsize=8)
def _level_table(G: TruncatedWreathGroup) -> np.ndarray:
    """images[i, j] = index of the image of the j-th level-n vertex under the i-th element."""
    tree = G.tree
    rows = level_images(G.full(), G.n)
    return np.array([[tree.index(x) for x in images] for _, images in rows], dtype=np.int64)


@lru_cache(maxsize=4096)
def _setwise_stabilizer_fixes(G: TruncatedWreathGroup, members: frozenset, x: VertexAddress) -> bool:
    table = _level_table(G)
    idx = np.array(sorted(G.tree.index(v) for v in members), dtype=np.int64)
    keep = np.isin(table[:, idx], idx).all(axis=1)
    return bool((table[keep, G.tree.index(x)] == G.tree.index(x)).all())


def check_stabilizer_fixes_green_ray(
    C: ClosedSetApprox,
    trials: int,
    rng: np.random.Generator,
    depths: Sequence[int] | None = None,
    floor: float = 0.5,
    min_trials: int = 1000,
    flavor: Flavor = Flavor.SYMMETRIC,
) -> CheckReport:
    """Fraction of Haar translates whose level-k setwise stabilizer fixes the translated green ray."""
    depths = list(depths or range(1, C.depth + 1))
    params = {"set": C.to_json(), "trials": trials, "depths": depths, "floor": floor, "flavor": Flavor(flavor).value}
    ray = find_green_ray(C)
    if ray is None:
        return CheckReport("stabilizer_fixes_green_ray", params, INCONCLUSIVE, None, {"skipped": "no green ray"})
    hits = dict.fromkeys(depths, 0)
    for _ in range(trials):
        gamma = haar_sample(C.d, C.depth, flavor, rng)
        moved = translate_set(C, gamma)
        for k in depths:
            G_k = TruncatedWreathGroup(C.d, k, flavor)
            if _setwise_stabilizer_fixes(G_k, moved[k].members, apply(gamma, ray[:k])):
                hits[k] += 1
    fractions = [Fraction(hits[k], trials) for k in depths]
    monotone = all(a <= b for a, b in zip(fractions, fractions[1:]))
    details = {"ray": ray, "fractions": {str(k): str(f) for k, f in zip(depths, fractions)}}
    return _statistical("stabilizer_fixes_green_ray", params, monotone and fractions[-1] >= floor, trials >= min_trials, details)


def _orbit_size(V: LevelSet, G: TruncatedWreathGroup) -> int:
    gens = G.elementary_generators(G.vertices())
    seen = {V.members}
    frontier = [V.members]
    while frontier:
        discovered = []
        for members in frontier:
            for g in gens:
                moved = frozenset(apply(g, v) for v in members)
                if moved not in seen:
                    seen.add(moved)
                    discovered.append(moved)
        frontier = discovered
    return len(seen)


def check_coloring_collisions(C: ClosedSetApprox, trials: int, rng: np.random.Generator, min_trials: int = 1000) -> CheckReport:
    """Two independent translates agree at level k about 1/|orbit of C_k| of the time, decreasing in k."""
    params = {"set": C.to_json(), "trials": trials}
    G = TruncatedWreathGroup(C.d, C.depth)
    agree = [0] * (C.depth + 1)
    for _ in range(trials):
        a = translate_set(C, haar_sample(G.d, G.n, G.flavor, rng))
        b = translate_set(C, haar_sample(G.d, G.n, G.flavor, rng))
        for k in range(C.depth + 1):
            if a[k].members == b[k].members:
                agree[k] += 1
    expected = [Fraction(1, _orbit_size(C[k], G.truncated(k))) for k in range(C.depth + 1)]
    observed = [Fraction(c, trials) for c in agree]
    close = all(
        abs(float(o) - float(e)) <= 4 * math.sqrt(float(e) * (1 - float(e)) / trials) + 1 / trials
        for o, e in zip(observed, expected)
    )
    decreasing = all(a >= b for a, b in zip(expected, expected[1:]))
    details = {"expected": [str(e) for e in expected], "observed": [str(o) for o in observed]}
    return _statistical("coloring_collisions", params, close and decreasing, trials >= min_trials, details)


def check_haar_uniformity(d: int, n: int, samples: int, rng: np.random.Generator, alpha: float = 0.001) -> CheckReport:
    """Chi-square goodness of fit of Haar samples over every element of the group."""
    params = {"d": d, "n": n, "samples": samples, "alpha": alpha}
    G = TruncatedWreathGroup(d, n)
    index = {g: i for i, g in enumerate(G.full().sorted_elements())}
    counts = np.zeros(len(index), dtype=np.int64)
    for _ in range(samples):
        counts[index[haar_sample(d, n, G.flavor, rng)]] += 1
    result = chisquare(counts)
    details = {"buckets": len(index), "statistic": float(result.statistic), "p_value": float(result.pvalue)}
    return _statistical("haar_uniformity", params, result.pvalue > alpha, samples >= 5 * len(index), details)


def _sympy_order(G: TruncatedWreathGroup) -> int:
    """Order of the group of level-n permutations generated by the elementary generators."""
    leaves = G.tree.level(G.n)
    gens = [Permutation([G.tree.index(apply(g, v)) for v in leaves]) for g in G.elementary_generators(G.vertices())]
    if not gens:
        return 1
    return int(PermutationGroup(gens).order())


def check_enumeration_orders(cases: Sequence[tuple[int, int, str]]) -> CheckReport:
    """BFS closure, the closed form and an independent permutation-group order agree."""
    params = {"cases": [list(c) for c in cases]}
    orders = {}
    for d, n, flavor in cases:
        G = TruncatedWreathGroup(d, n, flavor)
        closure = GeneratedSubgroup(G, tuple(G.elementary_generators(G.vertices()))).order()
        oracle = _sympy_order(G)
        orders[f"{flavor}/{d}/{n}"] = closure
        if not closure == G.order == oracle:
            return _exact("enumeration_orders", params, {"case": [d, n, flavor], "bfs": closure, "closed_form": G.order, "oracle": oracle})
    return _exact("enumeration_orders", params, None, {"orders": orders})


def check_composition_oracle(cases: Sequence[tuple[int, int]], pairs: int, rng: np.random.Generator) -> CheckReport:
    """apply(compose(a, b), w) == apply(b, apply(a, w)) for random pairs and every level-n word."""
    params = {"cases": [list(c) for c in cases], "pairs": pairs}
    for d, n in cases:
        words = RootedTree(d).level(n)
        for _ in range(pairs):
            a = haar_sample(d, n, Flavor.SYMMETRIC, rng)
            b = haar_sample(d, n, Flavor.SYMMETRIC, rng)
            ab = compose(a, b)
            for w in words:
                if apply(ab, w) != apply(b, apply(a, w)):
                    return _exact("composition_oracle", params, {"a": _portrait(a), "b": _portrait(b), "w": w})
    return _exact("composition_oracle", params, None, {"mismatches": 0})


def check_irs_invariance(
    generators: Sequence[FinitaryAutomorphism],
    G: TruncatedWreathGroup,
    gamma: FinitaryAutomorphism,
    trials: int,
    rng: np.random.Generator,
    max_tv: float = 0.05,
) -> CheckReport:
    """Uniform conjugates are invariant; the fixed subgroup is not (exact TV 1 when gamma moves it)."""
    params = {"ambient": G.describe(), "generators": [_portrait(g) for g in generators], "gamma": _portrait(gamma), "trials": trials}
    L = GeneratedSubgroup(G, tuple(generators))
    uniform, broken = UniformConjugate(L), DiracSubgroup(L)
    exact = exact_distribution(uniform, G.n)
    orbit = len(exact)
    if set(exact.values()) != {Fraction(1, orbit)}:
        return _exact("irs_invariance", params, {"exact_distribution": {k: str(v) for k, v in sorted(exact.items())}})
    exact_tv = total_variation(exact, conjugated_exact_distribution(uniform, gamma, G.n))
    broken_tv = total_variation(exact_distribution(broken, G.n), conjugated_exact_distribution(broken, gamma, G.n))
    if exact_tv != 0:
        return _exact("irs_invariance", params, {"exact_tv": str(exact_tv)})
    empirical = invariance_test(uniform, gamma, trials, rng)
    broken_empirical = invariance_test(broken, gamma, trials, rng)
    details = {
        "orbit_size": orbit,
        "empirical_tv": str(empirical.statistic),
        "broken_exact_tv": str(broken_tv),
        "broken_rejected": not broken_empirical.passed,
    }
    consistent = float(empirical.statistic) < max_tv and broken_tv == 1 and not broken_empirical.passed
    return _statistical("irs_invariance", params, consistent, trials >= 1000, details)


def check_atomless_growth(
    C: ClosedSetApprox, depths: Sequence[int], trials: int, rng: np.random.Generator, min_trials: int = 1000
) -> CheckReport:
    """Distinct fingerprints of pointwise stabilizers of random translates grow with depth."""
    params = {"set": C.to_json(), "depths": list(depths), "trials": trials}
    supports = {}
    for k in depths:
        sampler = StabilizerOfRandomSet(C.truncate(k), TruncatedWreathGroup(C.d, k), "pointwise")
        supports[k] = estimate_atom_mass(sampler, trials, k, rng).support_size
    values = [supports[k] for k in depths]
    growing = all(a < b for a, b in zip(values, values[1:]))
    details = {"support_sizes": {str(k): v for k, v in supports.items()}}
    return _statistical("atomless_growth", params, growing, trials >= min_trials, details)


# --- registry ---------------------------------------------------------------


def _closed_set(spec: dict, d: int) -> ClosedSetApprox:
    try:
        return closed_set_from_spec(ClosedSetSpec.model_validate(spec), d)
    except ValidationError as e:
        raise ConfigError(f"Invalid closed set parameter: {e}") from e


def _job_conjugate_sections(p, rng):
    return check_conjugate_sections(p["d"], p["n"], p["k"], p["trials"], rng, p.get("flavor", "symmetric"), p.get("formula", "general"))


def _job_sections_surjective(p, rng):
    return check_sections_surjective(p["d"], p["n"], p["k"], p["cycles"], p.get("flavor", "alternating"), p.get("discard_first", True))


def _job_def_cover(p, rng):
    if "cycle_lengths" in p:
        return check_def_cover(p["cycle_lengths"], p.get("same_discard", False))
    reports = [
        check_def_cover(lengths, p.get("same_discard", False))
        for r in range(1, p["max_cycles"] + 1)
        for lengths in itertools.combinations_with_replacement(p["lengths"], r)
    ]
    return _combine("def_cover", p, reports)


def _job_grigorchuk_commutator(p, rng):
    return check_grigorchuk_commutator(
        p["d"], p["n"], p["trials"], rng, p.get("u", ""), p.get("w", "0"), p.get("phi_moves", True), p.get("flavor", "symmetric")
    )


def _job_fix_stab(p, rng):
    reports = []
    for case in p["cases"]:
        G = TruncatedWreathGroup(case["d"], case["n"], case.get("flavor", "symmetric"))
        reports.append(check_fix_stab(_closed_set(case["set"], G.d), G))
    return _combine("fix_stab", p, reports)


def _job_infinite_translates(p, rng):
    C = _closed_set(p["set"], p["d"])
    return check_infinite_translates(C, p["count"], TruncatedWreathGroup(p["d"], C.depth, p.get("flavor", "symmetric")))


def _job_intersection_probability(p, rng):
    reports = [check_intersection_probability(f["space_size"], f["sets"], Fraction(f["p"])) for f in p.get("families", [])]
    if p.get("random_families"):
        reports.append(random_intersection_families(p["random_families"], rng))
    return _combine("intersection_probability", p, reports)


def _job_component_mass(p, rng):
    reports = [check_component_mass(f["weights"], f["probs"], Fraction(f["p"])) for f in p.get("families", [])]
    reports.append(component_mass_grid(p.get("steps", 10)))
    return _combine("component_mass", p, reports)


def _job_order3_in_rst(p, rng):
    reports = [check_order3_in_rst(TruncatedWreathGroup(c["d"], c["n"], c.get("flavor", "symmetric")), c["v"]) for c in p["cases"]]
    return _combine("order3_in_rst", p, reports)


def _job_long_cycles(p, rng):
    G = TruncatedWreathGroup(p["d"], p["n"], p.get("flavor", "symmetric"))
    if p.get("generators") is None:
        S = GeneratedSubgroup(G, tuple(G.elementary_generators(G.vertices())))
    else:
        S = GeneratedSubgroup(G, tuple(FinitaryAutomorphism.from_portrait(G.d, g, G.n) for g in p["generators"]))
    U = LevelSet(G.d, p["level"], frozenset(p.get("U") or G.tree.level(p["level"])))
    return check_long_cycles(S, U, p.get("word_budget", 6))


def _job_stabilizer_fixes_green_ray(p, rng):
    C = _closed_set(p["set"], p["d"])
    return check_stabilizer_fixes_green_ray(C, p["trials"], rng, p.get("depths"), p.get("floor", 0.5), p.get("min_trials", 1000))


def _job_index_bound(p, rng):
    G = TruncatedWreathGroup(p["d"], p["n"], p.get("flavor", "symmetric"))
    V = LevelSet(G.d, len(p["fixed"][0]), frozenset(p["fixed"]))
    return check_index_bound(G, pointwise_stabilizer_gens(G, V))


def _job_coloring_collisions(p, rng):
    return check_coloring_collisions(_closed_set(p["set"], p["d"]), p["trials"], rng, p.get("min_trials", 1000))


def _job_haar_uniformity(p, rng):
    return check_haar_uniformity(p["d"], p["n"], p["samples"], rng, p.get("alpha", 0.001))


def _job_enumeration_orders(p, rng):
    return check_enumeration_orders([tuple(c) for c in p["cases"]])


def _job_composition_oracle(p, rng):
    return check_composition_oracle([tuple(c) for c in p["cases"]], p["pairs"], rng)


def _job_irs_invariance(p, rng):
    G = TruncatedWreathGroup(p["d"], p["n"], p.get("flavor", "symmetric"))
    gens = [FinitaryAutomorphism.from_portrait(G.d, g, G.n) for g in p["generators"]]
    gamma = FinitaryAutomorphism.from_portrait(G.d, p["gamma"], G.n)
    return check_irs_invariance(gens, G, gamma, p["trials"], rng, p.get("max_tv", 0.05))


def _job_atomless_growth(p, rng):
    C = _closed_set(p["set"], p["d"])
    return check_atomless_growth(C, p["depths"], p["trials"], rng, p.get("min_trials", 1000))


_MIXED_SET = {"depth": 4, "leaves": ["0000", "0001", "0010", "0011", "1111"]}


@dataclass(frozen=True)
class CheckSpec:
    job: Callable[[dict, np.random.Generator], CheckReport]
    defaults: dict


CHECKS: dict[str, CheckSpec] = {
    "atomless_growth": CheckSpec(_job_atomless_growth, {"d": 2, "set": _MIXED_SET, "depths": [2, 3, 4], "trials": 2000}),
    "coloring_collisions": CheckSpec(_job_coloring_collisions, {"d": 2, "set": {"ray": "1111"}, "trials": 2000}),
    "component_mass": CheckSpec(
        _job_component_mass,
        {"families": [{"weights": ["1"], "probs": ["1/3"], "p": "1/3"}, {"weights": ["1/2", "1/2"], "probs": ["1/4", "1/4"], "p": "1/4"}], "steps": 10},
    ),
    "composition_oracle": CheckSpec(_job_composition_oracle, {"cases": [[2, 3], [3, 2]], "pairs": 1000}),
    "conjugate_sections": CheckSpec(_job_conjugate_sections, {"d": 3, "n": 2, "k": 1, "trials": 1000}),
    "def_cover": CheckSpec(_job_def_cover, {"lengths": [3, 4, 5], "max_cycles": 3}),
    "enumeration_orders": CheckSpec(
        _job_enumeration_orders,
        {"cases": [[2, 1, "symmetric"], [2, 2, "symmetric"], [2, 3, "symmetric"], [3, 2, "alternating"]]},
    ),
    "fix_stab": CheckSpec(
        _job_fix_stab,
        {
            "cases": [
                {"d": 2, "n": 3, "set": {"depth": 2, "leaves": []}},
                {"d": 2, "n": 3, "set": {"depth": 2, "shadows": [""]}},
                {"d": 2, "n": 3, "set": {"ray": "11"}},
                {"d": 2, "n": 3, "set": {"depth": 2, "shadows": ["00", "11"]}},
                {"d": 3, "n": 2, "set": {"depth": 1, "leaves": []}},
                {"d": 3, "n": 2, "set": {"depth": 1, "shadows": [""]}},
                {"d": 3, "n": 2, "set": {"ray": "1"}},
                {"d": 3, "n": 2, "set": {"depth": 1, "shadows": ["0", "2"]}},
            ]
        },
    ),
    "grigorchuk_commutator": CheckSpec(_job_grigorchuk_commutator, {"d": 2, "n": 3, "trials": 500}),
    "haar_uniformity": CheckSpec(_job_haar_uniformity, {"d": 2, "n": 2, "samples": 10_000}),
    "index_bound": CheckSpec(_job_index_bound, {"d": 2, "n": 3, "fixed": ["00"]}),
    "infinite_translates": CheckSpec(_job_infinite_translates, {"d": 2, "set": {"ray": "11111"}, "count": 4}),
    "intersection_probability": CheckSpec(
        _job_intersection_probability,
        {"families": [{"space_size": 4, "sets": [[0, 1], [2, 3], [0, 2], [1, 3]], "p": "1/2"}], "random_families": 1000},
    ),
    "irs_invariance": CheckSpec(
        _job_irs_invariance,
        {"d": 2, "n": 2, "generators": [{"0": [1, 0]}], "gamma": {"": [1, 0]}, "trials": 10_000},
    ),
    "long_cycles": CheckSpec(_job_long_cycles, {"d": 3, "n": 1, "flavor": "alternating", "level": 1}),
    "order3_in_rst": CheckSpec(
        _job_order3_in_rst,
        {"cases": [{"d": 2, "n": 3, "v": "0"}, {"d": 3, "n": 2, "flavor": "alternating", "v": ""}]},
    ),
    "sections_surjective": CheckSpec(_job_sections_surjective, {"d": 3, "n": 2, "k": 1, "cycles": [["0", "1", "2"]]}),
    "stabilizer_fixes_green_ray": CheckSpec(
        _job_stabilizer_fixes_green_ray, {"d": 2, "set": _MIXED_SET, "depths": [2, 3, 4], "trials": 2000}
    ),
}


def resolve_checks(names: Iterable[str]) -> list[str]:
    """Expand "all" and reject unknown names; the result is sorted."""
    selected = set()
    for name in names:
        if name == "all":
            selected.update(CHECKS)
        elif name in CHECKS:
            selected.add(name)
        else:
            raise UnknownCheck(name)
    return sorted(selected)


def run_check(name: str, seed: int, overrides: dict | None = None, order_cap: int | None = None) -> CheckReport:
    """Run one registered check with its own generator derived from (seed, name).

    Subgroups the check builds without an explicit cap stop at order_cap.
    """
    if name not in CHECKS:
        raise UnknownCheck(name)
    spec = CHECKS[name]
    params = {**spec.defaults, **(overrides or {})}
    rng = derive_rng(seed, name)
    start = time.perf_counter()
    try:
        with order_cap_scope(order_cap):
            report = spec.job(params, rng)
    except (OrderCapExceeded, ConfigError):
        raise
    except KeyError as e:
        raise ConfigError(f"Check {name} is missing parameter {e}") from e
    except TreeIRSError as e:
        logger.warning(f"Check {name} could not run: {e}")
        report = CheckReport(name, params, FAIL, {"error": type(e).__name__, "message": str(e)})
    elapsed = (time.perf_counter() - start) * 1000
    logger.info(f"Check {name}: {report.verdict} in {elapsed:.0f} ms")
    return replace(report, name=name, params=params, seed=seed, ms=elapsed)


def run_checks(
    names: Iterable[str], seed: int, params: dict[str, dict] | None = None, order_cap: int | None = None
) -> list[CheckReport]:
    params = params or {}
    return [run_check(name, seed, params.get(name), order_cap) for name in resolve_checks(names)]
