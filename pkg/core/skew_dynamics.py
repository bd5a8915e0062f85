"""
Dynamique du produit gauche S(ω, z) = (σω, R_{ω₁} z).

Énumération des mots, composition le long d'un mot, points périodiques avec
multiplicité, période primitive, sommes ergodiques, regroupement en orbites
fermées et multiplicateurs.
"""
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from config import settings
from core.errors import (
    EnumerationCapExceeded,
    InputError,
    MultiplierUndefined,
    OrbitClosureMismatch,
    PeriodDetectionAmbiguous,
    PotentialUndefined,
)
from core.numtheory import divisors
from core.potentials import Potential, Zero
from core.rational_maps import (
    INFINITY,
    RationalMap,
    SpherePoint,
    chordal_distance,
    compose,
    derivative,
    derivative_at_infinity,
    eval_sphere,
    fixed_point_polynomial,
    roots,
)

logger = logging.getLogger(__name__)

Word = Tuple[int, ...]


# ==============================================================================
# TYPES
# ==============================================================================

@dataclass(frozen=True)
class Tolerances:
    root_cluster: float = settings.ROOT_CLUSTER_TOL
    period_closure: float = settings.PERIOD_CLOSURE_TOL
    residual_ceiling: float = settings.ROOT_RESIDUAL_CEILING
    orbit_match: float = settings.ORBIT_MATCH_TOL


@dataclass(frozen=True)
class SkewPeriodicPoint:
    word: Word
    z: SpherePoint
    multiplicity: int
    prime_period: int
    weight_exponent: float = 0.0

    @property
    def n(self) -> int:
        return len(self.word)

    def sort_key(self):
        return (self.word, self.z.sort_key())


@dataclass(frozen=True)
class ClosedOrbit:
    length: int
    representative: SkewPeriodicPoint
    members: Tuple[SkewPeriodicPoint, ...]
    weight_exponent: float

    @property
    def multiplicity(self) -> int:
        return self.representative.multiplicity

    def weight(self) -> float:
        return self.multiplicity * math.exp(self.weight_exponent)


# ==============================================================================
# WORDS
# ==============================================================================

def rotate(word: Word, k: int = 1) -> Word:
    k %= len(word)
    return word[k:] + word[:k]


def _check_word(word: Word, alphabet_size: int):
    if len(word) < 1:
        raise InputError("words must have length >= 1")
    for letter in word:
        if not 1 <= letter <= alphabet_size:
            raise InputError(f"letter {letter} outside alphabet 1..{alphabet_size}")


def enumerate_words(M: int, n: int, cap: int = settings.MAX_WORDS) -> List[Word]:
    """Les Mⁿ mots de longueur n, ordre lexicographique."""
    if M < 1 or n < 1:
        raise InputError(f"need M >= 1 and n >= 1, got M={M}, n={n}")
    if M ** n > cap:
        raise EnumerationCapExceeded(f"{M}^{n} words exceed the enumeration cap {cap}", cap)
    return list(itertools.product(range(1, M + 1), repeat=n))


def compose_along_word(word: Word, maps: Sequence[RationalMap]) -> RationalMap:
    """R_{w_n} ∘ ⋯ ∘ R_{w_1} : la dernière lettre est appliquée en dernier."""
    _check_word(word, len(maps))
    result = maps[word[0] - 1]
    for letter in word[1:]:
        result = compose(maps[letter - 1], result)
    return result


# ==============================================================================
# ORBIT HELPERS
# ==============================================================================

def step(word: Word, z: SpherePoint, maps: Sequence[RationalMap]) -> Tuple[Word, SpherePoint]:
    """Une application de S au point (w^∞, z)."""
    return rotate(word, 1), eval_sphere(maps[word[0] - 1], z)


def closure_tolerance(tol: float, multiplicity: int = 1) -> float:
    """Un point fixe de multiplicité m n'est connu qu'à ~ε^(1/m) près."""
    if multiplicity <= 1:
        return tol
    return max(tol, 10.0 * settings.MACHINE_EPSILON ** (1.0 / multiplicity))


def prime_period(word: Word, z: SpherePoint, maps: Sequence[RationalMap],
                 tol: float = settings.PERIOD_CLOSURE_TOL, multiplicity: int = 1) -> int:
    """
    Plus petit d | n tel que w soit la répétition de son préfixe de longueur d
    et que la composition le long de ce préfixe renvoie z à distance ≤ tol.

    tol est élargi pour les racines multiples ; une distance dans ]tol, 10·tol[
    est jugée ambiguë.
    """
    _check_word(word, len(maps))
    tol = closure_tolerance(tol, multiplicity)
    n = len(word)
    current = z
    walked = 0
    for d in divisors(n)[:-1]:
        prefix = word[:d]
        if prefix * (n // d) != word:
            continue
        while walked < d:
            current = eval_sphere(maps[word[walked] - 1], current)
            walked += 1
        distance = chordal_distance(current, z)
        if distance <= tol:
            return d
        if distance < 10.0 * tol:
            raise PeriodDetectionAmbiguous(
                f"word {word}: closure distance {distance:.2e} at d={d} is too close to "
                f"the tolerance {tol:.0e}")
    return n


def ergodic_sum(potential: Potential, word: Word, z: SpherePoint, length: int,
                maps: Sequence[RationalMap]) -> float:
    """Σ_{i<L} f(σⁱ(w^∞), zᵢ)."""
    if length < 1:
        raise InputError(f"ergodic sum length must be >= 1, got {length}")
    _check_word(word, len(maps))
    n = len(word)
    values = []
    current = z
    for i in range(length):
        block = rotate(word, i)
        try:
            value = potential(block, current, maps)
        except PotentialUndefined as exc:
            raise PotentialUndefined(str(exc), i) from exc
        if not math.isfinite(value):
            raise PotentialUndefined(f"potential returned {value}", i)
        values.append(value)
        if i + 1 < length:
            current = eval_sphere(maps[word[i % n] - 1], current)
    return math.fsum(values)


def multiplier(word: Word, z: SpherePoint, maps: Sequence[RationalMap]) -> complex:
    """
    Dérivée de la composition le long du mot au point z (règle de chaîne).

    À l'infini, calculée dans la carte w = 1/z quand chaque application du
    mot fixe l'infini ; indéfinie sinon.
    """
    _check_word(word, len(maps))
    if z.infinite:
        value = 1.0 + 0j
        for letter in word:
            value *= derivative_at_infinity(maps[letter - 1])
        return value
    value = 1.0 + 0j
    current = z
    for i, letter in enumerate(word):
        if current.infinite:
            raise MultiplierUndefined(f"orbit of {z} under {word} passes through infinity at step {i}")
        value *= derivative(maps[letter - 1])(current.value)
        current = eval_sphere(maps[letter - 1], current)
    return value


def classify_repelling(value: complex) -> bool:
    return abs(value) > 1.0


def group_into_orbits(points: Sequence[SkewPeriodicPoint], maps: Sequence[RationalMap],
                      tol: float = settings.ORBIT_MATCH_TOL,
                      weight_tol: float = settings.ORBIT_WEIGHT_TOL) -> List[ClosedOrbit]:
    """Partitionne les points de période primitive n en orbites fermées."""
    if not points:
        return []
    n = points[0].n
    for p in points:
        if p.prime_period != n or p.n != n:
            raise InputError(f"group_into_orbits needs prime period {n} points, got {p}")

    by_word: Dict[Word, List[int]] = {}
    ordered = sorted(range(len(points)), key=lambda i: points[i].sort_key())
    for i in ordered:
        by_word.setdefault(points[i].word, []).append(i)

    used = [False] * len(points)
    orbits: List[ClosedOrbit] = []
    for start in ordered:
        if used[start]:
            continue
        members = [start]
        used[start] = True
        current = points[start]
        match_tol = closure_tolerance(tol, current.multiplicity)
        for _ in range(n):
            word, image = step(current.word, current.z, maps)
            if len(members) == n:
                if chordal_distance(image, points[start].z) > match_tol:
                    raise OrbitClosureMismatch(
                        f"orbit from {points[start].word}, {points[start].z} does not close")
                break
            candidates = [(chordal_distance(image, points[j].z), j)
                          for j in by_word.get(word, []) if not used[j]]
            if not candidates:
                raise OrbitClosureMismatch(f"no enumerated point matches S-image ({word}, {image})")
            distance, match = min(candidates)
            if distance > match_tol:
                raise OrbitClosureMismatch(
                    f"S-image ({word}, {image}) is {distance:.2e} from the nearest point")
            used[match] = True
            members.append(match)
            current = points[match]

        member_points = tuple(points[j] for j in members)
        multiplicities = {p.multiplicity for p in member_points}
        if len(multiplicities) != 1:
            raise OrbitClosureMismatch(f"orbit members carry different multiplicities {multiplicities}")
        weights = [p.weight_exponent for p in member_points]
        if max(weights) - min(weights) > weight_tol * max(1.0, abs(weights[0])):
            raise OrbitClosureMismatch(f"orbit members carry different weights {weights}")
        representative = min(member_points, key=lambda p: p.sort_key())
        orbits.append(ClosedOrbit(n, representative, member_points, representative.weight_exponent))

    orbits.sort(key=lambda o: o.representative.sort_key())
    return orbits


# ==============================================================================
# SYSTEM
# ==============================================================================

class SkewSystem:
    """Semigroupe fini d'applications rationnelles et son produit gauche."""

    def __init__(self, maps: Sequence[RationalMap], tolerances: Optional[Tolerances] = None,
                 max_degree: int = settings.MAX_DEGREE, max_words: int = settings.MAX_WORDS,
                 precision: str = "standard", workers: int = settings.DEFAULT_WORKERS):
        if not maps:
            raise InputError("a skew system needs at least one map")
        self.maps = list(maps)
        self.tolerances = tolerances or Tolerances()
        self.max_degree = max_degree
        self.max_words = max_words
        self.precision = precision
        self.workers = max(1, int(workers))

    @property
    def alphabet_size(self) -> int:
        return len(self.maps)

    @property
    def degrees(self) -> Tuple[int, ...]:
        return tuple(m.degree for m in self.maps)

    def word_degree(self, word: Word) -> int:
        return math.prod(self.maps[letter - 1].degree for letter in word)

    def word_maps(self, n: int) -> Dict[Word, RationalMap]:
        """Compositions de tous les mots de longueur n, construites préfixe par préfixe."""
        enumerate_words(self.alphabet_size, n, self.max_words)
        top = max(self.degrees) ** n
        if top > self.max_degree:
            raise EnumerationCapExceeded(
                f"composition degree {top} at n={n} exceeds the cap {self.max_degree}", self.max_degree)

        maps = self.maps
        if self.precision == "extended" and top > settings.EXTENDED_PRECISION_DEGREE:
            maps = [m.to_extended() for m in self.maps]
        letters = range(1, self.alphabet_size + 1)
        level = {(j,): maps[j - 1] for j in letters}
        for _ in range(n - 1):
            level = {prefix + (j,): compose(maps[j - 1], rmap)
                     for prefix, rmap in level.items() for j in letters}
        return level

    def periodic_points_for_word(self, word: Word, potential: Optional[Potential] = None,
                                 word_map: Optional[RationalMap] = None) -> List[SkewPeriodicPoint]:
        """Points fixes de R_w sur Ĉ avec multiplicité ; Σ multiplicités = deg R_w + 1."""
        _check_word(word, self.alphabet_size)
        potential = potential or Zero()
        rmap = word_map if word_map is not None else compose_along_word(word, self.maps)
        F, m_inf = fixed_point_polynomial(rmap)
        tol = self.tolerances
        found = [(SpherePoint.finite(r.value), r.multiplicity)
                 for r in roots(F, tol.root_cluster, tol.residual_ceiling)]
        if m_inf > 0:
            found.append((INFINITY, m_inf))

        points = []
        for z, mult in found:
            period = prime_period(word, z, self.maps, tol.period_closure, mult)
            weight = ergodic_sum(potential, word, z, period, self.maps)
            points.append(SkewPeriodicPoint(word, z, mult, period, weight))
        logger.debug(f"word {word}: degree {rmap.degree}, {sum(p.multiplicity for p in points)} points")
        return points

    def periodic_points(self, n: int, potential: Optional[Potential] = None) -> List[SkewPeriodicPoint]:
        """Per_n(S), mot par mot dans l'ordre lexicographique."""
        compositions = self.word_maps(n)
        words = list(compositions)

        def solve(word):
            return self.periodic_points_for_word(word, potential, compositions[word])

        if self.workers > 1 and len(words) > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                results = list(pool.map(solve, words))
        else:
            results = [solve(w) for w in words]
        return [p for batch in results for p in batch]

    def closed_orbits(self, n: int, potential: Optional[Potential] = None,
                      points: Optional[List[SkewPeriodicPoint]] = None) -> List[ClosedOrbit]:
        if points is None:
            points = self.periodic_points(n, potential)
        primitive = [p for p in points if p.prime_period == n]
        return group_into_orbits(primitive, self.maps, self.tolerances.orbit_match)

    def periodic_point_total(self, n: int) -> int:
        """Σ_w (deg R_w + 1), sans résolution de racines."""
        return sum(self.word_degree(w) + 1 for w in enumerate_words(self.alphabet_size, n, self.max_words))
