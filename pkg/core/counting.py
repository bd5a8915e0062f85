"""
Fonctions de comptage pondérées E_S, D_S, C_S, π_S et sommes associées.

Trois sources de tables :
- 'formula'        : f ≡ 0, entiers exacts, E(n) = (Σ r_j)ⁿ + Mⁿ
- 'constant-shift' : f ≡ c, le poids ne dépend que de la période primitive
- 'enumeration'    : potentiel quelconque, points périodiques résolus

Les sommes (Mertens, Meissel, Dirichlet, ρ_f) sont accumulées en mpmath pour
éviter tout dépassement de capacité sur λⁿ.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import mpmath
import numpy as np
import pandas as pd
from scipy import stats

from config import settings
from core.errors import (
    ConfigurationError,
    EnumerationCapExceeded,
    HypothesisImplausible,
    InputError,
    LambdaNotAdmissible,
    MissingDivisorData,
    MultiplierUndefined,
    OutsideRadius,
    TailNotCertifiable,
)
from core.numtheory import divisors, mobius, zeta_detailed
from core.potentials import Potential, Zero
from core.rational_maps import SpherePoint
from core.skew_dynamics import SkewSystem, multiplier

logger = logging.getLogger(__name__)

Number = Union[int, Fraction, float, mpmath.mpf]


class CountMode(str, Enum):
    EXACT = "exact"
    FLOATING = "floating"


class SeriesKind(str, Enum):
    PRIME_ORBIT = "prime_orbit"
    MERTENS = "mertens"
    MEISSEL = "meissel"
    DIRICHLET_PARTIAL = "dirichlet_partial"
    RHO = "rho_series"


def _mp(x) -> mpmath.mpf:
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    return mpmath.mpf(x)


def _is_exact(values) -> bool:
    return all(isinstance(v, (int, Fraction)) and not isinstance(v, bool) for v in values)


# ==============================================================================
# TYPES
# ==============================================================================

@dataclass(frozen=True)
class GrowthEnvelope:
    """
    Enveloppe certifiée des comptes normalisés b_n = n·C(n)/baseⁿ :
    |b_n - 1| ≤ ratioⁿ + 2λ₀/(λ₀-1)·λ₀^{-n/2}, décroissant en n.
    """
    base: float
    lam0: float
    ratio: float

    def epsilon(self, n: int) -> mpmath.mpf:
        lam0 = mpmath.mpf(self.lam0)
        return (mpmath.mpf(self.ratio) ** n
                + 2 * lam0 / (lam0 - 1) * lam0 ** (-mpmath.mpf(n) / 2))


@dataclass(frozen=True)
class CountTable:
    mode: CountMode
    source: str
    E: Tuple
    D: Tuple
    C: Tuple
    degrees: Tuple[int, ...]
    potential: Dict = field(default_factory=dict)
    maps: Tuple[str, ...] = ()
    lambda_hint: Optional[float] = None
    envelope: Optional[GrowthEnvelope] = None
    digest: str = ""
    exclusions: Tuple[int, ...] = ()
    notes: Dict = field(default_factory=dict)

    @property
    def n_max(self) -> int:
        return len(self.E)

    @property
    def alphabet_size(self) -> int:
        return len(self.degrees)

    def _at(self, column: Tuple, n: int, name: str):
        if not 1 <= n <= self.n_max:
            raise MissingDivisorData(f"{name}({n}) not in table (n_max={self.n_max})", n)
        return column[n - 1]

    def E_at(self, n: int):
        return self._at(self.E, n, "E")

    def D_at(self, n: int):
        return self._at(self.D, n, "D")

    def C_at(self, n: int):
        return self._at(self.C, n, "C")

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'n': list(range(1, self.n_max + 1)),
            'E': list(self.E),
            'D': list(self.D),
            'C': list(self.C),
            'mode': [self.mode.value] * self.n_max,
        })

    def with_digest(self, digest: str) -> "CountTable":
        return replace(self, digest=digest)

    def extended_to(self, n_max: int) -> "CountTable":
        """Recalcule une table à formule fermée jusqu'à n_max."""
        if n_max <= self.n_max:
            return self
        if self.source == "formula":
            rebuilt = exact_zero_table(self.degrees, n_max, self.maps, self.lambda_hint)
        elif self.source == "constant-shift":
            c = float(self.potential.get('parameters', {}).get('c', 0.0))
            rebuilt = constant_shift_table(self.degrees, c, n_max, self.maps, self.lambda_hint,
                                           self.potential)
        else:
            raise TailNotCertifiable(
                f"enumeration table stops at n={self.n_max}, {n_max} terms required")
        if self.exclusions:
            rebuilt = restrict_to_julia(rebuilt, self.exclusions, self.notes)
        return rebuilt.with_digest(self.digest)


@dataclass(frozen=True)
class SeriesValue:
    kind: SeriesKind
    parameters: Dict
    value: object
    truncation: Dict = field(default_factory=dict)
    companion: object = None
    checks: Dict = field(default_factory=dict)


@dataclass(frozen=True)
class IdentityCheck:
    name: str
    passed: bool
    checked_up_to: int
    detail: str = ""


@dataclass(frozen=True)
class GrowthFit:
    value: float
    slope: float
    intercept: float
    rms_residual: float
    n_range: Tuple[int, int]


# ==============================================================================
# DIVISOR SUMS
# ==============================================================================

def _value_at(values: Union[Mapping[int, Number], Sequence[Number]], d: int):
    if isinstance(values, Mapping):
        if d not in values:
            raise MissingDivisorData(f"E({d}) missing from divisor data", d)
        return values[d]
    if not 1 <= d <= len(values):
        raise MissingDivisorData(f"E({d}) missing from divisor data", d)
    return values[d - 1]


def C_mobius(n: int, E_values: Union[Mapping[int, Number], Sequence[Number]]) -> Number:
    """C(n) = (1/n)·Σ_{d|n} μ(n/d)·E(d)."""
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    terms = [(mobius(n // d), _value_at(E_values, d)) for d in divisors(n)]
    if _is_exact([v for _, v in terms]):
        total = sum(mu * v for mu, v in terms)
        if isinstance(total, int) and total % n == 0:
            return total // n
        return Fraction(total) / n
    if any(isinstance(v, mpmath.mpf) for _, v in terms):
        return mpmath.fsum(mu * _mp(v) for mu, v in terms) / n
    return math.fsum(mu * float(v) for mu, v in terms) / n


def prime_period_counts(E_values: Sequence[Number]) -> List[Number]:
    """P(n) = E(n) - Σ_{d|n, d<n} P(d) : points de période primitive n."""
    counts: List[Number] = []
    for n in range(1, len(E_values) + 1):
        counts.append(E_values[n - 1] - sum(counts[d - 1] for d in divisors(n)[:-1]))
    return counts


def E_exact_zero(n: int, degrees: Sequence[int]) -> int:
    """E_S(0, n) = (Σ r_j)ⁿ + Mⁿ, en entiers exacts."""
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    return sum(int(r) for r in degrees) ** n + len(degrees) ** n


def exact_direct_counts(degrees: Sequence[int], n_max: int) -> List[Number]:
    """C(n) pour f ≡ 0 par crible des périodes primitives, sans fonction de Möbius."""
    primitive = prime_period_counts([E_exact_zero(n, degrees) for n in range(1, n_max + 1)])
    out = []
    for n, p in enumerate(primitive, start=1):
        out.append(p // n if p % n == 0 else Fraction(p, n))
    return out


def _envelope(degrees: Sequence[int], c: float = 0.0) -> Optional[GrowthEnvelope]:
    lam0 = float(sum(degrees))
    if lam0 <= 1.0 or len(degrees) >= lam0:
        return None
    return GrowthEnvelope(base=lam0 * math.exp(c), lam0=lam0, ratio=len(degrees) / lam0)


# ==============================================================================
# TABLES
# ==============================================================================

def exact_zero_table(degrees: Sequence[int], n_max: int, maps: Sequence[str] = (),
                     lambda_hint: Optional[float] = None) -> CountTable:
    """Table exacte pour f ≡ 0 (C par inversion de Möbius)."""
    if n_max < 1:
        raise InputError(f"n_max must be >= 1, got {n_max}")
    E = [E_exact_zero(n, degrees) for n in range(1, n_max + 1)]
    C = [C_mobius(n, E) for n in range(1, n_max + 1)]
    D = [n * c for n, c in enumerate(C, start=1)]
    return CountTable(CountMode.EXACT, "formula", tuple(E), tuple(D), tuple(C),
                      tuple(int(r) for r in degrees), Zero().describe(), tuple(maps),
                      lambda_hint, _envelope(degrees))


def constant_shift_table(degrees: Sequence[int], c: float, n_max: int, maps: Sequence[str] = (),
                         lambda_hint: Optional[float] = None,
                         potential: Optional[Dict] = None) -> CountTable:
    """
    Table pour f ≡ c : chaque point de période primitive d pèse e^{cd}, donc
    E(n) = Σ_{d|n} P(d)e^{cd} et C(n) = P(n)e^{cn}/n. Valeurs mpmath, sans
    limite d'exposant.
    """
    if n_max < 1:
        raise InputError(f"n_max must be >= 1, got {n_max}")
    primitive = prime_period_counts([E_exact_zero(n, degrees) for n in range(1, n_max + 1)])
    c_mp = mpmath.mpf(c)
    weighted = [mpmath.mpf(p) * mpmath.exp(c_mp * d) for d, p in enumerate(primitive, start=1)]
    E, D, C = [], [], []
    for n in range(1, n_max + 1):
        E.append(mpmath.fsum(weighted[d - 1] for d in divisors(n)))
        D.append(weighted[n - 1])
        C.append(weighted[n - 1] / n)
    potential = potential or {'name': 'constant', 'parameters': {'c': float(c)}}
    return CountTable(CountMode.FLOATING, "constant-shift", tuple(E), tuple(D), tuple(C),
                      tuple(int(r) for r in degrees), potential, tuple(maps),
                      lambda_hint, _envelope(degrees, c))


def _enumerated_counts(system: SkewSystem, potential: Potential, n: int):
    points = system.periodic_points(n, potential)
    orbits = system.closed_orbits(n, potential, points)
    primitive = [p for p in points if p.prime_period == n]
    if potential.constant_value == 0.0:
        E = sum(p.multiplicity for p in points)
        D = sum(p.multiplicity for p in primitive)
        C = sum(o.multiplicity for o in orbits)
    else:
        E = math.fsum(p.multiplicity * math.exp(p.weight_exponent) for p in points)
        D = math.fsum(p.multiplicity * math.exp(p.weight_exponent) for p in primitive)
        C = math.fsum(o.weight() for o in orbits)
    logger.info(f"n={n}: {len(points)} distinct points, {len(orbits)} closed orbits, E={E}")
    return E, D, C


def E_direct(system: SkewSystem, potential: Potential, n: int) -> Number:
    """Σ sur Per_n(S), multiplicités comprises, de e^{f^{n_p}}."""
    return _enumerated_counts(system, potential, n)[0]


def D_direct(system: SkewSystem, potential: Potential, n: int) -> Number:
    return _enumerated_counts(system, potential, n)[1]


def C_direct(system: SkewSystem, potential: Potential, n: int) -> Number:
    """Σ sur les orbites fermées de longueur n de e^{fⁿ(τ)}."""
    return _enumerated_counts(system, potential, n)[2]


def enumeration_table(system: SkewSystem, potential: Potential, n_max: int,
                      maps: Sequence[str] = (), lambda_hint: Optional[float] = None) -> CountTable:
    E, D, C = [], [], []
    for n in range(1, n_max + 1):
        e, d, c = _enumerated_counts(system, potential, n)
        E.append(e)
        D.append(d)
        C.append(c)
    mode = CountMode.EXACT if _is_exact(E + C) else CountMode.FLOATING
    return CountTable(mode, "enumeration", tuple(E), tuple(D), tuple(C), system.degrees,
                      potential.describe(), tuple(maps), lambda_hint, None)


def build_count_table(system: SkewSystem, potential: Potential, n_max: int, mode: str = "auto",
                      maps: Sequence[str] = (), lambda_hint: Optional[float] = None) -> CountTable:
    """
    Choisit la source de table :
    - 'exact'   : formule entière, potentiel nul obligatoire
    - 'numeric' : énumération des points périodiques
    - 'auto'    : formule si f ≡ 0, décalage constant si f ≡ c, sinon énumération
    """
    constant = potential.constant_value
    if mode not in ("exact", "numeric", "auto"):
        raise ConfigurationError(f"unknown count mode '{mode}'")
    if mode == "exact":
        if constant != 0.0:
            raise ConfigurationError("mode 'exact' requires the zero potential")
        return exact_zero_table(system.degrees, n_max, maps, lambda_hint)
    if mode == "numeric":
        return enumeration_table(system, potential, n_max, maps, lambda_hint)
    if constant == 0.0:
        return exact_zero_table(system.degrees, n_max, maps, lambda_hint)
    if constant is not None:
        table = constant_shift_table(system.degrees, constant, n_max, maps, lambda_hint,
                                     potential.describe())
        if shift_agrees_with_enumeration(table, system, potential):
            return table
        logger.warning("constant-shift counts rejected, falling back to enumeration")
    return enumeration_table(system, potential, n_max, maps, lambda_hint)


def shift_agrees_with_enumeration(table: CountTable, system: SkewSystem, potential: Potential,
                                  n_check: int = settings.SHIFT_CHECK_N,
                                  rel: float = settings.SHIFT_CHECK_REL) -> bool:
    """
    La table à décalage constant suppose qu'un point garde sa multiplicité
    sous itération ; on la compare à l'énumération pour n ≤ n_check.
    """
    for n in range(1, min(n_check, table.n_max) + 1):
        try:
            E, _, C = _enumerated_counts(system, potential, n)
        except EnumerationCapExceeded as exc:
            logger.info(f"constant-shift check stops at n={n}: {exc}")
            break
        if not (_close(E, table.E_at(n), rel) and _close(C, table.C_at(n), rel)):
            logger.warning(f"constant-shift table disagrees with enumeration at n={n}: "
                           f"E {format(float(table.E_at(n)), '.10g')} vs {E:.10g}, "
                           f"C {format(float(table.C_at(n)), '.10g')} vs {C:.10g}")
            return False
    return True


# ==============================================================================
# JULIA RESTRICTION
# ==============================================================================

@dataclass(frozen=True)
class AttractingCycle:
    period: int
    point: SpherePoint
    multiplier: complex


def attracting_cycles(system: SkewSystem, n_check: int = settings.JULIA_CHECK_N,
                      ) -> Tuple[List[AttractingCycle], Dict]:
    """
    Cycles attractifs (multiplicité 1, |multiplicateur| < 1) d'une application
    seule. Il y en a au plus 2r-2 : la recherche s'arrête quand ils sont tous
    trouvés, sinon à la période n_check.
    """
    if system.alphabet_size != 1:
        raise InputError(f"attracting cycles need a single map, got {system.alphabet_size}")
    bound = 2 * system.degrees[0] - 2
    cycles: List[AttractingCycle] = []
    flagged, searched = 0, 0
    for n in range(1, n_check + 1):
        if len(cycles) >= bound:
            break
        try:
            orbits = system.closed_orbits(n)
        except EnumerationCapExceeded as exc:
            logger.warning(f"attracting cycle search stops at n={n}: {exc}")
            break
        searched = n
        for orbit in orbits:
            rep = orbit.representative
            try:
                value = multiplier(rep.word, rep.z, system.maps)
            except MultiplierUndefined as exc:
                flagged += 1
                logger.warning(f"n={n}: multiplier undefined at {rep.z} ({exc}), kept in the Julia set")
                continue
            if orbit.multiplicity == 1 and abs(value) < 1.0:
                cycles.append(AttractingCycle(n, rep.z, value))
    notes = {
        'restriction': 'julia',
        'attracting_periods': [c.period for c in cycles],
        'attracting_points': [c.point.to_json() for c in cycles],
        'searched_up_to': searched,
        'complete': len(cycles) >= bound,
        'flagged_orbits': flagged,
    }
    if not notes['complete']:
        logger.warning(f"{len(cycles)} of at most {bound} attracting cycles found up to n={searched}")
    return cycles, notes


def _cycle_weight(table: CountTable, period: int):
    if table.potential.get('name') == "constant":
        c = float(table.potential.get('parameters', {}).get('c', 0.0))
        return mpmath.exp(mpmath.mpf(c) * period)
    return 1


def _without_cycles(E: Sequence, C: Sequence, periods: Sequence[int], weight) -> Tuple[list, list]:
    """Un cycle de période p pèse w(p) dans C(p) et p·w(p) dans E(n) pour p | n."""
    E, C = list(E), list(C)
    for p in periods:
        w = weight(p)
        for n in range(p, len(E) + 1, p):
            E[n - 1] = E[n - 1] - p * w
        if p <= len(C):
            C[p - 1] = C[p - 1] - w
    return E, C


def restrict_to_julia(table: CountTable, periods: Sequence[int],
                      notes: Optional[Dict] = None) -> CountTable:
    """Retire de la table les cycles attractifs de périodes données."""
    if table.potential.get('name') not in ("zero", "constant"):
        raise InputError("the Julia restriction needs a zero or constant potential")
    E, C = _without_cycles(table.E, table.C, periods, lambda p: _cycle_weight(table, p))
    D = [n * c for n, c in enumerate(C, start=1)]
    return replace(table, E=tuple(E), D=tuple(D), C=tuple(C), exclusions=tuple(periods),
                   notes=dict(notes or {}))


def julia_table(table: CountTable, system: SkewSystem,
                n_check: int = settings.JULIA_CHECK_N) -> CountTable:
    """Table des points périodiques dans l'ensemble de Julia d'une application seule."""
    cycles, notes = attracting_cycles(system, n_check)
    logger.info(f"Julia restriction: {len(cycles)} attracting cycle(s), periods "
                f"{notes['attracting_periods']}")
    return restrict_to_julia(table, [c.period for c in cycles], notes)


# ==============================================================================
# STRUCTURAL IDENTITIES
# ==============================================================================

def _close(a, b, rel: float = 1e-9) -> bool:
    if _is_exact([a, b]):
        return a == b
    a, b = _mp(a), _mp(b)
    return abs(a - b) <= rel * max(abs(a), abs(b), mpmath.mpf(1e-300))


def convolution_identity(table: CountTable, N: Optional[int] = None) -> IdentityCheck:
    """E(n) = Σ_{d|n} d·C(d) pour n ≤ N."""
    N = table.n_max if N is None else min(N, table.n_max)
    for n in range(1, N + 1):
        rhs = sum(d * table.C_at(d) for d in divisors(n))
        if not _close(table.E_at(n), rhs):
            return IdentityCheck("convolution", False, N, f"fails at n={n}")
    return IdentityCheck("convolution", True, N)


def check_structural_identities(table: CountTable, N: Optional[int] = None) -> List[IdentityCheck]:
    N = table.n_max if N is None else min(N, table.n_max)
    checks = []

    bad = [n for n in range(1, N + 1) if not _close(table.D_at(n), n * table.C_at(n))]
    checks.append(IdentityCheck("D_equals_nC", not bad, N, f"fails at n={bad[0]}" if bad else ""))
    checks.append(convolution_identity(table, N))

    if table.mode == CountMode.EXACT:
        bad = [n for n in range(1, N + 1)
               if not (isinstance(table.C_at(n), int) and table.C_at(n) >= 0)]
        checks.append(IdentityCheck("C_nonnegative_integer", not bad, N,
                                    f"fails at n={bad[0]}" if bad else ""))

    E_list = [table.E_at(n) for n in range(1, N + 1)]
    mobius_side = [C_mobius(n, E_list) for n in range(1, N + 1)]
    if table.source == "formula":
        direct = exact_direct_counts(table.degrees, N)
        if table.exclusions:
            _, direct = _without_cycles([0] * N, direct, table.exclusions,
                                        lambda p: _cycle_weight(table, p))
    else:
        direct = [table.C_at(n) for n in range(1, N + 1)]
    bad = [n for n in range(1, N + 1) if not _close(direct[n - 1], mobius_side[n - 1], 1e-6)]
    checks.append(IdentityCheck("C_direct_equals_C_mobius", not bad, N,
                                f"fails at n={bad[0]}" if bad else ""))
    return checks


# ==============================================================================
# SUMS
# ==============================================================================

def _require_lambda(lam: Optional[float]) -> float:
    if lam is None or not lam > 1.0:
        raise LambdaNotAdmissible(f"lambda not positive: growth rate must exceed 1, got {lam}")
    return float(lam)


def resolve_lambda(table: CountTable, lam: Optional[float] = None,
                   fit_range: Optional[Tuple[int, int]] = None) -> float:
    """λ_f : fourni, sinon celui de la table, sinon estimé par régression."""
    if lam is not None:
        return _require_lambda(lam)
    if table.lambda_hint is not None:
        return _require_lambda(table.lambda_hint)
    fit_range = fit_range or _default_fit_range(table)
    return _require_lambda(lambda_estimate(table, fit_range).value)


def _default_fit_range(table: CountTable) -> Tuple[int, int]:
    end = min(table.n_max, 20)
    return (max(1, min(5, end - 3)), end)


def pi_S(table: CountTable, N: int) -> Number:
    """Σ_{n≤N} C(n)."""
    if N < 0:
        raise InputError(f"N must be >= 0, got {N}")
    values = [table.C_at(n) for n in range(1, N + 1)]
    if _is_exact(values):
        return sum(values)
    if any(isinstance(v, mpmath.mpf) for v in values):
        return mpmath.fsum(_mp(v) for v in values)
    return math.fsum(float(v) for v in values)


def mertens_partial_sums(table: CountTable, lam: float, N: int) -> List[float]:
    """Sommes cumulées Σ_{n≤N'} C(n)/λⁿ pour N' = 1..N."""
    lam = _require_lambda(lam)
    lam_mp = mpmath.mpf(lam)
    out, running = [], mpmath.mpf(0)
    for n in range(1, N + 1):
        running += _mp(table.C_at(n)) / lam_mp ** n
        out.append(float(running))
    return out


def mertens_sum(table: CountTable, N: int, lam: Optional[float] = None) -> SeriesValue:
    lam = resolve_lambda(table, lam)
    value = mertens_partial_sums(table, lam, N)[-1] if N > 0 else 0.0
    return SeriesValue(SeriesKind.MERTENS, {'N': N, 'lambda': lam}, value)


def _first_passing(bound, tol: float, cap: int) -> int:
    """Plus petit N ≤ cap avec bound(N) ≤ tol, bound décroissante."""
    hi = 1
    while bound(hi) > tol:
        if hi >= cap:
            raise TailNotCertifiable(f"tail bound stays above {tol:.1e} up to N={cap}")
        hi = min(2 * hi, cap)
    lo = hi // 2
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if bound(mid) <= tol:
            hi = mid
        else:
            lo = mid
    return hi


def meissel_sum(table: CountTable, k: float, tail_tol: float = settings.MEISSEL_TAIL_TOL,
                lam: Optional[float] = None,
                max_terms: int = settings.MEISSEL_MAX_TERMS) -> SeriesValue:
    """Σ_{n≥1} C(n)/(n^k λⁿ), troncature certifiée."""
    if not k > 0:
        raise InputError(f"k must be positive, got {k}")
    if not tail_tol > 0:
        raise InputError(f"tail_tol must be positive, got {tail_tol}")
    lam = resolve_lambda(table, lam)
    k_mp, lam_mp = mpmath.mpf(k), mpmath.mpf(lam)
    env = table.envelope
    tail_estimate = mpmath.mpf(0)

    if env is not None:
        ratio = lam / env.base
        if ratio < 1.0 - 1e-12:
            raise TailNotCertifiable(f"lambda={lam} is below the growth base {env.base}: terms grow")
        if abs(ratio - 1.0) <= 1e-12:
            method = "envelope-hurwitz"

            def bound(N):
                return env.epsilon(N + 1) * mpmath.zeta(k_mp + 1, N + 1)
        else:
            method = "envelope-geometric"
            q = mpmath.mpf(env.base) / lam_mp

            def bound(N):
                return ((1 + env.epsilon(N + 1)) * q ** (N + 1)
                        / ((N + 1) ** (k_mp + 1) * (1 - q)))
        N = max(_first_passing(bound, tail_tol, max_terms), max(table.exclusions, default=0))
        if method == "envelope-hurwitz":
            tail_estimate = mpmath.zeta(k_mp + 1, N + 1)
        table = table.extended_to(N)
    else:
        method = "integral"
        kappa2 = max(_mp(table.E_at(n)) / lam_mp ** n for n in range(1, table.n_max + 1))
        scale = kappa2 * lam_mp / (lam_mp - 1)

        def bound(N):
            return scale * mpmath.mpf(N) ** (-k_mp) / k_mp
        N = _first_passing(bound, tail_tol, table.n_max)

    partial = mpmath.fsum(_mp(table.C_at(n)) / (mpmath.mpf(n) ** k_mp * lam_mp ** n)
                          for n in range(1, N + 1))
    value = float(partial + tail_estimate)
    tail_bound = float(bound(N))
    logger.debug(f"meissel k={k}: N={N}, method={method}, tail bound {tail_bound:.2e}")
    return SeriesValue(SeriesKind.MEISSEL, {'k': float(k), 'lambda': lam}, value,
                       {'N': N, 'tail_bound': tail_bound, 'method': method})


def dirichlet_partial_sums(table: CountTable, z: complex, N: int, lam: float,
                           zeta_tol: float = 1e-12, zeta_terms: int = settings.ZETA_MAX_TERMS):
    """Sommes partielles appariées Σ C(n)/n^z et (1/ζ(z))·Σ λⁿ/n^{z+1}, N' = 1..N."""
    z = complex(z)
    if not z.real > 1.0:
        raise InputError(f"Dirichlet series need Re(z) > 1, got {z}")
    lam = _require_lambda(lam)
    zeta_value = zeta_detailed(z, tol=zeta_tol, margin=0.0, max_terms=zeta_terms, refine=True).value
    z_mp, lam_mp = mpmath.mpc(z), mpmath.mpf(lam)
    inv_zeta = 1 / mpmath.mpc(zeta_value)
    lhs, rhs = [], []
    acc_l, acc_r = mpmath.mpc(0), mpmath.mpc(0)
    for n in range(1, N + 1):
        n_mp = mpmath.mpf(n)
        acc_l += _mp(table.C_at(n)) / n_mp ** z_mp
        acc_r += lam_mp ** n / n_mp ** (z_mp + 1)
        lhs.append(acc_l)
        rhs.append(acc_r * inv_zeta)
    return lhs, rhs, zeta_value


def dirichlet_partial(table: CountTable, z: complex, N: int, lam: Optional[float] = None,
                      zeta_terms: int = settings.ZETA_MAX_TERMS) -> SeriesValue:
    lam = resolve_lambda(table, lam)
    lhs, rhs, zeta_value = dirichlet_partial_sums(table, z, N, lam, zeta_terms=zeta_terms)
    conv = convolution_identity(table, N)
    return SeriesValue(SeriesKind.DIRICHLET_PARTIAL, {'z': complex(z), 'N': N, 'lambda': lam},
                       lhs[-1], {'N': N, 'reading': 'matched truncation'}, rhs[-1],
                       {'convolution': conv.passed, 'zeta': zeta_value})


# ==============================================================================
# GROWTH RATE
# ==============================================================================

def _E_sequence(source) -> List:
    if isinstance(source, CountTable):
        return list(source.E)
    return list(source)


def lambda_estimate(source, n_range: Tuple[int, int],
                    ceiling: float = settings.LAMBDA_FIT_RESIDUAL_CEILING) -> GrowthFit:
    """exp(pente) de la droite des moindres carrés (n, log E(n))."""
    E = _E_sequence(source)
    a, b = int(n_range[0]), int(n_range[1])
    if a < 1 or b - a + 1 < 4:
        raise InputError(f"n_range must span at least 4 values, got {n_range}")
    if b > len(E):
        raise MissingDivisorData(f"E({b}) not available (table stops at {len(E)})", b)
    values = [E[n - 1] for n in range(a, b + 1)]
    if any(_mp(v) <= 0 for v in values):
        raise InputError("E(n) must be positive on the fit range")
    x = np.arange(a, b + 1, dtype=np.float64)
    y = np.array([float(mpmath.log(_mp(v))) for v in values])
    fit = stats.linregress(x, y)
    residuals = y - (fit.intercept + fit.slope * x)
    rms = float(np.sqrt(np.mean(residuals ** 2)))
    lam = float(np.exp(fit.slope))
    if rms > ceiling or not lam > 1.0 + 1e-9:
        raise HypothesisImplausible(
            f"growth fit on n in [{a}, {b}] gives lambda={lam:.6g} with rms residual {rms:.3g}")
    return GrowthFit(lam, float(fit.slope), float(fit.intercept), rms, (a, b))


def radius_estimate(source, n_range: Tuple[int, int]) -> float:
    return float(np.exp(-lambda_estimate(source, n_range).slope))


def rho_series(table: CountTable, z: complex, N: Optional[int] = None,
               lam_hat: Optional[float] = None,
               fit_range: Optional[Tuple[int, int]] = None) -> SeriesValue:
    """ρ_f(z) = Σ E(n)zⁿ/n tronquée, avec borne de queue géométrique."""
    z = complex(z)
    if lam_hat is None:
        lam_hat = lambda_estimate(table, fit_range or _default_fit_range(table)).value
    q = abs(z) * lam_hat
    if q >= settings.RHO_RADIUS_MARGIN:
        raise OutsideRadius(f"|z|·lambda = {q:.6g} is not below {settings.RHO_RADIUS_MARGIN}")
    N = table.n_max if N is None else min(N, table.n_max)
    if z == 0:
        return SeriesValue(SeriesKind.RHO, {'z': z, 'lambda_hat': lam_hat}, 0j,
                           {'N': N, 'tail_bound': 0.0})
    z_mp, lam_mp = mpmath.mpc(z), mpmath.mpf(lam_hat)
    value = mpmath.fsum(_mp(table.E_at(n)) * z_mp ** n / n for n in range(1, N + 1))
    kappa2 = max(_mp(table.E_at(n)) / lam_mp ** n for n in range(1, N + 1))
    q_mp = mpmath.mpf(q)
    tail = kappa2 * q_mp ** (N + 1) / ((N + 1) * (1 - q_mp))
    return SeriesValue(SeriesKind.RHO, {'z': z, 'lambda_hat': lam_hat}, complex(value),
                       {'N': N, 'tail_bound': float(tail)})
