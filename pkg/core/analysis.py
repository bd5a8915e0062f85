"""
Vérification empirique des relations de comparabilité (≍).

Chaque affirmation produit un ComparabilityReport : suite des rapports A/B
sur la fenêtre, κ₁ = min, κ₂ = max, largeur de bande κ₂/κ₁ et verdict
contre un plafond configurable.
"""
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import mpmath
import pandas as pd

from config import settings
from core.counting import (
    CountTable,
    IdentityCheck,
    check_structural_identities,
    convolution_identity,
    dirichlet_partial_sums,
    julia_table,
    lambda_estimate,
    meissel_sum,
    mertens_partial_sums,
    resolve_lambda,
    rho_series,
)
from core.errors import (
    InputError,
    MultiplierUndefined,
    NonpositiveComparator,
    WindowTooShort,
)
from core.rational_maps import RationalMap
from core.skew_dynamics import SkewSystem, Tolerances, classify_repelling, multiplier

logger = logging.getLogger(__name__)


def _to_mp(x):
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    if isinstance(x, (mpmath.mpf, mpmath.mpc)):
        return x
    return mpmath.mpf(x)


# ==============================================================================
# REPORTS
# ==============================================================================

@dataclass
class ComparabilityReport:
    claim: str
    ratios: pd.Series
    kappa1: Optional[float]
    kappa2: Optional[float]
    band_ratio: Optional[float]
    passed: bool
    cause: str = ""
    burn_in: Optional[float] = None
    window_end: Optional[float] = None
    band_ceiling: float = settings.BAND_CEILING
    parameters: Dict = field(default_factory=dict)
    notes: Dict = field(default_factory=dict)
    digest: str = ""

    def to_dict(self) -> Dict:
        return {
            'claim': self.claim,
            'parameters': self.parameters,
            'kappa1': self.kappa1,
            'kappa2': self.kappa2,
            'band_ratio': self.band_ratio,
            'band_ceiling': self.band_ceiling,
            'pass': self.passed,
            'cause': self.cause,
            'burn_in': self.burn_in,
            'window_end': self.window_end,
            'ratios': [[float(i), float(r)] for i, r in self.ratios.items()],
            'notes': self.notes,
            'config_digest': self.digest,
        }


def ratio_band(A: Sequence, B: Sequence, burn_in: Optional[float] = settings.BURN_IN,
               window: Optional[float] = None, index: Optional[Sequence] = None,
               band_ceiling: float = settings.BAND_CEILING,
               min_points: int = settings.MIN_WINDOW, claim: str = "custom",
               parameters: Optional[Dict] = None, digest: str = "") -> ComparabilityReport:
    """
    Rapports A/B sur les indices de [burn_in, window] ; jamais d'extrapolation.
    """
    if len(A) != len(B):
        raise InputError(f"sequences differ in length: {len(A)} vs {len(B)}")
    index = list(index) if index is not None else list(range(1, len(A) + 1))
    if len(index) != len(A):
        raise InputError("index length does not match the sequences")

    selected = [i for i, idx in enumerate(index)
                if (burn_in is None or idx >= burn_in) and (window is None or idx <= window)]
    for i in selected:
        if not _to_mp(B[i]) > 0:
            raise NonpositiveComparator(f"comparator B at index {index[i]} is {B[i]}, must be > 0")
    if len(selected) < min_points:
        raise WindowTooShort(
            f"{claim}: window holds {len(selected)} points, at least {min_points} required")

    values = [float(_to_mp(A[i]) / _to_mp(B[i])) for i in selected]
    ratios = pd.Series(values, index=[index[i] for i in selected], dtype=float)
    kappa1, kappa2 = min(values), max(values)
    if kappa1 <= 0:
        return ComparabilityReport(claim, ratios, kappa1, kappa2, None, False,
                                   "ratios not strictly positive", burn_in, window, band_ceiling,
                                   parameters or {}, {}, digest)
    band = kappa2 / kappa1
    passed = band <= band_ceiling
    cause = "" if passed else f"band ratio {band:.4g} exceeds ceiling {band_ceiling:g}"
    return ComparabilityReport(claim, ratios, kappa1, kappa2, band, passed, cause, burn_in,
                               window, band_ceiling, parameters or {}, {}, digest)


# ==============================================================================
# THEOREM CHECKS
# ==============================================================================

def _with_rows(table: CountTable, N: int) -> Tuple[CountTable, int]:
    if N <= table.n_max:
        return table, N
    if table.source in ("formula", "constant-shift"):
        return table.extended_to(N), N
    logger.warning(f"table stops at n={table.n_max}, window clipped from {N}")
    return table, table.n_max


def verify_theorem_1(table: CountTable, lam: Optional[float], N_max: int,
                     burn_in: float = settings.BURN_IN,
                     band_ceiling: float = settings.BAND_CEILING,
                     claim: str = "thm1") -> ComparabilityReport:
    """π_S(f,N) contre λᴺ/N."""
    lam = resolve_lambda(table, lam)
    table, N_max = _with_rows(table, N_max)
    lam_mp = mpmath.mpf(lam)
    A, running = [], 0
    for n in range(1, N_max + 1):
        running = running + table.C_at(n)
        A.append(running)
    B = [lam_mp ** n / n for n in range(1, N_max + 1)]
    report = ratio_band(A, B, burn_in, N_max, band_ceiling=band_ceiling, claim=claim,
                        parameters={'lambda': lam, 'N_max': N_max}, digest=table.digest)
    report.notes['tail_ratio_limit'] = lam / (lam - 1.0)
    return report


def verify_theorem_2(table: CountTable, lam: Optional[float], N_max: int,
                     burn_in: float = settings.BURN_IN,
                     band_ceiling: float = settings.BAND_CEILING,
                     claim: str = "thm2") -> ComparabilityReport:
    """Σ_{n≤N} C(n)/λⁿ contre log N."""
    lam = resolve_lambda(table, lam)
    table, N_max = _with_rows(table, N_max)
    A = mertens_partial_sums(table, lam, N_max)
    B = [math.log(N) for N in range(1, N_max + 1)]
    report = ratio_band(A, B, burn_in, N_max, band_ceiling=band_ceiling, claim=claim,
                        parameters={'lambda': lam, 'N_max': N_max}, digest=table.digest)
    report.notes['difference_to_log'] = [[N, A[N - 1] - B[N - 1]]
                                         for N in (N_max // 2, N_max) if N >= 1]
    return report


def verify_theorem_3(table: CountTable, lam: Optional[float],
                     k_grid: Sequence[float] = tuple(settings.DEFAULT_K_GRID),
                     tail_tol: float = settings.MEISSEL_TAIL_TOL,
                     band_ceiling: float = settings.BAND_CEILING,
                     claim: str = "thm3") -> ComparabilityReport:
    """Somme de Meissel A(k) contre 1/k sur une grille de k."""
    lam = resolve_lambda(table, lam)
    ks = [float(k) for k in k_grid]
    series = [meissel_sum(table, k, tail_tol, lam) for k in ks]
    A = [s.value for s in series]
    B = [1.0 / k for k in ks]
    report = ratio_band(A, B, None, None, index=ks, band_ceiling=band_ceiling,
                        min_points=min(2, len(ks)), claim=claim,
                        parameters={'lambda': lam, 'k_grid': ks, 'tail_tol': tail_tol},
                        digest=table.digest)
    report.notes['truncation'] = {repr(k): s.truncation for k, s in zip(ks, series)}
    reference = [float(k) for k in settings.REFERENCE_K_GRID]
    omitted = [k for k in reference if k not in ks]
    report.notes['k_grid_reference'] = reference
    report.notes['omitted_k'] = omitted
    if omitted:
        report.notes['omitted_reason'] = (
            "k·A(k) tends to k·C(1)/λ for large k, so the band widens without limit "
            "as k grows; the default grid stops where the ceiling is reachable")
    return report


def verify_theorem_4(table: CountTable, lam: Optional[float], z_grid: Sequence[complex], N: int,
                     window_start: int = settings.DIRICHLET_WINDOW_START,
                     band_ceiling: float = settings.BAND_CEILING,
                     claim: str = "thm4", zeta_terms: int = settings.ZETA_MAX_TERMS,
                     ) -> Tuple[IdentityCheck, List[ComparabilityReport]]:
    """
    Identité de convolution exacte, puis rapports des sommes partielles
    appariées |Σ C(n)/n^z| / |(1/ζ(z))·Σ λⁿ/n^{z+1}| pour N' ≤ N.
    """
    lam = resolve_lambda(table, lam)
    table, N = _with_rows(table, N)
    conv = convolution_identity(table, N)
    reports = []
    for z in z_grid:
        z = complex(z)
        lhs, rhs, zeta_value = dirichlet_partial_sums(table, z, N, lam, zeta_terms=zeta_terms)
        report = ratio_band([abs(v) for v in lhs], [abs(v) for v in rhs], window_start, N,
                            band_ceiling=band_ceiling, claim=claim,
                            parameters={'lambda': lam, 'z': [z.real, z.imag], 'N': N},
                            digest=table.digest)
        report.notes['reading'] = "matched truncation, compared by modulus"
        report.notes['zeta'] = [zeta_value.real, zeta_value.imag]
        reports.append(report)
    return conv, reports


def _rho_terms(q: float, tol: float, cap: int = settings.RHO_MAX_TERMS) -> int:
    """Plus petit N avec q^{N+1}/((N+1)(1-q)) ≤ tol."""
    N = 1
    while q ** (N + 1) / ((N + 1) * (1.0 - q)) > tol and N < cap:
        N += 1
    return N


def verify_rho(table: CountTable, lam: Optional[float],
               fractions: Sequence[float] = tuple(settings.DEFAULT_RHO_FRACTIONS),
               fit_range: Tuple[int, int] = (5, 20),
               band_ceiling: float = settings.BAND_CEILING,
               tail_tol: float = settings.MEISSEL_TAIL_TOL,
               claim: str = "rho") -> ComparabilityReport:
    """ρ_f(z) contre log(1/(1 - zλ)) pour z = fraction/λ."""
    lam = resolve_lambda(table, lam)
    table, _ = _with_rows(table, fit_range[1])
    fit = lambda_estimate(table, fit_range)
    q = max(fractions) * max(lam, fit.value) / lam
    N = _rho_terms(q, tail_tol) if q < 1.0 else table.n_max
    if table.source == "constant-shift" and table.envelope is not None:
        N = min(N, int(650 / math.log(table.envelope.base)))
    table, N = _with_rows(table, max(N, fit_range[1]))

    zs = [f / lam for f in fractions]
    series = [rho_series(table, z, N, lam_hat=fit.value) for z in zs]
    A = [s.value.real for s in series]
    B = [math.log(1.0 / (1.0 - z * lam)) for z in zs]
    report = ratio_band(A, B, None, None, index=zs, band_ceiling=band_ceiling,
                        min_points=min(2, len(zs)), claim=claim,
                        parameters={'lambda': lam, 'fractions': list(fractions),
                                    'fit_range': list(fit_range)},
                        digest=table.digest)
    report.notes['radius_estimate'] = 1.0 / fit.value
    report.notes['fit_rms_residual'] = fit.rms_residual
    report.notes['truncation'] = {repr(z): s.truncation for z, s in zip(zs, series)}
    return report


@dataclass(frozen=True)
class VerificationOptions:
    N_max: int = 100
    burn_in: float = settings.BURN_IN
    band_ceiling: float = settings.BAND_CEILING
    k_grid: Tuple[float, ...] = tuple(settings.DEFAULT_K_GRID)
    tail_tol: float = settings.MEISSEL_TAIL_TOL
    z_grid: Tuple[complex, ...] = tuple(settings.DEFAULT_Z_GRID)
    dirichlet_N: int = 40
    dirichlet_start: int = settings.DIRICHLET_WINDOW_START
    rho_fractions: Tuple[float, ...] = tuple(settings.DEFAULT_RHO_FRACTIONS)
    fit_range: Tuple[int, int] = (5, 20)
    identity_N: int = 200
    zeta_terms: int = settings.ZETA_MAX_TERMS
    julia_check_n: int = settings.JULIA_CHECK_N


def theorem_suite(table: CountTable, lam: Optional[float], options: VerificationOptions,
                  labels: Sequence[str] = ("thm1", "thm2", "thm3", "thm4"),
                  ) -> Tuple[List[ComparabilityReport], List[IdentityCheck]]:
    """Les quatre affirmations de comparabilité pour un λ donné."""
    o = options
    reports = [
        verify_theorem_1(table, lam, o.N_max, o.burn_in, o.band_ceiling, labels[0]),
        verify_theorem_2(table, lam, o.N_max, max(o.burn_in, 2), o.band_ceiling, labels[1]),
        verify_theorem_3(table, lam, o.k_grid, o.tail_tol, o.band_ceiling, labels[2]),
    ]
    conv, dirichlet = verify_theorem_4(table, lam, o.z_grid, o.dirichlet_N, o.dirichlet_start,
                                       o.band_ceiling, labels[3], o.zeta_terms)
    reports.extend(dirichlet)
    return reports, [IdentityCheck(f"{labels[3]}.convolution", conv.passed, conv.checked_up_to,
                                   conv.detail)]


def corollary_suite(table: CountTable, options: VerificationOptions,
                    system: Optional[SkewSystem] = None,
                    ) -> Tuple[List[ComparabilityReport], List[IdentityCheck]]:
    """
    Affirmations à λ connu :
    - cor1.x : f ≡ 0, λ = Σ r_j
    - cor2.x : une seule application, f ≡ c, λ = r₁·e^c (entropie log r₁),
      comptes restreints à l'ensemble de Julia (cycles attractifs retirés)
    """
    name = table.potential.get('name')
    reports: List[ComparabilityReport] = []
    checks: List[IdentityCheck] = []
    if name == "zero":
        lam = float(sum(table.degrees))
        r, c = theorem_suite(table, lam, options, ("cor1.1", "cor1.2", "cor1.3", "cor1.4"))
        reports.extend(r)
        checks.extend(c)
    if table.alphabet_size == 1 and name in ("zero", "constant"):
        shift = float(table.potential.get('parameters', {}).get('c', 0.0))
        lam = table.degrees[0] * math.exp(shift)
        if system is None:
            logger.warning("cor2 claims skipped: the map is needed to locate attracting cycles")
            return reports, checks
        julia = julia_table(table, system, options.julia_check_n)
        r, c = theorem_suite(julia, lam, options, ("cor2.1", "cor2.2", "cor2.3", "cor2.4"))
        for report in r:
            report.notes['julia'] = julia.notes
        reports.extend(r)
        checks.extend(c)
    return reports, checks


def structural_checks(table: CountTable, options: VerificationOptions) -> List[IdentityCheck]:
    table, N = _with_rows(table, options.identity_N)
    return check_structural_identities(table, N)


# ==============================================================================
# REPELLING CENSUS
# ==============================================================================

@dataclass(frozen=True)
class RepellingRow:
    n: int
    points: int
    repelling: int
    flagged: int
    lower_bound: int
    upper_bound: int
    passed: bool
    vacuous_lower: bool

    def to_dict(self) -> Dict:
        return {
            'n': self.n, 'points': self.points, 'repelling': self.repelling,
            'flagged': self.flagged, 'lower_bound': self.lower_bound,
            'upper_bound': self.upper_bound, 'pass': self.passed,
            'vacuous_lower': self.vacuous_lower,
        }


def repelling_bounds(r: int, n: int) -> Tuple[int, int]:
    """(rⁿ - Σ_{d<n, d|n} r^d - 4n(r-1), 2rⁿ)."""
    proper = sum(r ** d for d in range(1, n) if n % d == 0)
    return r ** n - proper - 4 * n * (r - 1), 2 * r ** n


def verify_repelling_bounds(rmap: RationalMap, n_max: int,
                            tolerances: Optional[Tolerances] = None,
                            workers: int = 1) -> List[RepellingRow]:
    """Compte les points de période n répulsifs et vérifie l'encadrement."""
    if rmap.degree < 2:
        raise InputError(f"repelling census needs degree >= 2, got {rmap.degree}")
    system = SkewSystem([rmap], tolerances, workers=workers)
    r = rmap.degree
    rows = []
    for n in range(1, n_max + 1):
        points = system.periodic_points(n)
        repelling = flagged = 0
        for p in points:
            try:
                if classify_repelling(multiplier(p.word, p.z, system.maps)):
                    repelling += p.multiplicity
            except MultiplierUndefined as exc:
                flagged += p.multiplicity
                logger.warning(f"n={n}: multiplier undefined at {p.z} ({exc}), counted on both sides")
        lower, upper = repelling_bounds(r, n)
        passed = lower <= repelling and repelling + flagged <= upper
        row = RepellingRow(n, sum(p.multiplicity for p in points), repelling, flagged,
                           lower, upper, passed, lower <= 0)
        if row.vacuous_lower:
            logger.info(f"n={n}: lower bound {lower} is vacuous")
        logger.info(f"n={n}: {repelling} repelling of {row.points} points, bounds [{lower}, {upper}]")
        rows.append(row)
    return rows
