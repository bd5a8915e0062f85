"""
Fonctions arithmétiques et séries classiques.

Möbius, diviseurs, somme harmonique compensée et zêta de Riemann pour
Re(s) > 1 (somme partielle + queue intégrale certifiée).
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from config import settings
from core.errors import InputError, OutsideConvergenceRegion, ToleranceUnreachable

logger = logging.getLogger(__name__)

EULER_GAMMA = 0.57721566490153286061

_ZETA_CHUNK = 1_000_000


def _require_positive_int(n, name: str = "n") -> int:
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
        raise InputError(f"{name} must be an integer, got {n!r}")
    if n < 1:
        raise InputError(f"{name} must be >= 1, got {n}")
    return int(n)


# ==============================================================================
# FONCTIONS ARITHMÉTIQUES
# ==============================================================================

def mobius(n: int) -> int:
    """μ(n) par factorisation par divisions successives."""
    n = _require_positive_int(n)
    value = 1
    p = 2
    while p * p <= n:
        if n % p == 0:
            n //= p
            if n % p == 0:
                return 0
            value = -value
        p += 1 if p == 2 else 2
    if n > 1:
        value = -value
    return value


def divisors(n: int) -> List[int]:
    """Diviseurs de n, triés par ordre croissant."""
    n = _require_positive_int(n)
    small, large = [], []
    d = 1
    while d * d <= n:
        if n % d == 0:
            small.append(d)
            if d != n // d:
                large.append(n // d)
        d += 1
    return small + large[::-1]


def divisor_transform(values: Sequence) -> list:
    """b(n) = Σ_{d|n} a(d), avec values[0] = a(1)."""
    return [sum(values[d - 1] for d in divisors(n)) for n in range(1, len(values) + 1)]


def mobius_inversion(values: Sequence) -> list:
    """a(n) = Σ_{d|n} μ(n/d) b(d), inverse exacte de divisor_transform."""
    return [
        sum(mobius(n // d) * values[d - 1] for d in divisors(n))
        for n in range(1, len(values) + 1)
    ]


# ==============================================================================
# SOMMES
# ==============================================================================

def harmonic_sum(N: int) -> float:
    """Σ_{n≤N} 1/n."""
    N = _require_positive_int(N, "N")
    return math.fsum(1.0 / np.arange(1, N + 1, dtype=np.float64))


# ==============================================================================
# ZETA
# ==============================================================================

@dataclass(frozen=True)
class ZetaEvaluation:
    """Valeur de ζ(s) avec l'indice de troncature et la borne de queue."""
    s: complex
    value: complex
    terms: int
    tail_bound: float
    refined: bool


def _partial_zeta(s: complex, N: int) -> complex:
    real_parts, imag_parts = [], []
    for start in range(1, N + 1, _ZETA_CHUNK):
        n = np.arange(start, min(start + _ZETA_CHUNK, N + 1), dtype=np.float64)
        terms = np.exp(-s * np.log(n))
        real_parts.append(math.fsum(terms.real))
        imag_parts.append(math.fsum(terms.imag))
    return complex(math.fsum(real_parts), math.fsum(imag_parts))


def _tail_constant(s: complex, refine: bool) -> float:
    sigma = s.real
    if refine:
        return abs(s * (s + 1)) / (12.0 * (sigma + 1.0))
    return 0.5 + abs(s) / (2.0 * sigma)


def zeta_tail(s: complex, N: int, refine: bool = False):
    """
    Queue Σ_{n>N} n^{-s} par Euler-Maclaurin.

    Renvoie (estimation, borne d'erreur). Sans raffinement : intégrale seule,
    erreur ≤ N^{-σ}(1/2 + |s|/(2σ)). Avec raffinement : termes de bord
    -N^{-s}/2 + s N^{-s-1}/12, erreur ≤ |s(s+1)| N^{-σ-1} / (12(σ+1)).
    """
    s = complex(s)
    N = _require_positive_int(N, "N")
    sigma = s.real
    estimate = N ** (1 - s) / (s - 1)
    if refine:
        estimate += -0.5 * N ** (-s) + s * N ** (-s - 1) / 12.0
        bound = _tail_constant(s, True) * N ** (-sigma - 1.0)
    else:
        bound = _tail_constant(s, False) * N ** (-sigma)
    return estimate, bound


def zeta_detailed(s, tol: float = 1e-10, margin: float = settings.ZETA_MARGIN,
                  max_terms: int = settings.ZETA_MAX_TERMS,
                  refine: bool = False) -> ZetaEvaluation:
    """ζ(s) à tol près, avec le nombre de termes retenu."""
    s = complex(s)
    if not tol > 0:
        raise InputError(f"tol must be positive, got {tol}")
    if s.real <= 1.0 + margin:
        raise OutsideConvergenceRegion(
            f"Re(s) = {s.real} is not above 1 + margin = {1.0 + margin}")

    sigma = s.real + (1.0 if refine else 0.0)
    constant = _tail_constant(s, refine)
    log_terms = math.log(constant / tol) / sigma
    if log_terms > math.log(max_terms):
        raise ToleranceUnreachable(
            f"zeta({s}) needs about exp({log_terms:.1f}) terms for tol={tol}, cap is {max_terms}")
    N = max(1, math.ceil(math.exp(log_terms)))

    tail, bound = zeta_tail(s, N, refine=refine)
    value = _partial_zeta(s, N) + tail
    logger.debug(f"zeta({s}): {N} terms, tail bound {bound:.2e}")
    return ZetaEvaluation(s=s, value=value, terms=N, tail_bound=bound, refined=refine)


def zeta(s, tol: float = 1e-10, margin: float = settings.ZETA_MARGIN,
         max_terms: int = settings.ZETA_MAX_TERMS, refine: bool = False) -> complex:
    """Valeur seule de zeta_detailed."""
    return zeta_detailed(s, tol=tol, margin=margin, max_terms=max_terms, refine=refine).value
