"""
Arithmétique des polynômes complexes et des fractions rationnelles sur la
sphère de Riemann.

Les coefficients sont stockés par degré croissant. En mode étendu, ce sont
des tableaux numpy d'objets mpmath.mpc ; sinon du complex128.
"""
import logging
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import mpmath
import numpy as np

from config import settings
from core.errors import (
    DegenerateComposition,
    IndeterminateEvaluation,
    InputError,
    InvalidMap,
    MultiplierUndefined,
    NoConvergence,
    TotalDegeneration,
)

logger = logging.getLogger(__name__)


# ==============================================================================
# COEFFICIENT HELPERS
# ==============================================================================

def _is_extended(coeffs: np.ndarray) -> bool:
    return coeffs.dtype == object


def _magnitudes(coeffs: np.ndarray) -> np.ndarray:
    if _is_extended(coeffs):
        return np.array([float(abs(c)) for c in coeffs], dtype=np.float64)
    return np.abs(coeffs)


def _as_coefficients(values, extended: bool = False) -> np.ndarray:
    if isinstance(values, np.ndarray) and (values.dtype == object) == extended:
        return values.copy()
    values = list(values)
    if extended:
        return np.array([mpmath.mpc(complex(v)) if not isinstance(v, mpmath.mpc) else v
                         for v in values], dtype=object)
    return np.array([complex(v) for v in values], dtype=np.complex128)


def _convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if not (_is_extended(a) or _is_extended(b)):
        return np.convolve(a, b)
    out = np.array([mpmath.mpc(0)] * (len(a) + len(b) - 1), dtype=object)
    for i, x in enumerate(a):
        out[i:i + len(b)] += x * b
    return out


def _pad(coeffs: np.ndarray, length: int) -> np.ndarray:
    if len(coeffs) >= length:
        return coeffs
    fill = mpmath.mpc(0) if _is_extended(coeffs) else 0
    tail = np.array([fill] * (length - len(coeffs)), dtype=coeffs.dtype)
    return np.concatenate([coeffs, tail])


def _horner(coeffs: np.ndarray, x):
    """Évalue Σ c_j x^j (coefficients croissants), x scalaire ou tableau."""
    if _is_extended(coeffs):
        result = mpmath.mpc(0)
        for c in coeffs[::-1]:
            result = result * x + c
        return result
    if len(coeffs) == 0:
        return np.zeros_like(np.asarray(x, dtype=np.complex128))
    return np.polyval(coeffs[::-1], x)


# ==============================================================================
# COMPLEX POLYNOMIAL
# ==============================================================================

class ComplexPoly:
    """
    Polynôme à coefficients complexes, degré croissant.

    Les coefficients de tête de module ≤ epsilon × max|c| sont supprimés ;
    le polynôme nul a zéro coefficient et degré -1.
    """

    def __init__(self, coefficients, epsilon: float = settings.COEFF_EPSILON,
                 extended: Optional[bool] = None):
        if extended is None:
            extended = isinstance(coefficients, np.ndarray) and coefficients.dtype == object
        coeffs = _as_coefficients(coefficients, extended)
        mags = _magnitudes(coeffs)
        scale = mags.max() if len(mags) else 0.0
        if scale == 0.0:
            coeffs = coeffs[:0]
        else:
            keep = len(coeffs)
            while keep > 0 and mags[keep - 1] <= epsilon * scale:
                keep -= 1
            coeffs = coeffs[:keep]
        self.coefficients = coeffs
        self.extended = extended

    @classmethod
    def zero(cls, extended: bool = False) -> "ComplexPoly":
        return cls([], extended=extended)

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def is_zero(self) -> bool:
        return len(self.coefficients) == 0

    @property
    def leading(self):
        if self.is_zero():
            raise InputError("the zero polynomial has no leading coefficient")
        return self.coefficients[-1]

    def scale(self) -> float:
        mags = _magnitudes(self.coefficients)
        return float(mags.max()) if len(mags) else 0.0

    def __call__(self, z):
        return _horner(self.coefficients, z)

    def __add__(self, other: "ComplexPoly") -> "ComplexPoly":
        n = max(len(self.coefficients), len(other.coefficients))
        extended = self.extended or other.extended
        a = _pad(_as_coefficients(self.coefficients, extended), n)
        b = _pad(_as_coefficients(other.coefficients, extended), n)
        return ComplexPoly(a + b, extended=extended)

    def __neg__(self) -> "ComplexPoly":
        return ComplexPoly(-self.coefficients, extended=self.extended)

    def __sub__(self, other: "ComplexPoly") -> "ComplexPoly":
        return self + (-other)

    def __mul__(self, other) -> "ComplexPoly":
        if isinstance(other, ComplexPoly):
            if self.is_zero() or other.is_zero():
                return ComplexPoly.zero(self.extended or other.extended)
            extended = self.extended or other.extended
            return ComplexPoly(_convolve(_as_coefficients(self.coefficients, extended),
                                         _as_coefficients(other.coefficients, extended)),
                               extended=extended)
        return ComplexPoly(self.coefficients * other, extended=self.extended)

    __rmul__ = __mul__

    def shifted(self, k: int = 1) -> "ComplexPoly":
        """Multiplication par z^k."""
        if self.is_zero():
            return self
        fill = mpmath.mpc(0) if self.extended else 0
        head = np.array([fill] * k, dtype=self.coefficients.dtype)
        return ComplexPoly(np.concatenate([head, self.coefficients]), extended=self.extended)

    def derivative(self) -> "ComplexPoly":
        if self.degree < 1:
            return ComplexPoly.zero(self.extended)
        return ComplexPoly(self.coefficients[1:] * np.arange(1, len(self.coefficients)),
                           extended=self.extended)

    def padded(self, length: int) -> np.ndarray:
        return _pad(self.coefficients, length)

    def to_extended(self) -> "ComplexPoly":
        return ComplexPoly(_as_coefficients(self.coefficients, True), extended=True)

    def __repr__(self) -> str:
        terms = [f"({complex(c):g})z^{j}" for j, c in enumerate(self.coefficients) if c != 0]
        return " + ".join(terms) if terms else "0"


# ==============================================================================
# RIEMANN SPHERE
# ==============================================================================

@dataclass(frozen=True)
class SpherePoint:
    """Point de Ĉ : un complexe fini ou l'infini."""
    value: complex = 0j
    infinite: bool = False

    def __post_init__(self):
        if not self.infinite:
            value = complex(self.value)
            if not (np.isfinite(value.real) and np.isfinite(value.imag)):
                raise InputError(f"finite sphere point must have finite parts, got {value}")
            object.__setattr__(self, 'value', value)

    @classmethod
    def finite(cls, z) -> "SpherePoint":
        return cls(complex(z), False)

    def sort_key(self) -> Tuple[int, float, float]:
        """Ordre (Re, Im), l'infini en dernier."""
        if self.infinite:
            return (1, 0.0, 0.0)
        return (0, self.value.real, self.value.imag)

    def to_json(self):
        if self.infinite:
            return "inf"
        return [self.value.real, self.value.imag]

    def __str__(self) -> str:
        return "∞" if self.infinite else f"{self.value:.12g}"


INFINITY = SpherePoint(0j, True)


def chordal_distance(a: SpherePoint, b: SpherePoint) -> float:
    """Distance chordale sur Ĉ, à valeurs dans [0, 2]."""
    if a.infinite and b.infinite:
        return 0.0
    if a.infinite or b.infinite:
        z = b.value if a.infinite else a.value
        return 2.0 / np.sqrt(1.0 + abs(z) ** 2)
    z, w = a.value, b.value
    return 2.0 * abs(z - w) / np.sqrt((1.0 + abs(z) ** 2) * (1.0 + abs(w) ** 2))


# ==============================================================================
# RATIONAL MAPS
# ==============================================================================

@dataclass(frozen=True, eq=False)
class RationalMap:
    """R = P/Q, normalisée pour que le plus grand coefficient soit de module 1."""
    numerator: ComplexPoly
    denominator: ComplexPoly
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if self.denominator.is_zero():
            raise InvalidMap("denominator is the zero polynomial")
        if self.numerator.is_zero():
            raise InvalidMap("numerator is the zero polynomial (constant map 0)")
        if self.degree < 1:
            raise InvalidMap("rational map must have degree >= 1")

    @classmethod
    def from_coefficients(cls, numerator: Sequence, denominator: Sequence = (1,),
                          label: str = "", check_coprime: bool = True,
                          cluster_tol: float = settings.ROOT_CLUSTER_TOL) -> "RationalMap":
        """Construit R depuis des coefficients croissants et vérifie la coprimalité."""
        P, Q = _normalized(ComplexPoly(numerator), ComplexPoly(denominator))
        rmap = cls(P, Q, label)
        if check_coprime:
            _check_coprime(rmap, cluster_tol)
        return rmap

    @classmethod
    def polynomial(cls, coefficients: Sequence, label: str = "") -> "RationalMap":
        return cls.from_coefficients(coefficients, (1,), label=label, check_coprime=False)

    @property
    def degree(self) -> int:
        return max(self.numerator.degree, self.denominator.degree)

    @property
    def extended(self) -> bool:
        return self.numerator.extended or self.denominator.extended

    def fixes_infinity(self) -> bool:
        return self.numerator.degree > self.denominator.degree

    def to_extended(self) -> "RationalMap":
        return RationalMap(self.numerator.to_extended(), self.denominator.to_extended(), self.label)

    def __call__(self, point: SpherePoint) -> SpherePoint:
        return eval_sphere(self, point)

    def describe(self) -> str:
        return self.label or f"({self.numerator!r}) / ({self.denominator!r})"


def _normalized(P: ComplexPoly, Q: ComplexPoly) -> Tuple[ComplexPoly, ComplexPoly]:
    scale = max(P.scale(), Q.scale())
    if scale == 0.0:
        return P, Q
    return P * (1.0 / scale), Q * (1.0 / scale)


def _check_coprime(rmap: RationalMap, tol: float):
    P, Q = rmap.numerator, rmap.denominator
    if P.degree < 1 or Q.degree < 1:
        return
    for zp in roots(P, tol):
        for zq in roots(Q, tol):
            if abs(zp.value - zq.value) <= tol * max(1.0, abs(zp.value)):
                raise InvalidMap(
                    f"numerator and denominator share the root {complex(zp.value):.6g}")


def _chart_values(rmap: RationalMap, point: SpherePoint):
    """(p, q, échelle p, échelle q) dans la carte adaptée au point."""
    d = rmap.degree
    P = rmap.numerator.padded(d + 1)
    Q = rmap.denominator.padded(d + 1)
    if point.infinite:
        p, q = P[-1], Q[-1]
        return p, q, float(abs(p)), float(abs(q))
    z = point.value
    if abs(z) <= 1.0:
        x, P_use, Q_use = z, P, Q
    else:
        x, P_use, Q_use = 1.0 / z, P[::-1], Q[::-1]
    ax = abs(x)
    p = _horner(P_use, x)
    q = _horner(Q_use, x)
    scale_p = float(_horner(_magnitudes(P_use).astype(np.complex128), ax).real)
    scale_q = float(_horner(_magnitudes(Q_use).astype(np.complex128), ax).real)
    return p, q, scale_p, scale_q


def eval_sphere(rmap: RationalMap, point: SpherePoint,
                epsilon: float = settings.EVAL_EPSILON) -> SpherePoint:
    """R(p) avec gestion des cartes en 0 et à l'infini."""
    p, q, scale_p, scale_q = _chart_values(rmap, point)
    small_p = abs(p) <= epsilon * scale_p
    small_q = abs(q) <= epsilon * scale_q
    if small_q:
        if small_p:
            raise IndeterminateEvaluation(f"P and Q both vanish at {point} for {rmap.describe()}")
        return INFINITY
    with np.errstate(over='ignore', invalid='ignore'):
        value = complex(p / q)
    if not (np.isfinite(value.real) and np.isfinite(value.imag)):
        return INFINITY
    return SpherePoint.finite(value)


def compose(outer: RationalMap, inner: RationalMap,
            epsilon: float = settings.COEFF_EPSILON) -> RationalMap:
    """outer ∘ inner, de degré deg(outer)·deg(inner)."""
    d_out, d_in = outer.degree, inner.degree
    target = d_out * d_in
    extended = outer.extended or inner.extended
    a = outer.numerator.padded(d_out + 1)
    b = outer.denominator.padded(d_out + 1)
    P, Q = inner.numerator, inner.denominator
    if extended:
        P, Q = P.to_extended(), Q.to_extended()
        a = _as_coefficients(a, True)
        b = _as_coefficients(b, True)

    p_powers = [ComplexPoly([1], extended=extended)]
    q_powers = [ComplexPoly([1], extended=extended)]
    for _ in range(d_out):
        p_powers.append(p_powers[-1] * P)
        q_powers.append(q_powers[-1] * Q)

    zero = mpmath.mpc(0) if extended else 0j
    num = np.array([zero] * (target + 1), dtype=object if extended else np.complex128)
    den = num.copy()
    for k in range(d_out + 1):
        term = _pad((p_powers[k] * q_powers[d_out - k]).coefficients, target + 1)[:target + 1]
        if a[k] != 0:
            num = num + a[k] * term
        if b[k] != 0:
            den = den + b[k] * term

    mags_n, mags_d = _magnitudes(num), _magnitudes(den)
    scale = max(mags_n.max(), mags_d.max())
    if scale == 0.0 or max(mags_n[-1], mags_d[-1]) <= epsilon * scale:
        raise DegenerateComposition(
            f"composition {outer.describe()} ∘ {inner.describe()} lost degree {target}")
    num_poly, den_poly = _normalized(ComplexPoly(num, epsilon, extended),
                                     ComplexPoly(den, epsilon, extended))
    label = f"{outer.label}∘{inner.label}" if outer.label and inner.label else ""
    return RationalMap(num_poly, den_poly, label)


# ==============================================================================
# DERIVATIVE
# ==============================================================================

@dataclass(frozen=True)
class MapDerivative:
    """R' = (P'Q - PQ') / Q², non réduite."""
    numerator: ComplexPoly
    denominator: ComplexPoly

    def __call__(self, z: complex, epsilon: float = settings.EVAL_EPSILON) -> complex:
        z = complex(z)
        q = complex(self.denominator(z))
        scale_q = float(np.abs(_horner(_magnitudes(self.denominator.coefficients).astype(np.complex128),
                                       abs(z))))
        if abs(q) <= epsilon * scale_q:
            raise MultiplierUndefined(f"derivative has a pole at {z:.6g}")
        return complex(self.numerator(z)) / q


def derivative(rmap: RationalMap) -> MapDerivative:
    P, Q = rmap.numerator, rmap.denominator
    numerator = P.derivative() * Q - P * Q.derivative()
    return MapDerivative(numerator, Q * Q)


def derivative_at_infinity(rmap: RationalMap) -> complex:
    """
    Dérivée de w ↦ 1/R(1/w) en w = 0, définie seulement si R fixe l'infini.
    """
    gap = rmap.numerator.degree - rmap.denominator.degree
    if gap < 1:
        raise MultiplierUndefined(f"{rmap.describe()} does not fix infinity")
    if gap >= 2:
        return 0j
    return complex(rmap.denominator.leading) / complex(rmap.numerator.leading)


# ==============================================================================
# FIXED POINTS
# ==============================================================================

def fixed_point_polynomial(rmap: RationalMap) -> Tuple[ComplexPoly, int]:
    """F = P - zQ et la multiplicité de l'infini comme point fixe."""
    F = rmap.numerator - rmap.denominator.shifted(1)
    if F.is_zero():
        raise TotalDegeneration(f"{rmap.describe()} is the identity map")
    m_inf = rmap.degree + 1 - F.degree
    return F, m_inf


@dataclass(frozen=True)
class Root:
    value: complex
    multiplicity: int


def _reversed_parts(coeffs: np.ndarray):
    rc = coeffs[::-1].copy()
    drc = rc[1:] * np.arange(1, len(rc))
    return rc, drc


def _newton_ratio(coeffs: np.ndarray, dcoeffs: np.ndarray, rc: np.ndarray, drc: np.ndarray,
                  z: np.ndarray) -> np.ndarray:
    """p(z)/p'(z), via la carte w = 1/z quand |z| > 1."""
    m = len(coeffs) - 1
    ratio = np.empty_like(z)
    inside = np.abs(z) <= 1.0
    with np.errstate(all='ignore'):
        zi = z[inside]
        ratio[inside] = _horner(coeffs, zi) / _horner(dcoeffs, zi)
        zo = z[~inside]
        w = 1.0 / zo
        q = _horner(rc, w)
        ratio[~inside] = zo * q / (m * q - w * _horner(drc, w))
    ratio[~np.isfinite(ratio)] = 0.0
    return ratio


def _relative_residuals(coeffs: np.ndarray, z: np.ndarray) -> np.ndarray:
    mags = np.abs(coeffs).astype(np.complex128)
    rc, rmags = coeffs[::-1], mags[::-1]
    out = np.empty(len(z), dtype=np.float64)
    inside = np.abs(z) <= 1.0
    zi = z[inside]
    out[inside] = np.abs(_horner(coeffs, zi)) / np.abs(_horner(mags, np.abs(zi)))
    w = 1.0 / z[~inside]
    out[~inside] = np.abs(_horner(rc, w)) / np.abs(_horner(rmags, np.abs(w)))
    return out


def _initial_guesses(coeffs: np.ndarray) -> np.ndarray:
    m = len(coeffs) - 1
    lead = coeffs[-1]
    with np.errstate(divide='ignore'):
        bounds = [abs(coeffs[j] / lead) ** (1.0 / (m - j)) for j in range(m) if coeffs[j] != 0]
    radius = max(bounds) if bounds else 1.0
    rng = np.random.default_rng(settings.ROOT_SEED)
    offsets = rng.uniform(0.1, 0.4, size=m)
    angles = 2.0 * np.pi * (np.arange(m) + offsets) / m
    return radius * np.exp(1j * angles)


def _aberth(coeffs: np.ndarray, max_iterations: int) -> Tuple[np.ndarray, int]:
    m = len(coeffs) - 1
    dcoeffs = coeffs[1:] * np.arange(1, m + 1)
    rc, drc = _reversed_parts(coeffs)
    z = _initial_guesses(coeffs)
    active = np.ones(m, dtype=bool)
    iteration = 0
    chunk = 256
    for iteration in range(1, max_iterations + 1):
        idx = np.flatnonzero(active)
        if len(idx) == 0:
            break
        ratio = _newton_ratio(coeffs, dcoeffs, rc, drc, z[idx])
        repulsion = np.empty(len(idx), dtype=np.complex128)
        for start in range(0, len(idx), chunk):
            rows = idx[start:start + chunk]
            with np.errstate(divide='ignore'):
                inv = 1.0 / (z[rows, None] - z[None, :])
            inv[np.arange(len(rows)), rows] = 0.0
            inv[~np.isfinite(inv)] = 0.0
            repulsion[start:start + chunk] = inv.sum(axis=1)
        with np.errstate(all='ignore'):
            step = ratio / (1.0 - ratio * repulsion)
        bad = ~np.isfinite(step)
        step[bad] = ratio[bad]
        z[idx] -= step
        done = np.abs(step) <= settings.ROOT_STEP_TOL * np.maximum(1.0, np.abs(z[idx]))
        active[idx[done]] = False
    return z, iteration


def _cluster(z: np.ndarray, radii: np.ndarray, tol: float) -> List[Tuple[complex, int]]:
    m = len(z)
    parent = list(range(m))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    dist = np.abs(z[:, None] - z[None, :])
    scale = np.maximum(1.0, np.maximum(np.abs(z)[:, None], np.abs(z)[None, :]))
    limit = np.maximum(tol * scale, 2.0 * (radii[:, None] + radii[None, :]))
    for i, j in zip(*np.nonzero(np.triu(dist <= limit, k=1))):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    groups = {}
    for i in range(m):
        groups.setdefault(find(i), []).append(i)
    return [(complex(z[members].mean()), len(members)) for _, members in sorted(groups.items())]


def _polish(coeffs: np.ndarray, value: complex, multiplicity: int, steps: int = 3) -> complex:
    """Newton (modifié pour les racines multiples), pas accepté seulement s'il améliore."""
    dcoeffs = coeffs[1:] * np.arange(1, len(coeffs))
    rc, drc = _reversed_parts(coeffs)
    best = np.array([value])
    best_res = _relative_residuals(coeffs, best)[0]
    for _ in range(steps):
        ratio = _newton_ratio(coeffs, dcoeffs, rc, drc, best)
        candidate = best - multiplicity * ratio
        res = _relative_residuals(coeffs, candidate)[0]
        if not res < best_res:
            break
        best, best_res = candidate, res
    return complex(best[0])


def _polish_extended(coeffs: np.ndarray, value: complex, multiplicity: int,
                     dps: int, steps: int = 12) -> complex:
    """
    Newton en précision mpmath sur la dérivée d'ordre m-1, dont la racine
    près du groupe est simple. Pour m > 1, un résultat hors du groupe est refusé.
    """
    with mpmath.workdps(dps):
        ascending = [mpmath.mpc(c) for c in coeffs]
        for _ in range(multiplicity - 1):
            ascending = [c * j for j, c in enumerate(ascending)][1:]
        desc = ascending[::-1]
        start = mpmath.mpc(value)
        reach = 10.0 * settings.MACHINE_EPSILON ** (1.0 / multiplicity) * max(1.0, abs(value))
        x = start
        for _ in range(steps):
            p, dp = mpmath.polyval(desc, x, derivative=True)
            if dp == 0:
                break
            step = p / dp
            x -= step
            if abs(step) <= mpmath.mpf(10) ** (-dps + 2) * max(1, abs(x)):
                break
        if multiplicity > 1 and abs(x - start) > reach:
            return value
        return complex(x)


def roots(F: ComplexPoly, tol: float = settings.ROOT_CLUSTER_TOL,
          residual_ceiling: float = settings.ROOT_RESIDUAL_CEILING,
          max_iterations: int = settings.ROOT_MAX_ITERATIONS,
          dps: int = settings.EXTENDED_PRECISION_DPS) -> List[Root]:
    """
    Racines de F avec multiplicités (Aberth-Ehrlich puis Newton).

    Les racines à distance ≤ tol·max(1,|z|), ou dont les disques d'inclusion
    de Newton se recouvrent, sont regroupées. Σ multiplicités = deg F.
    """
    if F.degree < 1:
        raise InputError(f"roots() needs a polynomial of degree >= 1, got degree {F.degree}")
    if not tol > 0:
        raise InputError(f"tol must be positive, got {tol}")

    extended = F.extended
    exact = F.coefficients
    scale = F.scale()
    coeffs = np.array([complex(c) for c in exact], dtype=np.complex128) / scale

    zero_mult = 0
    while zero_mult < len(coeffs) - 1 and abs(coeffs[zero_mult]) <= settings.COEFF_EPSILON:
        zero_mult += 1
    coeffs = coeffs[zero_mult:]
    exact = exact[zero_mult:]

    found: List[Tuple[complex, int]] = []
    m = len(coeffs) - 1
    if m == 1:
        found.append((complex(-coeffs[0] / coeffs[1]), 1))
    elif m > 1:
        z, iterations = _aberth(coeffs, max_iterations)
        dcoeffs = coeffs[1:] * np.arange(1, m + 1)
        rc, drc = _reversed_parts(coeffs)
        radii = m * np.abs(_newton_ratio(coeffs, dcoeffs, rc, drc, z))
        found = _cluster(z, radii, tol)
        logger.debug(f"aberth: degree {m}, {iterations} iterations, {len(found)} clusters")

    polished = []
    for value, mult in found:
        if extended:
            value = _polish_extended(exact, value, mult, dps)
        elif mult > 1:
            value = _polish_extended(coeffs, value, mult, dps)
        else:
            value = _polish(coeffs, value, mult)
        polished.append((value, mult))

    if polished:
        values = np.array([v for v, _ in polished], dtype=np.complex128)
        residuals = _relative_residuals(coeffs, values)
        if residuals.max() > residual_ceiling:
            raise NoConvergence(
                f"root finder residual {residuals.max():.2e} above ceiling {residual_ceiling:.0e} "
                f"(degree {F.degree})", residuals.tolist())

    result = [Root(0j, zero_mult)] if zero_mult else []
    result += [Root(v, mult) for v, mult in polished]
    return sorted(result, key=lambda r: (r.value.real, r.value.imag))
