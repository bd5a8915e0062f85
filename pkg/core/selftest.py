"""
Suite d'oracles intégrée (sous-commande `selftest`).

Compare la formule exacte, l'énumération des racines et l'inversion de
Möbius sur les systèmes de référence {z², z²} et {z², z³}.
"""
import logging
import math
import time
from typing import Dict, List, Optional

from core.counting import (
    C_direct,
    C_mobius,
    E_exact_zero,
    check_structural_identities,
    exact_zero_table,
)
from core.errors import SkewOrbitError
from core.numtheory import EULER_GAMMA, harmonic_sum, zeta
from core.potentials import Zero
from core.rational_maps import RationalMap
from core.skew_dynamics import SkewSystem, classify_repelling, multiplier

logger = logging.getLogger(__name__)


def reference_system(degrees=(2, 2), **kwargs) -> SkewSystem:
    """Système de monômes z^r, un par degré."""
    maps = [RationalMap.polynomial([0] * r + [1], label=f"z^{r}") for r in degrees]
    return SkewSystem(maps, **kwargs)


class SelfTestRunner:
    """Validateur des oracles numériques."""

    def __init__(self, n_max: int = 4, system: Optional[SkewSystem] = None):
        self.n_max = n_max
        self.system = system
        self.test_results: List[Dict] = []

    def log_test(self, name, success, message=""):
        status = "✓ PASS" if success else "✗ FAIL"
        logger.info(f"{status} | {name} | {message}")
        self.test_results.append({'test': name, 'success': bool(success), 'message': message})

    def _banner(self, title: str):
        logger.info("=" * 80)
        logger.info(title)
        logger.info("=" * 80)

    def test_1_exact_formula(self):
        self._banner("TEST 1: Exact formula vs root enumeration {z^2, z^2}")
        system = reference_system((2, 2))
        ok = True
        for n in range(1, self.n_max + 1):
            enumerated = sum(p.multiplicity for p in system.periodic_points(n))
            expected = E_exact_zero(n, system.degrees)
            self.log_test(f"E({n})", enumerated == expected, f"{enumerated} vs 4^{n}+2^{n} = {expected}")
            ok = ok and enumerated == expected
        return ok

    def test_2_mixed_degrees(self):
        self._banner("TEST 2: Exact formula vs root enumeration {z^2, z^3}")
        system = reference_system((2, 3))
        ok = True
        for n in range(1, min(self.n_max, 4) + 1):
            enumerated = sum(p.multiplicity for p in system.periodic_points(n))
            expected = E_exact_zero(n, system.degrees)
            self.log_test(f"E({n}) mixed", enumerated == expected, f"{enumerated} vs {expected}")
            ok = ok and enumerated == expected
        return ok

    def test_3_mobius_pipeline(self):
        self._banner("TEST 3: Closed orbits vs Mobius inversion")
        system = reference_system((2, 2))
        E = [E_exact_zero(n, system.degrees) for n in range(1, self.n_max + 1)]
        ok = True
        for n in range(1, self.n_max + 1):
            direct = C_direct(system, Zero(), n)
            inverted = C_mobius(n, E)
            self.log_test(f"C({n})", direct == inverted, f"orbits {direct}, inversion {inverted}")
            ok = ok and direct == inverted
        return ok

    def test_4_structural_identities(self):
        self._banner("TEST 4: Structural identities (exact, n <= 200)")
        checks = check_structural_identities(exact_zero_table((2, 2), 200), 200)
        for check in checks:
            self.log_test(check.name, check.passed, check.detail or f"n <= {check.checked_up_to}")
        return all(c.passed for c in checks)

    def test_5_numerics(self):
        self._banner("TEST 5: Zeta and harmonic sums")
        z2 = zeta(2, tol=1e-12, refine=True).real
        ok = abs(z2 - math.pi ** 2 / 6) < 1e-8
        self.log_test("zeta(2)", ok, f"{z2:.12f}")
        for N in (100, 1000, 10000):
            gap = abs(harmonic_sum(N) - math.log(N) - EULER_GAMMA)
            self.log_test(f"H({N})", gap < 1.0 / N, f"|H - log N - gamma| = {gap:.2e}")
            ok = ok and gap < 1.0 / N
        return ok

    def test_6_repelling(self):
        self._banner("TEST 6: Repelling points of z^2")
        system = reference_system((2,))
        ok = True
        for n in range(1, self.n_max + 1):
            count = sum(p.multiplicity for p in system.periodic_points(n)
                        if classify_repelling(multiplier(p.word, p.z, system.maps)))
            self.log_test(f"#Rep({n})", count == 2 ** n - 1, f"{count} vs {2 ** n - 1}")
            ok = ok and count == 2 ** n - 1
        return ok

    def test_7_configured_system(self):
        self._banner("TEST 7: Configured system point totals")
        ok = True
        for n in range(1, self.n_max + 1):
            try:
                enumerated = sum(p.multiplicity for p in self.system.periodic_points(n))
            except SkewOrbitError as exc:
                self.log_test(f"total({n})", False, f"{exc.kind}: {exc}")
                return False
            expected = self.system.periodic_point_total(n)
            self.log_test(f"total({n})", enumerated == expected, f"{enumerated} vs {expected}")
            ok = ok and enumerated == expected
        return ok

    def run_all_tests(self) -> bool:
        logger.info("╔" + "=" * 78 + "╗")
        logger.info("║" + " " * 25 + "SELF-TEST SUITE START" + " " * 32 + "║")
        logger.info("╚" + "=" * 78 + "╝")

        start_time = time.time()

        self.test_1_exact_formula()
        self.test_2_mixed_degrees()
        self.test_3_mobius_pipeline()
        self.test_4_structural_identities()
        self.test_5_numerics()
        self.test_6_repelling()
        if self.system is not None:
            self.test_7_configured_system()

        elapsed = time.time() - start_time
        passed = sum(1 for r in self.test_results if r['success'])
        total = len(self.test_results)

        logger.info(f"Results: {passed}/{total} tests passed")
        logger.info(f"Duration: {elapsed:.1f}s")

        return passed == total
