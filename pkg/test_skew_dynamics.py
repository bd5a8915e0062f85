import cmath

import pytest

from config import settings
from core.counting import C_direct, D_direct, E_direct, E_exact_zero, build_count_table
from core.errors import (
    EnumerationCapExceeded,
    InputError,
    OrbitClosureMismatch,
    PeriodDetectionAmbiguous,
    PotentialUndefined,
)
from core.potentials import Constant, LogModulusDerivative, PlugIn, SymbolWeight, Zero
from core.rational_maps import INFINITY, RationalMap, SpherePoint
from core.skew_dynamics import (
    SkewPeriodicPoint,
    SkewSystem,
    classify_repelling,
    closure_tolerance,
    compose_along_word,
    enumerate_words,
    ergodic_sum,
    group_into_orbits,
    multiplier,
    prime_period,
    rotate,
)


def test_words_are_lexicographic():
    assert enumerate_words(2, 2) == [(1, 1), (1, 2), (2, 1), (2, 2)]
    assert rotate((1, 2, 3), 1) == (2, 3, 1)


def test_word_cap():
    with pytest.raises(EnumerationCapExceeded):
        enumerate_words(2, 13)
    with pytest.raises(InputError):
        enumerate_words(2, 0)


def test_compose_along_word_applies_first_letter_first():
    shift = RationalMap.polynomial([1, 1], label="z+1")
    square = RationalMap.polynomial([0, 0, 1], label="z^2")
    rmap = compose_along_word((1, 2), [shift, square])
    assert abs(rmap(SpherePoint.finite(2.0)).value - 9.0) < 1e-12


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_mixed_degree_totals(square_cube, n):
    points = square_cube.periodic_points(n)
    assert sum(p.multiplicity for p in points) == 5 ** n + 2 ** n
    assert square_cube.periodic_point_total(n) == E_exact_zero(n, (2, 3))


def test_two_squares_point_counts(two_squares):
    for n in range(1, 5):
        total = sum(p.multiplicity for p in two_squares.periodic_points(n))
        assert total == 4 ** n + 2 ** n


def test_parallel_solver_matches_serial(square_cube):
    parallel = SkewSystem(square_cube.maps, workers=4)
    serial = [(p.word, p.multiplicity, p.prime_period) for p in square_cube.periodic_points(3)]
    threaded = [(p.word, p.multiplicity, p.prime_period) for p in parallel.periodic_points(3)]
    assert serial == threaded


def test_prime_period_detection():
    maps = [RationalMap.polynomial([0, 0, 1])]
    assert prime_period((1, 1), SpherePoint.finite(0), maps) == 1
    assert prime_period((1, 1), INFINITY, maps) == 1
    assert prime_period((1, 1), SpherePoint.finite(cmath.exp(2j * cmath.pi / 3)), maps) == 2


def test_closed_orbit_counts(two_squares):
    assert [C_direct(two_squares, Zero(), n) for n in range(1, 5)] == [6, 7, 22, 63]


def test_closed_orbits_have_full_length(two_squares):
    orbits = two_squares.closed_orbits(3)
    assert len(orbits) == 22
    for orbit in orbits:
        assert len(orbit.members) == 3
        assert orbit.representative == min(orbit.members, key=lambda p: p.sort_key())


def test_ergodic_sums():
    maps = [RationalMap.polynomial([0, 0, 1]), RationalMap.polynomial([0, 0, 0, 1])]
    weights = SymbolWeight([0.1, -0.2])
    assert ergodic_sum(weights, (1, 2), SpherePoint.finite(0), 2, maps) == pytest.approx(-0.1)
    assert ergodic_sum(Constant(0.3), (1, 2), INFINITY, 4, maps) == pytest.approx(1.2)


def test_weights_follow_prime_period(square_cube):
    points = square_cube.periodic_points(2, SymbolWeight([0.1, -0.2]))
    for p in points:
        if p.word == (1, 1) and p.prime_period == 1:
            assert p.weight_exponent == pytest.approx(0.1)
        if p.word == (1, 2):
            assert p.prime_period == 2
            assert p.weight_exponent == pytest.approx(-0.1)


def test_multiplier_chain_rule():
    maps = [RationalMap.polynomial([0, 0, 1])]
    z = SpherePoint.finite(cmath.exp(2j * cmath.pi / 3))
    assert abs(multiplier((1, 1), z, maps) - 4.0) < 1e-9
    assert multiplier((1,), INFINITY, maps) == 0j


def test_degree_cap(two_squares):
    capped = SkewSystem(two_squares.maps, max_degree=8)
    with pytest.raises(EnumerationCapExceeded):
        capped.periodic_points(4)


def test_empty_system_rejected():
    with pytest.raises(InputError):
        SkewSystem([])


def test_fixed_points_of_one_word(square_cube):
    points = square_cube.periodic_points_for_word((1, 2))
    assert sum(p.multiplicity for p in points) == 7
    assert len(points) == 7
    assert INFINITY in [p.z for p in points]
    assert all(p.prime_period == 2 for p in points)


def test_grouping_rejects_lower_periods(two_squares):
    with pytest.raises(InputError):
        group_into_orbits(two_squares.periodic_points(2), two_squares.maps)
    assert group_into_orbits([], two_squares.maps) == []


def test_direct_counts_agree(two_squares):
    assert E_direct(two_squares, Zero(), 2) == 20
    assert D_direct(two_squares, Zero(), 2) == 2 * C_direct(two_squares, Zero(), 2) == 14


def test_repelling_classification():
    assert classify_repelling(2.0)
    assert classify_repelling(-1.5j)
    assert not classify_repelling(1.0)
    assert not classify_repelling(0.5 + 0.5j)


def test_one_letter_orbits(two_squares):
    orbits = two_squares.closed_orbits(1)
    assert len(orbits) == 6
    assert sorted(o.representative.word for o in orbits) == [(1,)] * 3 + [(2,)] * 3


# ==============================================================================
# MULTIPLE FIXED POINTS
# ==============================================================================

def parabolic():
    """z² - 3/4 : point fixe parabolique en -1/2, multiplicateur -1."""
    return SkewSystem([RationalMap.polynomial([-0.75, 0, 1], label="z^2-3/4")])


def test_triple_point_keeps_prime_period_one():
    points = parabolic().periodic_points(2)
    assert sum(p.multiplicity for p in points) == 5
    triple = [p for p in points if not p.z.infinite and abs(p.z.value + 0.5) < 1e-4]
    assert len(triple) == 1
    assert triple[0].multiplicity == 3
    assert abs(triple[0].z.value + 0.5) < 1e-12
    assert all(p.prime_period == 1 for p in points)
    assert parabolic().closed_orbits(2) == []


def test_triple_point_numeric_counts():
    table = build_count_table(parabolic(), Zero(), 3, mode="numeric")
    assert table.E == (3, 5, 9)
    assert table.C[:2] == (3, 0)


def test_closure_tolerance_grows_with_multiplicity():
    assert closure_tolerance(1e-7) == 1e-7
    assert closure_tolerance(1e-7, 3) == pytest.approx(10 * settings.MACHINE_EPSILON ** (1 / 3))
    assert closure_tolerance(1e-3, 2) == 1e-3
    near = SpherePoint.finite(1 + 3e-7)
    maps = [RationalMap.polynomial([0, 0, 1])]
    assert prime_period((1, 1), near, maps, 1e-7, multiplicity=3) == 1


def test_closure_distance_near_tolerance_is_ambiguous():
    maps = [RationalMap.polynomial([0, 0, 1])]
    with pytest.raises(PeriodDetectionAmbiguous):
        prime_period((1, 1), SpherePoint.finite(1 + 3e-7), maps, 1e-7)
    assert prime_period((1, 1), SpherePoint.finite(1 + 3e-8), maps, 1e-7) == 1


def test_orbit_without_matching_image():
    maps = [RationalMap.polynomial([0, 0, 1])]
    omega = SpherePoint.finite(cmath.exp(2j * cmath.pi / 3))
    omega2 = SpherePoint.finite(cmath.exp(4j * cmath.pi / 3))
    with pytest.raises(OrbitClosureMismatch):
        group_into_orbits([SkewPeriodicPoint((1, 1), omega, 1, 2)], maps)
    with pytest.raises(OrbitClosureMismatch):
        group_into_orbits([SkewPeriodicPoint((1, 1), omega, 1, 2),
                           SkewPeriodicPoint((1, 1), omega2, 2, 2)], maps)


# ==============================================================================
# POTENTIALS
# ==============================================================================

def test_log_modulus_derivative_on_two_cycle():
    maps = [RationalMap.polynomial([0, 0, 1])]
    omega = SpherePoint.finite(cmath.exp(2j * cmath.pi / 3))
    value = ergodic_sum(LogModulusDerivative(), (1, 1), omega, 2, maps)
    assert value == pytest.approx(2 * cmath.log(2).real)


def test_log_modulus_derivative_undefined_points():
    square = [RationalMap.polynomial([0, 0, 1])]
    with pytest.raises(PotentialUndefined) as exc:
        ergodic_sum(LogModulusDerivative(), (1,), INFINITY, 1, square)
    assert exc.value.index == 0
    with pytest.raises(PotentialUndefined) as exc:
        ergodic_sum(LogModulusDerivative(), (1,), SpherePoint.finite(0), 1, square)
    assert exc.value.index == 0
    basilica = [RationalMap.polynomial([-1, 0, 1])]
    with pytest.raises(PotentialUndefined) as exc:
        ergodic_sum(LogModulusDerivative(), (1, 1), SpherePoint.finite(-1), 2, basilica)
    assert exc.value.index == 1


def test_plugin_potential_sees_rotated_word(square_cube):
    potential = PlugIn(lambda word, point: 0.1 * word[0], label="first-letter")
    assert potential.parameters() == {'label': "first-letter"}
    assert ergodic_sum(potential, (1, 2), SpherePoint.finite(0), 2, square_cube.maps) == \
        pytest.approx(0.3)
    points = square_cube.periodic_points_for_word((1, 2), potential)
    assert all(p.weight_exponent == pytest.approx(0.3) for p in points)


# ==============================================================================
# EXTENDED PRECISION
# ==============================================================================

def test_extended_precision_compositions(two_squares, monkeypatch):
    monkeypatch.setattr(settings, "EXTENDED_PRECISION_DEGREE", 4)
    system = SkewSystem(two_squares.maps, precision="extended")
    assert system.word_maps(3)[(1, 2, 1)].extended
    points = system.periodic_points(3)
    assert sum(p.multiplicity for p in points) == 4 ** 3 + 2 ** 3
    assert len(system.closed_orbits(3)) == 22
