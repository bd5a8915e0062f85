import math
import random
from dataclasses import replace

import mpmath
import pytest

from core.counting import (
    CountMode,
    C_mobius,
    build_count_table,
    check_structural_identities,
    constant_shift_table,
    dirichlet_partial,
    enumeration_table,
    exact_direct_counts,
    exact_zero_table,
    julia_table,
    lambda_estimate,
    meissel_sum,
    mertens_partial_sums,
    mertens_sum,
    pi_S,
    prime_period_counts,
    radius_estimate,
    resolve_lambda,
    rho_series,
    shift_agrees_with_enumeration,
)
from core.errors import (
    ConfigurationError,
    HypothesisImplausible,
    InputError,
    LambdaNotAdmissible,
    MissingDivisorData,
    OutsideRadius,
    TailNotCertifiable,
)
from core.numtheory import divisors
from core.potentials import Constant, SymbolWeight, Zero
from core.rational_maps import RationalMap
from core.skew_dynamics import SkewSystem

REFERENCE_C = (6, 7, 22, 63, 210, 679, 2358, 8190)


# ==============================================================================
# TABLES
# ==============================================================================

def test_exact_closed_orbit_counts():
    table = exact_zero_table((2, 2), 8)
    assert table.C == REFERENCE_C
    assert table.E[:3] == (6, 20, 72)
    assert table.mode == CountMode.EXACT
    assert all(isinstance(c, int) for c in table.C)


def test_direct_sieve_agrees_with_mobius():
    assert tuple(exact_direct_counts((2, 2), 8)) == REFERENCE_C


def test_structural_identities_to_200():
    checks = check_structural_identities(exact_zero_table((2, 2), 200))
    assert {c.name for c in checks} == {
        "D_equals_nC", "convolution", "C_nonnegative_integer", "C_direct_equals_C_mobius"}
    assert all(c.passed for c in checks)
    assert all(c.checked_up_to == 200 for c in checks)


def test_prime_period_counts_single_square():
    E = [2 ** n + 1 for n in range(1, 13)]
    assert prime_period_counts(E) == [3, 2, 6, 12, 30, 54, 126, 240, 504, 990, 2046, 4020]


def test_mobius_needs_every_divisor():
    with pytest.raises(MissingDivisorData):
        C_mobius(4, [6, 20])


def test_constant_shift_table(single_map_table):
    c = 0.3
    assert single_map_table.source == "constant-shift"
    assert float(single_map_table.D_at(1)) == pytest.approx(3 * math.exp(c))
    assert float(single_map_table.C_at(2)) == pytest.approx(2 * math.exp(2 * c) / 2)
    assert float(single_map_table.E_at(2)) == pytest.approx(3 * math.exp(c) + 2 * math.exp(2 * c))
    assert all(check.passed for check in check_structural_identities(single_map_table))


def test_constant_shift_extends(single_map_table):
    longer = single_map_table.extended_to(40)
    assert longer.n_max == 40
    assert float(longer.C_at(12)) == pytest.approx(float(single_map_table.C_at(12)))


def test_enumeration_table_with_symbol_weights(square_cube):
    table = enumeration_table(square_cube, SymbolWeight([0.1, -0.2]), 2)
    assert table.source == "enumeration"
    assert table.mode == CountMode.FLOATING
    assert table.E_at(1) == pytest.approx(3 * math.exp(0.1) + 4 * math.exp(-0.2))
    assert all(check.passed for check in check_structural_identities(table))
    with pytest.raises(TailNotCertifiable):
        table.extended_to(5)


def test_build_count_table_modes(two_squares):
    assert build_count_table(two_squares, Zero(), 6).source == "formula"
    assert build_count_table(two_squares, Constant(0.3), 6).source == "constant-shift"
    numeric = build_count_table(two_squares, Zero(), 3, mode="numeric")
    assert numeric.source == "enumeration"
    assert numeric.C == REFERENCE_C[:3]
    with pytest.raises(ConfigurationError):
        build_count_table(two_squares, Constant(0.3), 4, mode="exact")
    with pytest.raises(ConfigurationError):
        build_count_table(two_squares, Zero(), 4, mode="fast")


def test_frame_layout(reference_table):
    frame = reference_table.frame()
    assert list(frame.columns) == ['n', 'E', 'D', 'C', 'mode']
    assert len(frame) == 25


# ==============================================================================
# SUMS
# ==============================================================================

def test_prime_orbit_count(reference_table):
    assert pi_S(reference_table, 4) == 6 + 7 + 22 + 63
    assert pi_S(reference_table, 0) == 0


def test_lambda_is_validated(reference_table):
    with pytest.raises(LambdaNotAdmissible):
        resolve_lambda(reference_table, 0.5)
    with pytest.raises(LambdaNotAdmissible):
        mertens_sum(reference_table, 10, lam=1.0)
    assert resolve_lambda(reference_table) == 4.0


def test_mertens_sum(reference_table):
    value = mertens_sum(reference_table, 4, 4.0).value
    assert value == pytest.approx(6 / 4 + 7 / 16 + 22 / 64 + 63 / 256)


@pytest.mark.parametrize("k, expected", [(1.0, 2.1172), (2.0, 1.6875)])
def test_meissel_reference_values(reference_table, k, expected):
    series = meissel_sum(reference_table, k, 1e-8, 4.0)
    assert series.value == pytest.approx(expected, abs=2e-3)
    assert series.truncation['method'] == "envelope-hurwitz"
    assert series.truncation['tail_bound'] <= 1e-8


def test_meissel_small_k_tail_is_certified(reference_table):
    series = meissel_sum(reference_table, 0.1, 1e-6, 4.0)
    assert 0.1 * series.value == pytest.approx(1.1037, abs=5e-3)


def test_meissel_needs_rows_without_envelope(reference_table):
    bare = replace(reference_table, envelope=None, source="enumeration")
    with pytest.raises(TailNotCertifiable):
        meissel_sum(bare, 1.0, 1e-6, 4.0)


def test_meissel_rejects_non_positive_k(reference_table):
    with pytest.raises(InputError):
        meissel_sum(reference_table, 0.0, 1e-6, 4.0)


def test_dirichlet_partial_sums(reference_table):
    series = dirichlet_partial(reference_table, 2.0, 20, 4.0)
    expected = mpmath.fsum(mpmath.mpf(reference_table.C_at(n)) / n ** 2 for n in range(1, 21))
    assert complex(series.value).real == pytest.approx(float(expected), rel=1e-12)
    assert series.checks['convolution']
    ratio = abs(complex(series.value)) / abs(complex(series.companion))
    assert 1.5 < ratio < 1.8


def test_dirichlet_needs_real_part_above_one(reference_table):
    with pytest.raises(InputError):
        dirichlet_partial(reference_table, 1.0, 10, 4.0)


# ==============================================================================
# GROWTH RATE
# ==============================================================================

def test_lambda_estimate_reference(reference_table):
    fit = lambda_estimate(reference_table, (5, 20))
    assert fit.value == pytest.approx(4.0, rel=1e-2)
    assert radius_estimate(reference_table, (5, 20)) == pytest.approx(0.25, rel=1e-2)


def test_lambda_estimate_rejects_flat_sequence():
    with pytest.raises(HypothesisImplausible):
        lambda_estimate([5] * 10, (1, 10))
    with pytest.raises(InputError):
        lambda_estimate([5] * 10, (1, 3))


def test_rho_series_inside_radius(reference_table):
    z = 0.5 / 4.0
    series = rho_series(reference_table, z, lam_hat=4.0)
    expected = math.log(1 / (1 - 4 * z)) + math.log(1 / (1 - 2 * z))
    assert series.value.real == pytest.approx(expected, abs=1e-6)
    assert series.truncation['tail_bound'] < 1e-6


def test_rho_series_outside_radius(reference_table):
    with pytest.raises(OutsideRadius):
        rho_series(reference_table, 0.3, lam_hat=4.0)


# ==============================================================================
# CONSTANT SHIFT AGAINST ENUMERATION
# ==============================================================================

def parabolic():
    return SkewSystem([RationalMap.polynomial([-0.75, 0, 1], label="z^2-3/4")])


def test_constant_shift_falls_back_when_multiplicity_grows(caplog):
    table = build_count_table(parabolic(), Constant(0.3), 3)
    assert table.source == "enumeration"
    assert table.E_at(1) == pytest.approx(3 * math.exp(0.3))
    assert table.E_at(2) == pytest.approx(5 * math.exp(0.3))
    assert table.C_at(2) == 0
    assert "falling back to enumeration" in caplog.text


def test_constant_shift_kept_when_enumeration_agrees():
    square = SkewSystem([RationalMap.polynomial([0, 0, 1])])
    table = build_count_table(square, Constant(0.3), 10)
    assert table.source == "constant-shift"
    assert shift_agrees_with_enumeration(table, square, Constant(0.3))


def test_constant_shift_check_stops_at_degree_cap(two_squares):
    capped = SkewSystem(two_squares.maps, max_degree=8)
    table = constant_shift_table((2, 2), 0.3, 6)
    assert shift_agrees_with_enumeration(table, capped, Constant(0.3), n_check=6)


def test_constant_shift_has_no_exponent_limit():
    table = constant_shift_table((2, 2), 0.3, 1000)
    assert all(isinstance(v, mpmath.mpf) for v in table.E[-3:])
    assert mpmath.isfinite(table.E_at(1000))
    assert float(mpmath.log(table.E_at(1000))) == pytest.approx(1000 * (math.log(4) + 0.3), rel=1e-9)
    lam = 4 * math.exp(0.3)
    assert mertens_sum(table, 1000, lam).value == pytest.approx(
        mertens_partial_sums(table, lam, 1000)[-1])
    assert all(check.passed for check in check_structural_identities(table, 300))


# ==============================================================================
# JULIA RESTRICTION
# ==============================================================================

def test_square_loses_zero_and_infinity():
    square = SkewSystem([RationalMap.polynomial([0, 0, 1])])
    table = julia_table(exact_zero_table((2,), 10, ("z^2",), 2.0), square)
    assert table.notes['attracting_periods'] == [1, 1]
    assert table.notes['attracting_points'] == [[0.0, 0.0], "inf"]
    assert table.notes['complete']
    assert table.exclusions == (1, 1)
    assert list(table.E) == [2 ** n - 1 for n in range(1, 11)]
    assert table.C_at(1) == 1
    assert all(check.passed for check in check_structural_identities(table))


def test_basilica_loses_infinity_and_its_two_cycle():
    basilica = SkewSystem([RationalMap.polynomial([-1, 0, 1])])
    table = julia_table(exact_zero_table((2,), 8), basilica)
    assert table.notes['attracting_periods'] == [1, 2]
    assert table.E[:3] == (2, 2, 8)
    assert table.C[:2] == (2, 0)
    longer = table.extended_to(20)
    assert longer.exclusions == (1, 2)
    assert longer.C_at(2) == 0
    assert all(check.passed for check in check_structural_identities(longer))


def test_constant_weight_is_removed_per_cycle(single_map_table):
    square = SkewSystem([RationalMap.polynomial([0, 0, 1])])
    table = julia_table(single_map_table, square)
    assert float(table.C_at(1)) == pytest.approx(math.exp(0.3))
    assert float(table.E_at(2)) == pytest.approx(math.exp(0.3) + 2 * math.exp(0.6))
    assert all(check.passed for check in check_structural_identities(table))


def test_julia_restriction_needs_one_map(two_squares, reference_table):
    with pytest.raises(InputError):
        julia_table(reference_table, two_squares)


# ==============================================================================
# ACCEPTANCE VALUES
# ==============================================================================

def test_weighted_direct_counts_match_mobius_at_four(square_cube):
    table = enumeration_table(square_cube, SymbolWeight([0.1, -0.2]), 4)
    assert C_mobius(4, list(table.E)) == pytest.approx(table.C_at(4), rel=1e-9)
    assert C_mobius(3, list(table.E)) == pytest.approx(table.C_at(3), rel=1e-9)


def test_mertens_minus_log_settles(reference_table):
    sums = mertens_partial_sums(reference_table.extended_to(1000), 4.0, 1000)
    gaps = [sums[N - 1] - math.log(N) for N in range(500, 1001)]
    assert max(gaps) - min(gaps) <= 1e-2


def test_mobius_round_trip_on_random_counts():
    rng = random.Random(2024)
    for _ in range(100):
        C = [rng.randint(0, 10 ** 6) for _ in range(36)]
        E = [sum(d * C[d - 1] for d in divisors(n)) for n in range(1, 37)]
        assert [C_mobius(n, E) for n in range(1, 37)] == C
