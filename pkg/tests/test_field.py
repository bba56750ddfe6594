import itertools

import pytest

from hiergap.models.errors import FieldMismatchError, NotPrimePowerError
from hiergap.services.field_service import field_service, is_prime, prime_power


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def test_prime_power_detection():
    assert prime_power(8) == (2, 3)
    assert prime_power(9) == (3, 2)
    assert prime_power(7) == (7, 1)
    assert prime_power(12) is None
    assert prime_power(1) is None
    assert is_prime(2) and is_prime(13) and not is_prime(15)


def test_field_of_order_rejects_non_prime_powers():
    with pytest.raises(NotPrimePowerError):
        field_service.field_of_order(6)


def test_modulus_is_first_irreducible(gf4, gf8):
    assert gf4.modulus == (1, 1, 1)
    assert gf8.modulus == (1, 1, 0, 1)


def test_fields_are_cached():
    assert field_service.field_new(2, 3) is field_service.field_new(2, 3)


# ---------------------------------------------------------------------------
# axioms
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("q", [2, 3, 4, 5, 8, 9])
def test_field_axioms_exhaustive(q):
    spec = field_service.field_of_order(q)
    elements = range(q)
    for a in elements:
        assert spec.add_index(a, 0) == a
        assert spec.mul_index(a, 1) == a
        assert spec.add_index(a, spec.neg_index(a)) == 0
        if a:
            assert spec.mul_index(a, spec.inv_index(a)) == 1
    for a, b, c in itertools.product(elements, repeat=3):
        assert spec.mul_index(a, spec.add_index(b, c)) == spec.add_index(spec.mul_index(a, b), spec.mul_index(a, c))
        assert spec.mul_index(spec.mul_index(a, b), c) == spec.mul_index(a, spec.mul_index(b, c))


def test_field_axioms_randomized_large_field(rng):
    spec = field_service.field_new(2, 9)
    for _ in range(300):
        a, b, c = (int(x) for x in rng.integers(1, spec.q, size=3))
        assert spec.mul_index(a, b) == spec.mul_index(b, a)
        assert spec.mul_index(a, spec.add_index(b, c)) == spec.add_index(spec.mul_index(a, b), spec.mul_index(a, c))
        assert spec.mul_index(a, spec.inv_index(a)) == 1


def test_multiplicative_group_is_cyclic_of_order_q_minus_one(gf8):
    g = gf8.generator
    powers = {(g ** e).value for e in range(7)}
    assert powers == set(range(1, 8))
    assert (g ** 7).value == 1


def test_elements_of_different_fields_do_not_mix(gf4, gf8):
    with pytest.raises(FieldMismatchError):
        gf4.element(1) + gf8.element(1)


def test_inverse_of_zero_raises(gf4):
    with pytest.raises(ZeroDivisionError):
        gf4.element(0).inverse()


# ---------------------------------------------------------------------------
# trace
# ---------------------------------------------------------------------------

def test_trace_values_in_gf4(gf4):
    # Tr(x) = x + x^2; Tr(1) = 0, Tr(t) = t + t + 1 = 1
    assert [gf4.trace_index(a) for a in range(4)] == [0, 0, 1, 1]


@pytest.mark.parametrize("q", [4, 8, 9, 27])
def test_trace_is_linear_onto_and_frobenius_invariant(q):
    spec = field_service.field_of_order(q)
    counts = [0] * spec.p
    for a in range(q):
        counts[spec.trace_index(a)] += 1
        assert spec.trace_index(spec.pow_index(a, spec.p)) == spec.trace_index(a)
        for b in range(q):
            assert spec.trace_index(spec.add_index(a, b)) == (spec.trace_index(a) + spec.trace_index(b)) % spec.p
    assert counts == [q // spec.p] * spec.p


def test_trace_row_matches_pairing(gf8, rng):
    for _ in range(200):
        c = [int(x) for x in rng.integers(0, 8, size=3)]
        x = [int(v) for v in rng.integers(0, 8, size=3)]
        row = field_service.trace_row(gf8, c)
        coords = field_service.to_fp_coordinates(gf8, x)
        assert sum(r * d for r, d in zip(row, coords)) % 2 == field_service.pairing(gf8, c, x)


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------

def test_solve_linear_finds_kernel(gf3):
    solution = field_service.solve_linear_indices(gf3, [[1, 1, 1]], [2], 3)
    assert solution.feasible
    assert solution.dimension == 2
    assert sum(solution.particular) % 3 == 2


def test_inconsistent_system_is_reported(gf2):
    solution = field_service.solve_linear_indices(gf2, [[1, 1], [1, 1]], [0, 1], 2)
    assert not solution.feasible
    assert solution.kernel == ()


def test_solve_linear_with_field_elements(gf4):
    a, b = gf4.element(2), gf4.element(3)
    solution = field_service.solve_linear([[a]], [b])
    x = gf4.element(solution.particular[0])
    assert a * x == b


def test_annihilator_duality_randomized(gf4, rng):
    for _ in range(200):
        k = int(rng.integers(1, 4))
        count = int(rng.integers(0, 3))
        generators = [tuple(int(x) for x in rng.integers(0, 4, size=k)) for _ in range(count)]
        annihilator = field_service.annihilator(gf4, generators, k)
        elements = field_service.span(gf4, generators, k)
        assert len(annihilator) == gf4.m * k - field_service.fp_dimension(gf4, generators, k)
        assert len(elements) == 2 ** field_service.fp_dimension(gf4, generators, k)
        for c in annihilator:
            assert all(field_service.pairing(gf4, c, h) == 0 for h in elements)


def test_fq_linear_annihilator_is_smaller(gf4):
    generators = [(1, 1, 0)]
    assert len(field_service.annihilator(gf4, generators, 3)) == 5
    assert len(field_service.annihilator(gf4, generators, 3, fq_linear=True)) == 4
