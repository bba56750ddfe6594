import itertools
from fractions import Fraction

import pytest

from hiergap.models.errors import PredicateMismatchError, UsageError
from hiergap.models.hierarchy import LocalDistributionFamily, MomentMatrix
from hiergap.models.pydantic_models import PredicateKind
from hiergap.models.schemas import Constraint, CspInstance, Hypergraph, PredicateTable
from hiergap.services.csp_service import csp_service
from hiergap.services.distribution_service import distribution_service
from hiergap.services.ensemble_service import ensemble_service

F = Fraction


# ---------------------------------------------------------------------------
# instances
# ---------------------------------------------------------------------------

def test_nearest_codeword_kinds_follow_syndrome(toy_code):
    instance = csp_service.build_nearest_codeword(toy_code, (1, 1, 0, 0, 0, 0))
    assert [c.kind for c in instance.constraints] == [
        PredicateKind.EVEN, PredicateKind.EVEN, PredicateKind.ODD, PredicateKind.ODD,
    ]
    assert instance.received == (1, 1, 0, 0, 0, 0)


def test_nearest_codeword_rejects_bad_words(toy_code):
    with pytest.raises(UsageError):
        csp_service.build_nearest_codeword(toy_code, (1, 0))
    with pytest.raises(UsageError):
        csp_service.build_nearest_codeword(toy_code, (2, 0, 0, 0, 0, 0))


def test_hvc_instance():
    h = Hypergraph(n=4, k=3, edges=((0, 1, 2), (1, 2, 3)))
    instance = csp_service.hvc_instance(h)
    assert all(c.kind == PredicateKind.AT_LEAST_ONE_ZERO for c in instance.constraints)
    assert csp_service.evaluate(instance, (0, 1, 0, 0)).satisfied
    assert csp_service.evaluate(instance, (1, 0, 0, 0)).violated == (1,)


def test_instance_rejects_repeated_variables():
    with pytest.raises(ValueError):
        CspInstance(n=3, alphabet=2, constraints=(Constraint(PredicateKind.ODD, (0, 0, 1)),))


# ---------------------------------------------------------------------------
# evaluation and brute force
# ---------------------------------------------------------------------------

def test_evaluate_counts_flips(toy_code):
    instance = csp_service.build_nearest_codeword(toy_code, (1, 1, 0, 0, 0, 0))
    flips = csp_service.evaluate(instance, (1, 1, 0, 0, 0, 0))
    assert flips.satisfied and flips.ones == 2
    none = csp_service.evaluate(instance, (0,) * 6)
    assert none.violated == (2, 3)


def test_brute_force_on_toy_code(toy_code):
    instance = csp_service.build_nearest_codeword(toy_code, (1, 1, 0, 0, 0, 0))
    value, assignment = csp_service.brute_force_optimum(instance)
    assert value == 2
    assert csp_service.evaluate(instance, assignment).satisfied


@pytest.mark.parametrize("seed", range(4))
def test_gray_scan_matches_plain_enumeration(seed, rng):
    g = ensemble_service.sample_ldpc(10, 3, 5, seed=seed)
    received = tuple(int(b) for b in rng.integers(0, 2, size=10))
    instance = csp_service.build_nearest_codeword(g, received)
    expected = None
    for x in itertools.product((0, 1), repeat=10):
        result = csp_service.evaluate(instance, x)
        if result.satisfied and (expected is None or result.ones < expected):
            expected = result.ones
    found = csp_service.brute_force_optimum(instance)
    assert (found[0] if found else None) == expected


def test_unsatisfiable_instance_has_no_optimum():
    instance = CspInstance(n=2, alphabet=2, constraints=(
        Constraint(PredicateKind.EVEN, (0, 1)), Constraint(PredicateKind.ODD, (0, 1)),
    ))
    assert csp_service.brute_force_optimum(instance) is None


# ---------------------------------------------------------------------------
# stretching
# ---------------------------------------------------------------------------

def test_stretch_marks_zeros(toy_code):
    instance = csp_service.build_nearest_codeword(toy_code, (1, 1, 0, 0, 0, 0))
    stretched, phi = csp_service.stretch(instance, 3)
    assert stretched.alphabet == 3 and stretched.stretched
    assert (phi(0), phi(1), phi(2)) == (1, 0, 0)
    assert phi.preimage(0) == [1, 2]
    # one zero among (1, 2, 4) is an odd count of flips
    assert stretched.satisfies(2, (0, 1, 2))
    assert not stretched.satisfies(2, (1, 1, 2))


def test_stretch_rejects_reuse(triangle_instance):
    stretched, _ = csp_service.stretch(triangle_instance, 2)
    with pytest.raises(UsageError):
        csp_service.stretch(stretched, 2)
    with pytest.raises(UsageError):
        csp_service.stretch(triangle_instance, 1)


def test_stretched_brute_force_counts_zeros(triangle_instance):
    stretched, _ = csp_service.stretch(triangle_instance, 2)
    value, assignment = csp_service.brute_force_optimum(stretched)
    assert value == 1
    assert assignment.count(0) == 1


def test_attach_distributions_checks_alphabet_and_keys(triangle_instance):
    stretched, _ = csp_service.stretch(triangle_instance, 2)
    table = PredicateTable(q=2, entries={(3, PredicateKind.ODD): distribution_service.odd_dist_q_eq_kminus1(3)})
    attached = csp_service.attach_distributions(stretched, table)
    assert attached.distribution_for(attached.constraints[0]).q == 2
    with pytest.raises(PredicateMismatchError):
        csp_service.attach_distributions(stretched, PredicateTable(q=2, entries={}))
    wrong, _ = csp_service.stretch(triangle_instance, 3)
    with pytest.raises(PredicateMismatchError):
        csp_service.attach_distributions(wrong, table)


def test_attach_rejects_distribution_outside_predicate(triangle_instance):
    stretched, _ = csp_service.stretch(triangle_instance, 2)
    table = PredicateTable(q=2, entries={(3, PredicateKind.ODD): distribution_service.even_dist_q_eq_kminus1(3)})
    with pytest.raises(PredicateMismatchError):
        csp_service.attach_distributions(stretched, table)


# ---------------------------------------------------------------------------
# collapsing
# ---------------------------------------------------------------------------

def _uniform_singleton(q):
    family = LocalDistributionFamily(q=q, t=1, n=1)
    family.add((), {(): F(1)})
    family.add((0,), {(g,): F(1, q) for g in range(q)})
    return family


def test_collapse_local_sums_preimages():
    collapsed = csp_service.collapse_local(_uniform_singleton(3), csp_service.stretch(
        CspInstance(n=1, alphabet=2, constraints=()), 3)[1])
    assert collapsed.q == 2
    assert collapsed.marginal((0,)) == {(1,): F(1, 3), (0,): F(2, 3)}


def test_collapse_moment_sums_blocks():
    family = _uniform_singleton(3)
    index = [((), ())] + [((0,), (g,)) for g in range(3)]
    entries = [[F(1)] + [F(1, 3)] * 3] + [
        [F(1, 3)] + [F(1, 3) if g == h else F(0) for h in range(3)] for g in range(3)
    ]
    mm = MomentMatrix(q=3, t=1, index=index, entries=entries, local=family)
    _, phi = csp_service.stretch(CspInstance(n=1, alphabet=2, constraints=()), 3)
    collapsed = csp_service.collapse_moment(mm, phi)
    assert collapsed.index == [((), ()), ((0,), (1,)), ((0,), (0,))]
    assert collapsed.entries == [
        [F(1), F(1, 3), F(2, 3)],
        [F(1, 3), F(1, 3), F(0)],
        [F(2, 3), F(0), F(2, 3)],
    ]


def test_collapse_rejects_alphabet_mismatch():
    _, phi = csp_service.stretch(CspInstance(n=1, alphabet=2, constraints=()), 4)
    with pytest.raises(UsageError):
        csp_service.collapse_local(_uniform_singleton(3), phi)
