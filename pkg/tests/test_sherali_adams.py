from fractions import Fraction

import pytest

from hiergap.models.errors import ClosureBudgetError, MissingEntryError, UsageError
from hiergap.models.hierarchy import Factor, LocalDistributionFamily, eliminate, peel
from hiergap.models.pydantic_models import LPStatus, PredicateKind
from hiergap.models.schemas import Constraint, CspInstance
from hiergap.services.csp_service import csp_service
from hiergap.services.distribution_service import distribution_service
from hiergap.services.sherali_adams_service import check_consistency, sherali_adams_service

F = Fraction


def _attached(instance, d_c):
    table = distribution_service.select_sa_predicates(d_c)
    stretched, phi = csp_service.stretch(instance, table.q)
    return csp_service.attach_distributions(stretched, table), phi


@pytest.fixture
def split_checks():
    """Ten variables in two disjoint five-variable checks"""
    return CspInstance(n=10, alphabet=2, constraints=(
        Constraint(PredicateKind.ODD, (0, 1, 2, 3, 4)),
        Constraint(PredicateKind.EVEN, (5, 6, 7, 8, 9)),
    ))


# ---------------------------------------------------------------------------
# closures
# ---------------------------------------------------------------------------

def test_closure_absorbs_constraints_with_few_outside(triangle_instance):
    assert sherali_adams_service.expansion_closure((0,), triangle_instance) == (0, 1, 2)


def test_closure_leaves_wide_constraints_alone(split_checks):
    assert sherali_adams_service.expansion_closure((0, 5), split_checks) == (0, 5)
    assert sherali_adams_service.expansion_closure((0, 1), split_checks) == (0, 1)
    assert sherali_adams_service.expansion_closure((0, 1, 2), split_checks) == (0, 1, 2, 3, 4)


def test_closure_budget(triangle_instance):
    with pytest.raises(ClosureBudgetError):
        sherali_adams_service.expansion_closure((0,), triangle_instance, budget=2)


def test_canonical_distribution_of_single_constraint(triangle_instance):
    instance, _ = _attached(triangle_instance, 5)
    canonical = sherali_adams_service.canonical_distribution((0, 1, 2), instance)
    assert canonical.constraints == (0,)
    assert canonical.normalizer == 1
    assert canonical.marginal((0,)) == {(0,): F(1, 2), (1,): F(1, 2)}
    assert canonical.marginal((0, 1, 2))[(0, 0, 0)] == F(1, 4)


def test_canonical_distribution_without_constraints_is_uniform(split_checks):
    instance, _ = _attached(split_checks, 5)
    canonical = sherali_adams_service.canonical_distribution((0, 5), instance)
    assert canonical.constraints == ()
    assert canonical.marginal((0, 5)) == {(a, b): F(1, 4) for a in (0, 1) for b in (0, 1)}


# ---------------------------------------------------------------------------
# families
# ---------------------------------------------------------------------------

def test_triangle_family_is_valid(triangle_instance):
    instance, _ = _attached(triangle_instance, 5)
    family = sherali_adams_service.build_sa_solution(instance, 2)
    report = sherali_adams_service.verify_family(family, instance)
    assert report.passed
    assert report.value_absolute == F(3, 2)
    assert report.value_normalized == F(1, 2)
    assert family.provenance[(0,)] == (0, 1, 2)


@pytest.mark.parametrize("t", [2, 3])
def test_split_checks_family_is_valid(split_checks, t):
    instance, _ = _attached(split_checks, 5)
    family = sherali_adams_service.build_sa_solution(instance, t)
    report = sherali_adams_service.verify_family(family, instance)
    assert report.passed, [c for c in report.checks if not c.passed]
    assert report.value_absolute == 5
    # one zero suffices integrally, the hierarchy pays half of every coordinate
    assert csp_service.brute_force_optimum(instance)[0] == 1


def test_collapsed_family_has_bias_one_over_q():
    instance = CspInstance(n=7, alphabet=2, constraints=(Constraint(PredicateKind.ODD, tuple(range(7))),))
    attached, phi = _attached(instance, 7)
    assert attached.alphabet == 4
    family = sherali_adams_service.build_sa_solution(attached, 2)
    assert sherali_adams_service.verify_family(family, attached).passed
    collapsed = csp_service.collapse_local(family, phi)
    for v in range(7):
        assert collapsed.marginal((v,)) == {(1,): F(1, 4), (0,): F(3, 4)}
    assert all(sum(table.values()) == 1 for table in collapsed.entries.values())


def test_build_requires_stretched_instance(triangle_instance):
    with pytest.raises(UsageError):
        sherali_adams_service.build_sa_solution(triangle_instance, 2)
    instance, _ = _attached(triangle_instance, 5)
    with pytest.raises(UsageError):
        sherali_adams_service.build_sa_solution(instance, 0)


def test_consistency_reports_first_mismatch():
    family = LocalDistributionFamily(q=2, t=2, n=2)
    family.add((), {(): F(1)})
    family.add((0,), {(0,): F(1, 2), (1,): F(1, 2)})
    family.add((0, 1), {(0, 0): F(1)})
    passed, _, witness = check_consistency(family)
    assert not passed
    assert witness["S"] == [0] and witness["T"] == [0, 1]


# ---------------------------------------------------------------------------
# peeling and closure certificates
# ---------------------------------------------------------------------------

EVEN_BITS = {a: F(1, 4) for a in [(0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0)]}


def test_peel_strips_pairwise_uniform_factor():
    left, constant = peel([Factor(scope=(0, 1, 2), table=EVEN_BITS)], (0, 1), 2)
    assert left == []
    assert constant == F(1, 4)


def test_peel_keeps_factor_meeting_the_anchor_in_three_variables():
    f = Factor(scope=(0, 1, 2), table=EVEN_BITS)
    left, constant = peel([f], (0, 1, 2), 2)
    assert left == [f]
    assert constant == 1


def test_peel_keeps_biased_factor():
    f = Factor(scope=(0, 1, 2), table={(0, 0, 0): F(1)})
    left, _ = peel([f], (0,), 2)
    assert left == [f]


def test_peel_needs_a_loose_factor_to_start():
    a = Factor(scope=(0, 1, 2), table=EVEN_BITS)
    b = Factor(scope=(0, 1, 2), table=EVEN_BITS)
    left, _ = peel([a, b], (), 2)
    assert len(left) == 2


def test_peeled_marginal_matches_full_elimination():
    chain = CspInstance(n=9, alphabet=2, constraints=(
        Constraint(PredicateKind.ODD, (0, 1, 2, 3, 4)),
        Constraint(PredicateKind.EVEN, (4, 5, 6, 7, 8)),
    ))
    instance, _ = _attached(chain, 5)
    canonical = sherali_adams_service.canonical_distribution(range(9), instance)
    for S in [(0, 8), (0, 1, 2), (3, 4, 5)]:
        joint = eliminate(list(canonical.factors), S)
        total = joint.total()
        assert canonical.marginal(S) == {a: p / total for a, p in joint.table.items() if p}
    assert canonical.marginal((0, 8)) == {(a, b): F(1, 4) for a in (0, 1) for b in (0, 1)}


@pytest.fixture
def overlapping_checks():
    """Two five-variable checks sharing three variables"""
    return CspInstance(n=7, alphabet=2, constraints=(
        Constraint(PredicateKind.ODD, (0, 1, 2, 3, 4)),
        Constraint(PredicateKind.ODD, (2, 3, 4, 5, 6)),
    ))


@pytest.mark.parametrize("t", [1, 2, 3])
def test_disjoint_checks_are_certified(split_checks, t):
    instance, _ = _attached(split_checks, 5)
    certificate = sherali_adams_service.certify_closures(instance, t)
    assert certificate.passed
    assert certificate.singletons_checked == 10
    assert certificate.pairs_checked > 0


def test_overlapping_checks_are_not_certified(overlapping_checks):
    instance, _ = _attached(overlapping_checks, 5)
    certificate = sherali_adams_service.certify_closures(instance, 3)
    assert not certificate.passed
    assert certificate.witness["S"] == [1, 2]
    assert certificate.witness["T"] == [0, 1, 2]
    assert certificate.witness["constraints"] == [0, 1]


def test_certified_family_verifies(split_checks):
    instance, _ = _attached(split_checks, 5)
    assert sherali_adams_service.certify_closures(instance, 3).passed
    family = sherali_adams_service.build_sa_solution(instance, 3)
    assert sherali_adams_service.verify_family(family, instance).passed


def test_verify_flags_support_violation(triangle_instance):
    instance, _ = _attached(triangle_instance, 5)
    family = LocalDistributionFamily.point_mass(2, 1, (1, 1, 1), [(), (0,), (1,), (2,), (0, 1, 2)])
    report = sherali_adams_service.verify_family(family, instance)
    failed = {c.check_name for c in report.checks if not c.passed}
    assert failed == {"constraint_support", "balance"}


# ---------------------------------------------------------------------------
# Feldman LP
# ---------------------------------------------------------------------------

def test_lp_decoding_fails_on_pseudocodeword(toy_code):
    result = sherali_adams_service.lp_decode(toy_code, (1, 1, 0, 0, 0, 0))
    assert result.status == LPStatus.OPTIMAL
    assert result.value <= F(1, 4)
    assert not result.integral
    assert not result.success


def test_lp_decoding_corrects_single_flip(toy_code):
    result = sherali_adams_service.lp_decode(toy_code, (0, 0, 0, 1, 0, 0))
    assert result.success
    assert result.value == F(1, 6)
    assert result.flips == [0, 0, 0, 1, 0, 0]
    assert result.decoded == [0] * 6


def test_feldman_lp_size(toy_code):
    lp = sherali_adams_service.feldman_lp(toy_code, (0,) * 6)
    # six flips plus four even local sets per check
    assert len(lp.variables) == 6 + 4 * 4
    assert len(lp.constraints) == 4 * (1 + 3)


def test_integral_family_maps_to_feldman_point(toy_code):
    sets = [()] + [(i,) for i in range(6)] + list(toy_code.checks)
    family = LocalDistributionFamily.point_mass(2, 1, (0, 0, 0, 1, 0, 0), sets)
    point, report = sherali_adams_service.sa_to_feldman(family, toy_code, (0, 0, 0, 1, 0, 0))
    assert report.feasible
    assert report.objective == F(1, 6)
    assert point.f[3] == 1
    assert point.w[(1, (3,))] == 1


def test_feldman_mapping_needs_check_sets(toy_code):
    family = LocalDistributionFamily.point_mass(2, 1, (0,) * 6, [(i,) for i in range(6)])
    with pytest.raises(MissingEntryError):
        sherali_adams_service.sa_to_feldman(family, toy_code, (0,) * 6)
    with pytest.raises(UsageError):
        sherali_adams_service.sa_to_feldman(LocalDistributionFamily(q=3, t=1, n=6), toy_code, (0,) * 6)
