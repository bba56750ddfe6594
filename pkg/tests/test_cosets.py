import pytest

from hiergap.models.errors import NotPrimePowerError
from hiergap.models.pydantic_models import PredicateKind
from hiergap.models.schemas import CosetPredicate, EvaluationSet
from hiergap.services.coset_service import coset_service


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------

def test_H1_over_gf2_is_the_even_weight_code():
    h1 = coset_service.build_H1(2)
    assert h1.k == 3
    assert h1.kind == PredicateKind.ODD
    assert sorted(coset_service.elements(h1)) == [(0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0)]
    assert coset_service.contains(h1, (0, 1, 1))
    assert not coset_service.contains(h1, (1, 1, 1))


@pytest.mark.parametrize("q", [2, 4, 8])
def test_H1_is_certified(q):
    h1 = coset_service.build_H1(q)
    assert h1.k == q + 1
    assert coset_service.size(h1) == q * q
    assert coset_service.verify_coset(h1).passed


def test_H1_over_odd_characteristic_has_at_least_one_zero():
    h1 = coset_service.build_H1(3)
    assert h1.kind == PredicateKind.AT_LEAST_ONE_ZERO
    report = coset_service.verify_coset(h1)
    assert report.passed
    assert report.method == "enumeration"


@pytest.mark.parametrize("q", [2, 4, 8])
def test_H2_and_H3_are_certified(q):
    h2, h3 = coset_service.build_H2(q), coset_service.build_H3(q)
    assert (h2.k, h3.k) == (q + 1, 2 * q)
    assert h2.kind == h3.kind == PredicateKind.EVEN
    assert coset_service.verify_coset(h2).passed
    assert coset_service.verify_coset(h3).passed


def test_even_constructions_need_characteristic_two():
    with pytest.raises(NotPrimePowerError):
        coset_service.build_H2(3)
    with pytest.raises(NotPrimePowerError):
        coset_service.build_H3(9)


def test_direct_sum_combines_parities():
    h1, h2 = coset_service.build_H1(2), coset_service.build_H2(2)
    assert coset_service.direct_sum(h1, h1).kind == PredicateKind.EVEN
    assert coset_service.direct_sum(h1, h1, h1).kind == PredicateKind.ODD
    summed = coset_service.direct_sum(h1, h2)
    assert summed.kind == PredicateKind.ODD
    assert summed.summand_blocks == ((0, 3), (3, 3))
    assert coset_service.size(summed) == coset_service.size(h1) * coset_service.size(h2)


def test_direct_sum_with_trivial_is_identity(gf2):
    h1 = coset_service.build_H1(2)
    assert coset_service.direct_sum(coset_service.trivial(gf2), h1) is h1


def test_verify_reports_pairwise_failure(gf2):
    repetition = CosetPredicate(spec=gf2, k=2, generators=((1, 1),), shift=(0, 0), kind=PredicateKind.EVEN)
    report = coset_service.verify_coset(repetition)
    assert report.balanced
    assert not report.pairwise_independent
    assert not report.passed
    assert any(w["check"] == "pairwise" for w in report.witnesses)


def test_verify_reports_parity_failure(gf2):
    h1 = coset_service.build_H1(2)
    mislabeled = CosetPredicate(spec=gf2, k=3, generators=h1.generators, shift=h1.shift,
                                kind=PredicateKind.EVEN)
    report = coset_service.verify_coset(mislabeled)
    assert not report.parity_ok


def test_verify_tests_closure_on_claimed_members(gf2):
    h1 = coset_service.build_H1(2)
    # 011 + 101 = 110 is missing
    report = coset_service.verify_coset(h1, [(0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 1)])
    assert not report.subgroup_closed
    assert not report.passed
    assert any(w["check"] == "closure" and "other" in w for w in report.witnesses)


def test_verify_rejects_claimed_members_without_zero(gf2):
    h1 = coset_service.build_H1(2)
    report = coset_service.verify_coset(h1, [(1, 1, 1), (0, 1, 1), (1, 0, 1), (1, 1, 0)])
    assert not report.subgroup_closed


def test_verify_accepts_claimed_members_of_the_span():
    h1 = coset_service.build_H1(4)
    report = coset_service.verify_coset(h1, list(reversed(coset_service.elements(h1))))
    assert report.subgroup_closed
    assert report.passed


def test_projection_rank_agrees_with_counting():
    h3 = coset_service.build_H3(4)
    witnesses = []
    assert coset_service._projection_ranks(h3, witnesses) == (True, True)
    assert witnesses == []


# ---------------------------------------------------------------------------
# point-set certificates
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("q", [2, 4, 8])
def test_even_point_set_meets_lines_evenly(q):
    points = coset_service.build_even_point_set(q)
    assert len(points.points) == q + 2
    assert coset_service.certify_line_incidence(points)


def test_line_incidence_rejects_a_collinear_triple(gf4):
    points = EvaluationSet(spec=gf4, dim=2, points=((0, 0), (0, 1), (0, 2), (1, 1)))
    assert not coset_service.certify_line_incidence(points)


def test_scalar_multiples_are_detected(gf3):
    assert not coset_service.certify_no_scalar_multiples(
        EvaluationSet(spec=gf3, dim=2, points=((1, 0), (2, 0)))
    )
    assert not coset_service.certify_no_scalar_multiples(
        EvaluationSet(spec=gf3, dim=2, points=((0, 0), (1, 0)))
    )


@pytest.mark.parametrize("q", [2, 4])
def test_root_counts(q):
    assert coset_service.certify_root_counts(q)


@pytest.mark.parametrize("q", [2, 4, 8])
def test_double_roots(q):
    assert coset_service.certify_double_roots(q)


def test_lines_enumerates_q_squared_plus_q(gf4):
    assert len(coset_service.lines(gf4)) == 20


# ---------------------------------------------------------------------------
# table dispatch
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("d_c,q", [(9, 2), (15, 4)])
def test_select_lasserre_predicates(d_c, q):
    table = coset_service.select_lasserre_predicates(d_c)
    assert table.q == q
    assert set(table.entries) == {
        (d_c, PredicateKind.ODD), (d_c, PredicateKind.EVEN),
        (d_c - 2, PredicateKind.ODD), (d_c - 2, PredicateKind.EVEN),
    }
    for (arity, kind), coset in table.entries.items():
        assert coset.k == arity
        assert coset.kind == kind
        assert table.reports[(arity, kind)].passed


@pytest.mark.parametrize("d_c", [6, 7, 12, 21])
def test_select_lasserre_predicates_rejects_degrees(d_c):
    with pytest.raises(ValueError):
        coset_service.select_lasserre_predicates(d_c)


@pytest.mark.parametrize("q", [2, 3, 4])
def test_hvc_predicate_always_has_a_zero(q):
    coset = coset_service.hvc_predicate(q)
    assert coset.k == q + 1
    assert coset.kind == PredicateKind.AT_LEAST_ONE_ZERO
    assert all(0 in e for e in coset_service.elements(coset))
