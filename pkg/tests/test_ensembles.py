import itertools
from fractions import Fraction

import pytest

from hiergap.models.errors import CapExceededError, NonConformingCodeError, UsageError
from hiergap.models.pydantic_models import ExpansionMode
from hiergap.models.schemas import Hypergraph
from hiergap.services.ensemble_service import ensemble_service


# ---------------------------------------------------------------------------
# LDPC sampling
# ---------------------------------------------------------------------------

def test_sampling_is_deterministic():
    a = ensemble_service.sample_ldpc(30, 3, 5, seed=7)
    b = ensemble_service.sample_ldpc(30, 3, 5, seed=7)
    assert a.checks == b.checks
    assert a.m == 18


def test_different_seeds_give_different_graphs():
    a = ensemble_service.sample_ldpc(60, 3, 6, seed=1)
    b = ensemble_service.sample_ldpc(60, 3, 6, seed=2)
    assert a.checks != b.checks


def test_divisibility_is_required():
    with pytest.raises(UsageError):
        ensemble_service.sample_ldpc(10, 3, 4, seed=0)


def test_socket_multiplicities_cover_every_socket():
    counts = ensemble_service.socket_multiplicities(24, 3, 6, seed=3)
    assert sum(counts.values()) == 72
    per_variable = {}
    for (v, _), mult in counts.items():
        per_variable[v] = per_variable.get(v, 0) + mult
    assert set(per_variable.values()) == {3}


@pytest.mark.parametrize("seed", range(5))
def test_parity_collapse_keeps_degree_parity(seed):
    g = ensemble_service.sample_ldpc(40, 3, 5, seed=seed)
    profile = ensemble_service.degree_profile(g)
    assert all(d <= 3 and d % 2 == 1 for d in profile.variable_degrees)
    assert all(d <= 5 and d % 2 == 1 for d in profile.check_degrees)
    assert sum(len(c) for c in g.checks) == sum(d * c for d, c in profile.variable_degrees.items())
    assert all(list(c) == sorted(set(c)) for c in g.checks)


def test_degree_profile_of_regular_graph(toy_code):
    profile = ensemble_service.degree_profile(toy_code)
    assert profile.check_degrees == {3: 4}
    assert profile.variable_degrees == {1: 3, 3: 3}
    assert profile.conforms


@pytest.mark.parametrize("seed", [0, 1])
def test_nonconforming_codes_are_redrawn(seed):
    # these (3,9) draws collapse a check below degree 7
    first = ensemble_service.sample_ldpc(36, 3, 9, seed=seed)
    assert not ensemble_service.degree_profile(first).conforms

    g, redraws = ensemble_service.sample_conforming_ldpc(36, 3, 9, seed=seed)
    assert redraws >= 1
    assert g.seed != seed
    assert ensemble_service.degree_profile(g).conforms
    assert set(len(c) for c in g.checks) <= {7, 9}
    assert ensemble_service.sample_conforming_ldpc(36, 3, 9, seed=seed)[0].checks == g.checks


def test_conforming_draw_keeps_its_seed():
    g = ensemble_service.sample_ldpc(30, 3, 5, seed=3)
    assert ensemble_service.degree_profile(g).conforms
    again, redraws = ensemble_service.sample_conforming_ldpc(30, 3, 5, seed=3)
    assert redraws == 0
    assert again.checks == g.checks


def test_redraw_budget_is_enforced():
    with pytest.raises(NonConformingCodeError):
        ensemble_service.sample_conforming_ldpc(36, 3, 9, seed=0, attempts=1)


# ---------------------------------------------------------------------------
# expansion
# ---------------------------------------------------------------------------

def test_disjoint_constraints_expand():
    report = ensemble_service.check_expansion([[0, 1, 2], [3, 4, 5]], 0, 2)
    assert report.certified
    assert report.subsets_checked == 3


def test_overlap_violation_is_replayable():
    report = ensemble_service.check_expansion([[0, 1, 2], [0, 1, 3]], Fraction(1, 2), 2)
    assert not report.certified
    assert report.violation_count == 1
    violation = report.violations[0]
    assert violation.constraints == [0, 1]
    assert violation.count == 4
    assert violation.required == 5


def test_overlap_passes_at_alpha_one():
    assert ensemble_service.check_expansion([[0, 1, 2], [0, 1, 3]], 1, 2).certified


def test_boundary_counts_variables_seen_once():
    sets = [[0, 1, 2], [0, 1, 3]]
    assert ensemble_service.check_expansion(sets, 2, 2, boundary=True).certified
    report = ensemble_service.check_expansion(sets, 1, 2, boundary=True)
    assert report.violations[0].count == 2


def test_randomized_search_refutes_but_never_certifies():
    sets = [[0, 1, 2], [0, 1, 3]]
    report = ensemble_service.check_expansion(sets, Fraction(1, 2), 2, mode=ExpansionMode.RANDOMIZED, seed=5)
    assert report.violations[0].constraints == [0, 1]
    clean = ensemble_service.check_expansion([[0, 1], [2, 3]], 0, 2, mode=ExpansionMode.RANDOMIZED)
    assert clean.violation_count == 0
    assert not clean.certified


def test_expansion_rejects_oversized_s():
    with pytest.raises(UsageError):
        ensemble_service.check_expansion([[0, 1]], 0, 2)
    with pytest.raises(CapExceededError):
        ensemble_service.check_expansion([[v] for v in range(20)], 0, 13)


def test_certified_max_s():
    sets = [[0, 1, 2], [0, 1, 3], [0, 1, 4]]
    assert ensemble_service.certified_max_s(sets, 1, 3) == 2
    assert ensemble_service.certified_max_s(sets, 0, 3) == 1


# ---------------------------------------------------------------------------
# hypergraphs
# ---------------------------------------------------------------------------

def test_hypergraph_sampling():
    h = ensemble_service.sample_hypergraph(20, Fraction(3, 2), 3, seed=4)
    assert len(h.edges) == 30
    assert all(len(set(e)) == 3 and list(e) == sorted(e) for e in h.edges)
    assert h.edges == ensemble_service.sample_hypergraph(20, Fraction(3, 2), 3, seed=4).edges


def test_hypergraph_edge_size_is_bounded():
    with pytest.raises(UsageError):
        ensemble_service.sample_hypergraph(3, 1, 4, seed=0)


def test_packed_hypergraph_edges_meet_in_one_vertex():
    h = ensemble_service.sample_hypergraph(18, 3, 3, seed=0, max_overlap=1)
    masks = [set(e) for e in h.edges]
    assert all(len(a & b) <= 1 for i, a in enumerate(masks) for b in masks[i + 1:])
    # at most one edge per vertex pair
    assert len(h.edges) <= 18 * 17 // 6
    # every further triple would share a pair with some edge
    for triple in itertools.combinations(range(18), 3):
        if triple not in h.edges:
            assert any(len(set(triple) & e) >= 2 for e in masks)
    assert h.edges == ensemble_service.sample_hypergraph(18, 3, 3, seed=0, max_overlap=1).edges


def test_packing_stops_at_the_requested_count():
    h = ensemble_service.sample_hypergraph(18, Fraction(1, 2), 3, seed=2, max_overlap=1)
    assert len(h.edges) == 9


def test_max_independent_set_of_four_cycle():
    cycle = Hypergraph(n=4, k=2, edges=((0, 1), (1, 2), (2, 3), (0, 3)))
    assert ensemble_service.max_independent_set(cycle) == [0, 2]


def test_min_uncovered_subset_exact():
    cycle = Hypergraph(n=4, k=2, edges=((0, 1), (1, 2), (2, 3), (0, 3)))
    loose = ensemble_service.min_uncovered_subset(cycle, Fraction(1, 2))
    assert not loose.all_contain_edge
    assert loose.witness == [0, 2]
    tight = ensemble_service.min_uncovered_subset(cycle, Fraction(3, 4))
    assert tight.all_contain_edge
    assert tight.mode == ExpansionMode.EXHAUSTIVE


def test_min_uncovered_subset_randomized_finds_witness():
    empty = Hypergraph(n=30, k=3, edges=())
    report = ensemble_service.min_uncovered_subset(empty, Fraction(1, 2), seed=1)
    assert report.mode == ExpansionMode.RANDOMIZED
    assert not report.all_contain_edge
    assert len(report.witness) == 15
