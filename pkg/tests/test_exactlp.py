from fractions import Fraction

from hiergap.models.pydantic_models import LPStatus
from hiergap.models.schemas import LinearProgram, Relation
from hiergap.services.lp_service import lp_service


def _lp(*bounds):
    lp = LinearProgram()
    for i, (lo, hi, cost) in enumerate(bounds):
        lp.add_variable(f"x{i}", lower=lo, upper=hi, cost=cost)
    return lp


# ---------------------------------------------------------------------------
# optimization
# ---------------------------------------------------------------------------

def test_simple_cover_lp():
    lp = _lp((0, None, 1), (0, None, 1))
    lp.add_constraint({0: 1, 1: 1}, Relation.GE, 1, "cover")
    result = lp_service.solve(lp)
    assert result.status == LPStatus.OPTIMAL
    assert result.value == 1
    assert sum(result.assignment) == 1


def test_exact_rational_optimum():
    # max x + y with 3x + y <= 2, x + 3y <= 2 -> x = y = 1/2
    lp = _lp((0, None, -1), (0, None, -1))
    lp.add_constraint({0: 3, 1: 1}, Relation.LE, 2)
    lp.add_constraint({0: 1, 1: 3}, Relation.LE, 2)
    result = lp_service.solve(lp)
    assert result.value == -1
    assert result.assignment == (Fraction(1, 2), Fraction(1, 2))


def test_free_and_upper_bounded_variables():
    lp = _lp((None, None, 1), (None, 5, -1))
    lp.add_constraint({0: 1}, Relation.GE, -3)
    result = lp_service.solve(lp)
    assert result.assignment == (Fraction(-3), Fraction(5))
    assert result.value == -8


def test_degenerate_problem_terminates():
    # Beale's cycling example: Bland's rule must not cycle
    lp = _lp((0, None, Fraction(-3, 4)), (0, None, 150), (0, None, Fraction(-1, 50)), (0, None, 6))
    lp.add_constraint({0: Fraction(1, 4), 1: -60, 2: Fraction(-1, 25), 3: 9}, Relation.LE, 0)
    lp.add_constraint({0: Fraction(1, 2), 1: -90, 2: Fraction(-1, 50), 3: 3}, Relation.LE, 0)
    lp.add_constraint({2: 1}, Relation.LE, 1)
    result = lp_service.solve(lp)
    assert result.value == Fraction(-1, 20)


def test_unbounded():
    lp = _lp((0, None, -1))
    assert lp_service.solve(lp).status == LPStatus.UNBOUNDED


def test_redundant_equalities_are_dropped():
    lp = _lp((0, None, 1), (0, None, 1))
    lp.add_constraint({0: 1, 1: 1}, Relation.EQ, 2)
    lp.add_constraint({0: 2, 1: 2}, Relation.EQ, 4)
    assert lp_service.solve(lp).value == 2


# ---------------------------------------------------------------------------
# infeasibility
# ---------------------------------------------------------------------------

def test_farkas_certificate_for_infeasible_system():
    lp = _lp((0, None, 0))
    lp.add_constraint({0: 1}, Relation.GE, 2, "at_least_two")
    lp.add_constraint({0: 1}, Relation.LE, 1, "at_most_one")
    result = lp_service.solve(lp)
    assert result.status == LPStatus.INFEASIBLE
    assert result.certificate.rhs_value > 0
    assert set(result.certificate.multipliers) <= {"at_least_two", "at_most_one"}
    assert result.certificate.multipliers


def test_infeasible_bounds_are_certified():
    lp = _lp((0, 1, 0))
    lp.add_constraint({0: 1}, Relation.EQ, 3, "three")
    result = lp_service.feasible(lp)
    assert result.status == LPStatus.INFEASIBLE
    assert "three" in result.certificate.multipliers or "ub:x0" in result.certificate.multipliers


def test_feasibility_returns_a_point():
    lp = _lp((0, None, 0), (0, None, 0))
    lp.add_constraint({0: 1, 1: 2}, Relation.EQ, 3)
    result = lp_service.feasible(lp)
    assert result.optimal
    assert result.value is None
    assert lp_service.check_point(lp, result.assignment) == []


# ---------------------------------------------------------------------------
# points and equalities
# ---------------------------------------------------------------------------

def test_check_point_names_violations():
    lp = _lp((0, 1, 0))
    lp.add_constraint({0: 1}, Relation.GE, Fraction(1, 2), "half")
    assert lp_service.check_point(lp, [Fraction(1, 4)]) == ["half"]
    assert lp_service.check_point(lp, [Fraction(2)]) == ["bound:x0"]


def test_solve_equalities():
    particular, kernel = lp_service.solve_equalities([[1, 1, 0], [0, 1, 1]], [1, 2])
    assert particular == [Fraction(-1), Fraction(2), Fraction(0)]
    assert kernel == [[Fraction(1), Fraction(-1), Fraction(1)]]
    assert lp_service.solve_equalities([[1, 1], [1, 1]], [0, 1]) == (None, [])
