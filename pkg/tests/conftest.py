from fractions import Fraction

import numpy as np
import pytest

from hiergap.models.pydantic_models import PredicateKind
from hiergap.models.schemas import Constraint, CspInstance, ParityCheckGraph
from hiergap.services.field_service import field_service


@pytest.fixture
def gf2():
    return field_service.field_of_order(2)


@pytest.fixture
def gf3():
    return field_service.field_of_order(3)


@pytest.fixture
def gf4():
    return field_service.field_of_order(4)


@pytest.fixture
def gf8():
    return field_service.field_of_order(8)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def toy_code():
    """Six variables, four checks; the received word 110000 has a pseudocodeword below its distance"""
    return ParityCheckGraph(n=6, d_v=3, d_c=3, checks=((0, 1, 2), (0, 1, 3), (1, 2, 4), (0, 2, 5)))


@pytest.fixture
def triangle_instance():
    """One odd constraint on three variables"""
    return CspInstance(n=3, alphabet=2, constraints=(Constraint(PredicateKind.ODD, (0, 1, 2)),))


@pytest.fixture
def marginal_of():
    """Marginal of a {tuple: prob} table onto positions"""
    def marginal(table, positions):
        out = {}
        for alpha, p in table.items():
            key = tuple(alpha[i] for i in positions)
            out[key] = out.get(key, Fraction(0)) + p
        return out
    return marginal
