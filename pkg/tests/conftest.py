import json
from fractions import Fraction

import numpy as np
import pytest

from dirreg_algorithms.momentmatrix import DirectionSet


@pytest.fixture
def rng():
    return np.random.default_rng(2)


@pytest.fixture
def write_json(tmp_path):
    def write(name, data):
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return path

    return write


def direction_set(xis, etas, k, mode=None):
    return DirectionSet.from_vectors(xis, etas, k, mode=mode)


@pytest.fixture
def coordinate_lambda():
    """(e1, 1), (e2, 1) in R^2 x R^1 at order one."""
    return direction_set([(1, 0), (0, 1)], [(1,), (1,)], 1)


@pytest.fixture
def collinear_lambda():
    """Every xi on the first axis: xi_2 eta_1 annihilates it."""
    return direction_set([(1, 0), (2, 0)], [(1,), (1,)], 1)


@pytest.fixture
def xy_lambda():
    """Second order, xi in {(1,0), (0,1), (1,1)}, eta = 1."""
    return direction_set([(1, 0), (0, 1), (1, 1)], [(1,), (1,), (1,)], 2)


def fractions(*values):
    return tuple(Fraction(v) for v in values)
