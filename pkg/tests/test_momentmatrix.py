from fractions import Fraction

import numpy as np
import pytest
import sympy

from dirreg_algorithms.errors import DomainError, SingularMatrixError
from dirreg_algorithms.momentmatrix import (
    as_matrix,
    build_moment_matrix,
    cramer_weights,
    determinant,
    determinant_array,
    evaluation_matrix,
    null_vector,
    pivot_columns,
    rank,
    reconstruction_operator,
    solve,
    solve_array,
)

from .conftest import direction_set


def laplace_det(rows):
    if len(rows) == 1:
        return rows[0][0]
    return sum(
        (-1) ** c * rows[0][c] * laplace_det([row[:c] + row[c + 1 :] for row in rows[1:]])
        for c in range(len(rows))
    )


def random_rational_matrix(rng, size):
    return [
        [Fraction(int(rng.integers(-4, 5)), int(rng.integers(1, 4))) for _ in range(size)]
        for _ in range(size)
    ]


def test_xy_moment_matrix(xy_lambda):
    M = build_moment_matrix(xy_lambda.pairs, 2, 1, 2)
    expected = [[0, 1, 1], [0, 0, 2], [1, 0, 1]]
    assert M.entries.tolist() == [[Fraction(v) for v in row] for row in expected]
    assert [(str(a), j) for a, j in M.row_labels] == [("0,2", 1), ("1,1", 1), ("2,0", 1)]
    assert determinant(M).value == 2
    assert M.mode == "rational"


def test_wrong_point_count(xy_lambda):
    with pytest.raises(DomainError):
        build_moment_matrix(xy_lambda.pairs[:2], 2, 1, 2)


def test_unweighted_evaluation_matrix(xy_lambda):
    E = evaluation_matrix(xy_lambda)
    assert E[2].tolist() == [1, 1, 1]
    assert evaluation_matrix(xy_lambda, weighted=True)[2].tolist() == [1, 2, 1]


@pytest.mark.parametrize("size", [1, 2, 3, 4])
def test_rational_determinant_matches_cofactor_expansion(rng, size):
    for _ in range(5):
        rows = random_rational_matrix(rng, size)
        assert determinant_array(as_matrix(rows, "rational")).value == laplace_det(rows)


def test_float_determinant_keeps_sign_and_log():
    det = determinant_array(np.array([[0.0, 2.0], [3.0, 0.0]]))
    assert det.sign == -1
    assert det.logabs == pytest.approx(np.log(6.0))
    assert determinant_array(np.zeros((2, 2))).is_zero


def test_rank_and_pivots():
    A = as_matrix([[1, 2, 3], [2, 4, 6], [0, 1, 1]], "rational")
    assert rank(A) == 2
    assert pivot_columns(A) == [0, 1]
    assert rank(A.astype(float)) == 2
    assert pivot_columns(A.astype(float)) == [0, 1]


def test_null_vector_is_in_the_kernel():
    A = as_matrix([[1, 2, 3], [2, 4, 6], [0, 1, 1]], "rational")
    v = null_vector(A)
    assert all(x == 0 for x in A.dot(v))
    assert next(x for x in v if x != 0) == 1
    w = null_vector(A.astype(float))
    assert np.allclose(A.astype(float) @ w, 0.0)
    assert np.max(np.abs(w)) == pytest.approx(1.0)


def test_solve_orientation(xy_lambda):
    M = build_moment_matrix(xy_lambda.pairs, 2, 1, 2)
    u = solve(M, [Fraction(0), Fraction(0), Fraction(2)])
    assert u.tolist() == [0, 1, 0]
    assert all(x == y for x, y in zip(M.entries.T.dot(u), [0, 0, 2]))


def test_singular_solve_raises():
    A = as_matrix([[1, 2], [2, 4]], "rational")
    with pytest.raises(SingularMatrixError) as info:
        solve_array(A, [Fraction(1), Fraction(1)])
    assert info.value.rank == 1 and info.value.size == 2
    with pytest.raises(SingularMatrixError):
        solve_array(A.astype(float), [1.0, 1.0])


def test_reconstruction_operator_against_sympy(rng):
    lam = direction_set(
        [(1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (1, 3)],
        [(1, 0), (0, 1), (1, 1), (1, 0), (0, 1), (1, 2)],
        1,
    )
    M = build_moment_matrix(lam.pairs[:4], 2, 2, 1)
    W = reconstruction_operator(M)
    expected = sympy.Matrix(M.entries.tolist()).T.inv()
    rationals = [
        [sympy.Rational(x.numerator, x.denominator) for x in row] for row in W.tolist()
    ]
    assert rationals == expected.tolist()
    assert (cramer_weights(M) == W).all()
