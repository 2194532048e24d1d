import math
from fractions import Fraction

import numpy as np
import pytest
import sympy

from dirreg_algorithms.determine import (
    greedy_select,
    is_determining,
    select_well_conditioned,
)
from dirreg_algorithms.errors import DomainError
from dirreg_algorithms.momentmatrix import DirectionSet
from dirreg_algorithms.multiindex import (
    MultiIndex,
    monomial_count,
    monomial_eval,
    multinomial_coefficient,
)
from dirreg_algorithms.polynomial import parse_polynomial_map
from dirreg_algorithms.reconstruct import (
    FunctionOracle,
    central_stencil,
    directional_derivative,
    directional_derivative_with_error,
    partial_derivative,
    partials_from_directionals,
    reconstruct_partials,
    verify_stability,
)

X, Y = sympy.symbols("x y")
SMOOTH = sympy.sin(X) * sympy.cos(Y)


def smooth_oracle():
    function = sympy.lambdify((X, Y), SMOOTH, "math")
    return FunctionOracle(evaluator=lambda p: (function(float(p[0]), float(p[1])),), m=1)


def symbolic_partial(alpha, point):
    a, b = tuple(alpha)
    derivative = sympy.diff(SMOOTH, X, a, Y, b)
    return float(derivative.subs({X: point[0], Y: point[1]}))


@pytest.mark.parametrize(
    "k, offsets, weights",
    [
        (1, (-1, 0, 1), (Fraction(-1, 2), 0, Fraction(1, 2))),
        (2, (-1, 0, 1), (1, -2, 1)),
        (3, (-2, -1, 0, 1, 2), (Fraction(-1, 2), 1, 0, -1, Fraction(1, 2))),
    ],
)
def test_central_stencil(k, offsets, weights):
    assert central_stencil(k) == (offsets, tuple(Fraction(w) for w in weights))


def test_xy_worked_instance(xy_lambda):
    verdict = greedy_select(xy_lambda)
    data = [Fraction(0), Fraction(0), Fraction(2)]
    values = [data[i] for i in verdict.selection]
    tensor = partials_from_directionals(verdict, values, (Fraction(0), Fraction(0)))
    assert tensor.is_exact
    assert tensor.value(MultiIndex((1, 1)), 1) == 1
    assert tensor.value(MultiIndex((2, 0)), 1) == 0
    assert tensor.value(MultiIndex((0, 2)), 1) == 0


def test_zero_data_gives_zero_tensor(xy_lambda):
    verdict = greedy_select(xy_lambda)
    tensor = partials_from_directionals(verdict, [Fraction(0)] * 3, (0, 0))
    assert all(v == 0 for v in tensor.values.values())


def test_polynomial_reconstruction_is_exact(xy_lambda):
    poly = parse_polynomial_map("x1*x2 + 3/2*x1^2 - x2", 2)
    point = [Fraction(1, 3), Fraction(-2)]
    verdict = greedy_select(xy_lambda)
    exact = reconstruct_partials(poly.as_oracle(), point, verdict, n_jobs=1)
    assert exact.is_exact
    assert exact.value(MultiIndex((2, 0)), 1) == 3
    assert exact.value(MultiIndex((1, 1)), 1) == 1
    differenced = reconstruct_partials(
        poly.as_oracle(exact=False), point, verdict, h=Fraction(1, 10), n_jobs=1
    )
    assert differenced.values == exact.values
    assert differenced.is_exact


def test_float_reconstruction_is_accurate(xy_lambda):
    float_lambda = DirectionSet.from_vectors(
        [p.xi for p in xy_lambda], [p.eta for p in xy_lambda], 2, mode="float"
    )
    point = [0.3, -0.2]
    verdict = is_determining(float_lambda)
    tensor = reconstruct_partials(smooth_oracle(), point, verdict)
    truth = {alpha: symbolic_partial(alpha, point) for alpha in float_lambda.basis}
    scale = max(abs(v) for v in truth.values())
    for alpha, value in truth.items():
        assert abs(tensor.value(alpha, 1) - value) <= 1e-4 * scale
    assert 0.0 <= tensor.error_bound < 1e-4


def test_stability_inequality(xy_lambda):
    poly = parse_polynomial_map("x1^2 - 4*x1*x2 + x2^2", 2)
    verdict = greedy_select(xy_lambda)
    report = verify_stability(
        poly.as_oracle(), [Fraction(1), Fraction(2)], verdict, xy_lambda
    )
    assert report.holds
    assert report.lhs == 4


def test_stability_bound_takes_the_sup_over_every_pair():
    poly = parse_polynomial_map("x1^2 - 4*x1*x2 + x2^2", 2)
    lam = DirectionSet.from_vectors(
        [(1, 0), (0, 1), (1, 1), (2, 0)], [(1,), (1,), (1,), (1,)], 2
    )
    verdict = is_determining(lam)
    assert verdict.selection == (0, 1, 2)
    report = verify_stability(poly.as_oracle(), [Fraction(1), Fraction(2)], verdict, lam)
    # second directional derivatives are 2, 2, -4 and 8; 8 is on the unselected pair
    assert report.rhs == verdict.stability_B * 8
    assert report.holds


def test_directional_error_estimate_is_small():
    value, error = directional_derivative_with_error(
        smooth_oracle(), [0.1, 0.2], [1.0, 1.0], [1.0], 1
    )
    truth = math.cos(0.1) * math.cos(0.2) - math.sin(0.1) * math.sin(0.2)
    assert value == pytest.approx(truth, rel=1e-8)
    assert abs(value - truth) <= 10 * error + 1e-10


@pytest.mark.parametrize("alpha", [(1, 0), (1, 1), (2, 1), (0, 3)])
def test_mixed_partials_by_tensor_stencil(alpha):
    oracle = smooth_oracle()
    alpha = MultiIndex(alpha)
    value = partial_derivative(oracle, [0.4, 0.1], alpha, 1e-3)[0]
    assert value == pytest.approx(symbolic_partial(alpha, (0.4, 0.1)), rel=1e-4, abs=1e-6)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_halving_the_step_quarters_the_error(k):
    # along xi = (1/2, 1/4) every directional derivative of exp(x1 + 2 x2) is itself
    oracle = FunctionOracle(
        evaluator=lambda p: (math.exp(float(p[0]) + 2 * float(p[1])),), m=1
    )
    x, xi, eta = (0.1, -0.2), (0.5, 0.25), (1.0,)
    truth = math.exp(x[0] + 2 * x[1])
    coarse = abs(directional_derivative(oracle, x, xi, eta, k, h=0.2) - truth)
    fine = abs(directional_derivative(oracle, x, xi, eta, k, h=0.1) - truth)
    assert 3 <= coarse / fine <= 5


def pushed_forward(tensor, pair, k):
    total = 0
    for (alpha, j), u in tensor.values.items():
        weight = multinomial_coefficient(k, alpha) * monomial_eval(pair.xi, alpha)
        total += weight * pair.eta[j - 1] * u
    return total


@pytest.mark.parametrize("n, m, k", [(2, 1, 2), (2, 2, 2), (3, 1, 3)])
def test_partials_push_forward_to_the_directional_data(n, m, k):
    rng = np.random.default_rng(11)
    size = m * monomial_count(n, k) + 3
    lam = DirectionSet.from_vectors(
        rng.normal(size=(size, n)).tolist(),
        rng.normal(size=(size, m)).tolist(),
        k,
        mode="float",
    )
    verdict = select_well_conditioned(lam)
    values = rng.uniform(-1.0, 1.0, size=len(verdict.selection)).tolist()
    tensor = partials_from_directionals(verdict, values, (0.0,) * n)
    for value, i in zip(values, verdict.selection):
        assert pushed_forward(tensor, lam.pairs[i], k) == pytest.approx(value, abs=1e-9)


def test_exact_partials_push_forward_exactly(xy_lambda):
    verdict = greedy_select(xy_lambda)
    values = [Fraction(3), Fraction(-1), Fraction(5, 7)]
    tensor = partials_from_directionals(verdict, values, (Fraction(0), Fraction(0)))
    for value, i in zip(values, verdict.selection):
        assert pushed_forward(tensor, xy_lambda.pairs[i], 2) == value


def test_nonpositive_step_is_rejected():
    with pytest.raises(DomainError):
        directional_derivative(smooth_oracle(), [0.0, 0.0], [1.0, 0.0], [1.0], 1, h=0.0)


def test_not_determining_cannot_reconstruct(collinear_lambda):
    verdict = is_determining(collinear_lambda)
    with pytest.raises(DomainError):
        partials_from_directionals(verdict, [Fraction(1)] * 2, (0, 0))


def test_oracle_component_count_is_checked():
    oracle = FunctionOracle(evaluator=lambda p: (1.0, 2.0), m=1)
    with pytest.raises(DomainError):
        oracle([0.0])
