from fractions import Fraction

import numpy as np
import pytest

from dirreg_algorithms.determine import (
    AnnihilatorForm,
    Determining,
    NotDetermining,
    annihilator_order_shift,
    greedy_select,
    is_determining,
    select_well_conditioned,
    stability_constant,
)
from dirreg_algorithms.errors import DomainError, SingularMatrixError
from dirreg_algorithms.momentmatrix import DirectionSet, build_moment_matrix
from dirreg_algorithms.multiindex import MultiIndex

from .conftest import direction_set


def random_lambda(rng, n, m, k, size, collinear=False):
    def vector(width):
        return tuple(
            Fraction(int(rng.integers(-3, 4)), int(rng.integers(1, 3)))
            for _ in range(width)
        )

    xis = [vector(n) for _ in range(size)]
    if collinear:
        base = vector(n)
        xis = [
            tuple(Fraction(int(rng.integers(-3, 4))) * c for c in base)
            for _ in range(size)
        ]
    etas = [vector(m) for _ in range(size)]
    return direction_set(xis, etas, k, mode="rational")


def test_coordinate_pairs_are_determining(coordinate_lambda):
    verdict = is_determining(coordinate_lambda)
    assert isinstance(verdict, Determining)
    assert verdict.selection == (0, 1)
    assert verdict.stability_B == 1
    assert greedy_select(coordinate_lambda).stability_B == 1


def test_collinear_certificate(collinear_lambda):
    for verdict in (is_determining(collinear_lambda), greedy_select(collinear_lambda)):
        assert isinstance(verdict, NotDetermining)
        assert dict(verdict.certificate.coeffs) == {(MultiIndex((0, 1)), 1): Fraction(1)}
        assert verdict.residual == 0


def test_too_few_pairs_is_never_determining(rng):
    lam = random_lambda(rng, 2, 2, 2, 5)
    assert lam.dimension == 6
    verdict = is_determining(lam)
    assert not verdict.determining
    assert verdict.certificate.vanishes_on(lam)


def test_greedy_swaps_in_an_independent_pair():
    lam = direction_set([(1, 0), (2, 0), (0, 1)], [(1,), (1,), (1,)], 1)
    verdict = greedy_select(lam)
    assert verdict.determining
    assert verdict.selection == (0, 2)
    assert verdict.swaps == 1


@pytest.mark.parametrize(
    "n, m, k", [(1, 2, 2), (2, 1, 2), (2, 2, 1), (3, 1, 2), (2, 2, 2)]
)
def test_rank_test_and_greedy_agree(rng, n, m, k):
    for trial in range(8):
        lam = random_lambda(
            rng, n, m, k, int(rng.integers(1, 12)), collinear=trial % 3 == 0
        )
        tested = is_determining(lam)
        greedy = greedy_select(lam)
        assert tested.determining == greedy.determining
        if tested.determining:
            assert len(greedy.selection) == lam.dimension
            assert not greedy.determinant.is_zero
        else:
            for verdict in (tested, greedy):
                assert verdict.certificate.coeffs
                assert all(
                    verdict.certificate.evaluate(p.xi, p.eta) == 0 for p in lam
                )


def test_order_shift_preserves_vanishing(collinear_lambda):
    certificate = is_determining(collinear_lambda).certificate
    for k_target in (2, 3, 4):
        shifted = annihilator_order_shift(certificate, k_target)
        assert shifted.k == k_target
        assert shifted.vanishes_on(collinear_lambda.with_order(k_target))
        assert not is_determining(collinear_lambda.with_order(k_target)).determining
    with pytest.raises(DomainError):
        annihilator_order_shift(shifted, 1)


def test_well_conditioned_selection_is_no_worse_than_first():
    lam = direction_set(
        [(1, 0), (1, Fraction(1, 100)), (0, 1), (1, 1), (1, -1)], [(1,)] * 5, 2
    )
    first = greedy_select(lam)
    best = select_well_conditioned(lam)
    assert best.determining
    assert len(best.selection) == lam.dimension
    assert best.stability_B <= first.stability_B * (1 + Fraction(1, 10**9))


@pytest.mark.parametrize(
    "n, m, k, size",
    [(2, 1, 2, 12), (2, 2, 1, 10), (3, 1, 2, 14), (2, 1, 2, 40), (2, 2, 1, 24)],
)
def test_well_conditioned_selection_beats_random_selections(n, m, k, size):
    rng = np.random.default_rng(7)
    lam = DirectionSet.from_vectors(
        rng.normal(size=(size, n)).tolist(),
        rng.uniform(0.5, 1.5, size=(size, m)).tolist(),
        k,
        mode="float",
    )
    best = select_well_conditioned(lam)
    assert best.determining
    random_constants = []
    for _ in range(1000):
        ids = sorted(rng.choice(size, lam.dimension, replace=False))
        points = [lam.pairs[i] for i in ids]
        try:
            matrix = build_moment_matrix(points, n, m, k, mode="float")
            random_constants.append(float(stability_constant(matrix)))
        except SingularMatrixError:
            continue
    worse = sum(b >= float(best.stability_B) * (1 - 1e-9) for b in random_constants)
    assert worse >= 0.9 * len(random_constants)


@pytest.mark.parametrize("n, m, k", [(2, 1, 2), (2, 2, 1), (3, 1, 2), (1, 2, 3)])
def test_verdict_is_invariant_under_pair_rescaling(rng, n, m, k):
    def nonzero():
        return Fraction(int(rng.choice([-3, -2, -1, 1, 2, 3])), int(rng.integers(1, 4)))

    for trial in range(6):
        lam = random_lambda(
            rng, n, m, k, int(rng.integers(1, 10)), collinear=trial % 2 == 0
        )
        xi_scales = [nonzero() for _ in lam]
        eta_scales = [nonzero() for _ in lam]
        scaled = direction_set(
            [tuple(c * x for x in p.xi) for c, p in zip(xi_scales, lam)],
            [tuple(c * e for e in p.eta) for c, p in zip(eta_scales, lam)],
            k,
            mode="rational",
        )
        expected = is_determining(lam).determining
        assert is_determining(scaled).determining == expected
        assert greedy_select(scaled).determining == expected


def test_float_mode_matches_rational(rng):
    lam = random_lambda(rng, 2, 1, 2, 6)
    float_lam = DirectionSet.from_vectors(
        [p.xi for p in lam], [p.eta for p in lam], 2, mode="float"
    )
    exact = is_determining(lam)
    approx = is_determining(float_lam)
    assert exact.determining == approx.determining
    if exact.determining:
        expected = float(exact.stability_B)
        assert float(approx.stability_B) == pytest.approx(expected, rel=1e-8)


def test_float_certificate_vanishes_up_to_tolerance():
    lam = DirectionSet.from_vectors([(0.5, 0.0), (0.25, 0.0)], [(1.0,), (3.0,)], 1)
    verdict = is_determining(lam)
    assert not verdict.determining
    assert verdict.certificate.vanishes_on(lam)
    assert verdict.residual <= 1e-12


def test_greedy_scan_uses_the_certificate_tolerance():
    lam = DirectionSet.from_vectors(
        [(1.0, 0.0), (2.0, 0.0), (1.0, 1e-9)], [(1.0,), (1.0,), (1.0,)], 1, mode="float"
    )
    verdict = greedy_select(lam)
    assert not verdict.determining
    assert verdict.certificate.vanishes_on(lam)
    assert verdict.residual == pytest.approx(1e-9)


def test_annihilator_validation():
    with pytest.raises(DomainError):
        AnnihilatorForm(2, 1, 1, {(MultiIndex((1, 1)), 1): Fraction(1)})
    with pytest.raises(DomainError):
        AnnihilatorForm(2, 1, 1, {(MultiIndex((1, 0)), 2): Fraction(1)})
    with pytest.raises(DomainError):
        AnnihilatorForm(2, 1, 1, {(MultiIndex((1, 0)), 1): Fraction(0)})


def test_empty_lambda_is_rejected():
    empty = DirectionSet(2, 1, 1, ())
    with pytest.raises(DomainError):
        is_determining(empty)
    with pytest.raises(DomainError):
        greedy_select(empty)


def test_subset_keeps_original_ids(xy_lambda):
    subset = xy_lambda.subset([2, 0])
    assert [subset.original_id(i) for i in range(len(subset))] == [2, 0]
    assert np.array_equal([p.id for p in subset], [0, 1])
