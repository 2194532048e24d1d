"""Seeded random instances for the acceptance sweeps."""
from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Sequence

import numpy as np

from dirreg_algorithms.momentmatrix import DirectionSet, as_matrix, rank
from dirreg_algorithms.multiindex import monomial_count

ENTRY_RANGE = 3


def instance_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream per instance so parallel sweeps do not depend on scheduling."""
    return np.random.default_rng([seed, index])


def _rational(rng: np.random.Generator, denominators: int = 2) -> Fraction:
    return Fraction(
        int(rng.integers(-ENTRY_RANGE, ENTRY_RANGE + 1)),
        int(rng.integers(1, denominators + 1)),
    )


def _vector(rng: np.random.Generator, size: int) -> tuple[Fraction, ...]:
    while True:
        vector = tuple(_rational(rng) for _ in range(size))
        if any(vector):
            return vector


def random_direction_set(
    rng: np.random.Generator,
    n: int,
    m: int,
    k: int,
    size: int,
    degenerate: bool = False,
) -> DirectionSet:
    """Small rational pairs; ``degenerate`` confines xi to a hyperplane or eta to a line."""
    xis = [_vector(rng, n) for _ in range(size)]
    etas = [_vector(rng, m) for _ in range(size)]
    if degenerate:
        if n > 1 and (m == 1 or rng.random() < 0.5):
            normal = _vector(rng, n)
            pivot = next(i for i, c in enumerate(normal) if c)
            # project every xi onto the hyperplane <normal, xi> = 0
            xis = [
                tuple(
                    x - sum(a * b for a, b in zip(normal, xi)) / normal[pivot]
                    if i == pivot
                    else x
                    for i, x in enumerate(xi)
                )
                for xi in xis
            ]
        elif m > 1:
            direction = _vector(rng, m)
            etas = [tuple(_rational(rng) * c for c in direction) for _ in range(size)]
        else:
            xis = [(Fraction(0),)] * size
    return DirectionSet.from_vectors(xis, etas, k, mode="rational", n=n, m=m)


def random_sweep_instance(
    rng: np.random.Generator,
    dims: Sequence[int],
    orders: Sequence[int],
    max_size: int,
) -> DirectionSet:
    n = int(rng.choice(dims))
    m = int(rng.choice(dims))
    k = int(rng.choice(orders))
    size = int(rng.integers(1, max_size + 1))
    return random_direction_set(rng, n, m, k, size, degenerate=bool(rng.random() < 0.3))


def undersized_direction_set(
    rng: np.random.Generator, n: int, m: int, k: int
) -> DirectionSet:
    """|Lambda| < m k_n, never determining."""
    size = int(rng.integers(1, m * monomial_count(n, k)))
    return random_direction_set(rng, n, m, k, size)


def coordinate_pairs(n: int, m: int, k: int = 1) -> DirectionSet:
    """(e_i, e_j) for every i, j."""
    xis, etas = [], []
    for i, j in itertools.product(range(n), range(m)):
        xis.append(tuple(Fraction(int(a == i)) for a in range(n)))
        etas.append(tuple(Fraction(int(b == j)) for b in range(m)))
    return DirectionSet.from_vectors(xis, etas, k, mode="rational", n=n, m=m)


def partition_oracle(lam: DirectionSet) -> bool:
    """Rank-one determining iff no split S, T has span(xi_S) and span(eta_T) both proper."""
    pairs = list(lam)
    for mask in range(2 ** len(pairs)):
        xi_part = [p.xi for i, p in enumerate(pairs) if mask >> i & 1]
        eta_part = [p.eta for i, p in enumerate(pairs) if not mask >> i & 1]
        xi_rank = rank(as_matrix(xi_part, "rational")) if xi_part else 0
        eta_rank = rank(as_matrix(eta_part, "rational")) if eta_part else 0
        if xi_rank < lam.n and eta_rank < lam.m:
            return False
    return True


def random_unit_samples(
    rng: np.random.Generator, n: int, m: int, count: int
) -> list[tuple[np.ndarray, np.ndarray]]:
    U = rng.standard_normal((count, n))
    V = rng.standard_normal((count, m))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    return list(zip(U, V))
