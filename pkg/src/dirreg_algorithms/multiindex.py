"""Multi-indices of fixed total degree.

Every matrix row and every coefficient vector in the package is indexed by the
degree-k multi-indices of ``enumerate_degree_k`` in ascending lexicographic order
(``alpha < beta`` iff at the first differing coordinate ``alpha_i < beta_i``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Iterator, Sequence

from .errors import DomainError


@dataclass(frozen=True, order=True)
class MultiIndex:
    exponents: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.exponents) < 1:
            raise DomainError("a multi-index needs at least one coordinate")
        if any(a < 0 for a in self.exponents):
            raise DomainError(f"negative exponent in {self.exponents}")

    @classmethod
    def parse(cls, text: str) -> MultiIndex:
        """Inverse of ``str``: ``"1,0,2"`` -> ``MultiIndex((1, 0, 2))``."""
        try:
            return cls(tuple(int(part) for part in text.split(",")))
        except ValueError as e:
            raise DomainError(f"malformed multi-index {text!r}") from e

    @property
    def n(self) -> int:
        return len(self.exponents)

    @property
    def degree(self) -> int:
        return sum(self.exponents)

    def factorial(self) -> int:
        return math.prod(math.factorial(a) for a in self.exponents)

    def shifted(self, coordinate: int, by: int) -> MultiIndex:
        exponents = list(self.exponents)
        exponents[coordinate] += by
        return MultiIndex(tuple(exponents))

    def __iter__(self) -> Iterator[int]:
        return iter(self.exponents)

    def __str__(self) -> str:
        return ",".join(str(a) for a in self.exponents)


@dataclass(frozen=True)
class IndexBasis:
    n: int
    k: int
    indices: tuple[MultiIndex, ...]

    @property
    def count(self) -> int:
        return len(self.indices)

    def position(self, alpha: MultiIndex) -> int:
        return self._positions()[alpha]

    def _positions(self) -> dict[MultiIndex, int]:
        return _position_table(self.n, self.k)

    def __iter__(self) -> Iterator[MultiIndex]:
        return iter(self.indices)

    def __len__(self) -> int:
        return len(self.indices)


def monomial_count(n: int, k: int) -> int:
    """k_n = C(k+n-1, k), the number of degree-k monomials in n variables."""
    return math.comb(k + n - 1, k)


def _compositions(n: int, k: int) -> Iterator[tuple[int, ...]]:
    # first coordinate ascending, so the output is lexicographically ascending
    if n == 1:
        yield (k,)
        return
    for first in range(k + 1):
        for rest in _compositions(n - 1, k - first):
            yield (first, *rest)


@lru_cache(maxsize=None)
def _enumerate(n: int, k: int) -> IndexBasis:
    indices = tuple(MultiIndex(e) for e in _compositions(n, k))
    return IndexBasis(n=n, k=k, indices=indices)


@lru_cache(maxsize=None)
def _position_table(n: int, k: int) -> dict[MultiIndex, int]:
    return {alpha: i for i, alpha in enumerate(_enumerate(n, k).indices)}


def enumerate_degree_k(n: int, k: int) -> IndexBasis:
    if n < 1:
        raise DomainError(f"dimension n must be >= 1, got {n}")
    if k < 1:
        raise DomainError(f"order k must be >= 1, got {k}")
    return _enumerate(n, k)


def multinomial_coefficient(k: int, alpha: MultiIndex) -> int:
    """k! / (alpha_1! ... alpha_n!)."""
    if alpha.degree != k:
        raise DomainError(f"|alpha| = {alpha.degree} does not match k = {k}")
    return math.factorial(k) // alpha.factorial()


def monomial_eval(xi: Sequence[Any], alpha: MultiIndex) -> Any:
    """xi^alpha with 0^0 = 1; exact for Fraction inputs."""
    if len(xi) != alpha.n:
        raise DomainError(
            f"vector of length {len(xi)} against multi-index of length {alpha.n}"
        )
    result: Any = 1
    for x, a in zip(xi, alpha):
        if a:
            result = result * x**a
    return result
