"""Exact polynomial maps R^n -> R^m and the grammar of ``dirreg reconstruct --poly``.

Grammar (whitespace is ignored)::

    map        := component (";" component)*
    component  := ["+" | "-"] term (("+" | "-") term)*
    term       := coefficient ["*" monomial] | monomial
    monomial   := variable ("*" variable)*
    variable   := "x" index ["^" exponent]
    coefficient:= integer ["/" integer]

Variables are 1-based (``x1`` .. ``xn``). ``"3/2*x1^2*x2 - x2; x1"`` is a map R^2 -> R^2.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import DomainError, PolynomialSyntaxError
from .multiindex import (
    MultiIndex,
    enumerate_degree_k,
    monomial_eval,
    multinomial_coefficient,
)
from .momentmatrix import Scalar
from .reconstruct import FunctionOracle

Polynomial = Mapping[MultiIndex, Fraction]


def _falling(a: int, b: int) -> int:
    """a (a-1) ... (a-b+1), the coefficient of d^b x^a."""
    return math.factorial(a) // math.factorial(a - b)


@dataclass(frozen=True)
class PolynomialMap:
    n: int
    components: tuple[Polynomial, ...]

    def __post_init__(self) -> None:
        if self.n < 1 or not self.components:
            raise DomainError("a polynomial map needs n >= 1 and at least one component")
        for component in self.components:
            for alpha in component:
                if alpha.n != self.n:
                    raise DomainError(f"monomial {alpha} is not in {self.n} variables")

    @property
    def m(self) -> int:
        return len(self.components)

    @property
    def degree(self) -> int:
        return max(
            (alpha.degree for c in self.components for alpha, v in c.items() if v != 0),
            default=0,
        )

    def evaluate(self, x: Sequence[Scalar]) -> tuple[Scalar, ...]:
        if len(x) != self.n:
            raise DomainError(f"point of dimension {len(x)} for a map on R^{self.n}")
        return tuple(
            sum((c * monomial_eval(x, alpha) for alpha, c in comp.items()), Fraction(0))
            for comp in self.components
        )

    __call__ = evaluate

    def partial(self, alpha: MultiIndex) -> PolynomialMap:
        components = []
        for comp in self.components:
            out: dict[MultiIndex, Fraction] = {}
            for beta, c in comp.items():
                if any(b < a for a, b in zip(alpha, beta)):
                    continue
                factor = math.prod(_falling(b, a) for a, b in zip(alpha, beta))
                gamma = MultiIndex(tuple(b - a for a, b in zip(alpha, beta)))
                out[gamma] = out.get(gamma, Fraction(0)) + c * factor
            components.append({g: c for g, c in out.items() if c != 0})
        return PolynomialMap(self.n, tuple(components))

    def partial_value(self, alpha: MultiIndex, j: int, x: Sequence[Scalar]) -> Scalar:
        return self.partial(alpha).evaluate(x)[j - 1]

    def directional_derivative(
        self, x: Sequence[Scalar], xi: Sequence[Scalar], eta: Sequence[Scalar], k: int
    ) -> Scalar:
        """sum_{|beta| = k} (k!/beta!) xi^beta <d^beta f(x), eta>, exact on rationals."""
        total: Scalar = Fraction(0)
        for beta in enumerate_degree_k(self.n, k):
            weight = multinomial_coefficient(k, beta) * monomial_eval(xi, beta)
            if weight == 0:
                continue
            values = self.partial(beta).evaluate(x)
            total += weight * sum(e * v for e, v in zip(eta, values))
        return total

    def as_oracle(self, exact: bool = True) -> FunctionOracle:
        """Oracle over this map; ``exact`` attaches the symbolic derivative."""
        return FunctionOracle(
            evaluator=self.evaluate,
            m=self.m,
            exact_directional=self.directional_derivative if exact else None,
        )

    def __str__(self) -> str:
        return "; ".join(_format_component(c) for c in self.components)


def _format_component(component: Polynomial) -> str:
    terms = []
    for alpha, c in sorted(component.items(), key=lambda item: item[0], reverse=True):
        if c == 0:
            continue
        factors = [
            f"x{i + 1}" if a == 1 else f"x{i + 1}^{a}" for i, a in enumerate(alpha) if a
        ]
        magnitude = abs(c)
        if not factors:
            body = str(magnitude)
        elif magnitude == 1:
            body = "*".join(factors)
        else:
            body = f"{magnitude}*" + "*".join(factors)
        sign = "-" if c < 0 else "+"
        terms.append((sign, body))
    if not terms:
        return "0"
    first_sign, first_body = terms[0]
    text = ("-" if first_sign == "-" else "") + first_body
    return text + "".join(f" {sign} {body}" for sign, body in terms[1:])


_TOKEN = re.compile(r"(?P<number>\d+)|(?P<var>x\d+)|(?P<op>[;+\-*/^])")


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    offset: int


def _tokenize(source: str) -> Iterator[_Token]:
    position = 0
    while True:
        offset = len(source) - len(source[position:].lstrip())
        if offset == len(source):
            break
        match = _TOKEN.match(source, offset)
        if match is None:
            raise PolynomialSyntaxError(
                f"unexpected character {source[offset]!r}", offset, source
            )
        yield _Token(str(match.lastgroup), match.group(), offset)
        position = match.end()
    yield _Token("end", "", len(source))


class _Parser:
    def __init__(self, source: str, n: int):
        self.source = source
        self.n = n
        self.tokens = list(_tokenize(source))
        self.position = 0

    @property
    def current(self) -> _Token:
        return self.tokens[self.position]

    def _error(self, message: str, token: _Token | None = None) -> PolynomialSyntaxError:
        token = token or self.current
        return PolynomialSyntaxError(message, token.offset, self.source)

    def _advance(self) -> _Token:
        token = self.current
        self.position += 1
        return token

    def _accept(self, op: str) -> bool:
        if self.current.kind == "op" and self.current.text == op:
            self._advance()
            return True
        return False

    def _integer(self, what: str) -> int:
        if self.current.kind != "number":
            raise self._error(f"expected {what}")
        return int(self._advance().text)

    def parse(self) -> PolynomialMap:
        components = [self._component()]
        while self._accept(";"):
            components.append(self._component())
        if self.current.kind != "end":
            raise self._error(f"unexpected {self.current.text!r}")
        return PolynomialMap(self.n, tuple(components))

    def _component(self) -> dict[MultiIndex, Fraction]:
        out: dict[MultiIndex, Fraction] = {}
        sign = 1
        if self._accept("-"):
            sign = -1
        else:
            self._accept("+")
        while True:
            alpha, c = self._term()
            out[alpha] = out.get(alpha, Fraction(0)) + sign * c
            if self._accept("+"):
                sign = 1
            elif self._accept("-"):
                sign = -1
            else:
                break
        return {alpha: c for alpha, c in out.items() if c != 0}

    def _term(self) -> tuple[MultiIndex, Fraction]:
        coefficient = Fraction(1)
        if self.current.kind == "number":
            numerator = self._integer("coefficient")
            if self._accept("/"):
                token = self.current
                denominator = self._integer("denominator")
                if denominator == 0:
                    raise self._error("zero denominator", token)
            else:
                denominator = 1
            coefficient = Fraction(numerator, denominator)
            if not self._accept("*") and self.current.kind != "var":
                return MultiIndex((0,) * self.n), coefficient
        elif self.current.kind != "var":
            raise self._error("expected a coefficient or a variable")
        exponents = [0] * self.n
        self._variable(exponents)
        while self._accept("*"):
            self._variable(exponents)
        return MultiIndex(tuple(exponents)), coefficient

    def _variable(self, exponents: list[int]) -> None:
        token = self.current
        if token.kind != "var":
            raise self._error("expected a variable x1..xn")
        self._advance()
        index = int(token.text[1:])
        if not 1 <= index <= self.n:
            raise self._error(f"variable {token.text} outside x1..x{self.n}", token)
        power = self._integer("exponent") if self._accept("^") else 1
        exponents[index - 1] += power


def parse_polynomial_map(source: str, n: int) -> PolynomialMap:
    """Parse ``source`` as a map R^n -> R^m, one ``;``-separated component per output."""
    if n < 1:
        raise DomainError(f"dimension n must be >= 1, got {n}")
    if not source.strip():
        raise PolynomialSyntaxError("empty polynomial expression", 0, source)
    return _Parser(source, n).parse()


def random_polynomial_map(
    rng: np.random.Generator,
    n: int,
    m: int,
    k: int,
    max_numerator: int = 5,
    max_denominator: int = 3,
) -> PolynomialMap:
    """A map of total degree exactly k with small random rational coefficients."""

    def coefficient() -> Fraction:
        return Fraction(
            int(rng.integers(-max_numerator, max_numerator + 1)),
            int(rng.integers(1, max_denominator + 1)),
        )

    monomials = [
        alpha for degree in range(k + 1) for alpha in _degree_or_constant(n, degree)
    ]
    components = [{alpha: coefficient() for alpha in monomials} for _ in range(m)]
    top = enumerate_degree_k(n, k).indices
    if not any(components[j][alpha] != 0 for j in range(m) for alpha in top):
        j = int(rng.integers(m))
        alpha = top[int(rng.integers(len(top)))]
        components[j][alpha] = Fraction(int(rng.integers(1, max_numerator + 1)))
    return PolynomialMap(
        n, tuple({a: c for a, c in comp.items() if c != 0} for comp in components)
    )


def _degree_or_constant(n: int, degree: int) -> tuple[MultiIndex, ...]:
    if degree == 0:
        return (MultiIndex((0,) * n),)
    return enumerate_degree_k(n, degree).indices
