"""Counterexamples showing the determining conditions cannot be weakened.

* Order-k forms: a nonzero ``Phi`` vanishing on Lambda gives ``f(x) = ln|ln|x|| * phi(x)``,
  whose directional derivatives along Lambda stay bounded near 0 while some k-th partial
  grows like ``ln|ln r|``.
* Rank one: a witness ``(u, v)`` gives ``f(z) = h(<u, z>) * v`` with a rough profile ``h``;
  every first directional derivative along Lambda vanishes while ``h`` is not differentiable.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Mapping, Sequence

import numpy as np
import pandas as pd
from typing_extensions import Literal

from .determine import AnnihilatorForm
from .errors import CertificateMismatchError, DomainError
from .momentmatrix import DirectionSet, Mode, Scalar
from .multiindex import MultiIndex, enumerate_degree_k, monomial_eval
from .reconstruct import FunctionOracle, directional_derivative, partial_derivative

logger = logging.getLogger("dirreg_algorithms.sharpness")

DOMAIN_RADIUS = math.exp(-1.0)
DEFAULT_BLOWUP_RADII = tuple(10.0**-e for e in range(3, 13))
DEFAULT_TAMENESS_RADII = tuple(10.0**-e for e in range(3, 9))
DEFAULT_RELATIVE_STEP = 1e-2
GROWTH_WINDOW = 5
ENVELOPE_RANGE = (0.5, 2.0)
TAMENESS_FACTOR = 10.0
TAMENESS_FLOOR = 1e-8

WEIERSTRASS_TERMS = 41
DEFAULT_SCALES = tuple(10.0**-e for e in range(1, 7))
SPREAD_THRESHOLD = 2.0
ONE_SIDED_THRESHOLD = 0.5
DIRECTIONAL_STEP = Fraction(1, 1000)
VANISHING_TOL = 1e-9


@dataclass(frozen=True)
class HomogeneousMap:
    """phi = (phi_1, ..., phi_m), each phi_j homogeneous of degree k in n variables."""

    n: int
    k: int
    components: tuple[Mapping[MultiIndex, Scalar], ...]

    def __post_init__(self) -> None:
        for component in self.components:
            for alpha in component:
                if alpha.n != self.n or alpha.degree != self.k:
                    raise DomainError(
                        f"monomial {alpha} is not of degree {self.k} in R^{self.n}"
                    )
        if not any(c != 0 for comp in self.components for c in comp.values()):
            raise DomainError("phi must have a nonzero coefficient")

    @classmethod
    def from_annihilator(cls, phi: AnnihilatorForm) -> HomogeneousMap:
        components: list[dict[MultiIndex, Scalar]] = [{} for _ in range(phi.m)]
        for (alpha, j), c in phi.coeffs.items():
            components[j - 1][alpha] = c
        return cls(phi.n, phi.k, tuple(components))

    @property
    def m(self) -> int:
        return len(self.components)

    @property
    def mode(self) -> Mode:
        values = [c for comp in self.components for c in comp.values()]
        return "rational" if all(isinstance(c, Fraction) for c in values) else "float"

    def to_annihilator(self) -> AnnihilatorForm:
        coeffs = {
            (alpha, j + 1): c
            for j, comp in enumerate(self.components)
            for alpha, c in comp.items()
            if c != 0
        }
        return AnnihilatorForm(self.n, self.m, self.k, coeffs, self.mode)

    def evaluate(self, x: Sequence[Scalar]) -> tuple[Scalar, ...]:
        return tuple(
            sum((c * monomial_eval(x, alpha) for alpha, c in comp.items()), Fraction(0))
            for comp in self.components
        )

    def norm(self) -> float:
        return float(sum(abs(c) for comp in self.components for c in comp.values()))


def _loglog(r: float) -> float:
    return math.log(-math.log(r))


def build_loglog_counterexample(phi: HomogeneousMap) -> FunctionOracle:
    """f(x) = ln|ln|x|| * phi(x) on 0 < |x| < 1/e, f(0) = 0."""
    coefficients = [
        {alpha: float(c) for alpha, c in comp.items()} for comp in phi.components
    ]

    def evaluate(x: Sequence[Scalar]) -> tuple[float, ...]:
        point = [float(v) for v in x]
        if len(point) != phi.n:
            raise DomainError(f"point of dimension {len(point)} for a map on R^{phi.n}")
        r = math.sqrt(sum(v * v for v in point))
        if r == 0.0:
            return (0.0,) * phi.m
        if r >= DOMAIN_RADIUS:
            raise DomainError(f"|x| = {r:.4g} outside the domain |x| < 1/e")
        scale = _loglog(r)
        return tuple(
            scale * sum(c * monomial_eval(point, alpha) for alpha, c in comp.items())
            for comp in coefficients
        )

    return FunctionOracle(evaluator=evaluate, m=phi.m)


def sample_directions(n: int) -> list[tuple[float, ...]]:
    """Coordinate axes plus the normalized diagonal."""
    directions = [tuple(float(i == j) for j in range(n)) for i in range(n)]
    if n > 1:
        directions.append(tuple(1.0 / math.sqrt(n) for _ in range(n)))
    return directions


def _check_radii(radii: Sequence[float]) -> None:
    if not radii:
        raise DomainError("at least one radius is needed")
    if any(not 0.0 < r < DOMAIN_RADIUS for r in radii):
        raise DomainError(f"radii must lie in (0, 1/e), got {list(radii)}")
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise DomainError("radii must be strictly decreasing")


@dataclass(frozen=True)
class BlowupReport:
    alpha: MultiIndex
    j: int
    radii: tuple[float, ...]
    values: tuple[float, ...]
    envelope_ratios: tuple[float, ...]
    increasing: bool
    envelope_ok: bool

    @property
    def passed(self) -> bool:
        return self.increasing and self.envelope_ok

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "radius": self.radii,
                "value": self.values,
                "envelope_ratio": self.envelope_ratios,
            }
        )


def _dominant_coefficient(phi: HomogeneousMap) -> tuple[MultiIndex, int, float]:
    """(alpha, j) maximizing |alpha! phi_(alpha j)|, lowest (alpha, j) on ties."""
    best: tuple[MultiIndex, int, float] | None = None
    for alpha in enumerate_degree_k(phi.n, phi.k):
        for j, comp in enumerate(phi.components, start=1):
            weight = abs(float(comp.get(alpha, 0))) * alpha.factorial()
            if best is None or weight > best[2]:
                best = (alpha, j, weight)
    assert best is not None
    return best


def verify_blowup(
    phi: HomogeneousMap,
    radii: Sequence[float] = DEFAULT_BLOWUP_RADII,
    relative_step: float = DEFAULT_RELATIVE_STEP,
) -> BlowupReport:
    """Finite-difference |d^alpha f_j| at |x| = r for the dominant coefficient of phi.

    The leading term is alpha! phi_(alpha j) ln|ln r|; the report checks strict growth over
    the last radii and the ratio to that envelope.
    """
    _check_radii(radii)
    f = build_loglog_counterexample(phi)
    alpha, j, weight = _dominant_coefficient(phi)
    values, ratios = [], []
    for r in radii:
        step = relative_step * r
        value = max(
            abs(partial_derivative(f, [r * d for d in direction], alpha, step)[j - 1])
            for direction in sample_directions(phi.n)
        )
        values.append(float(value))
        ratios.append(float(value) / (weight * _loglog(r)))
        logger.debug(f"Blow-up r={r:.1e}: |d^{alpha} f_{j}| = {value:.6g}")
    window = values[-GROWTH_WINDOW:]
    increasing = all(b > a for a, b in zip(window, window[1:]))
    low, high = ENVELOPE_RANGE
    envelope_ok = low <= ratios[-1] <= high
    logger.info(
        f"Blow-up along alpha={alpha}, j={j}: increasing={increasing}, "
        f"ratio={ratios[-1]:.4f}"
    )
    return BlowupReport(
        alpha, j, tuple(radii), tuple(values), tuple(ratios), increasing, envelope_ok
    )


@dataclass(frozen=True)
class TamenessReport:
    rows: tuple[tuple[int, int, float, float], ...]
    bounded: Mapping[tuple[int, int], bool]

    @property
    def passed(self) -> bool:
        return all(self.bounded.values())

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(list(self.rows), columns=["pair", "order", "radius", "value"])


def verify_directional_tameness(
    phi: HomogeneousMap,
    lam: DirectionSet,
    radii: Sequence[float] = DEFAULT_TAMENESS_RADII,
    relative_step: float = DEFAULT_RELATIVE_STEP,
) -> TamenessReport:
    """|D_xi^p <f, eta>(x)| at |x| = r, p = 1..k, for every pair of Lambda.

    Bounded means: max over radii <= 10 * value at the largest radius + 1e-8 * |phi|.
    """
    _check_radii(radii)
    offending = phi.to_annihilator().nonvanishing_ids(lam)
    if offending:
        raise CertificateMismatchError([lam.original_id(i) for i in offending])
    f = build_loglog_counterexample(phi)
    floor = TAMENESS_FLOOR * phi.norm()
    rows = []
    bounded = {}
    for pair in lam:
        xi_norm = math.sqrt(sum(float(v) ** 2 for v in pair.xi))
        for p in range(1, phi.k + 1):
            series = []
            for r in radii:
                if xi_norm == 0.0:
                    value = 0.0
                else:
                    value = max(
                        abs(
                            float(
                                directional_derivative(
                                    f,
                                    [r * d for d in direction],
                                    [float(v) for v in pair.xi],
                                    [float(v) for v in pair.eta],
                                    p,
                                    relative_step * r / xi_norm,
                                )
                            )
                        )
                        for direction in sample_directions(phi.n)
                    )
                series.append(value)
                rows.append((lam.original_id(pair.id), p, r, value))
            limit = TAMENESS_FACTOR * series[0] + floor
            bounded[(lam.original_id(pair.id), p)] = max(series) <= limit
    report = TamenessReport(tuple(rows), bounded)
    logger.info(f"Directional tameness over {len(lam)} pairs: passed={report.passed}")
    return report


@dataclass(frozen=True)
class Profile:
    """A scalar profile h: R -> R for f(z) = h(<u, z>) v."""

    name: str
    function: Callable[[float], float]
    params: Mapping[str, Any] = field(default_factory=dict)

    def __call__(self, t: float) -> float:
        return float(self.function(t))


def weierstrass(
    a: float = 0.5, b: float = 3.0, terms: int = WEIERSTRASS_TERMS
) -> Profile:
    """sum_{i < terms} a^i cos(b^i pi t); nowhere differentiable for 0 < a < 1, ab >= 1."""
    if not 0.0 < a < 1.0 or a * b < 1.0:
        raise DomainError(f"weierstrass needs 0 < a < 1 and ab >= 1, got a={a}, b={b}")
    amplitudes = a ** np.arange(terms)
    frequencies = np.pi * b ** np.arange(terms)

    def h(t: float) -> float:
        return float(np.sum(amplitudes * np.cos(frequencies * t)))

    return Profile("weierstrass", h, {"a": a, "b": b, "terms": terms})


def absolute_value() -> Profile:
    return Profile("abs", abs)


def _real(value: Any) -> float:
    try:
        return float(Fraction(str(value)))
    except (ValueError, ZeroDivisionError) as e:
        raise DomainError(f"knot coordinate {value!r} is not a number") from e


def custom(knots: Sequence[Sequence[Any]]) -> Profile:
    """Linear interpolation through (t, h) knots, constant beyond the outer knots.

    Interior knots where the slope changes are points without a derivative.
    """
    if len(knots) < 2 or any(len(knot) != 2 for knot in knots):
        raise DomainError("a custom profile needs at least two [t, h] knots")
    ts = np.array([_real(t) for t, _ in knots])
    hs = np.array([_real(h) for _, h in knots])
    if np.any(np.diff(ts) <= 0):
        raise DomainError("custom profile knots need strictly increasing t")

    def h(t: float) -> float:
        return float(np.interp(t, ts, hs))

    return Profile("custom", h, {"knots": [[float(t), float(v)] for t, v in zip(ts, hs)]})


def make_profile(name: str, **params: Any) -> Profile:
    if name == "weierstrass":
        try:
            return weierstrass(**params)
        except TypeError as e:
            raise DomainError(f"bad weierstrass parameters {sorted(params)}") from e
    if name == "abs":
        return absolute_value()
    if name == "custom":
        if "knots" not in params:
            raise DomainError("profile 'custom' needs a knots list")
        return custom(params["knots"])
    raise DomainError(f"unknown profile {name!r}; expected weierstrass, abs or custom")


def _inner(u: Sequence[Scalar], z: Sequence[Scalar]) -> Fraction:
    # exact: binary floats convert to Fractions without loss
    return sum((Fraction(a) * Fraction(b) for a, b in zip(u, z)), Fraction(0))


def _require_nonzero(vector: Sequence[Scalar], name: str) -> None:
    if not vector or all(c == 0 for c in vector):
        raise DomainError(f"{name} must be a nonzero vector")


def build_ridge_counterexample(
    u: Sequence[Scalar], v: Sequence[Scalar], profile: Profile
) -> FunctionOracle:
    """f(z) = h(<u, z>) v, with <u, z> formed exactly so it is constant along u-orthogonal lines."""
    _require_nonzero(u, "u")
    _require_nonzero(v, "v")
    v_float = [float(c) for c in v]

    def evaluate(z: Sequence[Scalar]) -> tuple[float, ...]:
        if len(z) != len(u):
            raise DomainError(f"point of dimension {len(z)} for a map on R^{len(u)}")
        value = profile(float(_inner(u, z)))
        return tuple(value * c for c in v_float)

    return FunctionOracle(evaluator=evaluate, m=len(v))


@dataclass(frozen=True)
class QuotientSweep:
    t0: float
    scales: tuple[float, ...]
    forward: tuple[float, ...]
    backward: tuple[float, ...]

    @property
    def spread_ratio(self) -> float:
        magnitudes = [abs(q) for q in self.forward]
        smallest = min(magnitudes)
        return math.inf if smallest == 0.0 else max(magnitudes) / smallest

    @property
    def one_sided_mismatch(self) -> float:
        fwd, bwd = self.forward[-1], self.backward[-1]
        return abs(fwd - bwd) / max(1.0, abs(fwd), abs(bwd))

    @property
    def non_convergent(self) -> bool:
        return (
            self.spread_ratio > SPREAD_THRESHOLD
            or self.one_sided_mismatch > ONE_SIDED_THRESHOLD
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"scale": self.scales, "forward": self.forward, "backward": self.backward}
        )


def quotient_sweep(
    profile: Profile, t0: float = 0.0, scales: Sequence[float] = DEFAULT_SCALES
) -> QuotientSweep:
    """Forward and backward difference quotients of h at t0 over decreasing scales."""
    if not scales or any(s <= 0 for s in scales):
        raise DomainError("scales must be positive")
    h0 = profile(t0)
    forward = tuple((profile(t0 + s) - h0) / s for s in scales)
    backward = tuple((h0 - profile(t0 - s)) / s for s in scales)
    return QuotientSweep(t0, tuple(scales), forward, backward)


@dataclass(frozen=True)
class RidgeReport:
    rows: tuple[tuple[int, float, bool], ...]
    sweep: QuotientSweep

    @property
    def directional_vanishing(self) -> bool:
        return all(vanishes for _, _, vanishes in self.rows)

    @property
    def passed(self) -> bool:
        return self.directional_vanishing and self.sweep.non_convergent

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            list(self.rows), columns=["pair", "max_abs_directional", "vanishes"]
        )


def default_base_points(n: int, count: int = 3) -> list[tuple[Fraction, ...]]:
    return [
        tuple(Fraction((s + 1) * (i + 2), 13) for i in range(n)) for s in range(count)
    ]


def verify_ridge_counterexample(
    u: Sequence[Scalar],
    v: Sequence[Scalar],
    lam: DirectionSet,
    profile: Profile,
    base_points: Sequence[Sequence[Scalar]] | None = None,
    step: Fraction = DIRECTIONAL_STEP,
    t0: float = 0.0,
) -> RidgeReport:
    """First directional derivatives of h(<u, z>) v along Lambda vanish; h itself is rough.

    Requires <u, xi><v, eta> = 0 on every pair. Points and steps are rationals so that
    ``<u, z + t xi>`` is the same number for every stencil node when ``<u, xi> = 0``.
    """
    offending = [
        pair.id for pair in lam if _inner(u, pair.xi) * _inner(v, pair.eta) != 0
    ]
    if offending:
        raise CertificateMismatchError([lam.original_id(i) for i in offending])
    f = build_ridge_counterexample(u, v, profile)
    points = base_points or default_base_points(lam.n)
    exact_points = [[Fraction(c) for c in z] for z in points]
    rows = []
    for pair in lam:
        xi = [Fraction(c) for c in pair.xi]
        eta = [Fraction(c) for c in pair.eta]
        value = max(
            abs(float(directional_derivative(f, z, xi, eta, 1, step)))
            for z in exact_points
        )
        rows.append((lam.original_id(pair.id), value, value <= VANISHING_TOL))
    sweep = quotient_sweep(profile, t0=t0)
    report = RidgeReport(tuple(rows), sweep)
    logger.info(
        f"Rank-one counterexample ({profile.name}): "
        f"vanishing={report.directional_vanishing}, "
        f"spread={sweep.spread_ratio:.3g}"
    )
    return report


@dataclass(frozen=True)
class CounterexampleSpec:
    kind: Literal["loglog", "ridge"]
    phi: HomogeneousMap | None = None
    u: tuple[Scalar, ...] | None = None
    v: tuple[Scalar, ...] | None = None
    profile: Profile | None = None

    def __post_init__(self) -> None:
        if self.kind == "loglog" and self.phi is None:
            raise DomainError("an order-k counterexample needs phi")
        if self.kind == "ridge" and (
            self.u is None or self.v is None or self.profile is None
        ):
            raise DomainError("a rank-one counterexample needs u, v and a profile")

    def build(self) -> FunctionOracle:
        if self.kind == "loglog":
            return build_loglog_counterexample(self.phi)  # type: ignore[arg-type]
        assert self.u is not None and self.v is not None and self.profile is not None
        return build_ridge_counterexample(self.u, self.v, self.profile)
