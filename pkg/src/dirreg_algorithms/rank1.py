"""Direction sets that determine rank-one bilinear forms <u, xi><v, eta>.

Lambda is rank-one determining when no nonzero u, v satisfy <u, xi><v, eta> = 0 on all of
Lambda. Such sets control

    F(u, v) = sum_{(xi, eta) in Lambda} |<eta, v>| |<xi, u>|^l >= eps |v| |u|^l,

the finite-dimensional core of propagating Carleman/Beurling regularity along Lambda.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, ClassVar, Mapping, Sequence, Union

import numpy as np
import scipy.optimize
from typing_extensions import Literal

from .errors import DomainError, NotRank1DeterminingError
from .momentmatrix import (
    DEFAULT_RANK_TOL,
    DirectionSet,
    Mode,
    Scalar,
    as_matrix,
    null_vector,
    rank,
)

logger = logging.getLogger("dirreg_algorithms.rank1")

MIN_GRID = 8
DEFAULT_GRID = 64
REFINEMENT_SEEDS = 5
REFINEMENT_XATOL = 1e-10
PROPAGATION_SLACK = 1e-9
LOG_TOL = 1e-12

Strategy = Literal["auto", "xi", "eta"]


@dataclass(frozen=True)
class Determining1:
    determining: ClassVar[bool] = True


@dataclass(frozen=True)
class NotDetermining1:
    u: tuple[Scalar, ...]
    v: tuple[Scalar, ...]

    determining: ClassVar[bool] = False


Rank1Verdict = Union[Determining1, NotDetermining1]


def _inner(a: Sequence[Scalar], b: Sequence[Scalar]) -> Scalar:
    return sum((x * y for x, y in zip(a, b)), Fraction(0))


def _orthogonal(a: Sequence[Scalar], b: Sequence[Scalar], tol: float) -> bool:
    value = _inner(a, b)
    if isinstance(value, Fraction):
        return value == 0
    scale = math.sqrt(float(_inner(a, a))) * math.sqrt(float(_inner(b, b)))
    return abs(value) <= tol * scale


def _rows(vectors: Sequence[Sequence[Scalar]], width: int, mode: Mode) -> np.ndarray:
    if not vectors:
        return np.empty((0, width), dtype=object if mode == "rational" else float)
    return as_matrix([list(v) for v in vectors], mode)


def _unit(width: int, mode: Mode) -> tuple[Scalar, ...]:
    one, zero = (Fraction(1), Fraction(0)) if mode == "rational" else (1.0, 0.0)
    return (one,) + (zero,) * (width - 1)


def _split_search(
    primary: list[Sequence[Scalar]],
    secondary: list[Sequence[Scalar]],
    dim_primary: int,
    dim_secondary: int,
    mode: Mode,
    tol: float,
) -> tuple[tuple[Scalar, ...], tuple[Scalar, ...]] | None:
    """Look for w, w' with <w, a_p> = 0 or <w', b_p> = 0 for every p.

    Candidate hyperplanes are the spans of dim_primary - 1 of the ``primary`` vectors, or the
    span of all of them when it is already proper. Lowest index combinations come first.
    """
    all_rows = _rows(primary, dim_primary, mode)
    if rank(all_rows, tol) < dim_primary:
        return tuple(null_vector(all_rows, tol)), _unit(dim_secondary, mode)
    seen = set()
    for combo in itertools.combinations(range(len(primary)), dim_primary - 1):
        rows = _rows([primary[i] for i in combo], dim_primary, mode)
        if rank(rows, tol) < dim_primary - 1:
            continue
        w = tuple(null_vector(rows, tol))
        if w in seen:
            continue
        seen.add(w)
        rest = [b for a, b in zip(primary, secondary) if not _orthogonal(w, a, tol)]
        rest_rows = _rows(rest, dim_secondary, mode)
        if rank(rest_rows, tol) < dim_secondary:
            return w, tuple(null_vector(rest_rows, tol))
    return None


def is_rank1_determining(
    lam: DirectionSet, strategy: Strategy = "auto", tol: float = DEFAULT_RANK_TOL
) -> Rank1Verdict:
    """Decide whether some nonzero (u, v) has <u, xi><v, eta> = 0 on all of Lambda.

    Such a witness exists iff Lambda splits into S with span(xi) proper and T with span(eta)
    proper; enumerating hyperplanes spanned by xi vectors is complete, and so is the
    symmetric enumeration over eta, which is used when it has fewer candidates.
    """
    if len(lam) == 0:
        raise DomainError("the direction set is empty")
    xis = [pair.xi for pair in lam]
    etas = [pair.eta for pair in lam]
    if strategy == "auto":
        cheaper = math.comb(len(lam), lam.m - 1) < math.comb(len(lam), lam.n - 1)
        strategy = "eta" if cheaper else "xi"
    if strategy == "xi":
        witness = _split_search(xis, etas, lam.n, lam.m, lam.mode, tol)
    elif strategy == "eta":
        found = _split_search(etas, xis, lam.m, lam.n, lam.mode, tol)
        witness = None if found is None else (found[1], found[0])
    else:
        raise DomainError(f"unknown strategy {strategy!r}")
    if witness is None:
        logger.info(f"Rank-one determining ({len(lam)} pairs, {strategy} pass)")
        return Determining1()
    u, v = witness
    logger.info(
        f"Not rank-one determining: u={[str(c) for c in u]}, v={[str(c) for c in v]}"
    )
    return NotDetermining1(u, v)


def witness_vanishes(
    lam: DirectionSet,
    u: Sequence[Scalar],
    v: Sequence[Scalar],
    tol: float = DEFAULT_RANK_TOL,
) -> bool:
    """<u, xi><v, eta> = 0 on every pair; exact for rationals."""
    return all(_orthogonal(u, p.xi, tol) or _orthogonal(v, p.eta, tol) for p in lam)


def minimal_determining_subset(lam: DirectionSet) -> DirectionSet:
    """Drop pairs, lowest id first, while the rest stays rank-one determining.

    A single pass is inclusion-minimal since supersets of determining sets are determining.
    """
    verdict = is_rank1_determining(lam)
    if isinstance(verdict, NotDetermining1):
        raise NotRank1DeterminingError(verdict.u, verdict.v)
    keep = list(range(len(lam)))
    for i in range(len(lam)):
        candidate = [j for j in keep if j != i]
        if candidate and is_rank1_determining(lam.subset(candidate)).determining:
            keep = candidate
    logger.info(f"Minimal rank-one determining subset: {len(keep)} of {len(lam)} pairs")
    return lam.subset(keep)


def rank1_form(
    lam: DirectionSet, l: int, u: Sequence[Scalar], v: Sequence[Scalar]
) -> Scalar:
    """F(u, v) = sum |<eta, v>| |<xi, u>|^l, exact for rational inputs."""
    return sum(
        (abs(_inner(p.eta, v)) * abs(_inner(p.xi, u)) ** l for p in lam), Fraction(0)
    )


def _float_rows(lam: DirectionSet) -> tuple[np.ndarray, np.ndarray]:
    xi = np.array([[float(c) for c in p.xi] for p in lam], dtype=float)
    eta = np.array([[float(c) for c in p.eta] for p in lam], dtype=float)
    return xi, eta


def rank1_form_batch(
    lam: DirectionSet, l: int, U: np.ndarray, V: np.ndarray
) -> np.ndarray:
    """F on a product grid: entry [a, b] = F(U[a], V[b])."""
    xi, eta = _float_rows(lam)
    return (np.abs(xi @ U.T) ** l).T @ np.abs(eta @ V.T)


def _sphere(angles: np.ndarray) -> np.ndarray:
    """Hyperspherical coordinates: (..., d-1) angles -> (..., d) unit vectors."""
    d = angles.shape[-1] + 1
    out = np.ones(angles.shape[:-1] + (d,))
    sines = np.ones(angles.shape[:-1])
    for i in range(d - 1):
        out[..., i] = sines * np.cos(angles[..., i])
        sines = sines * np.sin(angles[..., i])
    out[..., d - 1] = sines
    return out


def _half_sphere_grid(d: int, grid: int) -> np.ndarray:
    """Angles covering the unit sphere in R^d up to sign."""
    if d == 1:
        return np.empty((1, 0))
    axes = [np.linspace(0.0, np.pi, grid) for _ in range(d - 2)]
    axes.append(np.linspace(0.0, np.pi, grid, endpoint=False))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass(frozen=True)
class EpsilonEstimate:
    epsilon: float
    gap: float
    u: tuple[float, ...]
    v: tuple[float, ...]
    evaluations: int
    grid_minimum: float


def epsilon_constant(
    lam: DirectionSet, l: int, grid: int = DEFAULT_GRID, seeds: int = REFINEMENT_SEEDS
) -> EpsilonEstimate:
    """min of F over |u| = |v| = 1 by a half-sphere grid and Nelder-Mead refinement.

    ``gap = (grid minimum - refined) / grid minimum``; every evaluated point has
    F >= epsilon.
    """
    if grid < MIN_GRID:
        raise DomainError(f"grid must be >= {MIN_GRID}, got {grid}")
    if l < 0:
        raise DomainError(f"exponent l must be nonnegative, got {l}")
    verdict = is_rank1_determining(lam)
    if isinstance(verdict, NotDetermining1):
        raise NotRank1DeterminingError(verdict.u, verdict.v)
    angles_u = _half_sphere_grid(lam.n, grid)
    angles_v = _half_sphere_grid(lam.m, grid)
    U, V = _sphere(angles_u), _sphere(angles_v)
    values = rank1_form_batch(lam, l, U, V)
    grid_minimum = float(values.min())
    if grid_minimum <= 0.0:
        raise ArithmeticError("F vanished on the grid of a rank-one determining set")
    evaluations = values.size
    best_value = grid_minimum
    a, b = np.unravel_index(int(values.argmin()), values.shape)
    best_u, best_v = U[a], V[b]

    split = angles_u.shape[1]
    if split + angles_v.shape[1] > 0:
        xi, eta = _float_rows(lam)

        def objective(theta: np.ndarray) -> float:
            u, v = _sphere(theta[:split]), _sphere(theta[split:])
            # normalized so the simplex tolerances do not depend on the scale of Lambda
            return float(np.abs(eta @ v) @ (np.abs(xi @ u) ** l)) / grid_minimum

        order = np.argsort(values, axis=None, kind="stable")[:seeds]
        for flat in order:
            a, b = np.unravel_index(int(flat), values.shape)
            start = np.concatenate([angles_u[a], angles_v[b]])
            result = scipy.optimize.minimize(
                objective,
                start,
                method="Nelder-Mead",
                options={"xatol": REFINEMENT_XATOL, "fatol": REFINEMENT_XATOL},
            )
            evaluations += int(result.nfev)
            refined = float(result.fun) * grid_minimum
            if refined < best_value:
                best_value = refined
                best_u, best_v = _sphere(result.x[:split]), _sphere(result.x[split:])
    gap = (grid_minimum - best_value) / grid_minimum
    logger.debug(f"epsilon grid minimum {grid_minimum:.6g}, refined {best_value:.6g}")
    logger.info(
        f"epsilon(l={l}) = {best_value:.6g} (gap {gap:.2e}, {evaluations} evaluations)"
    )
    return EpsilonEstimate(
        best_value,
        gap,
        tuple(map(float, best_u)),
        tuple(map(float, best_v)),
        evaluations,
        grid_minimum,
    )


@dataclass(frozen=True)
class PropagationReport:
    epsilon: float
    gap: float
    samples: int
    violations: tuple[int, ...]

    @property
    def passed(self) -> bool:
        return not self.violations


def propagation_inequality_check(
    lam: DirectionSet,
    l: int,
    samples: Sequence[tuple[Sequence[float], Sequence[float]]],
    estimate: EpsilonEstimate | None = None,
) -> PropagationReport:
    """F(u, v) >= eps |v| |u|^l on every sample, up to the refinement gap."""
    estimate = estimate or epsilon_constant(lam, l)
    factor = 1.0 - max(estimate.gap, PROPAGATION_SLACK)
    violations = []
    for index, (u, v) in enumerate(samples):
        lhs = float(rank1_form(lam, l, [float(c) for c in u], [float(c) for c in v]))
        u_norm = math.sqrt(sum(float(c) ** 2 for c in u))
        v_norm = math.sqrt(sum(float(c) ** 2 for c in v))
        rhs = estimate.epsilon * v_norm * u_norm**l
        if lhs < rhs * factor:
            violations.append(index)
    if violations:
        logger.warning(f"Propagation inequality fails on {len(violations)} samples")
    return PropagationReport(
        estimate.epsilon, estimate.gap, len(samples), tuple(violations)
    )


# --------------------------------------------------------------------------------------
# Weight sequences


@dataclass(frozen=True)
class WeightSequence:
    """M_0..M_K from a named family or an explicit list."""

    family: Literal["gevrey", "factorial", "custom"]
    K: int
    nu: float | None = None
    values: tuple[Scalar, ...] | None = None

    @classmethod
    def gevrey(cls, nu: float, K: int) -> WeightSequence:
        return cls("gevrey", K, nu=float(nu))

    @classmethod
    def factorial(cls, K: int) -> WeightSequence:
        return cls("factorial", K)

    @classmethod
    def custom(cls, values: Sequence[Scalar]) -> WeightSequence:
        return cls("custom", len(values) - 1, values=tuple(values))

    def __post_init__(self) -> None:
        if self.family == "gevrey" and self.nu is None:
            raise DomainError("a gevrey sequence needs nu")
        if self.family == "custom" and not self.values:
            raise DomainError("a custom sequence needs values")
        if self.family not in ("gevrey", "factorial", "custom"):
            raise DomainError(f"unknown weight family {self.family!r}")

    def log_values(self) -> np.ndarray:
        k = np.arange(self.K + 1)
        log_factorial = np.array([math.lgamma(i + 1) for i in k])
        if self.family == "factorial":
            return log_factorial
        if self.family == "gevrey":
            return self.nu * log_factorial  # type: ignore[operator]
        values = self.values or ()
        return np.array([math.log(v) if v > 0 else -math.inf for v in values])

    def growth_ratio(self, k: int) -> float:
        """M_{k+1} / M_k."""
        if self.family == "factorial":
            return float(k + 1)
        if self.family == "gevrey":
            return float(k + 1) ** self.nu  # type: ignore[operator]
        low, high = self.values[k], self.values[k + 1]  # type: ignore[index]
        return float(high / low) if low > 0 else math.inf

    def describe(self) -> str:
        if self.family == "gevrey":
            return f"gevrey(nu={self.nu:g})"
        return self.family


@dataclass(frozen=True)
class ConditionResult:
    passed: bool
    first_failure: int | None = None


@dataclass(frozen=True)
class WeightReport:
    sequence: str
    K: int
    conditions: Mapping[str, ConditionResult]
    C: float
    notes: tuple[str, ...] = field(default_factory=tuple)

    @property
    def admissible(self) -> bool:
        return all(c.passed for c in self.conditions.values())


def _first(failures: Sequence[int]) -> ConditionResult:
    return ConditionResult(not failures, failures[0] if failures else None)


def validate_weight_sequence(w: WeightSequence) -> WeightReport:
    """Check M_0 = 1 and M_k >= k!; M_k^(1/k) strictly increasing; M_{k+1} <= C^k M_k.

    Comparisons run on logarithms so K = 50 Gevrey sequences stay finite.
    """
    if w.K < 2:
        raise DomainError(f"K must be >= 2, got {w.K}")
    log_m = w.log_values()
    log_factorial = np.array([math.lgamma(k + 1) for k in range(w.K + 1)])

    lower = [0] if abs(log_m[0]) > LOG_TOL else []
    lower += [k for k in range(1, w.K + 1) if log_m[k] < log_factorial[k] - LOG_TOL]

    roots = [log_m[k] / k for k in range(1, w.K + 1)]
    increasing = [k + 1 for k in range(1, w.K) if not roots[k] - roots[k - 1] > LOG_TOL]

    ratios = [w.growth_ratio(k) ** (1.0 / k) for k in range(1, w.K)]
    # at k = 0 the bound reads M_1 <= M_0 whatever C is
    growth = [0] if w.growth_ratio(0) > math.exp(LOG_TOL) else []
    finite = [k for k, c in enumerate(ratios, start=1) if not math.isfinite(c)]
    C = max(ratios) if not finite else math.inf

    notes = []
    if w.family == "factorial" or (w.family == "gevrey" and w.nu == 1.0):
        notes.append("C{k!} is precisely the class of real analytic functions")
    elif w.family == "gevrey":
        notes.append(f"Gevrey class of order {w.nu:g}")
    notes.append(
        "M_0 = 1, M_k >= k! and increasing M_k^(1/k) make C{M_k} contain the analytic "
        "functions and closed under products; M_{k+1} <= C^k M_k makes it closed under "
        "differentiation"
    )
    report = WeightReport(
        w.describe(),
        w.K,
        {
            "lower_bound": _first(lower),
            "increasing_root": _first(increasing),
            "moderate_growth": _first(growth + finite),
        },
        C,
        tuple(notes),
    )
    logger.info(
        f"Weight sequence {report.sequence}: admissible={report.admissible}, C={C:.6g}"
    )
    return report


def parse_weight_values(values: Sequence[Any]) -> WeightSequence:
    """Custom sequence from numbers or fraction strings."""
    parsed: list[Scalar] = []
    for value in values:
        if isinstance(value, str):
            parsed.append(Fraction(value))
        elif isinstance(value, int) and not isinstance(value, bool):
            parsed.append(Fraction(value))
        elif isinstance(value, float):
            parsed.append(value)
        else:
            raise DomainError(f"weight {value!r} is not a number")
    return WeightSequence.custom(parsed)
