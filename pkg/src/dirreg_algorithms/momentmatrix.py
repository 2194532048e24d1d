"""Direction sets and the moment matrix Delta(xi*, eta*), with exact and float linear algebra.

Two scalar modes exist and are never mixed inside one computation:

* ``"rational"``: entries are :class:`fractions.Fraction` held in ``numpy`` object arrays,
  elimination is exact;
* ``"float"``: entries are ``float64`` and factorizations come from ``numpy``/``scipy``.

Rows of a moment matrix are labelled ``(alpha, j)`` with ``alpha`` ascending
lexicographically and ``j = 1..m`` nested inside each ``alpha``; columns are points.
Entry ``[(alpha, j), p] = (k!/alpha!) * (xi^(p))^alpha * eta_j^(p)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterable, Sequence, Union

import numpy as np
import scipy.linalg
from typing_extensions import Literal

from .errors import DomainError, SingularMatrixError
from .multiindex import (
    IndexBasis,
    MultiIndex,
    enumerate_degree_k,
    monomial_eval,
    multinomial_coefficient,
)

logger = logging.getLogger("dirreg_algorithms.momentmatrix")

Mode = Literal["rational", "float"]
Scalar = Union[Fraction, float]

MODES = ("rational", "float")
DEFAULT_RANK_TOL = 1e-10
SOLVE_RESIDUAL_TOL = 1e-9


def to_scalar(value: Any, mode: Mode) -> Scalar:
    if isinstance(value, bool):
        raise DomainError(f"boolean {value!r} is not a scalar")
    if mode == "rational":
        if isinstance(value, Fraction):
            return value
        if isinstance(value, (int, np.integer)):
            return Fraction(int(value))
        if isinstance(value, (float, np.floating)):
            # binary floats convert exactly
            return Fraction(float(value))
        if isinstance(value, str):
            try:
                return Fraction(value)
            except (ValueError, ZeroDivisionError) as e:
                raise DomainError(f"not a rational literal: {value!r}") from e
    elif mode == "float":
        if isinstance(value, (int, float, Fraction, np.integer, np.floating)):
            return float(value)
        if isinstance(value, str):
            try:
                return float(Fraction(value))
            except (ValueError, ZeroDivisionError) as e:
                raise DomainError(f"not a numeric literal: {value!r}") from e
    else:
        raise DomainError(f"unknown scalar mode {mode!r}")
    raise DomainError(f"cannot interpret {value!r} as a scalar")


def infer_mode(values: Iterable[Any]) -> Mode:
    """Any float among the inputs switches the whole computation to float mode."""
    for value in values:
        if isinstance(value, (float, np.floating)):
            return "float"
    return "rational"


def as_matrix(rows: Sequence[Sequence[Any]] | np.ndarray, mode: Mode) -> np.ndarray:
    if mode == "float":
        return np.array(rows, dtype=float)
    array = np.array(rows, dtype=object)
    if array.ndim == 1:
        array = array.reshape(1, -1) if array.size else array.reshape(0, 0)
    out = np.empty(array.shape, dtype=object)
    for index, value in np.ndenumerate(array):
        out[index] = to_scalar(value, "rational")
    return out


def mode_of(array: np.ndarray) -> Mode:
    return "rational" if array.dtype == object else "float"


@dataclass(frozen=True)
class DirectionPair:
    xi: tuple[Scalar, ...]
    eta: tuple[Scalar, ...]
    id: int


@dataclass(frozen=True)
class DirectionSet:
    """An ordered, finite Lambda of direction pairs with the order k under study.

    ``parent_ids`` maps positions back to the ids of the set this one was cut from.
    """

    n: int
    m: int
    k: int
    pairs: tuple[DirectionPair, ...]
    mode: Mode = "rational"
    parent_ids: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.n < 1 or self.m < 1:
            raise DomainError(f"dimensions must be positive, got n={self.n}, m={self.m}")
        if self.k < 1:
            raise DomainError(f"order k must be >= 1, got {self.k}")
        if self.mode not in MODES:
            raise DomainError(f"unknown scalar mode {self.mode!r}")
        for position, pair in enumerate(self.pairs):
            if pair.id != position:
                raise DomainError(f"pair at position {position} has id {pair.id}")
            if len(pair.xi) != self.n or len(pair.eta) != self.m:
                raise DomainError(
                    f"pair {position} has shape ({len(pair.xi)}, {len(pair.eta)}), "
                    f"expected ({self.n}, {self.m})"
                )

    @classmethod
    def from_vectors(
        cls,
        xis: Sequence[Sequence[Any]],
        etas: Sequence[Sequence[Any]],
        k: int,
        mode: Mode | None = None,
        n: int | None = None,
        m: int | None = None,
    ) -> DirectionSet:
        if len(xis) != len(etas):
            raise DomainError(f"{len(xis)} xi vectors against {len(etas)} eta vectors")
        if mode is None:
            mode = infer_mode(v for vec in (*xis, *etas) for v in vec)
        if n is None:
            n = len(xis[0]) if xis else 0
        if m is None:
            m = len(etas[0]) if etas else 0
        pairs = tuple(
            DirectionPair(
                xi=tuple(to_scalar(v, mode) for v in xi),
                eta=tuple(to_scalar(v, mode) for v in eta),
                id=i,
            )
            for i, (xi, eta) in enumerate(zip(xis, etas))
        )
        return cls(n=n, m=m, k=k, pairs=pairs, mode=mode)

    @property
    def basis(self) -> IndexBasis:
        return enumerate_degree_k(self.n, self.k)

    @property
    def dimension(self) -> int:
        """m * k_n, the side length of a moment matrix for this set."""
        return self.m * self.basis.count

    def original_id(self, position: int) -> int:
        return position if self.parent_ids is None else self.parent_ids[position]

    def subset(self, ids: Sequence[int]) -> DirectionSet:
        pairs = tuple(
            DirectionPair(xi=self.pairs[i].xi, eta=self.pairs[i].eta, id=position)
            for position, i in enumerate(ids)
        )
        parent = tuple(self.original_id(i) for i in ids)
        return DirectionSet(self.n, self.m, self.k, pairs, self.mode, parent)

    def with_order(self, k: int) -> DirectionSet:
        return DirectionSet(self.n, self.m, k, self.pairs, self.mode, self.parent_ids)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)


def row_labels(basis: IndexBasis, m: int) -> list[tuple[MultiIndex, int]]:
    return [(alpha, j) for alpha in basis for j in range(1, m + 1)]


def moment_column(
    pair: DirectionPair, basis: IndexBasis, m: int, weighted: bool = True
) -> list[Scalar]:
    """The column a point contributes: ``(k!/alpha!) xi^alpha eta_j`` over all row labels."""
    column = []
    for alpha in basis:
        monomial = monomial_eval(pair.xi, alpha)
        if weighted:
            monomial = multinomial_coefficient(basis.k, alpha) * monomial
        column.extend(monomial * eta_j for eta_j in pair.eta)
    return column


def evaluation_matrix(lam: DirectionSet, weighted: bool = False) -> np.ndarray:
    """The |Lambda| x (m k_n) matrix whose row p lists the monomials of B_k at pair p."""
    basis = lam.basis
    rows = [moment_column(pair, basis, lam.m, weighted=weighted) for pair in lam]
    if not rows:
        return as_matrix(np.empty((0, lam.dimension)), lam.mode)
    return as_matrix(rows, lam.mode)


@dataclass(frozen=True, eq=False)
class MomentMatrix:
    basis: IndexBasis
    m: int
    points: tuple[DirectionPair, ...]
    entries: np.ndarray
    mode: Mode
    weighted: bool = True

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @property
    def row_labels(self) -> list[tuple[MultiIndex, int]]:
        return row_labels(self.basis, self.m)


def build_moment_matrix(
    points: Sequence[DirectionPair],
    n: int,
    m: int,
    k: int,
    mode: Mode | None = None,
    weighted: bool = True,
) -> MomentMatrix:
    basis = enumerate_degree_k(n, k)
    size = m * basis.count
    if len(points) != size:
        raise DomainError(
            f"a moment matrix needs m*k_n = {size} points, got {len(points)}"
        )
    for pair in points:
        if len(pair.xi) != n or len(pair.eta) != m:
            raise DomainError(f"point {pair.id} does not have dimensions ({n}, {m})")
    if mode is None:
        mode = infer_mode(v for p in points for v in (*p.xi, *p.eta))
    columns = [moment_column(p, basis, m, weighted=weighted) for p in points]
    entries = as_matrix(columns, mode).T.copy()
    return MomentMatrix(basis, m, tuple(points), entries, mode, weighted)


# --------------------------------------------------------------------------------------
# Exact elimination on Fraction object arrays


def _rref(A: np.ndarray) -> tuple[np.ndarray, list[int]]:
    R = A.copy()
    rows, cols = R.shape
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nonzero = next((i for i in range(r, rows) if R[i, c] != 0), None)
        if nonzero is None:
            continue
        if nonzero != r:
            R[[r, nonzero]] = R[[nonzero, r]]
        R[r] = R[r] / R[r, c]
        for i in range(rows):
            if i != r and R[i, c] != 0:
                R[i] = R[i] - R[i, c] * R[r]
        pivots.append(c)
        r += 1
    return R, pivots


def _rational_det(A: np.ndarray) -> Fraction:
    R = A.copy()
    n = R.shape[0]
    det = Fraction(1)
    for c in range(n):
        pivot = next((i for i in range(c, n) if R[i, c] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != c:
            R[[c, pivot]] = R[[pivot, c]]
            det = -det
        det *= R[c, c]
        for i in range(c + 1, n):
            if R[i, c] != 0:
                R[i] = R[i] - (R[i, c] / R[c, c]) * R[c]
    return det


def pivot_columns(A: np.ndarray, tol: float = DEFAULT_RANK_TOL) -> list[int]:
    """Lowest-index-first maximal set of linearly independent columns."""
    if mode_of(A) == "rational":
        return _rref(A)[1]
    # greedy column scan, float: keep a column if it raises the numerical rank
    chosen: list[int] = []
    for c in range(A.shape[1]):
        if rank(A[:, chosen + [c]], tol=tol) > len(chosen):
            chosen.append(c)
        if len(chosen) == A.shape[0]:
            break
    return chosen


@dataclass(frozen=True)
class Determinant:
    value: Scalar
    sign: int
    logabs: float

    @property
    def is_zero(self) -> bool:
        return self.sign == 0


def determinant_array(A: np.ndarray) -> Determinant:
    if A.shape[0] != A.shape[1]:
        raise DomainError(f"determinant of a non-square {A.shape} matrix")
    if A.shape[0] == 0:
        one: Scalar = Fraction(1) if mode_of(A) == "rational" else 1.0
        return Determinant(one, 1, 0.0)
    if mode_of(A) == "rational":
        value = _rational_det(A)
        if value == 0:
            return Determinant(value, 0, -math.inf)
        logabs = math.log(abs(value.numerator)) - math.log(value.denominator)
        return Determinant(value, 1 if value > 0 else -1, logabs)
    sign, logabs = np.linalg.slogdet(A)
    sign = int(sign)
    value = sign * math.exp(logabs) if sign and logabs < 709.0 else sign * math.inf
    return Determinant(float(value) if sign else 0.0, sign, float(logabs))


def determinant(M: MomentMatrix) -> Determinant:
    return determinant_array(M.entries)


def rank(A: np.ndarray, tol: float = DEFAULT_RANK_TOL) -> int:
    """Exact rank in rational mode; singular values above ``tol * sigma_max`` in float mode."""
    if A.size == 0:
        return 0
    if mode_of(A) == "rational":
        return len(_rref(A)[1])
    if tol <= 0:
        raise DomainError(f"rank tolerance must be positive, got {tol}")
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))


def solve_array(A: np.ndarray, b: Sequence[Scalar]) -> np.ndarray:
    """Solve ``A x = b`` for square nonsingular ``A``."""
    n = A.shape[0]
    if A.shape != (n, n) or len(b) != n:
        raise DomainError(
            f"cannot solve a {A.shape} system with right-hand side of {len(b)}"
        )
    if mode_of(A) == "rational":
        augmented = np.hstack([A, as_matrix([[v] for v in b], "rational")])
        R, pivots = _rref(augmented)
        if len([p for p in pivots if p < n]) < n:
            raise SingularMatrixError(rank(A), n)
        return R[:, n].copy()
    b_arr = np.asarray(b, dtype=float)
    cond = np.linalg.cond(A) if n else 1.0
    if not np.isfinite(cond) or cond > 1.0 / np.finfo(float).eps:
        raise SingularMatrixError(
            rank(A), n, f"matrix is numerically singular (cond={cond:.3g})"
        )
    lu, piv = scipy.linalg.lu_factor(A)
    x = scipy.linalg.lu_solve((lu, piv), b_arr)
    # one step of iterative refinement
    x = x + scipy.linalg.lu_solve((lu, piv), b_arr - A @ x)
    residual = np.linalg.norm(A @ x - b_arr)
    if residual > SOLVE_RESIDUAL_TOL * max(np.linalg.norm(b_arr), np.finfo(float).tiny):
        logger.warning(f"Residual {residual:.3e} above tolerance for cond={cond:.3e}")
    return x


def solve(M: MomentMatrix, d: Sequence[Scalar]) -> np.ndarray:
    """Solve ``Delta^T u = d``: ``d`` is indexed by points, ``u`` by row labels (alpha, j).

    This is the orientation of the reconstruction system
    ``d_p = sum_{(alpha, j)} Delta[(alpha, j), p] u_(alpha, j)``.
    """
    return solve_array(M.entries.T.copy(), d)


def inverse_array(A: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    if mode_of(A) == "rational":
        identity = as_matrix(
            [[int(i == j) for j in range(n)] for i in range(n)], "rational"
        )
        R, pivots = _rref(np.hstack([A, identity]))
        if len([p for p in pivots if p < n]) < n:
            raise SingularMatrixError(rank(A), n)
        return R[:, n:].copy()
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > 1.0 / np.finfo(float).eps:
        raise SingularMatrixError(
            rank(A), n, f"matrix is numerically singular (cond={cond:.3g})"
        )
    return scipy.linalg.inv(A)


def reconstruction_operator(M: MomentMatrix) -> np.ndarray:
    """(Delta^T)^-1: row (alpha, j), column p holds det Delta_(alpha j)^(p) / det Delta."""
    return inverse_array(M.entries.T.copy())


def cramer_weights(M: MomentMatrix) -> np.ndarray:
    """The cofactor ratios of Cramer's rule, computed literally from minors (rational mode)."""
    if M.mode != "rational":
        raise DomainError("literal cofactor ratios are only computed in rational mode")
    det = _rational_det(M.entries)
    if det == 0:
        raise SingularMatrixError(rank(M.entries), M.size)
    size = M.size
    weights = np.empty((size, size), dtype=object)
    for r in range(size):
        rows = [i for i in range(size) if i != r]
        for p in range(size):
            cols = [c for c in range(size) if c != p]
            cofactor = (-1) ** (r + p) * _rational_det(M.entries[np.ix_(rows, cols)])
            weights[r, p] = cofactor / det
    return weights


def null_vector(A: np.ndarray, tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """A nonzero kernel vector of ``A`` (which must be column-rank deficient).

    Rational: built from the first free column of the reduced echelon form and scaled so
    the first nonzero entry is 1. Float: the right-singular vector of the smallest singular
    value, scaled so the largest-magnitude entry is +1.
    """
    cols = A.shape[1]
    if mode_of(A) == "rational":
        if A.shape[0] == 0:
            R, pivots = A, []
        else:
            R, pivots = _rref(A)
        free = next(c for c in range(cols) if c not in pivots)
        v = np.array([Fraction(0)] * cols, dtype=object)
        v[free] = Fraction(1)
        for row, c in enumerate(pivots):
            v[c] = -R[row, free]
        lead = next(x for x in v if x != 0)
        return v / lead
    if A.shape[0] == 0:
        v = np.zeros(cols)
        v[0] = 1.0
        return v
    _, _, vh = np.linalg.svd(A, full_matrices=True)
    v = vh[-1].copy()
    v = v / v[np.argmax(np.abs(v))]
    v[np.abs(v) < tol] = 0.0
    return v
