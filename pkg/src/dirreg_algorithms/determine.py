from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import ClassVar, Mapping, Sequence, Union

import numpy as np
from more_itertools import first_true

from .errors import DomainError, SingularMatrixError
from .momentmatrix import (
    DEFAULT_RANK_TOL,
    Determinant,
    DirectionPair,
    DirectionSet,
    Mode,
    MomentMatrix,
    Scalar,
    build_moment_matrix,
    determinant,
    determinant_array,
    evaluation_matrix,
    inverse_array,
    mode_of,
    null_vector,
    pivot_columns,
    rank,
    reconstruction_operator,
    row_labels,
)
from .multiindex import (
    MultiIndex,
    enumerate_degree_k,
    monomial_eval,
    multinomial_coefficient,
)

logger = logging.getLogger("dirreg_algorithms.determine")

CERTIFICATE_TOL = 1e-8
MAXVOL_SWAP_LIMIT = 200
MAXVOL_FLOAT_THRESHOLD = 1.0 + 1e-9
STABILITY_IMPROVEMENT = 1.0 - 1e-9
EXHAUSTIVE_SELECTION_LIMIT = 5000


@dataclass(frozen=True)
class AnnihilatorForm:
    """Phi(xi, eta) = sum_{j, |alpha|=k} phi_(alpha j) xi^alpha eta_j, a nonzero element of B_k.

    ``coeffs`` keeps only the nonzero coefficients; ``j`` runs from 1 to ``m``.
    """

    n: int
    m: int
    k: int
    coeffs: Mapping[tuple[MultiIndex, int], Scalar]
    mode: Mode = "rational"

    def __post_init__(self) -> None:
        for (alpha, j), _ in self.coeffs.items():
            if alpha.n != self.n or alpha.degree != self.k:
                raise DomainError(
                    f"monomial {alpha} is not of degree {self.k} in {self.n} variables"
                )
            if not 1 <= j <= self.m:
                raise DomainError(f"component index {j} outside 1..{self.m}")
        if not any(c != 0 for c in self.coeffs.values()):
            raise DomainError("an annihilating form must have a nonzero coefficient")

    @classmethod
    def from_vector(
        cls, vector: Sequence[Scalar], n: int, m: int, k: int, mode: Mode
    ) -> AnnihilatorForm:
        labels = row_labels(enumerate_degree_k(n, k), m)
        coeffs = {label: c for label, c in zip(labels, vector) if c != 0}
        return cls(n, m, k, coeffs, mode)

    def coefficient(self, alpha: MultiIndex, j: int) -> Scalar:
        zero: Scalar = Fraction(0) if self.mode == "rational" else 0.0
        return self.coeffs.get((alpha, j), zero)

    def vector(self) -> list[Scalar]:
        labels = row_labels(enumerate_degree_k(self.n, self.k), self.m)
        return [self.coefficient(alpha, j) for alpha, j in labels]

    @property
    def norm(self) -> Scalar:
        """l1 norm of the coefficients; bounds |Phi(xi, eta)| by norm * |xi|_inf^k * |eta|_inf."""
        return sum(abs(c) for c in self.coeffs.values())

    def evaluate(self, xi: Sequence[Scalar], eta: Sequence[Scalar]) -> Scalar:
        total: Scalar = Fraction(0) if self.mode == "rational" else 0.0
        for (alpha, j), c in self.coeffs.items():
            total += c * monomial_eval(xi, alpha) * eta[j - 1]
        return total

    def _tolerance(self, pair: DirectionPair, tol: float) -> float:
        xi_scale = max([1.0] + [abs(float(x)) for x in pair.xi])
        eta_scale = max([1.0] + [abs(float(e)) for e in pair.eta])
        return tol * float(self.norm) * xi_scale**self.k * eta_scale

    def vanishes_at(self, pair: DirectionPair, tol: float = CERTIFICATE_TOL) -> bool:
        value = self.evaluate(pair.xi, pair.eta)
        if isinstance(value, Fraction):
            return value == 0
        return abs(value) <= self._tolerance(pair, tol)

    def nonvanishing_ids(
        self, lam: DirectionSet, tol: float = CERTIFICATE_TOL
    ) -> list[int]:
        return [pair.id for pair in lam if not self.vanishes_at(pair, tol)]

    def vanishes_on(self, lam: DirectionSet, tol: float = CERTIFICATE_TOL) -> bool:
        return not self.nonvanishing_ids(lam, tol)

    def residual(self, lam: DirectionSet) -> Scalar:
        values = [abs(self.evaluate(pair.xi, pair.eta)) for pair in lam]
        zero: Scalar = Fraction(0) if self.mode == "rational" else 0.0
        return max(values, default=zero)

    def normalized(self) -> AnnihilatorForm:
        """Scale so the first nonzero coefficient (rational) or the largest one (float) is 1."""
        vector = self.vector()
        if self.mode == "rational":
            lead = next(c for c in vector if c != 0)
        else:
            lead = max(vector, key=abs)
        return AnnihilatorForm.from_vector(
            [c / lead for c in vector], self.n, self.m, self.k, self.mode
        )


@dataclass(frozen=True, eq=False)
class Determining:
    selection: tuple[int, ...]
    matrix: MomentMatrix
    stability_B: Scalar
    determinant: Determinant
    swaps: int = 0

    determining: ClassVar[bool] = True


@dataclass(frozen=True, eq=False)
class NotDetermining:
    certificate: AnnihilatorForm
    residual: Scalar = Fraction(0)

    determining: ClassVar[bool] = False


DeterminingVerdict = Union[Determining, NotDetermining]


def stability_constant(M: MomentMatrix) -> Scalar:
    """B = max over rows (alpha, j) of sum_p |det Delta_(alpha j)^(p) / det Delta|."""
    W = reconstruction_operator(M)
    return max(sum(abs(w) for w in row) for row in W)


def _determining(lam: DirectionSet, selection: Sequence[int], swaps: int) -> Determining:
    points = [lam.pairs[i] for i in selection]
    matrix = build_moment_matrix(points, lam.n, lam.m, lam.k, mode=lam.mode)
    det = determinant(matrix)
    if det.is_zero:
        raise SingularMatrixError(rank(matrix.entries), matrix.size)
    B = stability_constant(matrix)
    return Determining(tuple(selection), matrix, B, det, swaps)


def _not_determining(lam: DirectionSet, certificate: AnnihilatorForm) -> NotDetermining:
    certificate = certificate.normalized()
    return NotDetermining(certificate, certificate.residual(lam))


def _require_nonempty(lam: DirectionSet) -> None:
    if len(lam) == 0:
        raise DomainError("the direction set is empty")


def is_determining(
    lam: DirectionSet, tol: float = DEFAULT_RANK_TOL
) -> DeterminingVerdict:
    """Rank test on the evaluation matrix E[p, (alpha, j)] = (xi^(p))^alpha eta_j^(p).

    Lambda is determining at order k iff E has full column rank m k_n. The selection is
    the lowest-index-first maximal set of independent rows of E; the certificate is a
    kernel vector of E read as the coefficients of a form in B_k.
    """
    _require_nonempty(lam)
    E = evaluation_matrix(lam, weighted=False)
    if rank(E, tol) == lam.dimension:
        selection = pivot_columns(E.T.copy(), tol)
        logger.info(f"Determining at k={lam.k}: selection {selection}")
        return _determining(lam, selection, swaps=0)
    phi = AnnihilatorForm.from_vector(null_vector(E, tol), lam.n, lam.m, lam.k, lam.mode)
    logger.info(
        f"Not determining at k={lam.k} (|Lambda|={len(lam)}, m*k_n={lam.dimension})"
    )
    return _not_determining(lam, phi)


def _bordered_annihilator(
    D: np.ndarray, core_cols: list[int], lam: DirectionSet, tol: float
) -> AnnihilatorForm:
    """Expand an (l+1)x(l+1) bordered minor along the column of a variable point (xi, eta).

    The core is the l x l nonsingular block on the lowest independent rows of
    ``D[:, core_cols]``; the border row is the lowest row outside it.
    """
    basis = lam.basis
    labels = row_labels(basis, lam.m)
    core = D[:, core_cols]
    core_rows = pivot_columns(core.T.copy(), tol)
    border_row = next(r for r in range(D.shape[0]) if r not in core_rows)
    bordered_rows = sorted(core_rows + [border_row])
    l = len(core_cols)
    zero: Scalar = Fraction(0) if lam.mode == "rational" else 0.0
    vector = [zero] * D.shape[0]
    for i, r in enumerate(bordered_rows):
        minor_rows = [q for q in bordered_rows if q != r]
        minor = D[np.ix_(minor_rows, core_cols)]
        cofactor = (-1) ** (i + l) * determinant_array(minor).value
        alpha, _ = labels[r]
        # the variable column holds (k!/alpha!) xi^alpha eta_j
        vector[r] = cofactor * multinomial_coefficient(lam.k, alpha)
    return AnnihilatorForm.from_vector(vector, lam.n, lam.m, lam.k, lam.mode)


def greedy_select(lam: DirectionSet, tol: float = DEFAULT_RANK_TOL) -> DeterminingVerdict:
    """Rank augmentation over a working set of m k_n points.

    While the working moment matrix has rank l < m k_n, the bordered-minor form Phi
    vanishes on the working set; a pair of Lambda with Phi != 0 is swapped in for a
    working column outside the l x l core, which raises the rank. When no such pair
    exists Phi annihilates all of Lambda.
    """
    _require_nonempty(lam)
    N = lam.dimension
    D = evaluation_matrix(lam, weighted=True).T.copy()
    working = list(range(min(N, len(lam))))
    swaps = 0
    for _ in range(N + len(lam) + 1):
        local = pivot_columns(D[:, working], tol)
        if len(local) == N:
            logger.info(
                f"Determining at k={lam.k} after {swaps} swaps: selection {working}"
            )
            return _determining(lam, working, swaps)
        core_cols = [working[c] for c in local]
        phi = _bordered_annihilator(D, core_cols, lam, tol)
        outside = (pair for pair in lam if pair.id not in working)
        candidate = first_true(outside, pred=lambda pair: not phi.vanishes_at(pair))
        if candidate is None:
            logger.info(f"Not determining at k={lam.k}: bordered form vanishes on Lambda")
            return _not_determining(lam, phi)
        if len(working) == N:
            leaving = next(i for i in working if i not in core_cols)
            working.remove(leaving)
        else:
            leaving = None
        working = sorted(working + [candidate.id])
        swaps += 1
        logger.debug(f"Swap {swaps}: rank {len(local)}, {leaving} -> {candidate.id}")
    raise ArithmeticError("rank augmentation did not terminate")


def _complete_pivoting_selection(D: np.ndarray, tol: float) -> list[int]:
    """Greedy volume growth: each step adds the column whose pivot (the bordered minor over
    the current minor) is largest in magnitude; ties go to the lowest point id."""
    R = D.copy()
    rows_used: list[int] = []
    selection: list[int] = []
    scale = float(np.max(np.abs(D.astype(float)))) if D.size else 0.0
    for _ in range(D.shape[0]):
        best = None
        best_value = None
        for c in range(R.shape[1]):
            if c in selection:
                continue
            for r in range(R.shape[0]):
                if r in rows_used:
                    continue
                value = abs(R[r, c])
                if best_value is None or value > best_value:
                    best, best_value = (r, c), value
        if best is None or best_value == 0 or (
            mode_of(D) == "float" and best_value <= tol * scale
        ):
            break
        r, c = best
        R = R - np.outer(R[:, c], R[r, :]) / R[r, c]
        rows_used.append(r)
        selection.append(c)
    return selection


def _maxvol_refine(D: np.ndarray, seed: Sequence[int]) -> list[int]:
    """Swap a selected column for an outside one while |det| grows (|C_ic| > 1 with C = D_S^-1 D)."""
    selection = list(seed)
    threshold = 1 if mode_of(D) == "rational" else MAXVOL_FLOAT_THRESHOLD
    for _ in range(MAXVOL_SWAP_LIMIT):
        C = inverse_array(D[:, selection]).dot(D)
        best = None
        best_value = threshold
        for c in range(D.shape[1]):
            if c in selection:
                continue
            for i in range(len(selection)):
                if abs(C[i, c]) > best_value:
                    best, best_value = (i, c), abs(C[i, c])
        if best is None:
            break
        i, c = best
        logger.debug(f"Maxvol swap {selection[i]} -> {c} (ratio {float(best_value):.4g})")
        selection[i] = c
    return sorted(selection)


def _stability_bound(F: np.ndarray, selection: Sequence[int]) -> float:
    """Float stability constant of a selection: the largest column sum of |Delta_S^-1|."""
    try:
        inverse = inverse_array(F[:, list(selection)])
    except SingularMatrixError:
        return math.inf
    return float(np.abs(inverse).sum(axis=0).max())


def _swapped(selection: Sequence[int], position: int, incoming: int) -> list[int]:
    return sorted([*selection[:position], incoming, *selection[position + 1 :]])


def _stability_refine(F: np.ndarray, seed: Sequence[int]) -> list[int]:
    """Steepest single-swap descent on the stability constant, first swap on ties."""
    selection = sorted(seed)
    current = _stability_bound(F, selection)
    for _ in range(MAXVOL_SWAP_LIMIT):
        best_move = None
        best_value = current * STABILITY_IMPROVEMENT
        for position in range(len(selection)):
            for incoming in range(F.shape[1]):
                if incoming in selection:
                    continue
                value = _stability_bound(F, _swapped(selection, position, incoming))
                if value < best_value:
                    best_move, best_value = (position, incoming), value
        if best_move is None:
            break
        leaving, incoming = selection[best_move[0]], best_move[1]
        logger.debug(f"Stability swap {leaving} -> {incoming} (B {best_value:.4g})")
        selection = _swapped(selection, *best_move)
        current = best_value
    return selection


def _local_search_candidates(
    lam: DirectionSet, D: np.ndarray, F: np.ndarray, tol: float
) -> list[tuple[float, tuple[int, ...]]]:
    first = greedy_select(lam, tol)
    seeds = [_complete_pivoting_selection(D, tol)]
    if first.determining:
        seeds.append(list(first.selection))
    candidates = []
    for seed in seeds:
        if len(seed) != lam.dimension:
            continue
        for start in (sorted(seed), _maxvol_refine(D, seed)):
            for selection in (start, _stability_refine(F, start)):
                candidates.append((_stability_bound(F, selection), tuple(selection)))
    return candidates


def select_well_conditioned(
    lam: DirectionSet, tol: float = DEFAULT_RANK_TOL
) -> DeterminingVerdict:
    """Selection of m k_n pairs with a small stability constant.

    The seeds are greedy bordered-minor maximization (complete pivoting, ties to the
    lowest id) and the first augmentation selection. Each seed and its maxvol refinement
    start a descent on the float stability constant; the smallest constant among all of
    these wins, ties to the smaller id tuple. With at most EXHAUSTIVE_SELECTION_LIMIT
    possible selections every one of them is compared instead.
    """
    verdict = is_determining(lam, tol)
    if not verdict.determining:
        return verdict
    D = evaluation_matrix(lam, weighted=True).T.copy()
    F = D.astype(float)
    if math.comb(len(lam), lam.dimension) <= EXHAUSTIVE_SELECTION_LIMIT:
        candidates = [
            (_stability_bound(F, selection), selection)
            for selection in itertools.combinations(range(len(lam)), lam.dimension)
        ]
    else:
        candidates = _local_search_candidates(lam, D, F, tol)
    for _, selection in sorted(candidates):
        try:
            return _determining(lam, selection, swaps=0)
        except SingularMatrixError:
            # float inversion accepted a selection that is singular in exact arithmetic
            logger.debug(f"Skipping exactly singular selection {selection}")
    return verdict


def annihilator_order_shift(phi: AnnihilatorForm, k_target: int) -> AnnihilatorForm:
    """Multiply every monomial by xi_1^(k_target - k); vanishing sets are preserved."""
    if k_target < phi.k:
        raise DomainError(f"cannot shift a form of order {phi.k} down to {k_target}")
    shift = k_target - phi.k
    coeffs = {(alpha.shifted(0, shift), j): c for (alpha, j), c in phi.coeffs.items()}
    return AnnihilatorForm(phi.n, phi.m, k_target, coeffs, phi.mode)
