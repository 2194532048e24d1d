from __future__ import annotations

from typing import Any, Sequence


class DomainError(ValueError):
    """An input violates a precondition of the operation."""


class SingularMatrixError(ArithmeticError):
    def __init__(self, rank: int, size: int, message: str | None = None):
        self.rank = rank
        self.size = size
        super().__init__(message or f"singular matrix: rank {rank} < {size}")


class CertificateMismatchError(DomainError):
    """A form was expected to vanish on every pair of a direction set but does not."""

    def __init__(self, pair_ids: Sequence[int], message: str | None = None):
        self.pair_ids = tuple(pair_ids)
        super().__init__(
            message or f"form does not vanish on pairs {list(self.pair_ids)}"
        )


class NotRank1DeterminingError(DomainError):
    """Raised when an operation needs a rank-1 determining set and got a witness instead."""

    def __init__(self, u: Sequence[Any], v: Sequence[Any]):
        self.u = tuple(u)
        self.v = tuple(v)
        super().__init__(
            "direction set is not determining for rank-1 bilinear forms; "
            f"witness u={[str(x) for x in self.u]}, v={[str(x) for x in self.v]}"
        )


class PolynomialSyntaxError(ValueError):
    def __init__(self, message: str, offset: int, source: str = ""):
        self.offset = offset
        self.source = source
        super().__init__(f"{message} at offset {offset}")
