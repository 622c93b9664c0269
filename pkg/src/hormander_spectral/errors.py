from __future__ import annotations

from typing import Any


__all__ = [
    "ConditionViolation",
    "DomainError",
    "EvaluationError",
    "GridMismatch",
    "HormanderError",
    "PreconditionViolation",
    "ShapeMismatch",
    "SingularSymbol",
    "UnsolvableRightHandSide",
]


class HormanderError(Exception):
    """
    Base class for every error raised by this package.

    The command-line front end catches this class to turn failures
    into a non-zero exit code which names the failing invariant.
    """


class DomainError(HormanderError):
    """
    Raised when a function parameter is evaluated below 1.

    Parameters are only defined on the half-line `[1, ∞)`.
    Frequencies enter through `⟨ξ⟩ ≥ 1`, so hitting this
    indicates a caller passing raw lattice values instead of `⟨ξ⟩`.
    """

    def __init__(self, t: float) -> None:
        super().__init__(f"parameter evaluated at t={t!r} < 1")
        self.t = t


class EvaluationError(HormanderError):
    """
    Raised when a custom parameter returns a non-positive or non-finite value.
    """

    def __init__(self, t: float, value: float) -> None:
        super().__init__(f"parameter returned {value!r} at t={t!r}")
        self.t = t
        self.value = value


class PreconditionViolation(HormanderError):
    """
    Raised when the stated precondition of an operation does not hold.

    The keyword details are kept on the exception so that reports
    can name the quantities which were compared.
    """

    def __init__(self, message: str, **details: Any) -> None:
        super().__init__(message)
        self.details = details


class GridMismatch(HormanderError):
    """
    Raised when two fields which must share a lattice do not.

    Use `hspace.pad` to lift the coarser field onto the finer grid first.
    """

    def __init__(self, left: object, right: object) -> None:
        super().__init__(f"grid mismatch: {left!r} != {right!r}")
        self.left = left
        self.right = right


class ShapeMismatch(HormanderError):
    """
    Raised when an array does not have the shape its grid or system requires.
    """

    def __init__(self, expected: tuple[int, ...], actual: tuple[int, ...]) -> None:
        super().__init__(f"expected shape {expected}, got {actual}")
        self.expected = expected
        self.actual = actual


class SingularSymbol(HormanderError):
    """
    Raised when a parametrix is requested above a radius where the symbol is singular.

    `mode` is the offending lattice frequency. Increase the cutoff radius
    beyond `⟨mode⟩`, or let `build_parametrix` choose it.
    """

    def __init__(self, mode: tuple[int, ...], det: complex) -> None:
        super().__init__(f"det A(ξ) = {det!r} vanishes at lattice mode {mode}")
        self.mode = mode
        self.det = det


class UnsolvableRightHandSide(HormanderError):
    """
    Raised when a right-hand side is not orthogonal to the adjoint kernel.

    `defects` holds the pairings `(f, v)` for each adjoint kernel basis field `v`.
    Pass `project=True` to solve for the projection onto the range instead.
    """

    def __init__(self, defects: tuple[complex, ...]) -> None:
        super().__init__(f"right-hand side violates solvability: pairings {defects}")
        self.defects = defects


class ConditionViolation(HormanderError):
    """
    Raised when a block order exceeds the bound set by the DN numbers.

    Every block must satisfy `r[j][k] <= l[j] + m[k]`.
    """

    def __init__(self, j: int, k: int, order: int, bound: float) -> None:
        super().__init__(f"block ({j}, {k}) has order {order} > l_j + m_k = {bound}")
        self.j = j
        self.k = k
        self.order = order
        self.bound = bound
