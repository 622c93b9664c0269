"""
A small exact linear-programming solver over the rationals.

Two-phase tableau simplex with Bland's rule on `fractions.Fraction`,
so ties and degenerate pivots resolve the same way on every run.
Sizes here are a handful of variables, so no sparse structure is kept.
"""

from __future__ import annotations

import dataclasses
import enum
from fractions import Fraction
from typing import TYPE_CHECKING


if TYPE_CHECKING:
    from collections.abc import Sequence


__all__ = [
    "Constraint",
    "InfeasibleProblem",
    "Relation",
    "UnboundedProblem",
    "lexicographic_minimum",
    "minimize",
]


class Relation(enum.Enum):
    GE = ">="
    LE = "<="
    EQ = "=="


@dataclasses.dataclass(frozen=True)
class Constraint:
    coefficients: tuple[Fraction, ...]
    relation: Relation
    rhs: Fraction


class InfeasibleProblem(Exception):
    pass


class UnboundedProblem(Exception):
    pass


class _Tableau:
    """
    Rows of `[A | b]` in equality form with a tracked basis.
    """

    def __init__(self, rows: list[list[Fraction]], basis: list[int]) -> None:
        self.rows = rows
        self.basis = basis

    @property
    def width(self) -> int:
        return len(self.rows[0]) - 1

    def pivot(self, i: int, j: int) -> None:
        row = self.rows[i]
        factor = row[j]
        self.rows[i] = row = [value / factor for value in row]
        for k, other in enumerate(self.rows):
            if k != i and other[j] != 0:
                scale = other[j]
                self.rows[k] = [a - scale * b for a, b in zip(other, row, strict=True)]
        self.basis[i] = j

    def reduced_costs(self, cost: Sequence[Fraction]) -> list[Fraction]:
        reduced = list(cost) + [Fraction(0)]
        for i, row in enumerate(self.rows):
            weight = cost[self.basis[i]]
            if weight:
                reduced = [r - weight * a for r, a in zip(reduced, row, strict=True)]
        return reduced

    def run(self, cost: Sequence[Fraction], allowed: int) -> None:
        """
        Minimise `cost` over columns `< allowed` using Bland's rule.
        """
        while True:
            reduced = self.reduced_costs(cost)
            entering = next((j for j in range(allowed) if reduced[j] < 0), None)
            if entering is None:
                return
            candidates = [
                (row[-1] / row[entering], self.basis[i], i)
                for i, row in enumerate(self.rows)
                if row[entering] > 0
            ]
            if not candidates:
                raise UnboundedProblem
            _, _, leaving = min(candidates)
            self.pivot(leaving, entering)

    def solution(self, count: int) -> list[Fraction]:
        values = [Fraction(0)] * count
        for i, column in enumerate(self.basis):
            if column < count:
                values[column] = self.rows[i][-1]
        return values


def minimize(
    cost: Sequence[Fraction], constraints: Sequence[Constraint]
) -> tuple[Fraction, list[Fraction]]:
    """
    Minimise `cost · y` subject to the constraints and `y ≥ 0`.

    Returns the optimal value and an optimal vertex.

    Raises:
        InfeasibleProblem: if no `y ≥ 0` satisfies the constraints.
        UnboundedProblem: if the objective is unbounded below.
    """
    count = len(cost)
    slack_columns = [c for c in constraints if c.relation is not Relation.EQ]
    slack_count = len(slack_columns)
    artificial_start = count + slack_count
    width = artificial_start + len(constraints)

    rows: list[list[Fraction]] = []
    slack = 0
    for index, constraint in enumerate(constraints):
        row = [Fraction(0)] * (width + 1)
        row[:count] = constraint.coefficients
        if constraint.relation is Relation.GE:
            row[count + slack] = Fraction(-1)
            slack += 1
        elif constraint.relation is Relation.LE:
            row[count + slack] = Fraction(1)
            slack += 1
        row[-1] = constraint.rhs
        if row[-1] < 0:
            row = [-value for value in row]
        row[artificial_start + index] = Fraction(1)
        rows.append(row)

    tableau = _Tableau(rows, [artificial_start + i for i in range(len(constraints))])
    phase_one = [Fraction(0)] * artificial_start + [Fraction(1)] * len(constraints)
    tableau.run(phase_one, width)
    if any(
        tableau.rows[i][-1] != 0
        for i, column in enumerate(tableau.basis)
        if column >= artificial_start
    ):
        raise InfeasibleProblem

    # Drive remaining zero-level artificials out of the basis, or drop redundant rows.
    for i in reversed(range(len(tableau.rows))):
        if tableau.basis[i] < artificial_start:
            continue
        column = next(
            (j for j in range(artificial_start) if tableau.rows[i][j] != 0), None
        )
        if column is None:
            del tableau.rows[i]
            del tableau.basis[i]
        else:
            tableau.pivot(i, column)

    phase_two = list(cost) + [Fraction(0)] * (width - count)
    tableau.run(phase_two, artificial_start)
    values = tableau.solution(count)
    return sum((c * v for c, v in zip(cost, values, strict=True)), Fraction(0)), values


def lexicographic_minimum(
    objectives: Sequence[Sequence[Fraction]], constraints: Sequence[Constraint]
) -> list[Fraction]:
    """
    Minimise each objective in turn, then return the lexicographically smallest `y ≥ 0`.

    Each optimal value is fixed as an equality before the next objective,
    then each variable in turn is minimised and pinned.
    """
    count = len(objectives[0])
    pinned = list(constraints)
    for cost in objectives:
        optimum, values = minimize(cost, pinned)
        pinned.append(Constraint(tuple(cost), Relation.EQ, optimum))
    for index in range(count):
        unit = tuple(Fraction(int(j == index)) for j in range(count))
        best, values = minimize(unit, pinned)
        pinned.append(Constraint(unit, Relation.EQ, best))
    return values
