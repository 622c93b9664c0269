"""
Douglis–Nirenberg systems of linear differential operators on the torus.

A system is a `p × p` matrix of operators `A_jk = Σ_{|μ|≤r_jk} a_μ(x) D^μ`
with `D = −i∂`. Coefficients are constants or trigonometric polynomials,
which keeps every derivative of every coefficient bounded.
"""

from __future__ import annotations

import dataclasses
import itertools
import logging
import math
from fractions import Fraction
from typing import TYPE_CHECKING, Self

import numpy as np

from . import _lp, _utils, settings
from .errors import (
    ConditionViolation,
    GridMismatch,
    PreconditionViolation,
    ShapeMismatch,
)
from .hspace import Grid, SpectralField, VectorField, pad, restrict
from .report import TORUS_NOTE, Report, Verdict


if TYPE_CHECKING:
    from collections.abc import Callable, Iterator, Mapping, Sequence

    import numpy.typing as npt

    type ComplexArray = npt.NDArray[np.complex128]
    type FloatArray = npt.NDArray[np.float64]
    type MultiIndex = tuple[int, ...]


__all__ = [
    "Coefficient",
    "DNNumbers",
    "DNSystem",
    "DiffOp",
    "apply_system",
    "condition_a_holds",
    "condition_b_margin",
    "ellipticity_margin",
    "formal_adjoint",
    "full_symbol",
    "principal_symbol",
    "shift_dn",
    "solve_dn_numbers",
]

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class Coefficient:
    """
    A trigonometric polynomial `a(x) = Σ_η c_η e^(iη·x)`.

    Modes are kept sorted with zero entries dropped,
    so equal polynomials compare equal.
    """

    n: int
    modes: tuple[tuple[MultiIndex, complex], ...] = ()

    def __post_init__(self) -> None:
        merged: dict[MultiIndex, complex] = {}
        for mode, value in self.modes:
            if len(mode) != self.n:
                raise ShapeMismatch((self.n,), (len(mode),))
            if not math.isfinite(abs(complex(value))):
                msg = "coefficients must be finite"
                raise PreconditionViolation(msg, mode=mode)
            key = tuple(int(v) for v in mode)
            merged[key] = merged.get(key, 0) + complex(value)
        normal = tuple(sorted((k, v) for k, v in merged.items() if v != 0))
        object.__setattr__(self, "modes", normal)

    @classmethod
    def constant(cls, value: complex, n: int) -> Self:
        return cls(n, (((0,) * n, value),))

    @classmethod
    def fourier(cls, modes: Mapping[MultiIndex, complex], n: int) -> Self:
        return cls(n, tuple(modes.items()))

    @property
    def is_zero(self) -> bool:
        return not self.modes

    @property
    def is_constant(self) -> bool:
        return all(not any(mode) for mode, _ in self.modes)

    @property
    def constant_value(self) -> complex:
        return sum((v for mode, v in self.modes if not any(mode)), 0j)

    @property
    def max_frequency(self) -> int:
        return max((max(abs(v) for v in mode) for mode, _ in self.modes), default=0)

    def __call__(self, x: npt.ArrayLike) -> ComplexArray:
        """
        Evaluate at points of shape `(..., n)`.
        """
        points = np.asarray(x, dtype=np.float64)
        result = np.zeros(points.shape[:-1], dtype=np.complex128)
        for mode, value in self.modes:
            result = result + value * np.exp(1j * (points @ np.asarray(mode, dtype=np.float64)))
        return result

    def conj(self) -> Coefficient:
        return Coefficient(
            self.n, tuple((tuple(-v for v in mode), value.conjugate()) for mode, value in self.modes)
        )

    def derivative(self, nu: MultiIndex) -> Coefficient:
        """
        `D^ν a`, which multiplies mode `η` by `η^ν`.
        """
        return Coefficient(
            self.n,
            tuple(
                (mode, value * math.prod(m**k for m, k in zip(mode, nu, strict=True)))
                for mode, value in self.modes
            ),
        )

    def __add__(self, other: Coefficient) -> Coefficient:
        return Coefficient(self.n, self.modes + other.modes)

    def __mul__(self, scalar: complex) -> Coefficient:
        return Coefficient(self.n, tuple((mode, value * scalar) for mode, value in self.modes))

    __rmul__ = __mul__


@dataclasses.dataclass(frozen=True)
class DiffOp:
    """
    `Σ_μ a_μ(x) D^μ`, stored as sorted `(μ, a_μ)` pairs with zero terms dropped.
    """

    n: int
    terms: tuple[tuple[MultiIndex, Coefficient], ...] = ()

    def __post_init__(self) -> None:
        merged: dict[MultiIndex, Coefficient] = {}
        for mu, coefficient in self.terms:
            if len(mu) != self.n or coefficient.n != self.n:
                raise ShapeMismatch((self.n,), (len(mu),))
            if any(v < 0 for v in mu):
                msg = "multi-indices must be non-negative"
                raise PreconditionViolation(msg, mu=mu)
            key = tuple(int(v) for v in mu)
            merged[key] = merged[key] + coefficient if key in merged else coefficient
        normal = tuple(sorted((mu, c) for mu, c in merged.items() if not c.is_zero))
        object.__setattr__(self, "terms", normal)

    @classmethod
    def from_terms(cls, terms: Mapping[MultiIndex, Coefficient | complex], n: int) -> Self:
        return cls(
            n,
            tuple(
                (mu, c if isinstance(c, Coefficient) else Coefficient.constant(c, n))
                for mu, c in terms.items()
            ),
        )

    @property
    def order(self) -> int | None:
        """
        The largest `|μ|` with a nonzero term, or `None` for the zero operator.
        """
        return max((sum(mu) for mu, _ in self.terms), default=None)

    @property
    def is_constant(self) -> bool:
        return all(c.is_constant for _, c in self.terms)

    @property
    def max_frequency(self) -> int:
        return max((c.max_frequency for _, c in self.terms), default=0)

    def symbol(
        self, x: FloatArray, xi: FloatArray, order: int | None = None
    ) -> ComplexArray:
        """
        `Σ a_μ(x) ξ^μ` over a batch, restricted to `|μ| = order` when given.
        """
        result = np.zeros(np.broadcast_shapes(x.shape[:-1], xi.shape[:-1]), dtype=np.complex128)
        for mu, coefficient in self.terms:
            if order is not None and sum(mu) != order:
                continue
            result = result + coefficient(x) * _utils.monomial(xi, mu)
        return result

    def adjoint(self) -> DiffOp:
        """
        The formal adjoint `v ↦ Σ_μ D^μ(conj(a_μ) v)` in standard form.

        By the Leibniz rule its coefficients are
        `b_ν = Σ_{μ≥ν} C(μ,ν) D^(μ−ν) conj(a_μ)`.
        """
        terms: list[tuple[MultiIndex, Coefficient]] = []
        for mu, coefficient in self.terms:
            conjugate = coefficient.conj()
            for nu in _utils.below(mu):
                rest = tuple(m - v for m, v in zip(mu, nu, strict=True))
                terms.append((nu, conjugate.derivative(rest) * _utils.binomial(mu, nu)))
        return DiffOp(self.n, tuple(terms))


@dataclasses.dataclass(frozen=True)
class DNNumbers:
    l: tuple[float, ...]  # noqa: E741
    m: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.l) != len(self.m):
            raise ShapeMismatch((len(self.l),), (len(self.m),))

    @property
    def q(self) -> float:
        return sum(self.l) + sum(self.m)

    def shifted(self, c: float) -> DNNumbers:
        return DNNumbers(tuple(v + c for v in self.l), tuple(v - c for v in self.m))


@dataclasses.dataclass(frozen=True)
class DNSystem:
    """
    A `p × p` system `A = (A_jk)` with optional Douglis–Nirenberg numbers.

    Raises:
        ConditionViolation: if DN numbers are given and some `r_jk > l_j + m_k`.
    """

    p: int
    n: int
    ops: tuple[tuple[DiffOp, ...], ...]
    dn: DNNumbers | None = None

    def __post_init__(self) -> None:
        ops = tuple(tuple(row) for row in self.ops)
        if len(ops) != self.p or any(len(row) != self.p for row in ops):
            raise ShapeMismatch((self.p, self.p), (len(ops), len(ops[0]) if ops else 0))
        for row in ops:
            for op in row:
                if op.n != self.n:
                    raise ShapeMismatch((self.n,), (op.n,))
        object.__setattr__(self, "ops", ops)
        if self.dn is not None:
            if len(self.dn.l) != self.p:
                raise ShapeMismatch((self.p,), (len(self.dn.l),))
            for j, k in self.blocks():
                order = ops[j][k].order
                bound = self.dn.l[j] + self.dn.m[k]
                if order is not None and order > bound:
                    raise ConditionViolation(j, k, order, bound)

    def blocks(self) -> Iterator[tuple[int, int]]:
        return itertools.product(range(self.p), repeat=2)

    @property
    def order_matrix(self) -> list[list[int | None]]:
        return [[op.order for op in row] for row in self.ops]

    @property
    def is_constant(self) -> bool:
        return all(op.is_constant for row in self.ops for op in row)

    @property
    def max_frequency(self) -> int:
        return max(op.max_frequency for row in self.ops for op in row)

    @property
    def q(self) -> float:
        return self.require_dn().q

    def require_dn(self) -> DNNumbers:
        if self.dn is None:
            msg = "DN numbers are required; use solve_dn_numbers or with_dn"
            raise PreconditionViolation(msg)
        return self.dn

    def with_dn(self, dn: DNNumbers | None = None) -> DNSystem:
        """
        The same operators with the given, or computed, DN numbers.
        """
        if dn is None:
            dn = solve_dn_numbers(self.order_matrix)
        return dataclasses.replace(self, dn=dn)

    def block_orders(self) -> list[list[float]]:
        """
        The bounds `l_j + m_k`.
        """
        dn = self.require_dn()
        return [[dn.l[j] + dn.m[k] for k in range(self.p)] for j in range(self.p)]


def _components(order_matrix: Sequence[Sequence[int | None]]) -> list[tuple[set[int], set[int]]]:
    """
    Connected components of the bipartite graph joining row `j` to column `k` when `r_jk` is finite.
    """
    p = len(order_matrix)
    seen_rows: set[int] = set()
    seen_cols: set[int] = set()
    components = []
    for start in range(p):
        if start in seen_rows:
            continue
        rows, cols = {start}, set()
        frontier = [("row", start)]
        while frontier:
            side, index = frontier.pop()
            for other in range(p):
                if side == "row":
                    linked = order_matrix[index][other] is not None
                    if linked and other not in cols:
                        cols.add(other)
                        frontier.append(("col", other))
                else:
                    linked = order_matrix[other][index] is not None
                    if linked and other not in rows:
                        rows.add(other)
                        frontier.append(("row", other))
        seen_rows |= rows
        seen_cols |= cols
        components.append((rows, cols))
    components.extend((set(), {k}) for k in range(p) if k not in seen_cols)
    return components


def _normal_entry(value: float | None) -> int | None:
    if value is None or value == -math.inf:
        return None
    if not float(value).is_integer() or value < 0:
        msg = "orders must be non-negative integers, or -inf/None for zero blocks"
        raise PreconditionViolation(msg, value=value)
    return int(value)


def _as_number(value: Fraction) -> float:
    return int(value) if value.denominator == 1 else float(value)


def solve_dn_numbers(order_matrix: Sequence[Sequence[float | None]]) -> DNNumbers:
    """
    DN numbers minimising `Σ l_j + Σ m_k` subject to `l_j + m_k ≥ r_jk`.

    Zero blocks (`None` or `-inf`) impose no constraint. `l = 0` is fixed on
    the first row of each connected block of the system, which is `l₁ = 0`
    for a connected system, and a column with no nonzero block gets `m = 0`.
    Ties are broken first towards the smallest `Σ|l_j| + Σ|m_k|`, then
    towards the lexicographically smallest `(l, m)`.
    The program is solved in exact rational arithmetic.
    """
    p = len(order_matrix)
    if any(len(row) != p for row in order_matrix):
        raise ShapeMismatch((p, p), (p, -1))
    orders = [[_normal_entry(v) for v in row] for row in order_matrix]
    box = Fraction(1 + sum(v for row in orders for v in row if v is not None))

    count = 2 * p

    def unit(*indices: int, negate: int | None = None) -> tuple[Fraction, ...]:
        row = [Fraction(0)] * (2 * count)
        for i in indices:
            row[i] += 1
        if negate is not None:
            row[negate] -= 1
        return tuple(row)

    # Variables are y = (l, m) + box, so that y ≥ 0 inside the box,
    # followed by slack bounds a ≥ |y − box| for the tie-break.
    constraints = [_lp.Constraint(unit(i), _lp.Relation.LE, 2 * box) for i in range(count)]
    for i in range(count):
        constraints.append(_lp.Constraint(unit(count + i, i), _lp.Relation.GE, box))
        constraints.append(_lp.Constraint(unit(count + i, negate=i), _lp.Relation.GE, -box))
    for j, k in itertools.product(range(p), repeat=2):
        order = orders[j][k]
        if order is not None:
            constraints.append(
                _lp.Constraint(unit(j, p + k), _lp.Relation.GE, order + 2 * box)
            )
    for rows, cols in _components(orders):
        pinned = min(rows) if rows else p + min(cols)
        constraints.append(_lp.Constraint(unit(pinned), _lp.Relation.EQ, box))

    total = [Fraction(1)] * count + [Fraction(0)] * count
    spread = [Fraction(0)] * count + [Fraction(1)] * count
    values = _lp.lexicographic_minimum([total, spread], constraints)
    shifted = [_as_number(v - box) for v in values[:count]]
    dn = DNNumbers(tuple(shifted[:p]), tuple(shifted[p:]))
    logger.debug("DN numbers for %s: %s", order_matrix, dn)
    return dn


def _points(x: npt.ArrayLike | None, xi: npt.ArrayLike, n: int) -> tuple[FloatArray, FloatArray, bool]:
    frequencies = np.asarray(xi, dtype=np.float64)
    single = frequencies.ndim == 1
    frequencies = np.atleast_2d(frequencies)
    positions = np.zeros(n) if x is None else np.asarray(x, dtype=np.float64)
    single = single and positions.ndim == 1
    positions = np.atleast_2d(positions)
    if frequencies.shape[-1] != n or positions.shape[-1] != n:
        raise ShapeMismatch((n,), (frequencies.shape[-1],))
    return positions, frequencies, single


def principal_symbol(
    sys: DNSystem, x: npt.ArrayLike | None, xi: npt.ArrayLike
) -> ComplexArray:
    """
    `A^(0)_jk(x, ξ) = Σ_{|μ| = l_j+m_k} a_μ(x) ξ^μ`.

    Points are single vectors or batches of shape `(M, n)`; batches give
    an `(M, p, p)` result. Blocks of order below `l_j + m_k` are zero.

    Raises:
        PreconditionViolation: without DN numbers, or when `l_j + m_k`
            is not an integer for a nonzero block.
    """
    bounds = sys.block_orders()
    for j, k in sys.blocks():
        bound = bounds[j][k]
        if sys.ops[j][k].order is not None and not float(bound).is_integer():
            msg = "l_j + m_k must be an integer for every nonzero block"
            raise PreconditionViolation(msg, j=j, k=k, bound=bound)
    positions, frequencies, single = _points(x, xi, sys.n)
    return _symbol(sys, positions, frequencies, single, bounds)


def full_symbol(sys: DNSystem, x: npt.ArrayLike | None, xi: npt.ArrayLike) -> ComplexArray:
    """
    `A_jk(x, ξ) = Σ_{|μ|≤r_jk} a_μ(x) ξ^μ`; `x` may be omitted for constant coefficients.
    """
    positions, frequencies, single = _points(x, xi, sys.n)
    return _symbol(sys, positions, frequencies, single, None)


def _symbol(
    sys: DNSystem,
    positions: FloatArray,
    frequencies: FloatArray,
    single: bool,  # noqa: FBT001
    bounds: list[list[float]] | None,
) -> ComplexArray:
    batch = np.broadcast_shapes(positions.shape[:-1], frequencies.shape[:-1])
    result = np.zeros((*batch, sys.p, sys.p), dtype=np.complex128)
    for j, k in sys.blocks():
        order = None
        if bounds is not None:
            if not float(bounds[j][k]).is_integer():
                # Zero block with a fractional bound.
                continue
            order = int(bounds[j][k])
        result[..., j, k] = sys.ops[j][k].symbol(positions, frequencies, order)
    return result[0] if single else result


def _default_x_samples(sys: DNSystem) -> FloatArray:
    if sys.is_constant:
        return np.zeros((1, sys.n))
    size = max(16, 4 * sys.max_frequency + 2)
    size += size % 2
    return Grid(sys.n, size).points.reshape(-1, sys.n)


def _min_over_x(
    func: Callable[[FloatArray], FloatArray], x_samples: FloatArray
) -> tuple[float, int, int]:
    """
    Deterministic minimum of per-`x` margin scans, with the location of the minimum.
    """
    results = _utils.map_ordered(func, list(x_samples))
    best = math.inf
    location = (0, 0)
    for i, values in enumerate(results):
        if values.size and float(values.min()) < best:
            best = float(values.min())
            location = (i, int(values.argmin()))
    return best, *location


def ellipticity_margin(
    sys: DNSystem,
    x_samples: npt.ArrayLike | None = None,
    sphere_grid: npt.ArrayLike | None = None,
    tolerance: float | None = None,
) -> Report:
    """
    `c_hat = min |det A^(0)(x, ξ)|` over sampled `x` and unit `ξ`.

    Passes iff `c_hat` exceeds the margin tolerance. The sampled minimum
    bounds the true margin from above: sampling can refute uniform ellipticity
    but never certify it.
    """
    positions = _default_x_samples(sys) if x_samples is None else np.atleast_2d(np.asarray(x_samples, dtype=np.float64))
    directions = _utils.sphere_grid(sys.n) if sphere_grid is None else np.asarray(sphere_grid, dtype=np.float64)
    tolerance = settings.margin_tolerance() if tolerance is None else tolerance
    sys.require_dn()

    def scan(x: FloatArray) -> FloatArray:
        return np.abs(np.linalg.det(principal_symbol(sys, x[np.newaxis, :], directions)))

    c_hat, i, j = _min_over_x(scan, positions)
    return Report(
        name="ellipticity_margin",
        invariant="|det A^(0)(x, ξ)| ≥ c > 0 for |ξ| = 1",
        verdict=Verdict.PASS if c_hat > tolerance else Verdict.FAIL,
        values={"c_hat": c_hat, "x_min": positions[i], "xi_min": directions[j]},
        tolerances={"margin": tolerance},
        config={"x_samples": len(positions), "sphere_points": len(directions)},
        notes=["the sampled minimum bounds the true margin from above", TORUS_NOTE],
    )


def condition_b_margin(
    sys: DNSystem,
    c2: float = 0.0,
    x_samples: npt.ArrayLike | None = None,
    xi_samples: npt.ArrayLike | None = None,
    tolerance: float | None = None,
) -> Report:
    """
    `c1_hat = min |det A(x, ξ)| / ⟨ξ⟩^q` over samples with `|x| + |ξ| ≥ c2`.

    By default `ξ` runs over the lattice cube with 32 modes per axis.
    """
    dn = sys.require_dn()
    positions = _default_x_samples(sys) if x_samples is None else np.atleast_2d(np.asarray(x_samples, dtype=np.float64))
    if xi_samples is None:
        frequencies = Grid(sys.n, 32).xi.reshape(-1, sys.n)
    else:
        frequencies = np.atleast_2d(np.asarray(xi_samples, dtype=np.float64))
    tolerance = settings.margin_tolerance() if tolerance is None else tolerance
    q = dn.q
    brackets = np.sqrt(1 + np.sum(frequencies**2, axis=-1))
    lengths = np.linalg.norm(frequencies, axis=-1)

    def scan(x: FloatArray) -> FloatArray:
        keep = np.linalg.norm(x) + lengths >= c2
        det = np.linalg.det(full_symbol(sys, x[np.newaxis, :], frequencies[keep]))
        ratios = np.abs(det) / brackets[keep] ** q
        # Filtered-out samples never win the minimum.
        padded = np.full(len(frequencies), math.inf)
        padded[keep] = ratios
        return padded

    c1_hat, i, j = _min_over_x(scan, positions)
    if not math.isfinite(c1_hat):
        msg = "no samples satisfy |x| + |ξ| ≥ c2"
        raise PreconditionViolation(msg, c2=c2)
    return Report(
        name="condition_b_margin",
        invariant="|det A(x, ξ)| ≥ c1 ⟨ξ⟩^q for |x| + |ξ| ≥ c2",
        verdict=Verdict.PASS if c1_hat > tolerance else Verdict.FAIL,
        values={"c1_hat": c1_hat, "q": q, "x_min": positions[i], "xi_min": frequencies[j]},
        tolerances={"margin": tolerance},
        config={"c2": c2, "x_samples": len(positions), "xi_samples": len(frequencies)},
        notes=["the sampled minimum bounds the true constant from above", TORUS_NOTE],
    )


def condition_a_holds(sys: DNSystem) -> Report:
    """
    Whether every coefficient has derivatives decaying at infinity.

    On the torus a non-constant periodic coefficient never has decaying
    derivatives, so this holds exactly when all coefficients are constant.
    """
    return Report(
        name="condition_a",
        invariant="D^α a_μ(x) → 0 as |x| → ∞ for |α| ≥ 1",
        verdict=Verdict.PASS if sys.is_constant else Verdict.FAIL,
        values={"constant_coefficients": sys.is_constant},
        notes=[TORUS_NOTE],
    )


def formal_adjoint(sys: DNSystem) -> DNSystem:
    """
    `A⁺` with `(A⁺)_jk = (A_kj)⁺` and DN numbers `l⁺ = m`, `m⁺ = l`.

    It satisfies `(Au, v) = (u, A⁺v)` for every pair of lattice fields.
    """
    ops = tuple(
        tuple(sys.ops[k][j].adjoint() for k in range(sys.p)) for j in range(sys.p)
    )
    dn = None if sys.dn is None else DNNumbers(sys.dn.m, sys.dn.l)
    return DNSystem(sys.p, sys.n, ops, dn)


def shift_dn(sys: DNSystem, c: float) -> DNSystem:
    """
    Reindex the DN numbers to `(l + c, m − c)`.
    """
    return dataclasses.replace(sys, dn=sys.require_dn().shifted(c))


def _multiply_trig(field: SpectralField, coefficient: Coefficient) -> SpectralField:
    """
    The Galerkin product `a·w` on the field's own lattice, computed by exact mode shifts.
    """
    if coefficient.is_constant:
        return field * coefficient.constant_value
    grid = field.grid
    width = coefficient.max_frequency
    wide = pad(field, Grid(grid.n, grid.N + 2 * width))
    total = np.zeros(wide.grid.shape, dtype=np.complex128)
    for mode, value in coefficient.modes:
        total += value * np.roll(wide.coeffs, mode, axis=tuple(range(grid.n)))
    return restrict(SpectralField(wide.grid, total), grid)


def apply_system(sys: DNSystem, u: VectorField) -> VectorField:
    """
    `(Au)_j = Σ_k Σ_μ a_μ^jk D^μ u_k`, with products taken exactly and
    projected back onto the lattice of `u`.
    """
    if u.p != sys.p:
        raise ShapeMismatch((sys.p,), (u.p,))
    grid = u.grid
    if grid.n != sys.n:
        raise GridMismatch(grid, sys.n)
    xi = grid.xi
    out = []
    for j in range(sys.p):
        total = SpectralField.zeros(grid)
        for k in range(sys.p):
            for mu, coefficient in sys.ops[j][k].terms:
                derivative = SpectralField(grid, u[k].coeffs * _utils.monomial(xi, mu))
                total = total + _multiply_trig(derivative, coefficient)
        out.append(total)
    return VectorField(tuple(out))
