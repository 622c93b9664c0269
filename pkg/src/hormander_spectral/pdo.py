"""
Matrix Fourier multipliers and left-quantized operators on lattice fields.

Note [Lattice parametrix]
~~~~~~~~~~~~~~~~~~~~~~~~~
For a constant-coefficient system the symbol `A(ξ)` is invertible off a
finite set of lattice modes. Cutting off inside the radius `R` gives

    B(ξ) = A(ξ)⁻¹ for ⟨ξ⟩ ≥ R,  0 otherwise,
    T₁(ξ) = T₂(ξ) = −𝟙{⟨ξ⟩ < R}·I,

so `BA = I + T₁` and `AB = I + T₂` hold exactly, mode by mode, with
`T₁` supported on finitely many modes.
"""

from __future__ import annotations

import dataclasses
import functools
import logging
import math
from typing import TYPE_CHECKING, NamedTuple

import numpy as np

from . import _utils, settings, testing
from .dnsystem import (
    Coefficient,
    DiffOp,
    DNSystem,
    apply_system,
    full_symbol,
    solve_dn_numbers,
)
from .errors import GridMismatch, PreconditionViolation, ShapeMismatch, SingularSymbol
from .hspace import (
    Grid,
    VectorField,
    restrict,
    save_fields,
    transform,
    vector_hnorm,
    weight,
)
from .report import TORUS_NOTE, Report, Verdict
from .roparam import Power, ROParam


if TYPE_CHECKING:
    from collections.abc import Callable, Sequence
    from pathlib import Path

    import numpy.typing as npt

    type ComplexArray = npt.NDArray[np.complex128]
    type FloatArray = npt.NDArray[np.float64]
    type Symbol = Callable[[FloatArray | None, FloatArray], ComplexArray]


__all__ = [
    "FourierOp",
    "OperatorNorm",
    "ParametrixBundle",
    "apply",
    "build_parametrix",
    "freeze",
    "frozen_parametrix",
    "identity_op",
    "multiplier",
    "op_norm_estimate",
    "save_bundle",
    "symbol_seminorms",
    "system_as_op",
    "verify_parametrix",
]

logger = logging.getLogger(__name__)

# Physical points per chunk when evaluating x-dependent symbols.
QUANTIZATION_CHUNK = 64


@dataclasses.dataclass(frozen=True, eq=False)
class FourierOp:
    """
    An operator `(Gu)(x) = Σ_ξ g(x, ξ) û(ξ) e^(ix·ξ)` with a `p × p` matrix symbol.

    `symbol(x, ξ)` takes batches of shape `(..., n)` which broadcast against
    each other (`x` is `None` for x-independent symbols) and returns `(..., p, p)`.
    `block_orders`, when set, refines `declared_order` per block.
    """

    p: int
    n: int
    symbol: Symbol
    declared_order: float
    x_independent: bool = True
    block_orders: tuple[tuple[float, ...], ...] | None = None
    system: DNSystem | None = None
    label: str = ""

    def order_of(self, j: int, k: int) -> float:
        if self.block_orders is None:
            return self.declared_order
        return self.block_orders[j][k]

    def matrix(self, grid: Grid) -> ComplexArray:
        """
        The symbol at every lattice mode, shape `(N, ..., N, p, p)`.

        Raises:
            PreconditionViolation: for x-dependent symbols.
        """
        if not self.x_independent:
            msg = "per-mode matrices exist only for x-independent symbols"
            raise PreconditionViolation(msg, label=self.label)
        return _lattice_matrix(self, grid)


@functools.lru_cache(maxsize=64)
def _lattice_matrix(op: FourierOp, grid: Grid) -> ComplexArray:
    xi = grid.xi.reshape(-1, grid.n)
    values = np.asarray(op.symbol(None, xi)).reshape(*grid.shape, op.p, op.p)
    values.flags.writeable = False
    return values


def multiplier(
    p: int, n: int, func: Callable[[FloatArray], ComplexArray], order: float, label: str = ""
) -> FourierOp:
    """
    An x-independent operator from `func(ξ) -> (..., p, p)`.
    """

    def symbol(_x: FloatArray | None, xi: FloatArray) -> ComplexArray:
        return func(xi)

    return FourierOp(p, n, symbol, order, label=label)


def identity_op(p: int, n: int) -> FourierOp:
    def symbol(_x: FloatArray | None, xi: FloatArray) -> ComplexArray:
        return np.broadcast_to(np.eye(p, dtype=np.complex128), (*xi.shape[:-1], p, p)).copy()

    return FourierOp(p, n, symbol, 0.0, label="I")


def system_as_op(sys: DNSystem) -> FourierOp:
    """
    `A` as a matrix operator with symbol `A(x, ξ)` and block orders `l_j + m_k`.
    """
    orders = [[op.order for op in row] for row in sys.ops]
    if sys.dn is not None:
        block_orders = tuple(tuple(row) for row in sys.block_orders())
    else:
        block_orders = tuple(
            tuple(-math.inf if order is None else float(order) for order in row) for row in orders
        )
    declared = max(max(row) for row in block_orders)
    return FourierOp(
        sys.p,
        sys.n,
        functools.partial(full_symbol, sys),
        declared,
        x_independent=sys.is_constant,
        block_orders=block_orders,
        system=sys,
        label="A",
    )


def apply(op: FourierOp, u: VectorField) -> VectorField:
    """
    Apply `op` to a vector field.

    x-independent symbols act per mode. Differential systems apply exactly.
    Other x-dependent symbols are left-quantized on the grid with twice the
    modes per axis, then projected back onto the lattice of `u`.
    """
    if u.p != op.p:
        raise ShapeMismatch((op.p,), (u.p,))
    grid = u.grid
    if grid.n != op.n:
        raise GridMismatch(grid, op.n)
    if op.system is not None and not op.x_independent:
        return apply_system(op.system, u)
    if op.x_independent:
        result = np.einsum("...jk,k...->j...", op.matrix(grid), u.stack())
        return VectorField.from_array(grid, result)
    return _left_quantize(op, u)


def _left_quantize(op: FourierOp, u: VectorField) -> VectorField:
    grid = u.grid
    fine = grid.refined(2)
    xi = grid.xi.reshape(-1, grid.n)
    coeffs = u.stack().reshape(op.p, -1)
    points = fine.points.reshape(-1, grid.n)

    def chunk(start: int) -> ComplexArray:
        x = points[start : start + QUANTIZATION_CHUNK]
        g = op.symbol(x[:, np.newaxis, :], xi[np.newaxis, :, :])
        phases = np.exp(1j * x @ xi.T)
        return np.einsum("cmjk,km,cm->jc", g, coeffs, phases)

    starts = range(0, len(points), QUANTIZATION_CHUNK)
    samples = np.concatenate(_utils.map_ordered(chunk, starts), axis=1)
    samples = samples.reshape(op.p, *fine.shape)
    return VectorField(
        tuple(restrict(transform(component, fine), grid) for component in samples)
    )


def _as_params(params: ROParam | Sequence[ROParam], p: int) -> list[ROParam]:
    if isinstance(params, ROParam):
        return [params] * p
    if len(params) != p:
        raise ShapeMismatch((p,), (len(params),))
    return list(params)


def _weights(params: ROParam | Sequence[ROParam], p: int, grid: Grid) -> FloatArray:
    """
    Per-component weights of shape `(p, N, ..., N)`.
    """
    return np.stack([weight(param, grid) for param in _as_params(params, p)])


class OperatorNorm(NamedTuple):
    """
    `empirical` is a lower bound from random fields;
    `exact` is the lattice supremum, known for x-independent operators.
    """

    empirical: float
    exact: float | None


def op_norm_estimate(
    op: FourierOp,
    phi_src: ROParam | Sequence[ROParam],
    phi_dst: ROParam | Sequence[ROParam],
    grid: Grid,
    trials: int = 32,
    seed: int = 0,
) -> OperatorNorm:
    """
    The norm of `op` from `⊕ H^(φ_src)` to `⊕ H^(φ_dst)` on the lattice.

    Weights may be a single parameter for every component or one per component.
    The exact norm is `sup_ξ ‖D_dst(ξ) g(ξ) D_src(ξ)⁻¹‖₂` with diagonal weight matrices.
    """
    if trials < 1:
        msg = "at least one trial is needed"
        raise PreconditionViolation(msg, trials=trials)
    exact = None
    if op.x_independent:
        src = np.moveaxis(_weights(phi_src, op.p, grid), 0, -1)
        dst = np.moveaxis(_weights(phi_dst, op.p, grid), 0, -1)
        scaled = dst[..., :, np.newaxis] * op.matrix(grid) / src[..., np.newaxis, :]
        exact = float(np.max(np.linalg.norm(scaled.reshape(-1, op.p, op.p), ord=2, axis=(-2, -1))))
    sources = _as_params(phi_src, op.p)
    targets = _as_params(phi_dst, op.p)

    def trial(index: int) -> float:
        u = testing.random_vector_field(grid, op.p, testing.rng_for(seed, index))
        size = vector_hnorm(u, sources)
        return vector_hnorm(apply(op, u), targets) / size

    empirical = max(_utils.map_ordered(trial, range(trials)))
    return OperatorNorm(empirical, exact)


@dataclasses.dataclass(frozen=True, eq=False)
class ParametrixBundle:
    """
    Operators with `BA = I + T₁` and `AB = I + T₂`.

    See Note [Lattice parametrix]. `approximate` marks bundles built from
    frozen coefficients, for which the identities only hold near `x₀`.
    """

    B: FourierOp
    T1: FourierOp
    T2: FourierOp
    R: float
    grid: Grid
    flagged_modes: tuple[tuple[int, ...], ...] = ()
    max_condition: float = 1.0
    approximate: bool = False


def _singular_modes(
    matrices: ComplexArray, tolerance: float
) -> tuple[npt.NDArray[np.bool_], FloatArray]:
    """
    Rank-deficient modes by relative singular value, and condition numbers.
    """
    values = np.linalg.svd(matrices, compute_uv=False)
    largest = values[..., 0]
    smallest = values[..., -1]
    singular = (largest == 0) | (smallest <= tolerance * largest)
    with np.errstate(divide="ignore", invalid="ignore"):
        condition = np.where(singular, np.inf, largest / np.where(smallest == 0, 1, smallest))
    return singular, condition


def build_parametrix(sys: DNSystem, grid: Grid, R: float | None = None) -> ParametrixBundle:  # noqa: N803
    """
    The lattice parametrix of a constant-coefficient system.

    Without `R` the cutoff is `1.2·(1 + max ⟨ξ⟩)` over the singular lattice
    modes, or 0 when `A(ξ)` is invertible everywhere.

    Raises:
        PreconditionViolation: if the system has variable coefficients.
        SingularSymbol: if `A(ξ)` is singular at a lattice mode with `⟨ξ⟩ ≥ R`.
    """
    if not sys.is_constant:
        msg = "the parametrix needs constant coefficients; see frozen_parametrix"
        raise PreconditionViolation(msg)
    if grid.n != sys.n:
        raise GridMismatch(grid, sys.n)
    xi = grid.xi.reshape(-1, grid.n)
    brackets = grid.bracket.reshape(-1)
    matrices = full_symbol(sys, None, xi)
    singular, condition = _singular_modes(matrices, settings.rank_tolerance())
    if R is None:
        R = 1.2 * (1 + float(brackets[singular].max())) if singular.any() else 0.0  # noqa: N806
    outside = brackets >= R
    bad = singular & outside
    if bad.any():
        index = int(np.flatnonzero(bad)[0])
        mode = tuple(int(v) for v in xi[index])
        raise SingularSymbol(mode, complex(np.linalg.det(matrices[index])))

    limit = settings.condition_limit()
    flagged = tuple(
        tuple(int(v) for v in xi[i]) for i in np.flatnonzero(outside & (condition > limit))
    )
    if flagged:
        logger.warning("%d modes have condition number above %g", len(flagged), limit)
    max_condition = float(condition[outside].max()) if outside.any() else 1.0
    logger.debug("parametrix cutoff R=%s on %r", R, grid)

    # Block (k, j) of B has order −m_k − l_j.
    dn = sys.dn if sys.dn is not None else solve_dn_numbers(sys.order_matrix)
    block_orders = tuple(
        tuple(-dn.m[k] - dn.l[j] for j in range(sys.p)) for k in range(sys.p)
    )
    order = max(max(row) for row in block_orders)

    radius = R
    tolerance = settings.rank_tolerance()

    def b_symbol(_x: FloatArray | None, xi: FloatArray) -> ComplexArray:
        points = xi.reshape(-1, sys.n)
        a = full_symbol(sys, None, points)
        keep = np.sqrt(1 + np.sum(points**2, axis=-1)) >= radius
        result = np.zeros_like(a)
        if keep.any():
            # Lattices finer than the one B was built on may reach new singular modes.
            singular_kept, _ = _singular_modes(a[keep], tolerance)
            if singular_kept.any():
                index = int(np.flatnonzero(keep)[np.flatnonzero(singular_kept)[0]])
                mode = tuple(int(v) for v in points[index])
                raise SingularSymbol(mode, complex(np.linalg.det(a[index])))
            result[keep] = np.linalg.inv(a[keep])
        return result.reshape(*xi.shape[:-1], sys.p, sys.p)

    def t_symbol(_x: FloatArray | None, xi: FloatArray) -> ComplexArray:
        inside = np.sqrt(1 + np.sum(xi**2, axis=-1)) < radius
        return np.where(inside[..., np.newaxis, np.newaxis], -np.eye(sys.p), 0).astype(np.complex128)

    B = FourierOp(sys.p, sys.n, b_symbol, order, block_orders=block_orders, label="B")  # noqa: N806
    T = FourierOp(sys.p, sys.n, t_symbol, -math.inf, label="T")  # noqa: N806
    return ParametrixBundle(B, T, T, R, grid, flagged, max_condition)


def freeze(sys: DNSystem, x0: Sequence[float]) -> DNSystem:
    """
    The constant-coefficient system with every coefficient evaluated at `x₀`.
    """
    point = np.asarray(x0, dtype=np.float64)
    ops = tuple(
        tuple(
            DiffOp(
                op.n,
                tuple(
                    (mu, Coefficient.constant(complex(c(point)), sys.n)) for mu, c in op.terms
                ),
            )
            for op in row
        )
        for row in sys.ops
    )
    return DNSystem(sys.p, sys.n, ops, sys.dn)


def frozen_parametrix(
    sys: DNSystem, x0: Sequence[float], grid: Grid, R: float | None = None  # noqa: N803
) -> ParametrixBundle:
    """
    Diagnostic parametrix of the system frozen at `x₀`, marked approximate.
    """
    bundle = build_parametrix(freeze(sys, x0), grid, R)
    return dataclasses.replace(bundle, approximate=True)


def verify_parametrix(
    sys: DNSystem,
    bundle: ParametrixBundle,
    trials: int = 100,
    seed: int = 0,
    tolerance: float | None = None,
) -> Report:
    """
    Relative residuals of `BA − I − T₁` and `AB − I − T₂` on random fields.
    """
    tolerance = settings.identity_tolerance() if tolerance is None else tolerance
    a = system_as_op(sys)
    grid = bundle.grid
    unit = [Power(0.0)] * sys.p

    def trial(index: int) -> tuple[float, float]:
        u = testing.random_vector_field(grid, sys.p, testing.rng_for(seed, index))
        size = vector_hnorm(u, unit)
        left = apply(bundle.B, apply(a, u)) - u - apply(bundle.T1, u)
        right = apply(a, apply(bundle.B, u)) - u - apply(bundle.T2, u)
        return vector_hnorm(left, unit) / size, vector_hnorm(right, unit) / size

    residuals = _utils.map_ordered(trial, range(trials))
    left = max(r[0] for r in residuals)
    right = max(r[1] for r in residuals)
    passed = left <= tolerance and right <= tolerance
    notes = [TORUS_NOTE]
    if bundle.approximate:
        notes.append("approximate: parametrix of the frozen-coefficient system")
    return Report(
        name="verify_parametrix",
        invariant="BA = I + T1 and AB = I + T2",
        verdict=Verdict.PASS if passed else Verdict.FAIL,
        values={"left_residual": left, "right_residual": right, "R": bundle.R},
        tolerances={"identity": tolerance},
        config={"trials": trials, "flagged_modes": len(bundle.flagged_modes)},
        grid_sizes=[grid.N],
        seeds=[seed],
        notes=notes,
    )


def _seminorm_constants(op: FourierOp, grid: Grid, step: float) -> dict[str, float]:
    """
    `sup |D_x^α D_ξ^β g_jk| / ⟨ξ⟩^(r_jk − |β|)` for `|α| ≤ 1` (x-dependent only) and `|β| ≤ 1`.
    """
    xi = grid.xi.reshape(-1, grid.n)
    brackets = grid.bracket.reshape(-1)
    orders = np.array(
        [[op.order_of(j, k) for k in range(op.p)] for j in range(op.p)], dtype=np.float64
    )
    finite = np.isfinite(orders)
    x_points = [None] if op.x_independent else list(grid.points.reshape(-1, grid.n)[:: max(1, grid.size // 16)])
    constants: dict[str, float] = {}

    def record(label: str, values: ComplexArray, loss: int) -> None:
        scale = brackets[:, np.newaxis, np.newaxis] ** (np.where(finite, orders, 0.0) - loss)
        ratio = np.where(finite, np.abs(values) / scale, 0.0)
        constants[label] = max(constants.get(label, 0.0), float(ratio.max()))

    for x in x_points:
        at = None if x is None else x[np.newaxis, :]
        base = op.symbol(at, xi)
        record("alpha=0,beta=0", base, 0)
        for axis in range(grid.n):
            shift = np.zeros(grid.n)
            shift[axis] = step
            forward = op.symbol(at, xi + shift)
            backward = op.symbol(at, xi - shift)
            record(f"alpha=0,beta=e{axis + 1}", (forward - backward) / (2 * step), 1)
            if x is not None:
                plus = op.symbol((x + shift)[np.newaxis, :], xi)
                minus = op.symbol((x - shift)[np.newaxis, :], xi)
                record(f"alpha=e{axis + 1},beta=0", (plus - minus) / (2 * step), 0)
    return constants


def symbol_seminorms(op: FourierOp, grid: Grid, step: float = 1e-4) -> Report:
    """
    Spot-check the symbol class bounds `|D_x^α D_ξ^β g| ≤ c ⟨ξ⟩^(r − |β|)` on two grids.

    Only `|α|, |β| ≤ 1` are tested, by central differences; the report
    lists which pairs were checked. The check passes when every constant on
    the refined grid stays within the stability tolerance of the coarse one.
    Operators of order `−∞` are checked for finite support instead.
    """
    tolerance = settings.stability_tolerance()
    fine = grid.refined(2)
    if not np.isfinite(op.declared_order) and op.block_orders is None:
        radii = []
        for g in (grid, fine):
            norms = np.abs(_lattice_matrix(op, g)).reshape(g.size, -1).max(axis=-1)
            support = g.bracket.reshape(-1)[norms > 0]
            radii.append(float(support.max()) if support.size else 0.0)
        return Report(
            name="symbol_seminorms",
            invariant="order −∞: symbol supported on finitely many modes",
            verdict=Verdict.PASS if radii[0] == radii[1] else Verdict.FAIL,
            values={"support_radius": radii},
            grid_sizes=[grid.N, fine.N],
        )
    coarse = _seminorm_constants(op, grid, step)
    refined = _seminorm_constants(op, fine, step)
    stable = all(refined[key] <= coarse[key] * (1 + tolerance) + 1e-12 for key in coarse)
    return Report(
        name="symbol_seminorms",
        invariant="|D_x^α D_ξ^β g(x, ξ)| ≤ c ⟨ξ⟩^(r − |β|)",
        verdict=Verdict.PASS if stable else Verdict.FAIL,
        values={"coarse": coarse, "fine": refined, "tested": sorted(coarse)},
        tolerances={"stability": tolerance},
        grid_sizes=[grid.N, fine.N],
        notes=["finitely many (α, β) are tested; the full seminorm family is not certified"],
    )


def save_bundle(bundle: ParametrixBundle, directory: Path) -> list[Path]:
    """
    Write each block column of `B`, `T₁` and `T₂` as fields, for debugging.

    Column `k` of an operator is its symbol `g(ξ)[:, k]`, i.e. the operator
    applied to the field with every coefficient 1 in component `k`.
    """
    grid = bundle.grid
    written = []
    directory.mkdir(parents=True, exist_ok=True)
    for name, op in (("B", bundle.B), ("T1", bundle.T1), ("T2", bundle.T2)):
        matrices = op.matrix(grid)
        for k in range(op.p):
            column = np.moveaxis(matrices[..., :, k], -1, 0)
            path = directory / f"{name}_col{k}.bin"
            save_fields(path, VectorField.from_array(grid, column))
            written.append(path)
    return written
