"""
Discrete Hörmander spaces `H^φ` on the n-torus.

Note [Torus surrogate]
~~~~~~~~~~~~~~~~~~~~~~
ℝⁿ is modelled by the 2π-periodic torus. A field is stored as its Fourier
coefficients on the lattice cube `{ξ ∈ ℤⁿ : −N/2 ≤ ξᵢ < N/2}` in FFT order,
so every norm below is a finite frequency-weighted sum. Coefficients use the
`norm="forward"` convention: the constant sample 1 has `ŵ(0) = 1`, and the
transform is an isometry between `L²(𝕋ⁿ, dx/(2π)ⁿ)` and `ℓ²` of the lattice.

Products of fields are formed on the grid with `2N` modes per axis, where
the product of two lattice trigonometric polynomials is represented exactly.
"""

from __future__ import annotations

import dataclasses
import functools
import json
import logging
import math
from typing import TYPE_CHECKING, Literal, Self

import numpy as np
import pydantic

from . import _utils
from .errors import GridMismatch, PreconditionViolation, ShapeMismatch
from .report import TORUS_NOTE, Report, Verdict
from .roparam import Power, PowerLog, estimate_indices


if TYPE_CHECKING:
    from collections.abc import Iterator, Sequence
    from pathlib import Path

    import numpy.typing as npt

    from .roparam import ROParam

    type ComplexArray = npt.NDArray[np.complex128]
    type FloatArray = npt.NDArray[np.float64]


__all__ = [
    "FieldManifest",
    "Grid",
    "SpectralField",
    "VectorField",
    "duality_pair",
    "embedding_constant",
    "hnorm",
    "inverse",
    "load_fields",
    "localized_norm",
    "multiply",
    "pad",
    "parseval_l2",
    "physical_l2",
    "restrict",
    "save_fields",
    "sup_derivative_norm",
    "transform",
    "vector_hnorm",
    "vector_pair",
    "weight",
]

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class Grid:
    """
    The lattice cube of `Nⁿ` frequencies and its physical sample points `2πj/N`.
    """

    n: int
    N: int

    def __post_init__(self) -> None:
        if not 1 <= self.n <= 3:  # noqa: PLR2004
            msg = "grid dimension must be 1, 2 or 3"
            raise PreconditionViolation(msg, n=self.n)
        if self.N < 4 or self.N % 2:  # noqa: PLR2004
            msg = "modes per axis must be even and at least 4"
            raise PreconditionViolation(msg, N=self.N)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.n

    @property
    def size(self) -> int:
        return self.N**self.n

    @functools.cached_property
    def xi(self) -> FloatArray:
        """
        Lattice frequencies with shape `(N, ..., N, n)`, in FFT order.
        """
        axis = np.fft.fftfreq(self.N, 1 / self.N)
        mesh = np.meshgrid(*([axis] * self.n), indexing="ij")
        xi = np.stack(mesh, axis=-1)
        xi.flags.writeable = False
        return xi

    @functools.cached_property
    def bracket(self) -> FloatArray:
        """
        The smoothed modulus `⟨ξ⟩ = (1 + |ξ|²)^(1/2)` at every lattice point.
        """
        bracket = np.sqrt(1 + np.sum(self.xi**2, axis=-1))
        bracket.flags.writeable = False
        return bracket

    @functools.cached_property
    def points(self) -> FloatArray:
        axis = 2 * np.pi * np.arange(self.N) / self.N
        mesh = np.meshgrid(*([axis] * self.n), indexing="ij")
        points = np.stack(mesh, axis=-1)
        points.flags.writeable = False
        return points

    def refined(self, factor: int = 2) -> Grid:
        return Grid(self.n, self.N * factor)

    def index_of(self, mode: Sequence[int]) -> tuple[int, ...]:
        """
        Array index of the lattice frequency `mode`.
        """
        if len(mode) != self.n:
            raise ShapeMismatch((self.n,), (len(mode),))
        half = self.N // 2
        if any(not -half <= component < half for component in mode):
            msg = "mode lies outside the lattice cube"
            raise PreconditionViolation(msg, mode=tuple(mode), N=self.N)
        return tuple(component % self.N for component in mode)

    def mode_at(self, index: Sequence[int]) -> tuple[int, ...]:
        return tuple(int(v) for v in self.xi[tuple(index)])

    def modes(self) -> Iterator[tuple[int, ...]]:
        for index in np.ndindex(*self.shape):
            yield self.mode_at(index)


def _frozen(array: npt.ArrayLike) -> ComplexArray:
    result = np.array(array, dtype=np.complex128)
    result.flags.writeable = False
    return result


@dataclasses.dataclass(frozen=True, eq=False)
class SpectralField:
    """
    A complex function on the torus held as its Fourier coefficients `ŵ(ξ)`.
    """

    grid: Grid
    coeffs: ComplexArray

    def __post_init__(self) -> None:
        coeffs = np.asarray(self.coeffs)
        if coeffs.shape != self.grid.shape:
            raise ShapeMismatch(self.grid.shape, coeffs.shape)
        object.__setattr__(self, "coeffs", _frozen(coeffs))

    @classmethod
    def zeros(cls, grid: Grid) -> Self:
        return cls(grid, np.zeros(grid.shape, dtype=np.complex128))

    @classmethod
    def mode(cls, grid: Grid, mode: Sequence[int], value: complex = 1.0) -> Self:
        """
        The field with a single nonzero coefficient `value` at lattice frequency `mode`.
        """
        coeffs = np.zeros(grid.shape, dtype=np.complex128)
        coeffs[grid.index_of(mode)] = value
        return cls(grid, coeffs)

    def _check(self, other: SpectralField) -> None:
        if other.grid != self.grid:
            raise GridMismatch(self.grid, other.grid)

    def __add__(self, other: SpectralField) -> SpectralField:
        self._check(other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: SpectralField) -> SpectralField:
        self._check(other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __neg__(self) -> SpectralField:
        return SpectralField(self.grid, -self.coeffs)

    def __mul__(self, scalar: complex) -> SpectralField:
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"SpectralField(grid={self.grid!r})"


@dataclasses.dataclass(frozen=True, eq=False)
class VectorField:
    """
    A column `(u₁, …, u_p)` of fields on one grid.
    """

    components: tuple[SpectralField, ...]

    def __post_init__(self) -> None:
        components = tuple(self.components)
        if not components:
            msg = "a vector field needs at least one component"
            raise PreconditionViolation(msg)
        for component in components[1:]:
            if component.grid != components[0].grid:
                raise GridMismatch(components[0].grid, component.grid)
        object.__setattr__(self, "components", components)

    @classmethod
    def from_array(cls, grid: Grid, array: npt.ArrayLike) -> Self:
        """
        Build from coefficients of shape `(p, N, ..., N)`.
        """
        stacked = np.asarray(array)
        if stacked.ndim != grid.n + 1 or stacked.shape[1:] != grid.shape:
            raise ShapeMismatch((-1, *grid.shape), stacked.shape)
        return cls(tuple(SpectralField(grid, component) for component in stacked))

    @classmethod
    def zeros(cls, grid: Grid, p: int) -> Self:
        return cls(tuple(SpectralField.zeros(grid) for _ in range(p)))

    @property
    def p(self) -> int:
        return len(self.components)

    @property
    def grid(self) -> Grid:
        return self.components[0].grid

    def stack(self) -> ComplexArray:
        return np.stack([component.coeffs for component in self.components])

    def __getitem__(self, k: int) -> SpectralField:
        return self.components[k]

    def __iter__(self) -> Iterator[SpectralField]:
        return iter(self.components)

    def _check(self, other: VectorField) -> None:
        if other.grid != self.grid:
            raise GridMismatch(self.grid, other.grid)
        if other.p != self.p:
            raise ShapeMismatch((self.p,), (other.p,))

    def __add__(self, other: VectorField) -> VectorField:
        self._check(other)
        return VectorField.from_array(self.grid, self.stack() + other.stack())

    def __sub__(self, other: VectorField) -> VectorField:
        self._check(other)
        return VectorField.from_array(self.grid, self.stack() - other.stack())

    def __mul__(self, scalar: complex) -> VectorField:
        return VectorField.from_array(self.grid, self.stack() * scalar)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"VectorField(p={self.p}, grid={self.grid!r})"


def transform(samples: npt.ArrayLike, grid: Grid) -> SpectralField:
    """
    Fourier coefficients of physical samples taken at the grid points.

    Raises:
        ShapeMismatch: if the samples do not have the grid's shape.
    """
    values = np.asarray(samples, dtype=np.complex128)
    if values.shape != grid.shape:
        raise ShapeMismatch(grid.shape, values.shape)
    return SpectralField(grid, np.fft.fftn(values, norm="forward"))


def inverse(field: SpectralField) -> ComplexArray:
    """
    Physical samples of a field at its grid points.
    """
    return np.fft.ifftn(field.coeffs, norm="forward")


def parseval_l2(field: SpectralField) -> float:
    return float(np.sqrt(np.sum(np.abs(field.coeffs) ** 2)))


def physical_l2(samples: npt.ArrayLike) -> float:
    """
    The `L²(dx/(2π)ⁿ)` norm of physical samples, matching `parseval_l2`.
    """
    return float(np.sqrt(np.mean(np.abs(np.asarray(samples)) ** 2)))


@functools.lru_cache(maxsize=128)
def _cached_weight(param: ROParam, grid: Grid) -> FloatArray:
    unique, inverse_index = np.unique(grid.bracket, return_inverse=True)
    values = param(unique)[inverse_index].reshape(grid.shape)
    values.flags.writeable = False
    return values


def weight(param: ROParam, grid: Grid) -> FloatArray:
    """
    `φ(⟨ξ⟩)` at every lattice point, evaluated once per distinct `⟨ξ⟩`.
    """
    try:
        return _cached_weight(param, grid)
    except TypeError:
        # Parameters holding unhashable callables are evaluated uncached.
        return _cached_weight.__wrapped__(param, grid)


def hnorm(w: SpectralField, param: ROParam) -> float:
    """
    `‖w‖_φ = (Σ_ξ φ²(⟨ξ⟩)|ŵ(ξ)|²)^(1/2)` over the lattice.
    """
    weighted = weight(param, w.grid) * np.abs(w.coeffs)
    return float(np.sqrt(np.sum(weighted**2)))


def vector_hnorm(u: VectorField, params: Sequence[ROParam]) -> float:
    """
    The direct-sum norm `(Σ_k ‖u_k‖²_(φ_k))^(1/2)`.
    """
    if len(params) != u.p:
        raise ShapeMismatch((u.p,), (len(params),))
    return math.sqrt(
        sum(hnorm(component, param) ** 2 for component, param in zip(u, params, strict=True))
    )


def duality_pair(u: SpectralField, v: SpectralField) -> complex:
    """
    `(u, v) = Σ_ξ û(ξ)·conj(v̂(ξ))`, linear in `u` and antilinear in `v`.
    """
    if u.grid != v.grid:
        raise GridMismatch(u.grid, v.grid)
    return complex(np.vdot(v.coeffs, u.coeffs))


def vector_pair(u: VectorField, v: VectorField) -> complex:
    u._check(v)  # noqa: SLF001
    return complex(np.vdot(v.stack(), u.stack()))


def pad(field: SpectralField, grid: Grid) -> SpectralField:
    """
    Lift a field onto a grid with at least as many modes, keeping its coefficients.
    """
    source = field.grid
    if grid.n != source.n or grid.N < source.N:
        raise GridMismatch(source, grid)
    width = (grid.N - source.N) // 2
    centred = np.fft.fftshift(field.coeffs)
    padded = np.pad(centred, [(width, width)] * grid.n)
    return SpectralField(grid, np.fft.ifftshift(padded))


def restrict(field: SpectralField, grid: Grid) -> SpectralField:
    """
    Keep only the coefficients which lie in a coarser lattice cube.
    """
    source = field.grid
    if grid.n != source.n or grid.N > source.N:
        raise GridMismatch(source, grid)
    width = (source.N - grid.N) // 2
    centred = np.fft.fftshift(field.coeffs)
    window = tuple(slice(width, width + grid.N) for _ in range(grid.n))
    return SpectralField(grid, np.fft.ifftshift(centred[window]))


def multiply(a: SpectralField, b: SpectralField) -> SpectralField:
    """
    The pointwise product `a·b`, exact on the grid with twice the modes per axis.
    """
    if a.grid != b.grid:
        raise GridMismatch(a.grid, b.grid)
    fine = a.grid.refined(2)
    product = inverse(pad(a, fine)) * inverse(pad(b, fine))
    return transform(product, fine)


def localized_norm(w: SpectralField, chi: SpectralField, param: ROParam) -> float:
    """
    The interior seminorm `‖χw‖_φ` for a real smooth cutoff `χ`.

    On the torus there is no boundary, so these seminorms realise the
    local and interior spaces alike.
    """
    samples = inverse(chi)
    scale = max(float(np.max(np.abs(samples))), 1.0)
    if np.max(np.abs(samples.imag)) > 1e-12 * scale:  # noqa: PLR2004
        msg = "cutoff must be real-valued"
        raise PreconditionViolation(msg)
    return hnorm(multiply(chi, w), param)


def _derivative_bound(
    omega: ROParam, lam: int, grid: Grid
) -> FloatArray:
    """
    `max_{|μ|≤λ} ξ^(2μ) ω^(−2)(⟨ξ⟩)` per lattice point.
    """
    xi = grid.xi
    worst = np.zeros(grid.shape)
    for mu in _utils.multi_indices(grid.n, lam):
        worst = np.maximum(worst, _utils.monomial(xi, mu) ** 2)
    return worst / weight(omega, grid) ** 2


EMBEDDING_BLOCKS = 48
EMBEDDING_DECAY = 0.95
EMBEDDING_GROWTH = 1.05


def _log_block_integrals(omega: ROParam, exponent: float, blocks: int) -> FloatArray:
    """
    `ln ∫ t^(exponent−1) ω^(−2)(t) dt` over the dyadic blocks `[2^k, 2^(k+1)]`.

    The integrals are taken in `u = ln t` and kept in log form so that
    fast-decaying integrands do not underflow.
    """
    samples = 257
    log2 = math.log(2)
    logs = np.empty(blocks)
    for k in range(blocks):
        u = np.linspace(k * log2, (k + 1) * log2, samples)
        log_integrand = exponent * u - 2 * omega.log_value(np.exp(u))
        peak = float(np.max(log_integrand))
        logs[k] = peak + math.log(float(np.trapezoid(np.exp(log_integrand - peak), u)))
    return logs


def _integral_verdict(omega: ROParam, exponent: float) -> bool | None:
    logs = _log_block_integrals(omega, exponent, EMBEDDING_BLOCKS)
    log_ratios = np.diff(logs)
    tail = log_ratios[len(log_ratios) // 2 :]
    if np.all(tail <= math.log(EMBEDDING_DECAY)):
        return True
    if np.all(tail >= math.log(EMBEDDING_GROWTH)):
        return False
    return None


def _convergence(omega: ROParam, lam: int, n: int) -> tuple[bool | None, dict[str, object]]:
    """
    Decide whether `∫₁^∞ t^(2λ+n−1) ω^(−2)(t) dt` converges.
    """
    estimated = not omega.has_declared_indices
    if estimated:
        sigma0, sigma1 = estimate_indices(omega)
    else:
        assert omega.declared_sigma0 is not None
        assert omega.declared_sigma1 is not None
        sigma0, sigma1 = omega.declared_sigma0, omega.declared_sigma1
    exponent = 2 * lam + n
    lower = exponent - 2 * sigma0
    upper = exponent - 2 * sigma1
    details: dict[str, object] = {
        "exponent_lower": lower,
        "exponent_upper": upper,
        "estimated_indices": estimated,
    }
    if not estimated and lower < 0:
        details["method"] = "indices"
        return True, details
    if not estimated and upper > 0:
        details["method"] = "indices"
        return False, details
    if isinstance(omega, PowerLog | Power) and lower == 0:
        # t^(−1)·(1 + ln t)^(−2r) is integrable exactly when 2r > 1.
        details["method"] = "log-exact"
        r = omega.r if isinstance(omega, PowerLog) else 0.0
        return 2 * r > 1, details
    details["method"] = "integral-test"
    return _integral_verdict(omega, exponent), details


def embedding_constant(omega: ROParam, lam: int, grid: Grid) -> Report:
    """
    The embedding `H^ω ⊂ C^λ_b`: its convergence verdict and discrete constant.

    `C = (Σ_ξ max_{|μ|≤λ} ξ^(2μ) ω^(−2)(⟨ξ⟩))^(1/2)` bounds
    `sup_x |D^μ w(x)| ≤ C·‖w‖_ω` for every field on the grid.
    The verdict comes from comparing `2λ + n` with the Matuszewska indices of `ω`;
    on the boundary only `PowerLog` weights are decided exactly, and
    other weights go through a dyadic integral test which may be inconclusive.
    """
    if lam < 0:
        msg = "derivative order must be non-negative"
        raise PreconditionViolation(msg, lam=lam)
    constant = math.sqrt(float(np.sum(_derivative_bound(omega, lam, grid))))
    converges, details = _convergence(omega, lam, grid.n)
    if converges is None:
        verdict = Verdict.INCONCLUSIVE
    else:
        verdict = Verdict.PASS if converges else Verdict.FAIL
    logger.debug("embedding verdict %s for λ=%s on %r", verdict, lam, grid)
    return Report(
        name="embedding_constant",
        invariant="∫₁^∞ t^(2λ+n−1) ω^(−2)(t) dt < ∞",
        verdict=verdict,
        values={"converges": converges, "C": constant, **details},
        config={"lambda": lam, "n": grid.n},
        grid_sizes=[grid.N],
        notes=[TORUS_NOTE],
    )


def sup_derivative_norm(w: SpectralField, lam: int) -> float:
    """
    `max_{|μ|≤λ} max_x |D^μ w(x)|` over the grid points, differentiating spectrally.
    """
    xi = w.grid.xi
    best = 0.0
    for mu in _utils.multi_indices(w.grid.n, lam):
        derivative = SpectralField(w.grid, w.coeffs * _utils.monomial(xi, mu))
        best = max(best, float(np.max(np.abs(inverse(derivative)))))
    return best


class FieldManifest(pydantic.BaseModel):
    """
    The JSON manifest stored next to a binary field file.
    """

    n: int
    N: int
    p: int
    dtype: Literal["complex64", "complex128"] = "complex128"
    byteorder: Literal["little"] = "little"
    layout: Literal["row-major"] = "row-major"
    ordering: Literal["fft"] = "fft"
    normalization: Literal["forward"] = "forward"


HEADER_DTYPE = np.dtype("<i8")


def _manifest_path(path: Path) -> Path:
    return path.with_suffix(".json")


def save_fields(
    path: Path,
    u: VectorField,
    dtype: Literal["complex64", "complex128"] = "complex128",
) -> None:
    """
    Write `u` as a header `(n, N, p)` followed by its coefficients, plus a JSON manifest.
    """
    grid = u.grid
    header = np.array([grid.n, grid.N, u.p], dtype=HEADER_DTYPE)
    body = u.stack().astype(np.dtype(dtype).newbyteorder("<"))
    path.write_bytes(header.tobytes() + body.tobytes(order="C"))
    manifest = FieldManifest(n=grid.n, N=grid.N, p=u.p, dtype=dtype)
    _manifest_path(path).write_text(manifest.model_dump_json(indent=2) + "\n")


def load_fields(path: Path) -> VectorField:
    """
    Read fields written by `save_fields`.

    Raises:
        ShapeMismatch: if the binary header disagrees with the manifest or the body length.
    """
    manifest = FieldManifest.model_validate(json.loads(_manifest_path(path).read_text()))
    raw = path.read_bytes()
    header_size = 3 * HEADER_DTYPE.itemsize
    header = tuple(int(v) for v in np.frombuffer(raw[:header_size], dtype=HEADER_DTYPE))
    expected = (manifest.n, manifest.N, manifest.p)
    if header != expected:
        raise ShapeMismatch(expected, header)
    grid = Grid(manifest.n, manifest.N)
    dtype = np.dtype(manifest.dtype).newbyteorder("<")
    body = np.frombuffer(raw[header_size:], dtype=dtype)
    shape = (manifest.p, *grid.shape)
    if body.size != math.prod(shape):
        raise ShapeMismatch(shape, (body.size,))
    return VectorField.from_array(grid, body.reshape(shape))
