"""
Function parameters that are RO-varying at infinity.

A parameter is a positive function `φ` on `[1, ∞)` such that `φ(λt)/φ(t)`
is bounded above and below uniformly for `λ` in each compact interval.
The distinguished parameter `ρ(t) = t` is `Power(1)`.
"""

from __future__ import annotations

import abc
import dataclasses
import logging
import math
from typing import TYPE_CHECKING, NamedTuple

import numpy as np
from scipy import integrate

from . import _utils
from .errors import DomainError, EvaluationError, PreconditionViolation
from .report import Report, Verdict


if TYPE_CHECKING:
    from collections.abc import Callable

    import numpy.typing as npt

    type FloatArray = npt.NDArray[np.float64]


__all__ = [
    "RHO",
    "Custom",
    "IndexEstimate",
    "InterpolationParameter",
    "Power",
    "PowerLog",
    "PowerSinLog",
    "ROParam",
    "Representation",
    "SandwichConstants",
    "default_lambda_grid",
    "default_t_grid",
    "estimate_indices",
    "evaluate",
    "index_report",
    "interp_psi",
    "reciprocal",
    "sandwich_constants",
    "scale_power",
    "verify_ro",
]

logger = logging.getLogger(__name__)

QUADRATURE_TOLERANCE = 1e-10


def default_t_grid() -> FloatArray:
    return _utils.log_grid(1.0, 1e6, 400)


def default_lambda_grid() -> FloatArray:
    return np.array([2.0, 4.0, 8.0, 16.0])


class ROParam(abc.ABC):
    """
    A positive function on `[1, ∞)` with optional analytic Matuszewska indices.

    Subclasses implement `_log_value`; evaluation, domain checks and
    the positivity checks live here.
    """

    @property
    @abc.abstractmethod
    def declared_sigma0(self) -> float | None: ...

    @property
    @abc.abstractmethod
    def declared_sigma1(self) -> float | None: ...

    @property
    def has_declared_indices(self) -> bool:
        return self.declared_sigma0 is not None and self.declared_sigma1 is not None

    @abc.abstractmethod
    def _log_value(self, t: FloatArray) -> FloatArray:
        """
        Return `ln φ(t)` for `t ≥ 1`.
        """

    def log_value(self, t: npt.ArrayLike) -> FloatArray:
        points = _checked_domain(t)
        values = self._log_value(points)
        _check_finite(points, values)
        return values

    def __call__(self, t: npt.ArrayLike) -> FloatArray:
        return np.exp(self.log_value(t))


def _checked_domain(t: npt.ArrayLike) -> FloatArray:
    points = np.asarray(t, dtype=np.float64)
    below = points < 1
    if np.any(below):
        raise DomainError(float(points[below].flat[0]))
    return points


def _check_finite(points: FloatArray, log_values: FloatArray) -> None:
    bad = ~np.isfinite(log_values)
    if np.any(bad):
        index = np.flatnonzero(bad.ravel())[0]
        raise EvaluationError(
            float(points.ravel()[index]), float(np.exp(log_values.ravel()[index]))
        )


@dataclasses.dataclass(frozen=True)
class Power(ROParam):
    """
    `φ(t) = t^s`.
    """

    s: float

    @property
    def declared_sigma0(self) -> float:
        return self.s

    @property
    def declared_sigma1(self) -> float:
        return self.s

    def _log_value(self, t: FloatArray) -> FloatArray:
        return self.s * np.log(t)


RHO = Power(1.0)


@dataclasses.dataclass(frozen=True)
class PowerLog(ROParam):
    """
    `φ(t) = t^s · (1 + ln t)^r`.
    """

    s: float
    r: float

    @property
    def declared_sigma0(self) -> float:
        return self.s

    @property
    def declared_sigma1(self) -> float:
        return self.s

    def _log_value(self, t: FloatArray) -> FloatArray:
        log_t = np.log(t)
        return self.s * log_t + self.r * np.log1p(log_t)


@dataclasses.dataclass(frozen=True)
class PowerSinLog(ROParam):
    """
    `φ(t) = t^s · exp(δ · sin(ln t))`.

    The oscillating factor is bounded, so both indices equal `s`.
    """

    s: float
    delta: float

    @property
    def declared_sigma0(self) -> float:
        return self.s

    @property
    def declared_sigma1(self) -> float:
        return self.s

    def _log_value(self, t: FloatArray) -> FloatArray:
        log_t = np.log(t)
        return self.s * log_t + self.delta * np.sin(log_t)


@dataclasses.dataclass(frozen=True)
class _Affine:
    """
    `t ↦ sign · func(t) + shift`, used to transform representation functions.
    """

    func: Callable[[float], float]
    sign: float = 1.0
    shift: float = 0.0

    def __call__(self, t: float) -> float:
        return self.sign * self.func(t) + self.shift


@dataclasses.dataclass(frozen=True)
class Representation(ROParam):
    """
    `φ(t) = exp(β(t) + ∫₁ᵗ α(τ)/τ dτ)` with bounded `α` and `β`.

    The integral is taken in `u = ln τ` by adaptive quadrature.
    Indices are only known when declared by the caller.
    """

    alpha: Callable[[float], float]
    beta: Callable[[float], float]
    sigma0: float | None = None
    sigma1: float | None = None

    @property
    def declared_sigma0(self) -> float | None:
        return self.sigma0

    @property
    def declared_sigma1(self) -> float | None:
        return self.sigma1

    def _log_value(self, t: FloatArray) -> FloatArray:
        unique, inverse = np.unique(t, return_inverse=True)
        logs = np.log(unique)

        def integrand(u: float) -> float:
            return self.alpha(math.exp(u))

        # Integrate between consecutive sorted points and accumulate.
        pieces = np.empty_like(logs)
        previous = 0.0
        for index, upper in enumerate(logs):
            piece, _ = integrate.quad(
                integrand,
                previous,
                upper,
                epsabs=QUADRATURE_TOLERANCE,
                epsrel=QUADRATURE_TOLERANCE,
            )
            pieces[index] = piece
            previous = float(upper)
        integrals = np.cumsum(pieces)
        betas = np.array([self.beta(float(value)) for value in unique])
        return np.asarray((betas + integrals)[inverse].reshape(t.shape), dtype=np.float64)


@dataclasses.dataclass(frozen=True)
class Custom(ROParam):
    """
    An arbitrary positive function supplied by the caller.

    Custom parameters carry no declared indices; operations which need them
    fall back to sampled estimates and say so in their reports.
    """

    func: Callable[[float], float]
    label: str = "custom"

    @property
    def declared_sigma0(self) -> None:
        return None

    @property
    def declared_sigma1(self) -> None:
        return None

    def _log_value(self, t: FloatArray) -> FloatArray:
        unique, inverse = np.unique(t, return_inverse=True)
        values = np.array([self.func(float(point)) for point in unique], dtype=np.float64)
        bad = ~(np.isfinite(values) & (values > 0))
        if np.any(bad):
            index = int(np.flatnonzero(bad)[0])
            raise EvaluationError(float(unique[index]), float(values[index]))
        return np.asarray(np.log(values)[inverse].reshape(t.shape), dtype=np.float64)


@dataclasses.dataclass(frozen=True)
class _ScaledFunc:
    func: Callable[[float], float]
    r: float

    def __call__(self, t: float) -> float:
        return self.func(t) * t**self.r


@dataclasses.dataclass(frozen=True)
class _ReciprocalFunc:
    func: Callable[[float], float]

    def __call__(self, t: float) -> float:
        return 1.0 / self.func(t)


def evaluate(param: ROParam, t: float) -> float:
    """
    Evaluate `φ(t)` at a single point `t ≥ 1`.

    Raises:
        DomainError: if `t < 1`.
        EvaluationError: if a custom parameter returns a non-positive or non-finite value.
    """
    return float(param(np.array([t]))[0])


def scale_power(param: ROParam, r: float) -> ROParam:
    """
    Return `t ↦ φ(t) · t^r`; declared indices shift by `r`.
    """
    match param:
        case Power(s=s):
            return Power(s + r)
        case PowerLog(s=s, r=log_power):
            return PowerLog(s + r, log_power)
        case PowerSinLog(s=s, delta=delta):
            return PowerSinLog(s + r, delta)
        case Representation():
            return Representation(
                alpha=_Affine(param.alpha, shift=r),
                beta=param.beta,
                sigma0=None if param.sigma0 is None else param.sigma0 + r,
                sigma1=None if param.sigma1 is None else param.sigma1 + r,
            )
        case Custom(func=func, label=label):
            return Custom(_ScaledFunc(func, r), label=f"{label}·ρ^{r:g}")
    msg = f"unsupported parameter {param!r}"
    raise TypeError(msg)


def reciprocal(param: ROParam) -> ROParam:
    """
    Return `1/φ`; declared indices map to `(−σ₁, −σ₀)`.
    """
    match param:
        case Power(s=s):
            return Power(-s)
        case PowerLog(s=s, r=log_power):
            return PowerLog(-s, -log_power)
        case PowerSinLog(s=s, delta=delta):
            return PowerSinLog(-s, -delta)
        case Representation():
            return Representation(
                alpha=_Affine(param.alpha, sign=-1.0),
                beta=_Affine(param.beta, sign=-1.0),
                sigma0=None if param.sigma1 is None else -param.sigma1,
                sigma1=None if param.sigma0 is None else -param.sigma0,
            )
        case Custom(func=func, label=label):
            return Custom(_ReciprocalFunc(func), label=f"1/{label}")
    msg = f"unsupported parameter {param!r}"
    raise TypeError(msg)


def _grids(
    t_grid: npt.ArrayLike | None, lambda_grid: npt.ArrayLike | None
) -> tuple[FloatArray, FloatArray]:
    ts = default_t_grid() if t_grid is None else np.asarray(t_grid, dtype=np.float64)
    lambdas = (
        default_lambda_grid()
        if lambda_grid is None
        else np.asarray(lambda_grid, dtype=np.float64)
    )
    if ts.size == 0 or lambdas.size == 0:
        msg = "sampling grids must be non-empty"
        raise PreconditionViolation(msg, t_points=ts.size, lambda_points=lambdas.size)
    return ts, lambdas


def _log_ratios(param: ROParam, ts: FloatArray, lambdas: FloatArray) -> FloatArray:
    """
    Return `ln(φ(λt)/φ(t))` with shape `(len(lambdas), len(ts))`.
    """
    base = param.log_value(ts)
    scaled = param.log_value(np.outer(lambdas, ts))
    return scaled - base[np.newaxis, :]


def verify_ro(
    param: ROParam,
    a: float,
    t_grid: npt.ArrayLike | None = None,
    lambda_grid: npt.ArrayLike | None = None,
) -> Report:
    """
    Sample the RO constant `c` with `c⁻¹ ≤ φ(λt)/φ(t) ≤ c` for `λ ∈ [1, a]`.

    The sampled `c_hat` is a lower bound for the true constant:
    sampling can refute the condition or bound the constant from below,
    never certify it.
    """
    if a <= 1:
        msg = "the dilation bound a must exceed 1"
        raise PreconditionViolation(msg, a=a)
    if lambda_grid is None:
        lambda_grid = np.linspace(1.0, a, 65)
    ts, lambdas = _grids(t_grid, lambda_grid)
    if np.any((lambdas < 1) | (lambdas > a)):
        msg = "dilations must lie in [1, a]"
        raise PreconditionViolation(msg, a=a)
    log_c = float(np.max(np.abs(_log_ratios(param, ts, lambdas))))
    c_hat = math.exp(log_c)
    return Report(
        name="verify_ro",
        invariant="c⁻¹ ≤ φ(λt)/φ(t) ≤ c for t ≥ 1, 1 ≤ λ ≤ a",
        verdict=Verdict.PASS if math.isfinite(c_hat) else Verdict.FAIL,
        values={"c_hat": c_hat, "a": a},
        config={"t_points": ts.size, "t_max": float(ts.max()), "lambda_points": lambdas.size},
        notes=["sampled constant is a lower bound for the true RO constant"],
    )


class IndexEstimate(NamedTuple):
    sigma0_hat: float
    sigma1_hat: float


def estimate_indices(
    param: ROParam,
    t_grid: npt.ArrayLike | None = None,
    lambda_grid: npt.ArrayLike | None = None,
) -> IndexEstimate:
    """
    Estimate the Matuszewska indices from the ratio statistic `ln(φ(λt)/φ(t)) / ln λ`.

    The upper estimate is the maximum of the statistic over the grids
    and the lower estimate its minimum.
    """
    ts, lambdas = _grids(t_grid, lambda_grid)
    if np.any(lambdas < 2):
        msg = "index estimation needs dilations λ ≥ 2"
        raise PreconditionViolation(msg, lambda_min=float(lambdas.min()))
    statistic = _log_ratios(param, ts, lambdas) / np.log(lambdas)[:, np.newaxis]
    return IndexEstimate(float(statistic.min()), float(statistic.max()))


def index_report(
    param: ROParam,
    t_grid: npt.ArrayLike | None = None,
    lambda_grid: npt.ArrayLike | None = None,
    tolerance: float | None = None,
) -> Report:
    """
    Compare sampled indices with declared ones and record the grid resolution.

    Without declared indices or a tolerance the report is inconclusive:
    sampling alone cannot certify an index.
    """
    ts, lambdas = _grids(t_grid, lambda_grid)
    estimate = estimate_indices(param, ts, lambdas)
    values: dict[str, object] = {
        "sigma0_hat": estimate.sigma0_hat,
        "sigma1_hat": estimate.sigma1_hat,
        "declared_sigma0": param.declared_sigma0,
        "declared_sigma1": param.declared_sigma1,
    }
    verdict = Verdict.INCONCLUSIVE
    tolerances = {}
    if param.has_declared_indices and tolerance is not None:
        assert param.declared_sigma0 is not None
        assert param.declared_sigma1 is not None
        deviation = max(
            abs(estimate.sigma0_hat - param.declared_sigma0),
            abs(estimate.sigma1_hat - param.declared_sigma1),
        )
        values["deviation"] = deviation
        tolerances["deviation"] = tolerance
        verdict = Verdict.PASS if deviation <= tolerance else Verdict.FAIL
    return Report(
        name="estimate_indices",
        invariant="sampled ratio statistic within tolerance of declared indices",
        verdict=verdict,
        values=values,
        tolerances=tolerances,
        config={
            "t_points": ts.size,
            "t_min": float(ts.min()),
            "t_max": float(ts.max()),
            "lambdas": lambdas,
        },
    )


@dataclasses.dataclass(frozen=True)
class InterpolationParameter:
    """
    The function `ψ` that recovers `H^φ` from the Sobolev pair `[H^(s0), H^(s1)]`.

        ψ(t) = t^(−s0/(s1−s0)) · φ(t^(1/(s1−s0)))   for t ≥ 1,
        ψ(t) = φ(1)                                  for 0 < t < 1.

    `estimated_preconditions` is set when the index bounds were checked
    against sampled rather than declared indices.
    """

    param: ROParam
    s0: float
    s1: float
    estimated_preconditions: bool = False
    certified: bool = True

    def __call__(self, t: npt.ArrayLike) -> FloatArray:
        points = np.asarray(t, dtype=np.float64)
        if np.any(points <= 0):
            raise DomainError(float(points[points <= 0].flat[0]))
        width = self.s1 - self.s0
        result = np.full(points.shape, evaluate(self.param, 1.0))
        upper = points >= 1
        if np.any(upper):
            chosen = points[upper]
            result[upper] = chosen ** (-self.s0 / width) * self.param(chosen ** (1 / width))
        return result


def interp_psi(param: ROParam, s0: float, s1: float) -> InterpolationParameter:
    """
    Build the interpolation parameter `ψ` for `φ` and the Sobolev pair `(s0, s1)`.

    Raises:
        PreconditionViolation: if `s0 ≥ σ₀(φ)` or `s1 ≤ σ₁(φ)` for declared indices,
            or if `s0 ≥ s1`.
    """
    if s0 >= s1:
        msg = "interpolation needs s0 < s1"
        raise PreconditionViolation(msg, s0=s0, s1=s1)
    estimated = not param.has_declared_indices
    if estimated:
        sigma0, sigma1 = estimate_indices(param)
        logger.warning(
            "checking interpolation bounds against estimated indices (%s, %s)",
            sigma0,
            sigma1,
        )
    else:
        assert param.declared_sigma0 is not None
        assert param.declared_sigma1 is not None
        sigma0, sigma1 = param.declared_sigma0, param.declared_sigma1
    if not (s0 < sigma0 and s1 > sigma1):
        if not estimated:
            msg = "interpolation needs s0 < σ₀(φ) and s1 > σ₁(φ)"
            raise PreconditionViolation(msg, s0=s0, s1=s1, sigma0=sigma0, sigma1=sigma1)
        logger.warning(
            "estimated indices (%s, %s) are not inside (%s, %s)", sigma0, sigma1, s0, s1
        )
        return InterpolationParameter(
            param, s0, s1, estimated_preconditions=True, certified=False
        )
    return InterpolationParameter(param, s0, s1, estimated_preconditions=estimated)


class SandwichConstants(NamedTuple):
    """
    `‖w‖_(s0) ≤ lower · ‖w‖_φ` and `‖w‖_φ ≤ upper · ‖w‖_(s1)`.
    """

    lower: float
    upper: float


def sandwich_constants(
    param: ROParam, s0: float, s1: float, t_values: npt.ArrayLike
) -> SandwichConstants:
    """
    Constants of the embeddings `H^(s1) ↪ H^φ ↪ H^(s0)` over the given `⟨ξ⟩` values.
    """
    points = np.asarray(t_values, dtype=np.float64)
    log_phi = param.log_value(points)
    log_t = np.log(points)
    lower = math.exp(float(np.max(s0 * log_t - log_phi)))
    upper = math.exp(float(np.max(log_phi - s1 * log_t)))
    return SandwichConstants(lower, upper)
