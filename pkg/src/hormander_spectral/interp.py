"""
Interpolation with a function parameter between weighted lattice spaces.

For a pair `X = [X₀, X₁]` of weighted `ℓ²` spaces on one lattice, the
generating operator `J` (the isometry `X₁ ↔ X₀`) is diagonal in the Fourier
basis with eigenvalue `j(ξ) = w₁(⟨ξ⟩)/w₀(⟨ξ⟩)`. The interpolation space `X_ψ`
carries the norm `‖ψ(J)w‖_(X₀)`.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from typing import TYPE_CHECKING

import numpy as np

from . import _utils, settings, testing
from .errors import EvaluationError, GridMismatch, PreconditionViolation, ShapeMismatch
from .hspace import Grid, SpectralField, VectorField, hnorm, weight
from .pdo import FourierOp, op_norm_estimate
from .report import TORUS_NOTE, Report, Verdict, combine
from .roparam import Power, ROParam, interp_psi, scale_power


if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    import numpy.typing as npt

    type FloatArray = npt.NDArray[np.float64]
    type Psi = Callable[[FloatArray], FloatArray]


__all__ = [
    "AdmissiblePair",
    "DirectSumPair",
    "direct_sum",
    "generating_spectrum",
    "interp_norm",
    "sobolev_pair",
    "verify_direct_sum_interpolation",
    "verify_interpolated_boundedness",
    "verify_sobolev_interpolation",
    "x0_embedding_constant",
]

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class AdmissiblePair:
    """
    Weights of `X₀` and `X₁` on one lattice, with `X₁ ↪ X₀` continuously and densely.
    """

    x0_weight: ROParam
    x1_weight: ROParam
    grid: Grid


def sobolev_pair(s0: float, s1: float, grid: Grid) -> AdmissiblePair:
    return AdmissiblePair(Power(s0), Power(s1), grid)


def generating_spectrum(pair: AdmissiblePair) -> FloatArray:
    """
    `j(ξ) = w₁(⟨ξ⟩)/w₀(⟨ξ⟩)` per lattice mode.

    Raises:
        PreconditionViolation: if some ratio is not positive.
    """
    spectrum = weight(pair.x1_weight, pair.grid) / weight(pair.x0_weight, pair.grid)
    if not np.all(spectrum > 0):
        msg = "the generating operator must be positive definite"
        raise PreconditionViolation(msg, delta=float(spectrum.min()))
    return spectrum


def _psi_values(psi: Psi, spectrum: FloatArray) -> FloatArray:
    values = np.asarray(psi(spectrum), dtype=np.float64)
    bad = ~(np.isfinite(values) & (values > 0))
    if np.any(bad):
        index = np.flatnonzero(bad.ravel())[0]
        raise EvaluationError(float(spectrum.ravel()[index]), float(values.ravel()[index]))
    return values


def interp_norm(pair: AdmissiblePair, psi: Psi, w: SpectralField) -> float:
    """
    `‖w‖_(X_ψ) = (Σ_ξ w₀²(⟨ξ⟩) ψ²(j(ξ)) |ŵ(ξ)|²)^(1/2)`.
    """
    if w.grid != pair.grid:
        raise GridMismatch(pair.grid, w.grid)
    spectrum = generating_spectrum(pair)
    weighted = weight(pair.x0_weight, pair.grid) * _psi_values(psi, spectrum) * np.abs(w.coeffs)
    return float(np.sqrt(np.sum(weighted**2)))


def _certified(psi: Psi) -> bool:
    return bool(getattr(psi, "certified", False))


def verify_sobolev_interpolation(
    phi: ROParam,
    s0: float,
    s1: float,
    trials: int = 200,
    grids: Sequence[Grid] | None = None,
    seed: int = 0,
    tolerance: float | None = None,
) -> Report:
    """
    Check `[H^(s0), H^(s1)]_ψ = H^φ` with equal norms, for `ψ` from `interp_psi`.

    Random fields on each grid are compared, together with the single
    zero-mode field, where `j(0) = 1` meets the boundary branch of `ψ`.
    """
    tolerance = settings.identity_tolerance() if tolerance is None else tolerance
    psi = interp_psi(phi, s0, s1)
    grids = [Grid(1, 16), Grid(1, 32)] if grids is None else list(grids)
    deviations = []
    for index, grid in enumerate(grids):
        pair = sobolev_pair(s0, s1, grid)

        def trial(number: int, pair: AdmissiblePair = pair, index: int = index) -> float:
            w = testing.random_field(pair.grid, testing.rng_for(seed, index * trials + number))
            expected = hnorm(w, phi)
            return abs(interp_norm(pair, psi, w) - expected) / expected

        deviations.extend(_utils.map_ordered(trial, range(trials)))
        zero_mode = SpectralField.mode(grid, (0,) * grid.n)
        deviations.append(abs(interp_norm(pair, psi, zero_mode) - hnorm(zero_mode, phi)) / hnorm(zero_mode, phi))
    max_rel_dev = max(deviations)
    notes = [TORUS_NOTE]
    if psi.estimated_preconditions:
        notes.append("estimated preconditions: index bounds checked against sampled indices")
    return Report(
        name="verify_sobolev_interpolation",
        invariant="interpolation norm of [H^(s0), H^(s1)]_ψ equals the H^φ norm",
        verdict=Verdict.PASS if max_rel_dev <= tolerance else Verdict.FAIL,
        values={"max_rel_dev": max_rel_dev},
        tolerances={"identity": tolerance},
        config={"s0": s0, "s1": s1, "trials": trials, "param": repr(phi)},
        grid_sizes=[grid.N for grid in grids],
        seeds=[seed],
        notes=notes,
    )


@dataclasses.dataclass(frozen=True)
class DirectSumPair:
    """
    The pair `[⊕ X₀⁽ᵏ⁾, ⊕ X₁⁽ᵏ⁾]` with its block-diagonal generating operator.
    """

    pairs: tuple[AdmissiblePair, ...]

    @property
    def grid(self) -> Grid:
        return self.pairs[0].grid

    def generating_matrices(self) -> FloatArray:
        """
        `J(ξ)` per mode as `(N, ..., N, p, p)` matrices, diagonal across components.
        """
        spectra = np.stack([generating_spectrum(pair) for pair in self.pairs], axis=-1)
        return spectra[..., np.newaxis] * np.eye(len(self.pairs))

    def interp_norm(self, psi: Psi, u: VectorField) -> float:
        """
        `‖ψ(J)u‖` in `⊕ X₀⁽ᵏ⁾`, with `ψ(J)` from a Hermitian eigendecomposition per mode.
        """
        if u.p != len(self.pairs):
            raise ShapeMismatch((len(self.pairs),), (u.p,))
        if u.grid != self.grid:
            raise GridMismatch(self.grid, u.grid)
        eigenvalues, vectors = np.linalg.eigh(self.generating_matrices())
        psi_values = _psi_values(psi, eigenvalues)
        calculus = (vectors * psi_values[..., np.newaxis, :]) @ np.conj(np.swapaxes(vectors, -1, -2))
        coefficients = np.moveaxis(u.stack(), 0, -1)
        mapped = np.einsum("...jk,...k->...j", calculus, coefficients)
        x0 = np.stack([weight(pair.x0_weight, self.grid) for pair in self.pairs], axis=-1)
        return float(np.sqrt(np.sum(np.abs(x0 * mapped) ** 2)))


def direct_sum(pairs: Sequence[AdmissiblePair]) -> DirectSumPair:
    """
    Raises:
        GridMismatch: if the pairs do not share one grid.
    """
    if not pairs:
        msg = "a direct sum needs at least one pair"
        raise PreconditionViolation(msg)
    for pair in pairs[1:]:
        if pair.grid != pairs[0].grid:
            raise GridMismatch(pairs[0].grid, pair.grid)
    return DirectSumPair(tuple(pairs))


def verify_direct_sum_interpolation(
    pairs: Sequence[AdmissiblePair],
    psi: Psi,
    trials: int = 100,
    seed: int = 0,
    tolerance: float | None = None,
) -> Report:
    """
    Check that interpolating a direct sum gives the direct sum of the interpolations.
    """
    tolerance = settings.identity_tolerance() if tolerance is None else tolerance
    total = direct_sum(pairs)

    def trial(number: int) -> float:
        u = testing.random_vector_field(total.grid, len(pairs), testing.rng_for(seed, number))
        whole = total.interp_norm(psi, u)
        parts = math.sqrt(
            sum(interp_norm(pair, psi, component) ** 2 for pair, component in zip(pairs, u, strict=True))
        )
        return abs(whole - parts) / parts

    max_rel_dev = max(_utils.map_ordered(trial, range(trials)))
    notes = [TORUS_NOTE]
    if not _certified(psi):
        notes.append("unverified parameter: ψ is not known to be an interpolation parameter")
    return Report(
        name="verify_direct_sum_interpolation",
        invariant="[⊕ X0, ⊕ X1]_ψ = ⊕ [X0, X1]_ψ with equal norms",
        verdict=Verdict.PASS if max_rel_dev <= tolerance else Verdict.FAIL,
        values={"max_rel_dev": max_rel_dev},
        tolerances={"identity": tolerance},
        config={"p": len(pairs), "trials": trials},
        grid_sizes=[total.grid.N],
        seeds=[seed],
        notes=notes,
    )


def x0_embedding_constant(
    pair: AdmissiblePair, psi: Psi, trials: int = 50, seed: int = 0
) -> Report:
    """
    `‖w‖_(X₀) ≤ C ‖w‖_(X_ψ)` with `C = max_ξ ψ(j(ξ))⁻¹`, checked on random fields.
    """
    constant = float(1 / np.min(_psi_values(psi, generating_spectrum(pair))))

    def trial(number: int) -> float:
        w = testing.random_field(pair.grid, testing.rng_for(seed, number))
        return hnorm(w, pair.x0_weight) / interp_norm(pair, psi, w)

    observed = max(_utils.map_ordered(trial, range(trials)))
    return Report(
        name="x0_embedding_constant",
        invariant="‖w‖_X0 ≤ C ‖w‖_Xψ",
        verdict=Verdict.PASS if observed <= constant * (1 + 1e-12) else Verdict.FAIL,
        values={"C": constant, "observed": observed},
        grid_sizes=[pair.grid.N],
        seeds=[seed],
    )


def verify_interpolated_boundedness(
    op: FourierOp,
    phi: ROParam,
    s0: float,
    s1: float,
    grids: Sequence[Grid],
) -> Report:
    """
    Interpolate the bounds of an x-independent operator of order `r`.

    On each grid the exact norms `H^(s_i) → H^(s_i − r)` at both endpoints are
    compared with the norm `H^φ → H^(φρ^(−r))`. The ratio of the interpolated
    norm to the larger endpoint norm must stay bounded under refinement.
    """
    r = op.declared_order
    tolerance = settings.stability_tolerance()
    children = []
    ratios = []
    for grid in grids:
        endpoints = [
            op_norm_estimate(op, Power(s), Power(s - r), grid, trials=1).exact for s in (s0, s1)
        ]
        middle = op_norm_estimate(op, phi, scale_power(phi, -r), grid, trials=1).exact
        if middle is None or None in endpoints:
            msg = "interpolated boundedness needs an x-independent operator"
            raise PreconditionViolation(msg, label=op.label)
        ratio = middle / max(e for e in endpoints if e is not None)
        ratios.append(ratio)
        children.append(
            Report(
                name="interpolated_norm",
                invariant="‖G‖ on H^φ ≤ C · max(endpoint norms)",
                verdict=Verdict.PASS if math.isfinite(ratio) else Verdict.FAIL,
                values={"endpoint_norms": endpoints, "interpolated_norm": middle, "ratio": ratio},
                grid_sizes=[grid.N],
            )
        )
    stable = all(later <= earlier * (1 + tolerance) for earlier, later in zip(ratios, ratios[1:], strict=False))
    stability = Report(
        name="interpolation_constant_stability",
        invariant="C independent of the grid",
        verdict=Verdict.PASS if stable else Verdict.FAIL,
        values={"ratios": ratios},
        tolerances={"stability": tolerance},
        grid_sizes=[grid.N for grid in grids],
    )
    return combine(
        "verify_interpolated_boundedness",
        "operator bounds interpolate between Sobolev pairs",
        [*children, stability],
        notes=[TORUS_NOTE],
    )
