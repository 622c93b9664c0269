"""
Seeded random fields for trials, in this package and in downstream test suites.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from .hspace import Grid, SpectralField, VectorField


if TYPE_CHECKING:
    from collections.abc import Sequence


__all__ = [
    "envelope",
    "random_field",
    "random_vector_field",
    "rng_for",
    "single_mode",
]


def rng_for(seed: int, trial: int = 0) -> np.random.Generator:
    """
    The generator for one trial of a seeded experiment.

    Each trial gets its own stream, so a trial's field does not depend on
    which other trials ran, or on which thread ran it.
    """
    return np.random.default_rng([seed, trial])


def envelope(grid: Grid) -> np.ndarray:
    """
    The decay profile `⟨ξ⟩^(−(n+1)/2)` applied to random coefficients.
    """
    return grid.bracket ** (-(grid.n + 1) / 2)


def random_field(grid: Grid, rng: np.random.Generator, *, shaped: bool = True) -> SpectralField:
    """
    I.i.d. complex Gaussian coefficients, shaped by `envelope` unless `shaped=False`.
    """
    coeffs = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    if shaped:
        coeffs = coeffs * envelope(grid)
    return SpectralField(grid, coeffs)


def random_vector_field(
    grid: Grid, p: int, rng: np.random.Generator, *, shaped: bool = True
) -> VectorField:
    return VectorField(tuple(random_field(grid, rng, shaped=shaped) for _ in range(p)))


def single_mode(
    grid: Grid, mode: Sequence[int], p: int = 1, component: int = 0, value: complex = 1.0
) -> VectorField:
    """
    A vector field whose only nonzero coefficient is `value` at `mode` in one component.
    """
    return VectorField(
        tuple(
            SpectralField.mode(grid, mode, value) if k == component else SpectralField.zeros(grid)
            for k in range(p)
        )
    )
