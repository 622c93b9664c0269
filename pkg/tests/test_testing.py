from __future__ import annotations

import numpy as np

from hormander_spectral import testing
from hormander_spectral.hspace import Grid


class TestRng:
    def test_deterministic(self) -> None:
        first = testing.rng_for(7, 3).standard_normal(4)
        second = testing.rng_for(7, 3).standard_normal(4)

        np.testing.assert_array_equal(first, second)

    def test_independent_trials(self) -> None:
        """
        Different trials of one seed draw different streams.
        """
        first = testing.rng_for(7, 0).standard_normal(4)
        second = testing.rng_for(7, 1).standard_normal(4)

        assert not np.allclose(first, second)


class TestFields:
    def test_random_field_shaped(self) -> None:
        """
        The envelope damps high modes; unshaped draws keep the same noise.
        """
        grid = Grid(2, 8)
        shaped = testing.random_field(grid, testing.rng_for(0))
        raw = testing.random_field(grid, testing.rng_for(0), shaped=False)

        np.testing.assert_allclose(shaped.coeffs, raw.coeffs * testing.envelope(grid))

    def test_random_vector_field(self) -> None:
        u = testing.random_vector_field(Grid(1, 16), 3, testing.rng_for(1))

        assert u.p == 3
        assert not np.allclose(u[0].coeffs, u[1].coeffs)

    def test_single_mode(self) -> None:
        grid = Grid(2, 8)

        u = testing.single_mode(grid, (-1, 2), p=2, component=1, value=3j)

        assert np.count_nonzero(u.stack()) == 1
        assert not u[0].coeffs.any()
        assert u[1].coeffs[-1, 2] == 3j
