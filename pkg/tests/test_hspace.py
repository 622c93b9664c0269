from __future__ import annotations

import math
from typing import TYPE_CHECKING

import numpy as np
import pytest

from hormander_spectral import hspace, roparam, testing
from hormander_spectral.errors import GridMismatch, PreconditionViolation, ShapeMismatch
from hormander_spectral.hspace import Grid, SpectralField, VectorField
from hormander_spectral.report import Verdict
from hormander_spectral.roparam import Power, PowerLog, PowerSinLog


if TYPE_CHECKING:
    from pathlib import Path

    from hormander_spectral.roparam import ROParam


def _cutoff(grid: Grid, radius: float) -> SpectralField:
    distance = np.abs(np.angle(np.exp(1j * (grid.points[..., 0] - np.pi))))
    inside = distance < radius
    z = np.where(inside, (distance / radius) ** 2, 0.0)
    return hspace.transform(np.where(inside, np.exp(1 - 1 / (1 - z)), 0.0), grid)


class TestGrid:
    @pytest.mark.parametrize(("n", "N"), [(0, 8), (4, 8), (1, 2), (2, 7)])
    def test_invalid(self, n: int, N: int) -> None:  # noqa: N803
        """
        Dimensions are 1 to 3 and mode counts are even and at least 4.
        """
        with pytest.raises(PreconditionViolation):
            Grid(n, N)

    def test_frequencies(self) -> None:
        """
        Frequencies come in FFT order and `⟨ξ⟩` is the smoothed modulus.
        """
        grid = Grid(2, 4)

        assert grid.shape == (4, 4)
        assert grid.mode_at((3, 1)) == (-1, 1)
        assert grid.bracket[grid.index_of((-2, 1))] == pytest.approx(math.sqrt(6))

    def test_index_of(self) -> None:
        """
        The lattice cube is `−N/2 ≤ ξᵢ < N/2`.
        """
        grid = Grid(1, 8)

        assert grid.index_of((-4,)) == (4,)
        with pytest.raises(PreconditionViolation):
            grid.index_of((4,))
        with pytest.raises(ShapeMismatch):
            grid.index_of((1, 1))

    def test_modes(self) -> None:
        assert sorted(Grid(1, 4).modes()) == [(-2,), (-1,), (0,), (1,)]

    def test_points(self) -> None:
        grid = Grid(2, 4)

        assert grid.points.shape == (4, 4, 2)
        assert grid.points[1, 2].tolist() == pytest.approx([math.pi / 2, math.pi])


class TestFields:
    def test_shape_checked(self) -> None:
        with pytest.raises(ShapeMismatch):
            SpectralField(Grid(1, 8), np.zeros(4))

    def test_coefficients_are_read_only(self) -> None:
        field = SpectralField.zeros(Grid(1, 8))

        with pytest.raises(ValueError, match="read-only"):
            field.coeffs[0] = 1

    def test_arithmetic(self) -> None:
        grid = Grid(1, 8)
        a = SpectralField.mode(grid, (1,), 2.0)
        b = SpectralField.mode(grid, (1,), 0.5)

        result = 2 * (a - b) + (-b)

        assert result.coeffs[1] == pytest.approx(2.5)

    def test_grid_mismatch(self) -> None:
        """
        Fields on different grids cannot be combined without padding.
        """
        with pytest.raises(GridMismatch):
            _ = SpectralField.zeros(Grid(1, 8)) + SpectralField.zeros(Grid(1, 16))

    def test_vector_field_from_array(self) -> None:
        grid = Grid(2, 4)

        u = VectorField.from_array(grid, np.ones((3, 4, 4)))

        assert u.p == 3
        assert u.grid == grid
        assert u.stack().shape == (3, 4, 4)

    def test_vector_field_shape(self) -> None:
        with pytest.raises(ShapeMismatch):
            VectorField.from_array(Grid(2, 4), np.ones((4, 4)))

    def test_vector_field_component_grids(self) -> None:
        with pytest.raises(GridMismatch):
            VectorField((SpectralField.zeros(Grid(1, 4)), SpectralField.zeros(Grid(1, 8))))


class TestTransform:
    def test_cosine(self) -> None:
        """
        `cos x` has coefficient 1/2 at `ξ = ±1`.
        """
        grid = Grid(1, 8)

        field = hspace.transform(np.cos(grid.points[..., 0]), grid)

        expected = np.zeros(8)
        expected[[1, 7]] = 0.5
        np.testing.assert_allclose(field.coeffs, expected, atol=1e-14)

    def test_inverse(self) -> None:
        grid = Grid(2, 8)
        samples = np.sin(grid.points[..., 0]) * np.cos(2 * grid.points[..., 1])

        np.testing.assert_allclose(
            hspace.inverse(hspace.transform(samples, grid)), samples, atol=1e-14
        )

    def test_parseval(self) -> None:
        """
        The transform is an isometry between the two `L²` norms.
        """
        grid = Grid(2, 8)
        field = testing.random_field(grid, testing.rng_for(0))

        physical = hspace.physical_l2(hspace.inverse(field))

        assert physical == pytest.approx(hspace.parseval_l2(field))

    def test_wrong_shape(self) -> None:
        with pytest.raises(ShapeMismatch):
            hspace.transform(np.zeros((8, 8)), Grid(1, 8))


class TestNorms:
    def test_single_mode(self) -> None:
        """
        `‖2e^{3ix}‖_ρ = 2⟨3⟩ = 2√10`.
        """
        field = SpectralField.mode(Grid(1, 8), (3,), 2.0)

        assert hspace.hnorm(field, Power(1.0)) == pytest.approx(2 * math.sqrt(10))

    def test_zero_order_is_l2(self) -> None:
        field = testing.random_field(Grid(2, 8), testing.rng_for(1))

        assert hspace.hnorm(field, Power(0.0)) == pytest.approx(hspace.parseval_l2(field))

    def test_monotone_in_parameter(self) -> None:
        """
        A larger parameter gives a larger norm.
        """
        field = testing.random_field(Grid(1, 16), testing.rng_for(2))

        assert hspace.hnorm(field, Power(1.0)) < hspace.hnorm(field, PowerLog(1.0, 1.0))

    def test_weight_cached(self) -> None:
        grid = Grid(2, 8)

        assert hspace.weight(Power(1.0), grid) is hspace.weight(Power(1.0), grid)

    def test_vector_norm(self) -> None:
        """
        The direct-sum norm weights each component by its own parameter.
        """
        grid = Grid(1, 8)
        u = testing.single_mode(grid, (1,), p=2, component=1, value=3.0)

        norm = hspace.vector_hnorm(u, [Power(5.0), Power(2.0)])

        assert norm == pytest.approx(3 * 2.0)

    @pytest.mark.parametrize("param", [Power(-1.0), PowerLog(1.0, 2.0), PowerSinLog(0.5, 1.0)])
    def test_norm_axioms(self, param: ROParam) -> None:
        """
        `‖cw‖_φ = |c|·‖w‖_φ` and `‖v + w‖_φ ≤ ‖v‖_φ + ‖w‖_φ`.
        """
        grid = Grid(2, 16)
        v = testing.random_field(grid, testing.rng_for(3, 0))
        w = testing.random_field(grid, testing.rng_for(3, 1))

        assert hspace.hnorm(v * (2 - 3j), param) == pytest.approx(math.sqrt(13) * hspace.hnorm(v, param))
        assert hspace.hnorm(v + w, param) <= hspace.hnorm(v, param) + hspace.hnorm(w, param)

    def test_sandwich(self) -> None:
        """
        `‖w‖_(s0) ≤ lower·‖w‖_φ` and `‖w‖_φ ≤ upper·‖w‖_(s1)` with the constants over the lattice.
        """
        grid = Grid(2, 16)
        phi = PowerLog(1.0, 2.0)
        constants = roparam.sandwich_constants(phi, 0.5, 1.5, np.unique(grid.bracket))

        for trial in range(10):
            w = testing.random_field(grid, testing.rng_for(4, trial), shaped=trial % 2 == 0)
            norm = hspace.hnorm(w, phi)
            assert hspace.hnorm(w, Power(0.5)) <= constants.lower * norm * (1 + 1e-12)
            assert norm <= constants.upper * hspace.hnorm(w, Power(1.5)) * (1 + 1e-12)

    def test_vector_norm_parameter_count(self) -> None:
        u = VectorField.zeros(Grid(1, 8), 2)

        with pytest.raises(ShapeMismatch):
            hspace.vector_hnorm(u, [Power(0.0)])


class TestDuality:
    def test_sesquilinear(self) -> None:
        """
        The pairing is linear in the first slot and antilinear in the second.
        """
        grid = Grid(1, 8)
        u = testing.random_field(grid, testing.rng_for(3))
        v = testing.random_field(grid, testing.rng_for(4))
        pair = hspace.duality_pair(u, v)

        assert hspace.duality_pair(1j * u, v) == pytest.approx(1j * pair)
        assert hspace.duality_pair(u, 1j * v) == pytest.approx(-1j * pair)
        assert hspace.duality_pair(v, u) == pytest.approx(pair.conjugate())

    def test_dual_norm_bound(self) -> None:
        """
        `|(u, v)| ≤ ‖u‖_φ ‖v‖_(1/φ)`.
        """
        grid = Grid(2, 8)
        u = testing.random_field(grid, testing.rng_for(5))
        v = testing.random_field(grid, testing.rng_for(6))

        bound = hspace.hnorm(u, Power(1.5)) * hspace.hnorm(v, Power(-1.5))

        assert abs(hspace.duality_pair(u, v)) <= bound

    def test_vector_pair(self) -> None:
        grid = Grid(1, 8)
        u = testing.single_mode(grid, (2,), p=2, component=1, value=2.0)
        v = testing.single_mode(grid, (2,), p=2, component=1, value=1j)

        assert hspace.vector_pair(u, v) == pytest.approx(-2j)


class TestPadRestrict:
    def test_pad_keeps_coefficients(self) -> None:
        """
        Padding places each coefficient at the same frequency on the finer lattice.
        """
        coarse = Grid(2, 4)
        field = SpectralField.mode(coarse, (-2, 1), 3.0)

        padded = hspace.pad(field, Grid(2, 8))

        assert padded.coeffs[padded.grid.index_of((-2, 1))] == 3.0
        assert hspace.parseval_l2(padded) == pytest.approx(3.0)

    def test_restrict_inverts_pad(self) -> None:
        coarse = Grid(2, 8)
        field = testing.random_field(coarse, testing.rng_for(7))

        round_trip = hspace.restrict(hspace.pad(field, Grid(2, 16)), coarse)

        np.testing.assert_array_equal(round_trip.coeffs, field.coeffs)

    def test_restrict_drops_high_modes(self) -> None:
        field = SpectralField.mode(Grid(1, 16), (5,))

        assert hspace.parseval_l2(hspace.restrict(field, Grid(1, 8))) == 0.0

    def test_direction_checked(self) -> None:
        with pytest.raises(GridMismatch):
            hspace.pad(SpectralField.zeros(Grid(1, 16)), Grid(1, 8))
        with pytest.raises(GridMismatch):
            hspace.restrict(SpectralField.zeros(Grid(1, 8)), Grid(1, 16))


class TestMultiply:
    def test_cosine_squared(self) -> None:
        """
        `cos² x = 1/2 + cos(2x)/2`, exactly, on the doubled grid.
        """
        grid = Grid(1, 4)
        cosine = hspace.transform(np.cos(grid.points[..., 0]), grid)

        product = hspace.multiply(cosine, cosine)

        fine = product.grid
        assert fine == Grid(1, 8)
        assert product.coeffs[fine.index_of((0,))] == pytest.approx(0.5)
        assert product.coeffs[fine.index_of((2,))] == pytest.approx(0.25)
        assert product.coeffs[fine.index_of((-2,))] == pytest.approx(0.25)

    def test_no_aliasing(self) -> None:
        """
        Modes near the edge of the cube multiply without folding back.
        """
        grid = Grid(1, 8)
        a = SpectralField.mode(grid, (3,))
        b = SpectralField.mode(grid, (3,))

        product = hspace.multiply(a, b)

        assert product.coeffs[product.grid.index_of((6,))] == pytest.approx(1.0)
        assert hspace.parseval_l2(product) == pytest.approx(1.0)

    def test_localized_norm(self) -> None:
        """
        A constant cutoff reproduces the global norm.
        """
        grid = Grid(2, 8)
        w = testing.random_field(grid, testing.rng_for(8))
        chi = SpectralField.mode(grid, (0, 0))

        localized = hspace.localized_norm(w, chi, Power(1.0))

        assert localized == pytest.approx(hspace.hnorm(w, Power(1.0)))

    @pytest.mark.parametrize("s", [-1.0, 1.0])
    def test_localized_norm_bounded(self, s: float) -> None:
        """
        `‖χw‖_s ≤ K‖w‖_s` with `K = 2^(|s|/2) Σ|χ̂(η)|⟨η⟩^|s|`, and `K` settles on refinement.
        """
        fine = testing.random_field(Grid(1, 64), testing.rng_for(9))
        bounds = []
        for size in (16, 32, 64):
            grid = Grid(1, size)
            chi = _cutoff(grid, 1.5)
            bound = 2 ** (abs(s) / 2) * float(np.sum(np.abs(chi.coeffs) * grid.bracket ** abs(s)))
            w = hspace.restrict(fine, grid)

            localized = hspace.localized_norm(w, chi, Power(s))

            assert localized <= bound * hspace.hnorm(w, Power(s)) * (1 + 1e-12)
            bounds.append(bound)
        assert max(bounds) <= 1.1 * min(bounds)

    def test_localized_norm_complex_cutoff(self) -> None:
        grid = Grid(1, 8)
        w = SpectralField.mode(grid, (0,))

        with pytest.raises(PreconditionViolation):
            hspace.localized_norm(w, SpectralField.mode(grid, (1,)), Power(0.0))


class TestEmbedding:
    def test_above_threshold(self) -> None:
        """
        `H^1 ⊂ C⁰` in one dimension, decided from the indices.
        """
        report = hspace.embedding_constant(Power(1.0), 0, Grid(1, 16))

        assert report.verdict is Verdict.PASS
        assert report["method"] == "indices"
        expected = math.sqrt(float(np.sum(1 / (1 + np.fft.fftfreq(16, 1 / 16) ** 2))))
        assert report["C"] == pytest.approx(expected)

    def test_below_threshold(self) -> None:
        report = hspace.embedding_constant(Power(1.0), 1, Grid(1, 16))

        assert report.verdict is Verdict.FAIL
        assert report["method"] == "indices"

    @pytest.mark.parametrize("lam", [0, 1])
    @pytest.mark.parametrize("n", [1, 2])
    @pytest.mark.parametrize("s", [quarter / 4 for quarter in range(-4, 17)])
    def test_power_threshold(self, s: float, n: int, lam: int) -> None:
        """
        `H^s ⊂ C^λ_b` on the `n`-torus exactly when `s > λ + n/2`.
        """
        report = hspace.embedding_constant(Power(s), lam, Grid(n, 16))

        expected = Verdict.PASS if s > lam + n / 2 else Verdict.FAIL
        assert report.verdict is expected
        assert report["converges"] == (s > lam + n / 2)

    def test_boundary_power(self) -> None:
        """
        At `σ = λ + n/2` the power weight fails by the exact log test.
        """
        report = hspace.embedding_constant(Power(0.5), 0, Grid(1, 16))

        assert report.verdict is Verdict.FAIL
        assert report["method"] == "log-exact"

    @pytest.mark.parametrize(("r", "verdict"), [(1.0, Verdict.PASS), (0.5, Verdict.FAIL)])
    def test_boundary_powerlog(self, r: float, verdict: Verdict) -> None:
        """
        On the boundary a log power `r` converges exactly when `2r > 1`.
        """
        report = hspace.embedding_constant(PowerLog(0.5, r), 0, Grid(1, 16))

        assert report.verdict is verdict

    def test_boundary_oscillating(self) -> None:
        """
        An oscillating weight on the boundary cannot be decided by the integral test.
        """
        report = hspace.embedding_constant(PowerSinLog(0.5, 1.0), 0, Grid(1, 16))

        assert report.verdict is Verdict.INCONCLUSIVE
        assert report["method"] == "integral-test"
        assert report["converges"] is None

    def test_bound_holds(self) -> None:
        """
        `sup |D^μ w| ≤ C‖w‖_ω` for fields on the grid.
        """
        grid = Grid(2, 16)
        omega = Power(3.5)
        report = hspace.embedding_constant(omega, 1, grid)

        for trial in range(5):
            w = testing.random_field(grid, testing.rng_for(9, trial))
            assert hspace.sup_derivative_norm(w, 1) <= report["C"] * hspace.hnorm(w, omega)

    def test_negative_order(self) -> None:
        with pytest.raises(PreconditionViolation):
            hspace.embedding_constant(Power(1.0), -1, Grid(1, 8))

    def test_sup_derivative_norm(self) -> None:
        """
        `2e^{3ix}` has sup 2 and derivative sup 6.
        """
        field = SpectralField.mode(Grid(1, 8), (3,), 2.0)

        assert hspace.sup_derivative_norm(field, 0) == pytest.approx(2.0)
        assert hspace.sup_derivative_norm(field, 1) == pytest.approx(6.0)


class TestFieldFiles:
    @pytest.mark.parametrize("dtype", ["complex128", "complex64"])
    def test_save_and_load(self, tmp_path: Path, dtype: str) -> None:
        """
        Fields survive a save and load, with a manifest alongside.
        """
        grid = Grid(2, 8)
        u = testing.random_vector_field(grid, 2, testing.rng_for(10))
        path = tmp_path / "u.bin"

        hspace.save_fields(path, u, dtype=dtype)  # type: ignore[arg-type]
        loaded = hspace.load_fields(path)

        assert (tmp_path / "u.json").exists()
        assert loaded.grid == grid
        np.testing.assert_allclose(loaded.stack(), u.stack(), rtol=1e-6)

    def test_header_mismatch(self, tmp_path: Path) -> None:
        """
        A manifest which disagrees with the binary header is rejected.
        """
        path = tmp_path / "u.bin"
        hspace.save_fields(path, VectorField.zeros(Grid(1, 8), 1))
        manifest = path.with_suffix(".json")
        manifest.write_text(manifest.read_text().replace('"p": 1', '"p": 2'))

        with pytest.raises(ShapeMismatch):
            hspace.load_fields(path)

    def test_truncated(self, tmp_path: Path) -> None:
        path = tmp_path / "u.bin"
        hspace.save_fields(path, VectorField.zeros(Grid(1, 8), 1))
        path.write_bytes(path.read_bytes()[:-16])

        with pytest.raises(ShapeMismatch):
            hspace.load_fields(path)
