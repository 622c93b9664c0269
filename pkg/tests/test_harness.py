from __future__ import annotations

import math

import numpy as np
import pytest

from hormander_spectral import harness, testing
from hormander_spectral.dnsystem import Coefficient, DiffOp, DNNumbers, DNSystem, apply_system
from hormander_spectral.errors import PreconditionViolation, UnsolvableRightHandSide
from hormander_spectral.hspace import Grid, SpectralField, VectorField, inverse, vector_hnorm
from hormander_spectral.report import Verdict
from hormander_spectral.roparam import Power, PowerLog, PowerSinLog


GRIDS_2D = [Grid(2, 16), Grid(2, 32)]
GRIDS_1D = [Grid(1, 16), Grid(1, 32), Grid(1, 64)]
SWEEP_GRIDS_2D = [Grid(2, 16), Grid(2, 32), Grid(2, 64)]
BATTERY = [Power(-1.5), Power(1.5), PowerLog(0.0, 1.0), PowerLog(2.0, 3.0), PowerSinLog(0.0, 1.0)]


def _variable() -> DNSystem:
    op = DiffOp.from_terms(
        {
            (2,): Coefficient.fourier({(0,): 2.0, (1,): 0.5, (-1,): 0.5}, 1),
            (0,): 1.0,
        },
        1,
    )
    return DNSystem(1, 1, ((op,),), DNNumbers((0.0,), (2.0,)))


class TestApriori:
    def test_one_minus_laplace(self, one_minus_laplace: DNSystem) -> None:
        """
        `B = (1 + |ξ|²)⁻¹` has norm 1 and `T₁ = 0`, so `c_pred = 1`.
        """
        report = harness.apriori_check(one_minus_laplace, Power(0.0), 1.0, trials=20, grids=GRIDS_2D)

        assert report.verdict is Verdict.PASS
        assert report["c_pred"] == pytest.approx(1.0)
        assert 0.5 < report["c_emp"] < 1.0
        grid_report = report.children[0]
        assert grid_report["T1_norm"] == 0.0
        assert grid_report["R"] == 0.0

    def test_laplace(self, laplace: DNSystem) -> None:
        """
        The origin is cut off at `R = 2.4`, giving `‖B‖ = 6/5` and `‖T₁‖ = ⟨(2, 0)⟩^σ`.
        """
        report = harness.apriori_check(laplace, Power(0.0), 1.0, trials=20, grids=GRIDS_2D)

        assert report.verdict is Verdict.PASS
        grid_report = report.children[0]
        assert grid_report["R"] == pytest.approx(2.4)
        assert grid_report["B_norm"] == pytest.approx(6 / 5)
        assert grid_report["T1_norm"] == pytest.approx(math.sqrt(5))
        assert report["c_pred"] == pytest.approx(math.sqrt(5))

    def test_cauchy_riemann(self, cauchy_riemann: DNSystem) -> None:
        report = harness.apriori_check(cauchy_riemann, PowerLog(0.5, 1.0), 0.5, trials=20, grids=GRIDS_2D)

        assert report.verdict is Verdict.PASS
        assert report.children[0]["B_norm"] == pytest.approx(math.sqrt(6 / 5), rel=0.05)

    def test_mixed_orders(self, mixed_dn: DNSystem) -> None:
        report = harness.apriori_check(mixed_dn, PowerSinLog(1.0, 0.5), 1.0, trials=20, grids=GRIDS_2D)

        assert report.verdict is Verdict.PASS
        assert report.children[-1].name == "apriori_stability"

    def test_drifting_constant_fails(self, laplace: DNSystem, monkeypatch: pytest.MonkeyPatch) -> None:
        """
        A `c_emp` that keeps growing on refinement fails even below `c_pred`.
        """

        def weakened(sys: DNSystem, u: VectorField) -> VectorField:
            f = apply_system(sys, u)
            scale = 0.5 if u.grid.N > GRIDS_2D[0].N else 1.0
            return VectorField.from_array(u.grid, scale * f.stack())

        monkeypatch.setattr(harness, "apply_system", weakened)

        report = harness.apriori_check(laplace, Power(0.0), 1.0, trials=20, grids=GRIDS_2D)

        assert report.verdict is Verdict.FAIL
        stability = report.children[-1]
        assert stability.name == "apriori_stability"
        assert stability["c_emp_stable"] is False
        assert stability["c_pred_stable"] is True
        assert max(stability["c_emp"]) < report["c_pred"]

    @pytest.mark.slow
    @pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0])
    def test_sweep(self, elliptic_system: DNSystem, sigma: float) -> None:
        """
        The estimate holds with a stable constant for every parameter in the battery.
        """
        for phi in BATTERY:
            report = harness.apriori_check(elliptic_system, phi, sigma, trials=25, grids=SWEEP_GRIDS_2D)

            assert report.verdict is Verdict.PASS, repr(phi)
            assert report["c_emp"] <= report["c_pred"] * (1 + 1e-8)

    def test_adjoint(self, mixed_dn: DNSystem) -> None:
        """
        The dual estimate for `A⁺` with `1/φ` holds as well.
        """
        report = harness.apriori_check(mixed_dn, Power(1.0), 1.0, trials=20, grids=GRIDS_2D, adjoint=True)

        assert report.verdict is Verdict.PASS
        assert report.config["adjoint"] is True

    def test_seeded(self, one_minus_laplace: DNSystem) -> None:
        """
        Reports depend only on the seed, not on the number of workers.
        """
        first = harness.apriori_check(one_minus_laplace, Power(0.0), 1.0, trials=8, grids=GRIDS_2D, seed=3)
        second = harness.apriori_check(one_minus_laplace, Power(0.0), 1.0, trials=8, grids=GRIDS_2D, seed=3)

        assert first.to_json() == second.to_json()

    def test_workers(self, one_minus_laplace: DNSystem, monkeypatch: pytest.MonkeyPatch) -> None:
        serial = harness.apriori_check(one_minus_laplace, Power(0.0), 1.0, trials=8, grids=GRIDS_2D)
        monkeypatch.setenv("HORMANDER_WORKERS", "3")

        threaded = harness.apriori_check(one_minus_laplace, Power(0.0), 1.0, trials=8, grids=GRIDS_2D)

        assert threaded.to_json() == serial.to_json()

    def test_variable_coefficients(self) -> None:
        """
        Without a parametrix constant the check only reports `c_emp`.
        """
        report = harness.apriori_check(_variable(), Power(0.0), 1.0, trials=8, grids=GRIDS_1D[:2])

        assert report.verdict is Verdict.INCONCLUSIVE
        assert report["c_pred"] is None
        assert report["c_emp"] > 0

    @pytest.mark.parametrize(("sigma", "trials"), [(0.0, 10), (-1.0, 10), (1.0, 0)])
    def test_preconditions(self, one_minus_laplace: DNSystem, sigma: float, trials: int) -> None:
        with pytest.raises(PreconditionViolation):
            harness.apriori_check(one_minus_laplace, Power(0.0), sigma, trials=trials)

    def test_solves_dn_numbers(self, mixed_dn: DNSystem) -> None:
        """
        Systems without DN numbers get them computed.
        """
        bare = DNSystem(mixed_dn.p, mixed_dn.n, mixed_dn.ops)

        report = harness.apriori_check(bare, Power(0.0), 1.0, trials=4, grids=GRIDS_2D[:1])

        assert report.verdict is Verdict.PASS


class TestShiftCovariance:
    def test_one_minus_laplace(self, one_minus_laplace: DNSystem) -> None:
        """
        Reindexing the DN numbers with `φρ^c` describes the same spaces.
        """
        report = harness.shift_covariance(one_minus_laplace, Power(0.0), 1.0, c=1.0, trials=8, grids=GRIDS_2D)

        assert report.verdict is Verdict.PASS
        assert report["c_emp_deviation"] == pytest.approx(0.0, abs=1e-12)
        assert report["indices"] == [0, 0]

    def test_mixed(self, mixed_dn: DNSystem) -> None:
        report = harness.shift_covariance(mixed_dn, PowerLog(0.0, 1.0), 0.5, c=-2.0, trials=8, grids=GRIDS_2D)

        assert report.verdict is Verdict.PASS


class TestFredholm:
    @pytest.mark.parametrize(
        ("name", "dims", "modes"),
        [
            ("one_minus_laplace", (0, 0), []),
            ("laplace", (1, 1), [[0, 0]]),
            ("cauchy_riemann", (2, 2), [[0, 0]]),
            ("mixed_dn", (0, 0), []),
            ("diag_laplace", (1, 1), [[0, 0]]),
        ],
    )
    def test_kernels(
        self,
        request: pytest.FixtureRequest,
        name: str,
        dims: tuple[int, int],
        modes: list[list[int]],
    ) -> None:
        sys = request.getfixturevalue(name)

        analysis = harness.fredholm_analysis(sys, Power(0.0))
        report = harness.fredholm_report(analysis)

        assert analysis.dims == dims
        assert analysis.index == 0
        assert report.verdict is Verdict.PASS
        assert report["kernel_modes"] == modes
        assert report["residual"] <= 1e-12

    def test_orthonormal_bases(self, cauchy_riemann: DNSystem) -> None:
        analysis = harness.fredholm_analysis(cauchy_riemann, Power(0.0))

        gram = harness.Projector(analysis.N_basis).gram()

        np.testing.assert_allclose(gram, np.eye(2), atol=1e-12)

    def test_variable_coefficients(self) -> None:
        with pytest.raises(PreconditionViolation):
            harness.fredholm_analysis(_variable(), Power(0.0))

    def test_phi_independence(self, laplace: DNSystem) -> None:
        report = harness.kernel_phi_independence(
            laplace, [Power(0.0), Power(2.0), PowerLog(1.0, 1.0), PowerSinLog(-1.0, 0.5)]
        )

        assert report.verdict is Verdict.PASS
        assert report["indices"] == [0, 0, 0, 0]

    @pytest.mark.parametrize("name", ["laplace", "cauchy_riemann", "mixed_dn", "diag_laplace"])
    def test_adjoint_consistency(self, request: pytest.FixtureRequest, name: str) -> None:
        """
        `N⁺` of `A` is the kernel of the formal adjoint.
        """
        report = harness.adjoint_consistency(request.getfixturevalue(name))

        assert report.verdict is Verdict.PASS


class TestSolvability:
    def test_projectors(self, elliptic_system: DNSystem) -> None:
        analysis = harness.fredholm_analysis(elliptic_system, Power(0.0), Grid(2, 8))

        report = harness.verify_projectors(analysis, trials=10)

        assert report.verdict is Verdict.PASS

    def test_biconditional(self, elliptic_system: DNSystem) -> None:
        """
        `Au = f` is solvable exactly when `f ⟂ N⁺`.
        """
        analysis = harness.fredholm_analysis(elliptic_system, Power(0.0), Grid(2, 8))

        report = harness.solvability_biconditional(analysis, trials=10)

        assert report.verdict is Verdict.PASS
        assert report["all_refused"]

    @pytest.mark.parametrize(
        "name", ["one_minus_laplace", "laplace", "cauchy_riemann", "mixed_dn", "diag_laplace"]
    )
    def test_biconditional_hundred_fields(self, request: pytest.FixtureRequest, name: str) -> None:
        sys = request.getfixturevalue(name)
        analysis = harness.fredholm_analysis(sys, Power(0.0), Grid(2, 16))

        report = harness.solvability_biconditional(analysis, trials=100)

        assert report.verdict is Verdict.PASS
        assert report.config["trials"] == 100
        assert report["max_residual"] <= 1e-10
        assert report["all_refused"]

    def test_biconditional_trivial_cokernel(self, one_minus_laplace: DNSystem) -> None:
        analysis = harness.fredholm_analysis(one_minus_laplace, Power(0.0), Grid(2, 8))

        report = harness.solvability_biconditional(analysis, trials=5)

        assert report["min_defect"] is None

    def test_refuses_constant(self, laplace: DNSystem) -> None:
        """
        `−Δu = 1` has no periodic solution.
        """
        grid = Grid(2, 8)
        analysis = harness.fredholm_analysis(laplace, Power(0.0), grid)
        f = testing.single_mode(grid, (0, 0))

        with pytest.raises(UnsolvableRightHandSide) as exc_info:
            harness.solve(analysis, f)

        assert [abs(d) for d in exc_info.value.defects] == [pytest.approx(1.0)]

    def test_projects_on_request(self, laplace: DNSystem) -> None:
        """
        With `project=True` the constant part is removed and the rest solved.
        """
        grid = Grid(2, 8)
        analysis = harness.fredholm_analysis(laplace, Power(0.0), grid)
        f = testing.single_mode(grid, (0, 0)) + testing.single_mode(grid, (1, 0))

        u = harness.solve(analysis, f, project=True)

        residual = apply_system(laplace, u) - testing.single_mode(grid, (1, 0))
        assert vector_hnorm(residual, [Power(0.0)]) <= 1e-12
        assert [abs(d) for d in harness.solvability_defects(analysis, f)] == [pytest.approx(1.0)]

    def test_solution_orthogonal_to_kernel(self, laplace: DNSystem) -> None:
        grid = Grid(2, 8)
        analysis = harness.fredholm_analysis(laplace, Power(0.0), grid)
        f = harness.projectors(analysis).Pplus(testing.random_vector_field(grid, 1, testing.rng_for(0)))

        u = harness.solve(analysis, f)

        assert u[0].coeffs[0, 0] == 0

    def test_admissible_unchanged(self, laplace: DNSystem) -> None:
        grid = Grid(2, 8)
        analysis = harness.fredholm_analysis(laplace, Power(0.0), grid)
        f = testing.single_mode(grid, (1, 1))

        assert harness.admissible_rhs(analysis, f) is f

    def test_trivial_projector(self) -> None:
        u = VectorField.zeros(Grid(1, 8), 1)

        assert harness.Projector(())(u) is u


class TestRegularity:
    def test_one_minus_laplace(self, one_minus_laplace_circle: DNSystem) -> None:
        """
        `u = (1 − Δ)⁻¹f` has exactly the target norm of `f` in the source space.
        """
        report = harness.regularity_check(one_minus_laplace_circle, Power(0.0), GRIDS_1D)

        global_report = report.children[0]
        assert global_report.name == "regularity_global"
        assert global_report.verdict is Verdict.PASS
        assert report["ratios"] == [pytest.approx(1.0)] * 3
        assert report["u_norms"] == sorted(report["u_norms"])

    @pytest.mark.parametrize(
        ("name", "project"),
        [
            ("one_minus_laplace", False),
            ("laplace", True),
            ("cauchy_riemann", True),
            ("mixed_dn", False),
        ],
    )
    def test_localized(self, request: pytest.FixtureRequest, name: str, project: bool) -> None:  # noqa: FBT001
        """
        Remainders rough away from the cutoffs leave the localized norms bounded
        while the global norm of the solution grows.
        """
        sys = request.getfixturevalue(name)

        report = harness.regularity_check(sys, Power(0.0), GRIDS_2D, project=project)

        localized = report.children[1]
        assert localized.name == "regularity_localized"
        assert localized.verdict is Verdict.PASS
        assert len(localized["localized_norms"]) == len(harness.CUTOFF_RADII)
        coarse, fine = localized["global_norms"]
        assert fine > coarse

    def test_localized_right_hand_side(self) -> None:
        """
        The smooth data is cut off away from the bump around the cutoffs.
        """
        grid = Grid(1, 64)
        u = VectorField((SpectralField.mode(grid, (1,)),))

        local = harness._cut_off(u, np.pi / 2, harness.LOCAL_RADIUS)  # noqa: SLF001

        samples = np.abs(inverse(local[0]))
        distance = np.abs(np.angle(np.exp(1j * (grid.points[..., 0] - np.pi / 2))))
        assert np.max(samples[distance > harness.LOCAL_RADIUS]) < 1e-2 * np.max(samples)
        assert samples[np.argmin(distance)] == pytest.approx(np.max(samples), rel=0.05)

    def test_global_only(self, one_minus_laplace: DNSystem) -> None:
        report = harness.regularity_check(one_minus_laplace, Power(1.0), GRIDS_2D, localized=False)

        assert [child.name for child in report.children] == ["regularity_global"]
        assert report.verdict is Verdict.PASS

    def test_needs_projection(self, laplace: DNSystem) -> None:
        """
        Calibrated data has a mean, which `−Δ` cannot reach.
        """
        with pytest.raises(UnsolvableRightHandSide):
            harness.regularity_check(laplace, Power(0.0), GRIDS_2D, localized=False)

    def test_projected(self, laplace: DNSystem) -> None:
        report = harness.regularity_check(laplace, Power(0.0), GRIDS_2D, project=True, localized=False)

        assert report.verdict is Verdict.PASS
        assert all(ratio >= 1.0 for ratio in report["ratios"])


class TestContinuity:
    @pytest.mark.parametrize("lam", [0, 1])
    def test_embedding_holds(self, one_minus_laplace_circle: DNSystem, lam: int) -> None:
        """
        Solutions in `H²` of the circle are `C¹`.
        """
        report = harness.continuity_check(one_minus_laplace_circle, Power(0.0), lam, grids=GRIDS_1D)

        assert report.verdict is Verdict.PASS
        assert report["converges"] is True
        assert report.children[-1].name == "derivative_bound"

    def test_embedding_fails(self, one_minus_laplace_circle: DNSystem) -> None:
        """
        `H²` of the circle is not in `C²`; the discrete constant grows.
        """
        report = harness.continuity_check(one_minus_laplace_circle, Power(0.0), 2, grids=GRIDS_1D)

        assert report.verdict is Verdict.FAIL
        assert report["converges"] is False
        divergence = report.children[-1]
        assert divergence.name == "constant_divergence"
        assert divergence.verdict is Verdict.PASS

    def test_boundary(self, one_minus_laplace_circle: DNSystem) -> None:
        """
        On the boundary an oscillating parameter leaves the verdict open.
        """
        report = harness.continuity_check(
            one_minus_laplace_circle, PowerSinLog(-1.5, 1.0), 0, grids=GRIDS_1D[:2]
        )

        assert report.verdict is Verdict.INCONCLUSIVE
        assert report["converges"] is None

    def test_component(self, mixed_dn: DNSystem) -> None:
        report = harness.continuity_check(mixed_dn, Power(1.0), 0, k=1, grids=GRIDS_2D)

        assert report.config["component"] == 1
        assert report.verdict is Verdict.PASS

    def test_component_range(self, mixed_dn: DNSystem) -> None:
        with pytest.raises(PreconditionViolation):
            harness.continuity_check(mixed_dn, Power(0.0), 0, k=2)
