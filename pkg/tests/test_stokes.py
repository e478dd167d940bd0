"""Transformed Stokes solver: exactness, convergence, load and lifting."""

import numpy as np
import pytest

from _manufactured import manufactured_problem
from beamfluid.errors import InvalidDataError, ResolutionError
from beamfluid.fields import (
    PeriodicGrid1D,
    ReferenceGrid2D,
    ScalarField1D,
    ScalarField2D,
    VectorField2D,
    integrate,
    integrate_2d,
)
from beamfluid.geometry import build_deformation
from beamfluid.inequalities import random_positive_fields
from beamfluid.stokes import (
    StokesProblem,
    divergence_lifting,
    divergence_lifting_residual,
    empirical_elliptic_constant,
    physical_l2_norm,
    solve_stokes,
    surface_load,
)


def flat_setup(n=32, nz=17, height=1.0):
    gx = PeriodicGrid1D(1.0, n)
    grid = ReferenceGrid2D(gx, nz)
    map_ = build_deformation(ScalarField1D(gx, np.full(n, height)))
    zeros = np.zeros(grid.shape)
    return gx, grid, map_, zeros


def problem_of(map_, grid, f1, f2, g, etadot, mu=1.0):
    gx = grid.grid_x
    return StokesProblem(
        map=map_,
        f=VectorField2D(grid, f1, f2),
        g=ScalarField2D(grid, g),
        etadot=ScalarField1D(gx, etadot),
        mu=mu,
    )


class TestValidation:
    def test_incompatible_data_rejected(self):
        gx, grid, map_, zeros = flat_setup()
        with pytest.raises(InvalidDataError):
            problem_of(map_, grid, zeros, zeros, zeros, np.full(gx.n, 1.0))

    def test_unresolvable_height_rejected(self):
        gx, grid, map_, zeros = flat_setup()
        squeezed = build_deformation(ScalarField1D(gx, np.full(gx.n, 1e-3)))
        prob = problem_of(squeezed, grid, zeros, zeros, zeros, np.zeros(gx.n))
        with pytest.raises(ResolutionError):
            solve_stokes(prob)

    def test_nonpositive_viscosity_rejected(self):
        gx, grid, map_, zeros = flat_setup()
        with pytest.raises(InvalidDataError):
            problem_of(map_, grid, zeros, zeros, zeros, np.zeros(gx.n), mu=0.0)


class TestFlatSolutions:
    def test_rest_state(self):
        gx, grid, map_, zeros = flat_setup()
        sol = solve_stokes(problem_of(map_, grid, zeros, zeros, zeros, np.zeros(gx.n)))
        assert np.max(np.abs(sol.u.u1)) == 0.0
        assert np.max(np.abs(sol.u.u2)) == 0.0
        assert np.max(np.abs(sol.p0_cells)) < 1e-13
        assert sol.c == pytest.approx(0.0, abs=1e-13)

    def test_poiseuille_exact(self):
        gx, grid, map_, zeros = flat_setup(n=32, nz=17)
        sol = solve_stokes(problem_of(map_, grid, np.ones(grid.shape), zeros, zeros, np.zeros(gx.n)))
        ustar = 0.5 * grid.z_nodes * (1.0 - grid.z_nodes)
        l2 = np.sqrt(integrate_2d((sol.u.u1 - ustar[None, :]) ** 2 + sol.u.u2**2, grid))
        assert l2 < 1e-12
        assert np.max(np.abs(sol.p0_cells)) < 1e-11

    def test_poiseuille_load_and_gauge(self):
        gx, grid, map_, zeros = flat_setup(n=32, nz=17)
        sol = solve_stokes(problem_of(map_, grid, np.ones(grid.shape), zeros, zeros, np.zeros(gx.n)))
        phi, c = surface_load(sol, map_)
        assert np.max(np.abs(phi.values)) < 1e-10
        assert c == pytest.approx(0.0, abs=1e-11)

    def test_boundary_conditions_bitwise(self):
        gx, grid, map_, zeros = flat_setup()
        eta = 0.3 * np.sin(2 * np.pi * gx.nodes)
        sol = solve_stokes(problem_of(map_, grid, zeros, zeros, zeros, eta))
        assert np.array_equal(sol.u.u1[:, 0], np.zeros(gx.n))
        assert np.array_equal(sol.u.u2[:, 0], np.zeros(gx.n))
        assert np.array_equal(sol.u.u1[:, -1], np.zeros(gx.n))
        assert np.array_equal(sol.u.u2[:, -1], eta)


class TestManufactured:
    def test_convergence_second_order(self):
        errs = []
        for n in (32, 64):
            problem, exact, _, grid = manufactured_problem(n, n // 2 + 1)
            sol = solve_stokes(problem)
            errs.append(
                np.sqrt(
                    integrate_2d(
                        (sol.u.u1 - exact["u1"]) ** 2 + (sol.u.u2 - exact["u2"]) ** 2, grid
                    )
                )
            )
        assert np.log2(errs[0] / errs[1]) > 1.8

    def test_pressure_recovered(self):
        problem, exact, _, _ = manufactured_problem(64, 33)
        sol = solve_stokes(problem)
        err = np.sqrt(np.mean((sol.p0_cells - exact["p_cells"]) ** 2))
        assert err < 5e-3

    def test_divergence_residual_solver_precision(self):
        problem, _, _, _ = manufactured_problem(64, 33)
        sol = solve_stokes(problem)
        assert sol.divergence_residual < 1e-8

    def test_surface_load_matches_analytic(self):
        # oracle: symbolic boundary stress of the manufactured fields
        errs = []
        for n in (32, 64):
            problem, exact, map_, _ = manufactured_problem(n, n // 2 + 1)
            sol = solve_stokes(problem)
            phi, c = surface_load(sol, map_)
            phi_star = exact["phi_raw"] - np.mean(exact["phi_raw"])
            errs.append(np.max(np.abs(phi.values - phi_star)))
        assert errs[1] < errs[0] / 1.7
        assert errs[1] < 0.1

    def test_pressure_constant_sign(self):
        # c = (1/L) int e2 . sigma(u, p0) n' = -(mean of the raw load)
        problem, exact, map_, _ = manufactured_problem(64, 33)
        sol = solve_stokes(problem)
        _, c = surface_load(sol, map_)
        c_star = -np.mean(exact["phi_raw"])
        assert c == pytest.approx(c_star, abs=5e-3)

    def test_load_zero_mean(self):
        problem, _, map_, _ = manufactured_problem(32, 17)
        sol = solve_stokes(problem)
        phi, _ = surface_load(sol, map_)
        assert abs(integrate(phi)) < 1e-10

    def test_pressure_gauge_over_physical_domain(self):
        problem, _, map_, grid = manufactured_problem(32, 17)
        sol = solve_stokes(problem)
        h = map_.h.values
        hc = 0.5 * (h + np.roll(h, -1))
        weighted = np.sum(sol.p0_cells * hc[:, None]) / sol.p0_cells.size
        assert abs(weighted) < 1e-10


class TestDivergenceLifting:
    def test_zero_data(self):
        gx, grid, map_, zeros = flat_setup()
        w = divergence_lifting(ScalarField2D(grid, zeros), map_)
        assert np.max(np.abs(w.u1)) == 0.0 and np.max(np.abs(w.u2)) == 0.0

    def test_nonzero_mean_rejected(self):
        gx, grid, map_, _ = flat_setup()
        with pytest.raises(InvalidDataError):
            divergence_lifting(ScalarField2D(grid, np.ones(grid.shape)), map_)

    def test_single_mode_flat(self):
        gx, grid, map_, _ = flat_setup(n=128, nz=65)
        chi = np.sin(2 * np.pi * gx.nodes)[:, None] * np.ones(grid.n_z)[None, :]
        field = ScalarField2D(grid, chi)
        w = divergence_lifting(field, map_)
        assert np.max(np.abs(w.u1[:, 0])) < 1e-13 and np.max(np.abs(w.u1[:, -1])) < 1e-13
        assert np.max(np.abs(w.u2[:, 0])) < 1e-13 and np.max(np.abs(w.u2[:, -1])) < 1e-13
        assert divergence_lifting_residual(w, field, map_) < 1e-6

    def test_random_smooth_data_on_curved_map(self):
        gx = PeriodicGrid1D(1.0, 128)
        grid = ReferenceGrid2D(gx, 65)
        map_ = build_deformation(ScalarField1D(gx, 1.0 + 0.3 * np.sin(2 * np.pi * gx.nodes)))
        rng = np.random.default_rng(12)
        x = gx.nodes[:, None]
        z = grid.z_nodes[None, :]
        chi = (
            np.sin(2 * np.pi * x) * np.cos(np.pi * z)
            + 0.4 * np.cos(4 * np.pi * x) * z**2
            + 0.2 * np.sin(6 * np.pi * x)
        )
        chi -= integrate_2d(chi * np.ones_like(z), grid) / gx.length
        field = ScalarField2D(grid, chi)
        w = divergence_lifting(field, map_)
        assert divergence_lifting_residual(w, field, map_) < 1e-6


class TestEmpiricalConstant:
    @staticmethod
    def ensemble(count, n=32, nz=17, seed=31):
        gx = PeriodicGrid1D(1.0, n)
        grid = ReferenceGrid2D(gx, nz)
        problems = []
        heights = random_positive_fields(gx, count, seed=seed, decay=3.0, margin=0.9)
        forces = random_positive_fields(gx, count, seed=seed + 1)
        for h, f in zip(heights, forces):
            map_ = build_deformation(h)
            f1 = f.values[:, None] * np.sin(np.pi * grid.z_nodes)[None, :]
            zeros = np.zeros(grid.shape)
            problems.append(
                StokesProblem(
                    map=map_,
                    f=VectorField2D(grid, f1, zeros),
                    g=ScalarField2D(grid, zeros),
                    etadot=ScalarField1D(gx, np.zeros(n)),
                )
            )
        return problems

    def test_flat_ensemble_single_bucket(self):
        gx, grid, map_, zeros = flat_setup()
        problems = [
            problem_of(map_, grid, np.full(grid.shape, amp), zeros, zeros, np.zeros(gx.n))
            for amp in (0.5, 1.0, 2.0)
        ]
        report = empirical_elliptic_constant(problems)
        assert len(report["bucket_max"]) == 1
        assert all(np.isfinite(e["ratio"]) and e["ratio"] > 0 for e in report["entries"])

    def test_random_ensemble_finite(self):
        report = empirical_elliptic_constant(self.ensemble(6))
        assert report["count"] == 6
        for entry in report["entries"]:
            assert np.isfinite(entry["ratio"]) and entry["ratio"] > 0


class TestPhysicalNorms:
    def test_flat_l2_matches_reference(self):
        gx, grid, map_, _ = flat_setup()
        values = np.sin(2 * np.pi * gx.nodes)[:, None] * grid.z_nodes[None, :]
        direct = np.sqrt(integrate_2d(values**2, grid))
        assert physical_l2_norm(values, map_, grid) == pytest.approx(direct, rel=1e-12)

    def test_jacobian_weighting(self):
        gx, grid, _, _ = flat_setup(height=2.0)
        map2 = build_deformation(ScalarField1D(gx, np.full(gx.n, 2.0)))
        ones = np.ones(grid.shape)
        # integral of 1 over the physical domain is L * h = 2
        assert physical_l2_norm(ones, map2, grid) == pytest.approx(np.sqrt(2.0), rel=1e-12)
