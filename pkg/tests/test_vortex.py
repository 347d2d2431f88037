"""Vortex divisors, the existence bound and the reduced-equation solver."""

import math

import numpy as np
import pytest

from vortexline import (
    BradlowError,
    ConvergenceError,
    bradlow_limit,
    bradlow_margin,
    curvature_field,
    density_field,
    divisor,
    integrate,
    load_solution,
    make_torus,
    save_solution,
    solve_taubes,
    torus_point,
    verify_solution,
    vortex_params,
)
from vortexline.vortex import DegenerateSolution, TaubesSolution, singular_background


@pytest.fixture(scope="module")
def geom():
    return make_torus(1j, 1.0, (64, 64))


@pytest.fixture(scope="module")
def one_vortex(geom):
    return solve_taubes(vortex_params(geom, divisor(geom, [(0.25, 0.25)]), 8 * math.pi))


class TestDivisor:
    def test_canonical_order_and_reduction(self, geom):
        d = divisor(geom, [(0.7, 0.2), (1.1, -0.9)])
        assert [(round(p.s, 12), round(p.t, 12)) for p in d.points] == [
            (0.1, 0.1),
            (0.7, 0.2),
        ]
        assert d.multiplicities == (1, 1)
        assert d.degree == 2

    def test_coincident_points_merge(self, geom):
        d = divisor(geom, [(0.3, 0.3), (0.3 + 1e-12, 0.3 - 1e-12)])
        assert len(d.points) == 1
        assert d.multiplicities == (2,)

    def test_mixed_input_forms(self, geom):
        p = torus_point(geom, lattice=(0.5, 0.5))
        d = divisor(geom, [p, 0.1 + 0.2j, (0.9, 0.9)])
        assert d.degree == 3

    def test_rejects_bad_multiplicities(self, geom):
        with pytest.raises(ValueError):
            divisor(geom, [(0.1, 0.1)], [0])
        with pytest.raises(ValueError):
            divisor(geom, [(0.1, 0.1)], [1, 1])

    def test_reordered_divisors_compare_equal(self, geom):
        a = divisor(geom, [(0.2, 0.3), (0.6, 0.1)])
        b = divisor(geom, [(0.6, 0.1), (0.2, 0.3)])
        assert a == b

    def test_period_shifted_divisors_agree_to_roundoff(self, geom):
        a = divisor(geom, [(0.2, 0.3)])
        b = divisor(geom, [(1.2, 1.3)])
        assert abs(a.points[0].s - b.points[0].s) < 1e-14
        assert abs(a.points[0].t - b.points[0].t) < 1e-14


class TestExistenceBound:
    def test_margin_sign(self, geom):
        par = vortex_params(geom, divisor(geom, [(0.0, 0.0)]), 8 * math.pi)
        assert bradlow_margin(par) == pytest.approx(8 * math.pi - 2 * math.pi, rel=1e-15)

    def test_violation_raises_with_bound(self, geom):
        par = vortex_params(geom, divisor(geom, [(0.0, 0.0)]), math.pi)
        with pytest.raises(BradlowError) as err:
            solve_taubes(par)
        assert not err.value.at_limit
        assert err.value.bound == pytest.approx(2 * math.pi, rel=1e-15)
        assert "must exceed" in str(err.value)

    def test_equality_routes_to_degenerate_branch(self, geom):
        par = vortex_params(geom, divisor(geom, [(0.0, 0.0)]), 2 * math.pi)
        with pytest.raises(BradlowError) as err:
            solve_taubes(par)
        assert err.value.at_limit
        assert "bradlow_limit" in str(err.value)
        deg = bradlow_limit(par)
        assert isinstance(deg, DegenerateSolution)

    def test_degenerate_branch_rejects_interior(self, geom):
        par = vortex_params(geom, divisor(geom, [(0.0, 0.0)]), 8 * math.pi)
        with pytest.raises(ValueError):
            bradlow_limit(par)

    def test_degenerate_fields(self, geom):
        deg = bradlow_limit(vortex_params(geom, divisor(geom, [(0.0, 0.0)]), 2 * math.pi))
        assert np.all(density_field(deg).values == 0.0)
        assert np.max(np.abs(curvature_field(deg).values - 2 * math.pi)) == 0.0


class TestBackground:
    def test_superposition_is_linear(self, geom):
        d1 = divisor(geom, [(0.2, 0.3)])
        d2 = divisor(geom, [(0.6, 0.7)])
        dpair = divisor(geom, [(0.2, 0.3), (0.6, 0.7)])
        tau = 10 * math.pi
        u1 = singular_background(vortex_params(geom, d1, tau)).values
        u2 = singular_background(vortex_params(geom, d2, tau)).values
        up = singular_background(vortex_params(geom, dpair, tau)).values
        assert np.max(np.abs(up - u1 - u2)) < 1e-12

    def test_core_nodes_flagged_for_on_grid_points(self, geom):
        par = vortex_params(geom, divisor(geom, [(16 / 64, 32 / 64)]), 8 * math.pi)
        bg = singular_background(par)
        assert bg.singular_nodes == ((16, 32),)
        assert np.all(np.isfinite(bg.values))


class TestSolver:
    def test_mass_identity(self, geom):
        cases = [
            ([(0.25, 0.25)], None, 8 * math.pi),
            ([(0.13, 0.21), (0.67, 0.58)], None, 16 * math.pi),
            ([(0.3, 0.4)], [2], 10 * math.pi),
        ]
        for pts, mult, tau in cases:
            sol = solve_taubes(vortex_params(geom, divisor(geom, pts, mult), tau))
            mass = integrate(density_field(sol))
            target = 2 * tau - 4 * math.pi * sol.degree
            assert abs(mass - target) / target < 1e-12

    def test_flux_identity(self, one_vortex):
        flux = integrate(curvature_field(one_vortex))
        assert abs(flux - 2 * math.pi) / (2 * math.pi) < 1e-12

    def test_newton_tail_is_quadratic(self, one_vortex):
        h = one_vortex.residual_history
        assert len(h) >= 3
        assert h[-1] <= 1e-3 * h[-2]

    def test_translation_equivariance_by_grid_vector(self, geom, one_vortex):
        shifted = solve_taubes(
            vortex_params(geom, divisor(geom, [(0.25 + 10 / 64, 0.25 + 6 / 64)]), 8 * math.pi)
        )
        rolled = np.roll(np.roll(one_vortex.v.values, 10, axis=0), 6, axis=1)
        assert np.max(np.abs(shifted.v.values - rolled)) < 1e-12

    def test_inversion_symmetry_of_centered_vortex(self, geom):
        sol = solve_taubes(vortex_params(geom, divisor(geom, [(0.0, 0.0)]), 8 * math.pi))
        v = sol.v.values
        flip = v[(-np.arange(64)) % 64][:, (-np.arange(64)) % 64]
        assert np.max(np.abs(v - flip)) < 1e-12

    def test_solution_independent_of_inner_tolerance(self, geom):
        par = vortex_params(geom, divisor(geom, [(0.25, 0.25)]), 8 * math.pi)
        a = solve_taubes(par, inner_rtol=1e-3)
        b = solve_taubes(par, inner_rtol=1e-6)
        assert np.max(np.abs(a.v.values - b.v.values)) < 1e-10

    def test_determinism_bit_identical(self, geom, one_vortex):
        again = solve_taubes(vortex_params(geom, divisor(geom, [(0.25, 0.25)]), 8 * math.pi))
        assert np.array_equal(again.v.values, one_vortex.v.values)

    def test_near_bound_coupling_converges(self, geom):
        sol = solve_taubes(vortex_params(geom, divisor(geom, [(0.0, 0.0)]), 2.02 * math.pi))
        assert sol.residual_linf <= 1e-10
        assert verify_solution(sol).positivity_margin > 0.0

    def test_unreachable_tolerance_raises_with_history(self, geom):
        par = vortex_params(geom, divisor(geom, [(0.25, 0.25)]), 8 * math.pi)
        with pytest.raises(ConvergenceError) as err:
            solve_taubes(par, tol=1e-15)
        assert len(err.value.history) > 5

    def test_density_vanishes_at_on_grid_core(self, geom):
        sol = solve_taubes(vortex_params(geom, divisor(geom, [(16 / 64, 32 / 64)]), 8 * math.pi))
        dens = density_field(sol).values
        assert dens[16, 32] == 0.0
        assert dens.min() >= 0.0


class TestVerification:
    def test_report_certificates(self, one_vortex):
        rep = verify_solution(one_vortex)
        assert rep.converged
        assert rep.pde_residual < 1e-9
        assert rep.mass_defect_rel < 1e-6
        assert rep.positivity_margin > 0.0
        assert rep.density_min >= 0.0
        # one shared identity, so the halving is exact
        assert rep.flux_defect == 0.5 * rep.mass_defect

    def test_doubled_grid_defect_is_spectral(self, one_vortex):
        rep = verify_solution(one_vortex, doubled_grid=True)
        assert rep.grid_defect is not None
        assert rep.grid_defect < 1e-10

    def test_degenerate_report(self, geom):
        deg = bradlow_limit(vortex_params(geom, divisor(geom, [(0.0, 0.0)]), 2 * math.pi))
        rep = verify_solution(deg)
        assert rep.converged
        assert rep.pde_residual == 0.0


class TestSolutionStorage:
    def test_interior_roundtrip_bit_exact(self, tmp_path, one_vortex):
        path = tmp_path / "sol.vxs"
        save_solution(one_vortex, path)
        back = load_solution(path)
        assert isinstance(back, TaubesSolution)
        assert back.params == one_vortex.params
        assert np.array_equal(back.v.values, one_vortex.v.values)
        assert back.newton_iters == one_vortex.newton_iters
        assert back.residual_history == one_vortex.residual_history

    def test_degenerate_roundtrip(self, tmp_path, geom):
        deg = bradlow_limit(vortex_params(geom, divisor(geom, [(0.1, 0.9)]), 2 * math.pi))
        path = tmp_path / "deg.vxs"
        save_solution(deg, path)
        back = load_solution(path)
        assert isinstance(back, DegenerateSolution)
        assert back.params == deg.params

    def test_rejects_foreign_files(self, tmp_path):
        path = tmp_path / "junk.vxs"
        path.write_bytes(b"not a solution container\n")
        with pytest.raises(ValueError):
            load_solution(path)
