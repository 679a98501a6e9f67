import math

import numpy as np
import pytest

from whitham.operators import symbol_values
from whitham.picard import (DuhamelState, FieldFamily, FixedPointConfig,
                            InadmissibleConfigError, NonConvergenceError, admissible_horizon,
                            duhamel_map, fixed_point_config, fixed_point_residual,
                            free_evolution, horizon_roots, measured_constants,
                            mild_solution_data, mollify, pde_residual, resolve_nodes,
                            solve_fixed_point)
from whitham.spectral_core import Grid, SpectralField

from conftest import random_real_field

# root of sqrt(T) + T^(5/8) = 1 (mpmath findroot, 30 digits)
SUM_ROOT = 0.29008700548879557


@pytest.fixture(scope="module")
def grid():
    return Grid(512, 32 * math.pi)


@pytest.fixture(scope="module")
def consts(grid):
    return measured_constants(grid)


@pytest.fixture(scope="module")
def bump(grid):
    return SpectralField(grid, samples=0.1 * np.exp(-(grid.x / 2) ** 2))


class TestMollify:
    def test_small_eps_is_identity(self, unit_grid):
        f = SpectralField.from_function(unit_grid, lambda x: np.sin(x) + 0.3 * np.cos(4 * x))
        assert np.max(np.abs(mollify(f, 1e-6).samples - f.samples)) < 1e-10

    @pytest.mark.parametrize("eps", [0.01, 1.0, 10.0])
    def test_constants_unchanged(self, unit_grid, eps):
        f = SpectralField(unit_grid, samples=np.full(64, 1.5))
        assert np.max(np.abs(mollify(f, eps).samples - 1.5)) < 1e-14

    def test_white_noise_loses_mass(self, grid, rng):
        f = SpectralField(grid, samples=rng.standard_normal(512))
        assert mollify(f, 1.0).l2() < f.l2()

    def test_monotone(self, grid, rng):
        f = random_real_field(grid, rng, 0.01)
        norms = [mollify(f, e).l2() for e in (0.0, 0.01, 0.1, 1.0)]
        assert all(a >= b for a, b in zip(norms, norms[1:]))

    def test_negative_eps(self, grid, bump):
        with pytest.raises(ValueError):
            mollify(bump, -1.0)


class TestFixedPointConfig:
    def test_reference_example(self):
        cfg = FixedPointConfig(delta=0.1, c_lin=0.2, c_bil=0.5)
        assert cfg.conditions == pytest.approx((0.6, 0.45, 0.5), abs=1e-15)
        assert cfg.admissible

    @pytest.mark.parametrize("cl,cb,d", [(0.34, 0.0, 0.1), (0.2, 1.2, 0.1), (0.0, 0.5, 0.1)])
    def test_inadmissible(self, cl, cb, d):
        assert not FixedPointConfig(d, cl, cb).admissible

    def test_third_condition_implied(self, rng):
        # 3 C_L < 1 and 9 C_B delta < 1 already force C_L + 6 C_B delta < 1
        for _ in range(1000):
            cl, cbd = rng.uniform(0, 1 / 3), rng.uniform(0, 1 / 9)
            assert cl + 6 * cbd < 1

    def test_solver_refuses_inadmissible(self, grid, bump):
        st = mild_solution_data(bump, 0.5, 0.1, 8)
        with pytest.raises(InadmissibleConfigError):
            solve_fixed_point(st, FixedPointConfig(0.1, 0.5, 0.1))


class TestDuhamelMap:
    def test_zero_input_gives_free_evolution(self, grid, bump):
        st = mild_solution_data(bump, 0.5, 0.2, 16)
        zero = FieldFamily(grid, st.nodes, np.zeros((17, 512), complex))
        out = duhamel_map(zero, st)
        assert np.array_equal(out.coeffs, free_evolution(st).coeffs)

    def test_free_evolution_closed_form(self, unit_grid):
        f = SpectralField.from_function(unit_grid, np.sin)
        st = mild_solution_data(f, 0.3, 1.0, 4)
        fam = free_evolution(st)
        # xi = 1: mollifier exp(-eps^2/2), semigroup exp(-eps t ell(1)) with ell(1) = 2
        expect = math.exp(-0.045) * math.exp(-0.3 * 1.0 * 2)
        assert fam.at(4).linf() == pytest.approx(expect, rel=1e-3)
        assert fam.at(4).l2() == pytest.approx(expect * math.sqrt(math.pi), rel=1e-14)

    def test_linear_single_mode_second_order(self, unit_grid):
        # exact solution of u_t = -(eps ell + a) u reproduced by the two-term split
        f = SpectralField.from_function(unit_grid, np.sin)
        eps, T = 0.5, 0.5
        errs = []
        for n in (16, 32, 64):
            st = mild_solution_data(f, eps, T, n, nonlinear=False)
            lam = eps * symbol_values("hyperviscous_ell", unit_grid.xi) + \
                symbol_values("dissipation_a", unit_grid.xi)
            exact = np.exp(-st.nodes[:, None] * lam) * st.u0_mollified.coeffs
            fam = FieldFamily(unit_grid, st.nodes, exact)
            errs.append(duhamel_map(fam, st).sup_distance(fam))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(np.abs(orders - 2) < 0.05)

    def test_linear_fixed_point_matches_closed_form(self, unit_grid):
        f = SpectralField.from_function(unit_grid, np.sin)
        st = mild_solution_data(f, 0.5, 0.2, 256, nonlinear=False)
        sol, _ = solve_fixed_point(st, FixedPointConfig(1.0, 0.3, 0.0, tol=1e-14))
        lam = 0.5 * 2 + 1.0 * 1.2341751544701950
        exact = math.exp(-0.2 * lam) * st.u0_mollified.l2()
        assert sol.at(-1).l2() == pytest.approx(exact, rel=1e-5)

    def test_shape_checked(self, grid, bump):
        st = mild_solution_data(bump, 0.5, 0.2, 16)
        with pytest.raises(ValueError):
            duhamel_map(FieldFamily(grid, st.nodes[:5], np.zeros((5, 512), complex)), st)

    def test_needs_positive_eps(self, bump):
        with pytest.raises(ValueError):
            mild_solution_data(bump, 0.0, 0.1)


class TestSolve:
    def test_zero_data(self, grid, consts):
        st = mild_solution_data(SpectralField.zeros(grid), 0.5, 0.1, 8)
        sol, trace = solve_fixed_point(st, FixedPointConfig(0.0, 0.1, 0.1))
        assert len(trace.distances) == 1
        assert np.max(np.abs(sol.coeffs)) == 0

    def test_contraction_demo(self, grid, bump, consts):
        eps = 0.5
        T = admissible_horizon(eps, mollify(bump, eps).l2(), consts.c_lin, consts.c_bil,
                               conditions="contraction")
        st = mild_solution_data(bump, eps, T, 32)
        cfg = fixed_point_config(st, consts)
        assert cfg.admissible
        sol, trace = solve_fixed_point(st, cfg)
        assert trace.converged
        assert np.all(trace.ratios[1:] < 1)
        assert np.max(trace.ratios[1:]) <= cfg.contraction_bound
        assert sol.sup_l2() <= 3 * cfg.delta * (1 + cfg.tol)
        assert fixed_point_residual(sol, st) < 2 * cfg.tol
        rows = trace.rows()
        assert rows[0] == ("iter", "sup_distance", "bound_3delta")
        assert len(rows) == len(trace.distances) + 1

    def test_pde_residual_converges(self, grid, bump, consts):
        eps = 0.5
        T = admissible_horizon(eps, mollify(bump, eps).l2(), consts.c_lin, consts.c_bil,
                               conditions="contraction")
        res = []
        for n in (16, 32, 64, 128):
            st = mild_solution_data(bump, eps, T, n)
            sol, _ = solve_fixed_point(st, fixed_point_config(st, consts))
            res.append(pde_residual(sol, st))
        assert math.log2(res[-2] / res[-1]) >= 1.8

    def test_non_convergence(self, grid, bump):
        st = mild_solution_data(bump * 10.0, 0.5, 0.1, 8)
        with pytest.raises(NonConvergenceError):
            solve_fixed_point(st, FixedPointConfig(0.1, 0.1, 0.1, max_iters=2, tol=1e-300))

    def test_resolve_nodes(self, grid, bump, consts):
        st = mild_solution_data(bump, 0.5, 0.05, 8)
        sol, _, final = resolve_nodes(st, FixedPointConfig(0.1, 0.1, 0.1), quad_tol=1e-7)
        assert final.n_nodes >= 16
        assert sol.coeffs.shape[0] == final.n_nodes + 1


class TestHorizon:
    def test_unit_constants(self):
        T = admissible_horizon(1.0, 1.0, 1.0, 1.0)
        assert T == pytest.approx(0.9 * SUM_ROOT, rel=1e-13)
        t_lin, t_bil, t_sum = horizon_roots(1.0, 1.0, 1.0, 1.0)
        assert (t_lin, t_bil) == pytest.approx((1.0, 1.0), rel=1e-15)
        assert T == pytest.approx(0.9 * min(t_lin, t_bil, t_sum), rel=1e-15)

    def test_monotone_in_data(self):
        Ts = [admissible_horizon(0.1, d, 0.7, 0.2) for d in (0.1, 0.2, 0.4, 0.8, 1.6)]
        assert all(a >= b for a, b in zip(Ts, Ts[1:]))

    def test_bilinear_scaling(self):
        # tiny c_lin makes the bilinear condition bind
        a = admissible_horizon(0.01, 1.0, 1e-9, 1.0)
        b = admissible_horizon(0.16, 1.0, 1e-9, 1.0)
        assert b / a == pytest.approx(16 ** 0.6, rel=1e-6)

    def test_contraction_is_stricter(self):
        assert admissible_horizon(0.5, 0.3, 0.7, 0.2, conditions="contraction") < \
            admissible_horizon(0.5, 0.3, 0.7, 0.2)

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            admissible_horizon(0.0, 1.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            admissible_horizon(1.0, 1.0, 1.0, 1.0, conditions="other")

    def test_measured_constants(self, consts):
        assert consts.c_lin == pytest.approx(0.70699172777091254, rel=1e-14)
        assert consts.c_bil == pytest.approx(0.8 * consts.kernel_sup, rel=1e-15)
        assert consts.linear_bound(0.5, 0.5) == pytest.approx(consts.c_lin, rel=1e-15)
