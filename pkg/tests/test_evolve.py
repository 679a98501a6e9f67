import math

import numpy as np
import pytest

from whitham.evolve import (CFLError, InitialData, Integrator, SolverConfig,
                            epsilon_family_study, random_smooth_field, resume, run, step,
                            sup_l2_distance)
from whitham.operators import eval_whitham_m, symbol_values
from whitham.picard import mollify
from whitham.spectral_core import Grid, SpectralField, hermitian_defect

M_AT_1 = 1.2341751544701950


def unit_cfg(**kw):
    base = dict(n_points=64, half_length=math.pi, t_end=1.0, dt=0.05, snapshot_stride=1)
    base.update(kw)
    return SolverConfig(**base)


def small_cfg(**kw):
    base = dict(n_points=256, half_length=16 * math.pi, t_end=2.0, dt=0.01,
                snapshot_stride=5, initial=InitialData("gaussian", 0.3, 2.0))
    base.update(kw)
    return SolverConfig(**base)


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(eps=-1e-3), dict(dt=0.0), dict(t_end=-1.0),
                                    dict(variant="kdv"), dict(stepper="euler"),
                                    dict(snapshot_stride=0), dict(n_points=63)])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            SolverConfig(**kw)

    def test_round_trip_dict(self):
        cfg = small_cfg(eps=1e-2, norm_exponents=(0.5,))
        assert SolverConfig.from_dict(cfg.to_dict()) == cfg

    def test_initial_profiles(self):
        g = Grid(128, 8 * math.pi)
        assert InitialData("gaussian", 1.0, 1.0).build(g).linf() == pytest.approx(1.0)
        assert InitialData("sech2", 0.5, 1.0).build(g).linf() == pytest.approx(0.5)
        s = InitialData("sine", 1.0, mode=3).build(g)
        assert s.l2() == pytest.approx(math.sqrt(8 * math.pi), rel=1e-13)
        with pytest.raises(ValueError):
            InitialData("triangle")
        with pytest.raises(ValueError):
            InitialData("file")


class TestStep:
    def test_linear_single_mode_is_exact(self, unit_grid):
        cfg = unit_cfg(nonlinear=False)
        u = SpectralField.from_function(unit_grid, np.sin)
        for _ in range(20):
            u = step(u, 0.05, cfg)
        expect = math.exp(-1.0 * M_AT_1) * np.sin(unit_grid.x)
        assert np.max(np.abs(u.samples - expect)) < 1e-12

    @pytest.mark.parametrize("stepper", ["integrating_factor_rk4", "etd_rk2"])
    def test_linear_with_hyperviscosity(self, unit_grid, stepper):
        cfg = unit_cfg(nonlinear=False, eps=0.1, stepper=stepper)
        u = SpectralField.from_function(unit_grid, lambda x: np.sin(3 * x))
        for _ in range(10):
            u = step(u, 0.1, cfg)
        lam = 0.1 * 9 * 10 + 3 * eval_whitham_m(3.0)
        assert np.max(np.abs(u.samples - math.exp(-lam) * np.sin(3 * unit_grid.x))) < 1e-12

    def test_zero_stays_zero(self, unit_grid):
        u = SpectralField.zeros(unit_grid)
        assert np.max(np.abs(step(u, 0.1, unit_cfg()).coeffs)) == 0

    def test_cfl_violation(self, unit_grid):
        u = SpectralField.from_function(unit_grid, lambda x: 10 * np.sin(x))
        with pytest.raises(CFLError):
            step(u, 1.0, unit_cfg())

    def test_realness(self, wide_grid, rng):
        cfg = small_cfg(n_points=512, half_length=32 * math.pi)
        u = random_smooth_field(wide_grid, rng, 0.5)
        out = step(u, 0.01, cfg)
        assert hermitian_defect(out.coeffs) < 1e-15


class TestSelfConvergence:
    @pytest.mark.parametrize("stepper,order", [("integrating_factor_rk4", 4.0), ("etd_rk2", 2.0)])
    def test_order(self, stepper, order):
        cfg = small_cfg(t_end=1.0, stepper=stepper, snapshot_stride=10 ** 6,
                        initial=InitialData("gaussian", 1.0, 2.0))
        dt0 = 0.04
        ref = run(cfg.with_(dt=dt0 / 16)).final
        errs = [(run(cfg.with_(dt=dt0 / 2 ** j)).final - ref).l2() for j in range(3)]
        observed = math.log2(errs[1] / errs[2])
        assert observed == pytest.approx(order, abs=0.3)


class TestRun:
    def test_sech2_reference_case(self):
        cfg = SolverConfig(t_end=10.0, dt=0.02, snapshot_stride=5,
                           initial=InitialData("sech2", 0.1, 2.0))
        rec = run(cfg)
        assert rec.status == "completed"
        l2 = rec.series("l2")
        assert np.all(np.diff(l2) <= 1e-14)
        assert np.all(np.diff(rec.times) > 0)
        assert rec.times[-1] == pytest.approx(10.0, abs=1e-12)

    def test_classic_linear_conserves_l2(self):
        cfg = small_cfg(variant="whitham_classic", nonlinear=False, t_end=5.0)
        rec = run(cfg)
        l2 = rec.series("l2")
        assert np.max(np.abs(l2 - l2[0])) < 1e-12

    def test_grid_refinement(self):
        cfg = small_cfg(t_end=1.0, snapshot_stride=10 ** 6)
        coarse = run(cfg).final
        fine = run(cfg.with_(n_points=512)).final
        finer = run(cfg.with_(n_points=1024)).final
        d1 = np.max(np.abs(fine.samples[::2] - coarse.samples))
        d2 = np.max(np.abs(finer.samples[::2] - fine.samples))
        # the coarse 2/3 cutoff sits where the spectrum is ~1e-12 of its peak
        assert d1 < 1e-8 * coarse.linf()
        assert d2 < 1e-13

    def test_cancellation_every_record(self):
        rec = run(small_cfg(snapshot_stride=1))
        assert max(rec.cancellation) < 1e-10
        assert max(rec.cancellation_scaled) < 1e-10

    def test_energy_identity_series(self):
        cfg = small_cfg(eps=1e-2)
        rec = run(cfg)
        E = np.array(rec.l2_sq) + 2 * np.array(rec.dissipation_n) + \
            2 * cfg.eps * np.array(rec.dissipation_eps)
        assert np.max(np.abs(E - E[0])) < 1e-9

    def test_short_final_step(self):
        rec = run(small_cfg(t_end=0.105, dt=0.01))
        assert rec.times[-1] == pytest.approx(0.105, abs=1e-14)
        assert rec.steps == 11

    def test_adaptive_dt(self):
        cfg = small_cfg(dt=2.0, t_end=4.0, initial=InitialData("gaussian", 2.0, 2.0))
        rec = run(cfg)
        assert rec.completed
        assert rec.dt_final < 2.0

    def test_cfl_without_adaptivity_is_recorded(self):
        cfg = small_cfg(dt=2.0, t_end=4.0, adaptive_dt=False,
                        initial=InitialData("gaussian", 2.0, 2.0))
        rec = run(cfg)
        assert rec.status == "blowup_detected"
        assert rec.failure_time == 0.0
        assert len(rec.times) == 1

    def test_amplitude_cap(self):
        rec = run(small_cfg(blowup_cap=0.1))
        assert rec.status == "blowup_detected"
        assert rec.norms

    def test_resolution_monitor(self):
        rec = run(small_cfg(tail_tol=1e-40, initial=InitialData("gaussian", 0.3, 0.3)))
        assert rec.status == "resolution_lost"
        assert rec.tail_fraction[-1] > 1e-40


class TestCheckpoint:
    def test_resume_matches_uninterrupted(self):
        cfg = small_cfg(snapshot_stride=1)
        full = run(cfg)
        integ = Integrator(cfg)
        integ.run(t_stop=0.73)
        state = integ.checkpoint()
        rest = resume(cfg, state)
        assert np.max(np.abs(rest.snapshots[-1] - full.snapshots[-1])) < 1e-12
        assert rest.dissipation_n[-1] == pytest.approx(full.dissipation_n[-1], rel=1e-12)


class TestFamily:
    def test_linear_closed_form(self):
        base = small_cfg(nonlinear=False, t_end=1.0, snapshot_stride=10)
        g = base.grid
        u0 = base.initial.build(g)
        eps_list = [1e-1, 1e-2, 1e-3]
        fs = epsilon_family_study(base, eps_list, u0)
        lam = lambda e: e * symbol_values("hyperviscous_ell", g.xi) + \
            symbol_values("dissipation_a", g.xi)
        times = np.asarray(fs.records[0].times)[:, None]

        def family(e):
            data = mollify(u0, e).coeffs if e > 0 else u0.coeffs
            return np.exp(-times * lam(e)) * data

        all_eps = eps_list + [0.0]
        for i in range(3):
            d = family(all_eps[i]) - family(all_eps[i + 1])
            expect = np.max(np.sqrt(g.dx * np.sum(np.abs(d) ** 2, axis=1)))
            assert fs.consecutive[i] == pytest.approx(expect, rel=1e-9)

    def test_zero_data(self):
        base = small_cfg(t_end=0.5)
        fs = epsilon_family_study(base, [1e-1, 1e-2, 1e-3], SpectralField.zeros(base.grid))
        assert fs.consecutive == [0.0, 0.0, 0.0]
        assert fs.to_zero == [0.0, 0.0, 0.0]

    def test_monotone_for_small_data(self):
        fs = epsilon_family_study(small_cfg(t_end=1.0), [1e-1, 1e-2, 1e-3])
        assert fs.consecutive[0] > fs.consecutive[1] > fs.consecutive[2]
        assert len(fs.rows()) == 4

    @pytest.mark.parametrize("eps", [[1e-1, 1e-2], [1e-2, 1e-1, 1e-3], [1e-1, 0.0, -1.0]])
    def test_bad_lists(self, eps):
        with pytest.raises(ValueError):
            epsilon_family_study(small_cfg(), eps)

    def test_distance_needs_shared_times(self):
        a = run(small_cfg(t_end=0.5))
        b = run(small_cfg(t_end=0.6))
        with pytest.raises(ValueError):
            sup_l2_distance(a, b)
