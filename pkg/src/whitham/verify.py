"""Property suites at pinned desk-scale sizes, driven by ``whitham verify``."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List

import numpy as np

from . import diagnostics, evolve, norms, operators, picard
from .spectral_core import Grid, SpectralField

log = logging.getLogger(__name__)

SUITES = ("symbols", "kernels", "norms", "picard", "energy")

CHECK_GRIDS = [Grid(n, L * math.pi) for n in (8, 16, 64, 128, 512, 1024)
               for L in (1.0, 8.0, 32.0, 64.0)]


@dataclass
class Check:
    name: str
    value: float
    bound: str
    passed: bool


@dataclass
class SuiteResult:
    suite: str
    checks: List[Check] = field(default_factory=list)
    measured: Dict[str, object] = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str, value: float, ok: bool, bound: str):
        self.checks.append(Check(name, float(value), bound, bool(ok)))

    def to_dict(self) -> dict:
        return {"suite": self.suite, "passed": self.passed, "seconds": self.seconds,
                "checks": [asdict(c) for c in self.checks], "measured": self.measured}


def random_field(grid: Grid, rng: np.random.Generator) -> SpectralField:
    """Random real field with a random spectral decay rate."""
    decay = rng.uniform(0.2, 3.0)
    env = np.exp(-decay * np.abs(grid.k) / max(1, grid.n_points // 16))
    c = (rng.standard_normal(grid.n_points) + 1j * rng.standard_normal(grid.n_points)) * env
    return SpectralField(grid, coeffs=c * rng.uniform(0.1, 10))


def suite_symbols(seed: int = 0) -> SuiteResult:
    res = SuiteResult("symbols")
    res.check("m(0)", operators.eval_whitham_m(0.0), operators.eval_whitham_m(0.0) == 1.0,
              "== 1 exactly")
    worst_m, worst_t = np.inf, np.inf
    for g in CHECK_GRIDS:
        xi = g.xi
        worst_m = min(worst_m, float(np.min(operators.eval_whitham_m(xi) - 1.0)))
        worst_t = min(worst_t, float(np.min((1 + xi ** 2) * np.tanh(np.abs(xi)) - xi ** 2)))
    res.check("min m - 1 over grids", worst_m, worst_m >= 0, ">= 0")
    res.check("min (1+xi^2)tanh|xi| - xi^2 over grids", worst_t, worst_t >= 0, ">= 0")
    # beyond ~1e7 the true excess 1/(2 xi^2) is below double precision
    xi = np.geomspace(50, 1e5, 20001)
    grid_xi = np.concatenate([np.abs(g.xi) for g in CHECK_GRIDS])
    xi = np.concatenate([xi, grid_xi[grid_xi >= 50]])
    ratio = operators.eval_whitham_m(xi) / np.sqrt(xi)
    res.check("min m/sqrt|xi|, |xi|>=50", ratio.min(), ratio.min() >= 1, ">= 1")
    res.check("max m/sqrt|xi|, |xi|>=50", ratio.max(), ratio.max() <= 1.001, "<= 1.001")
    return res


KERNEL_GRID = Grid(1024, 8 * math.pi)
KERNEL_TIMES = np.geomspace(1e-4, 1e-1, 13)
KERNEL_TARGETS = {1.0: -0.375, 1.5: -0.5, 2.0: -0.625}


def suite_kernels(seed: int = 0) -> SuiteResult:
    res = SuiteResult("kernels")
    h = operators.make_symbol("quartic", KERNEL_GRID)
    slopes = {}
    for p, target in KERNEL_TARGETS.items():
        st = operators.kernel_norm_study(h, p, KERNEL_TIMES)
        slopes[f"p={p:g}"] = {"fitted": st.slope, "target": target}
        res.check(f"slope |D|^{p:g} h", st.slope, abs(st.slope - target) <= 0.01,
                  f"{target} +- 0.01")
    res.measured["slopes"] = slopes
    rng = np.random.default_rng(seed)
    g = Grid(512, 32 * math.pi)
    psi = random_field(g, rng)
    ds = operators.duality_bound_study(np.geomspace(1e-3, 1, 7), psi)
    res.check("duality slope", ds.slope, abs(ds.slope + 0.5) <= 0.01, "-0.5 +- 0.01")
    consts = picard.measured_constants(g)
    res.measured.update(c_lin=consts.c_lin, c_bil=consts.c_bil, kernel_sup=consts.kernel_sup,
                        duality_slope=ds.slope)
    res.check("c_lin", consts.c_lin, 0 < consts.c_lin <= math.sqrt(0.5), "(0, sqrt(1/2)]")
    return res


def suite_norms(seed: int = 0, n_fields: int = 1000) -> SuiteResult:
    res = SuiteResult("norms")
    rng = np.random.default_rng(seed)
    grids = [Grid(128, 8 * math.pi), Grid(256, 32 * math.pi), Grid(64, math.pi)]
    worst = {0.1: 0.0, 0.25: 0.0, 0.5: 0.0}
    worst_end = np.inf
    for i in range(n_fields):
        f = random_field(grids[i % len(grids)], rng)
        for s in worst:
            worst[s] = max(worst[s], norms.check_interpolation_s(f, s))
        worst_end = min(worst_end, norms.check_endpoint_34(f) / norms.endpoint_scale(f))
    for s, v in worst.items():
        res.check(f"max interpolation ratio s={s:g}", v, v <= 1 + 1e-12, "<= 1 + 1e-12")
    res.check("min endpoint residual / scale", worst_end, worst_end >= -1e-12, ">= -1e-12")
    res.measured["interpolation_max"] = {f"{s:g}": v for s, v in worst.items()}
    return res


def suite_picard(seed: int = 0) -> SuiteResult:
    res = SuiteResult("picard")
    g = Grid(512, 32 * math.pi)
    u0 = SpectralField(g, samples=0.1 * np.exp(-(g.x / 2) ** 2))
    eps = 0.5
    consts = picard.measured_constants(g)
    T = picard.admissible_horizon(eps, picard.mollify(u0, eps).l2(), consts.c_lin,
                                  consts.c_bil, conditions="contraction")
    residuals = []
    for n in (16, 32, 64):
        st = picard.mild_solution_data(u0, eps, T, n)
        fp = picard.fixed_point_config(st, consts)
        sol, trace = picard.solve_fixed_point(st, fp)
        residuals.append(picard.pde_residual(sol, st))
    ratio = float(np.max(trace.ratios[1:])) if len(trace.ratios) > 1 else 0.0
    order = math.log2(residuals[-2] / residuals[-1])
    res.measured.update(T=T, residuals=residuals, iterations=len(trace.distances))
    res.check("admissible", fp.contraction_bound, fp.admissible, "contraction conditions")
    res.check("contraction ratio", ratio, ratio < 1, "< 1")
    res.check("sup L2 / delta", sol.sup_l2() / fp.delta, sol.sup_l2() <= 3 * fp.delta, "<= 3")
    res.check("PDE residual order", order, order >= 1.8, ">= 1.8")
    return res


def suite_energy(seed: int = 0, n_runs: int = 4) -> SuiteResult:
    res = SuiteResult("energy")
    rng = np.random.default_rng(seed)
    base = evolve.SolverConfig(n_points=256, half_length=16 * math.pi, t_end=2.0, dt=0.01,
                               snapshot_stride=1)
    worst_excess, worst_cancel = -np.inf, 0.0
    for i in range(n_runs):
        cfg = base.with_(eps=(0.0, 1e-2)[i % 2])
        u0 = evolve.random_smooth_field(cfg.grid, rng, amplitude=rng.uniform(0.05, 0.5))
        rec = evolve.run(cfg, u0)
        a = diagnostics.energy_audit(rec)
        worst_excess = max(worst_excess, a.max_excess / rec.l2_sq[0])
        worst_cancel = max(worst_cancel, max(rec.cancellation))
    res.check("energy inequality excess", worst_excess, worst_excess <= 0, "<= 0")
    res.check("cancellation residual", worst_cancel, worst_cancel < 1e-10, "< 1e-10")
    u0 = evolve.random_smooth_field(base.grid, rng, amplitude=0.4)
    errs = []
    for dt in (0.04, 0.02, 0.01):
        rec = evolve.run(base.with_(dt=dt, snapshot_stride=10 ** 6), u0)
        errs.append(abs(diagnostics.energy_audit(rec).budgets[-1].residual))
    order = math.log2(errs[-2] / errs[-1])
    res.measured["residuals"] = errs
    res.check("identity residual order", order, order >= 3.5, ">= 3.5")
    return res


SUITE_FUNCS: Dict[str, Callable[..., SuiteResult]] = {
    "symbols": suite_symbols, "kernels": suite_kernels, "norms": suite_norms,
    "picard": suite_picard, "energy": suite_energy,
}


def run_suites(name: str = "all", seed: int = 0) -> List[SuiteResult]:
    names = SUITES if name == "all" else (name,)
    out = []
    for n in names:
        if n not in SUITE_FUNCS:
            raise ValueError(f"unknown suite {n!r}; expected one of {SUITES + ('all',)}")
        t0 = time.perf_counter()
        r = SUITE_FUNCS[n](seed=seed)
        r.seconds = time.perf_counter() - t0
        log.info("suite %s: %s (%.1fs)", n, "ok" if r.passed else "FAILED", r.seconds)
        out.append(r)
    return out
