"""Runtime monitors built on RunRecords: energy budget, Sobolev ladder,
twin-run stability and the L-infinity criterion."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.integrate import quad, trapezoid

from .evolve import RunRecord, SolverConfig, run, sup_l2_distance
from .norms import h_norm, hdot_weight
from .operators import eval_whitham_m
from .spectral_core import SpectralField, weighted_sq_norm

log = logging.getLogger(__name__)

GRONWALL_C = 0.25


class EnergyInequalityError(AssertionError):
    pass


class UnresolvedLadderError(ValueError):
    """A ladder exponent asks for more smoothness than the grid carries."""


def _cumtrapz(y, t) -> np.ndarray:
    y, t = np.asarray(y, float), np.asarray(t, float)
    out = np.zeros_like(y)
    if len(y) > 1:
        out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


# ------------------------------------------------------------------ energy


@dataclass
class EnergyBudget:
    t: float
    kinetic: float
    dissipation_n: float
    dissipation_eps: float
    residual: float


@dataclass
class EnergyAudit:
    variant: str
    quadrature: str
    budgets: List[EnergyBudget]
    tol: float
    max_excess: float
    max_residual: float
    inequality_holds: bool

    def rows(self):
        out = [("t", "kinetic", "dissipation_n", "dissipation_eps", "residual")]
        out += [(b.t, b.kinetic, b.dissipation_n, b.dissipation_eps, b.residual)
                for b in self.budgets]
        return out

    def summary(self) -> dict:
        return {"variant": self.variant, "quadrature": self.quadrature, "tol": self.tol,
                "max_excess": self.max_excess, "max_residual": self.max_residual,
                "inequality_holds": self.inequality_holds}


def energy_audit(record: RunRecord, tol: float = 1e-6, quadrature: str = "stepper",
                 strict: bool = False) -> EnergyAudit:
    """Energy budget along a run.

    ``kinetic = ||u||^2 / 2`` and ``residual = kinetic(t) + D_N(t) + eps D_ell(t)
    - kinetic(0)``.  The dissipation integrals come either from the stepper's
    stage quadrature (``"stepper"``) or from the trapezoid rule over the
    recorded times (``"trapezoid"``, accurate only to second order in the
    recording interval).

    The inequality ||u||^2 + 2 D_N <= ||u0||^2 (1 + tol) is checked for the
    modified variant; ``strict`` turns a violation into an exception.
    """
    if not record.n_sq or len(record.n_sq) != len(record.times):
        raise ValueError("record has no N-norm series")
    cfg = record.config
    t = np.asarray(record.times)
    kin = 0.5 * np.asarray(record.l2_sq)
    if quadrature == "stepper":
        dn = np.asarray(record.dissipation_n)
        de = np.asarray(record.dissipation_eps)
    elif quadrature == "trapezoid":
        dn = _cumtrapz(record.n_sq, t)
        de = _cumtrapz(record.ell_sq, t)
    else:
        raise ValueError(f"unknown quadrature {quadrature!r}")
    de = cfg.eps * de
    res = kin + dn + de - kin[0]
    budgets = [EnergyBudget(*map(float, row)) for row in zip(t, kin, dn, de, res)]
    l2sq0 = 2 * kin[0]
    excess = 2 * kin + 2 * dn - l2sq0 * (1 + tol)
    max_excess = float(np.max(excess)) if len(excess) else 0.0
    holds = cfg.variant != "modified" or max_excess <= 0
    audit = EnergyAudit(cfg.variant, quadrature, budgets, tol, max_excess,
                        float(np.max(np.abs(res))), bool(holds))
    if strict and not holds:
        raise EnergyInequalityError(
            f"energy inequality violated by {max_excess:.3g} (tol {tol:g})")
    return audit


# ------------------------------------------------------------------ ladder


def ladder_exponents(s_frak: float, rho_target: float) -> List[float]:
    """sigma_0 = s - 1/4 and sigma_{k+1} = s + sigma_k - 1/4, stopping at the
    first exponent >= rho_target."""
    if not 0.25 < s_frak <= 0.75:
        raise ValueError("s_frak must lie in (1/4, 3/4]")
    sig = [s_frak - 0.25]
    while sig[-1] < rho_target:
        sig.append(s_frak + sig[-1] - 0.25)
    return sig


@dataclass
class LadderReport:
    exponents: List[float]
    times: List[float]
    norms: Dict[float, List[float]]
    sup: Dict[float, float]
    bounded: Dict[float, bool]
    cap: float
    linf_sup: float

    def rows(self):
        out = [("t",) + tuple(f"hdot_{s:g}" for s in self.exponents)]
        for i, t in enumerate(self.times):
            out.append((t,) + tuple(self.norms[s][i] for s in self.exponents))
        return out

    def summary(self) -> dict:
        return {"exponents": self.exponents, "cap": self.cap, "linf_sup": self.linf_sup,
                "sup": {f"{s:g}": v for s, v in self.sup.items()},
                "bounded": {f"{s:g}": v for s, v in self.bounded.items()}}


def ladder_monitor(record: RunRecord, rho_target: float, s_frak: float = 0.7,
                   cap: float = 1e6, resolution_tol: float = 1e-4) -> LadderReport:
    """Sup-in-time of the Hdot norms along the ladder.

    An exponent is rejected if, at any recorded time, more than
    ``resolution_tol`` of its squared norm sits in the top third of the
    retained spectral band.
    """
    if not record.norms:
        raise ValueError("record has no L-infinity series")
    grid = record.grid
    exps = ladder_exponents(s_frak, rho_target)
    coeffs = np.asarray(record.snapshots)
    ak = np.abs(grid.k)
    kept = grid.dealias_mask if record.config.dealias else np.ones(grid.n_points, bool)
    tail = kept & (3 * ak > 2 * np.max(ak[kept]))
    norms, sup, bounded = {}, {}, {}
    for s in exps:
        w = hdot_weight(grid, s)
        total = weighted_sq_norm(grid, coeffs, w)
        upper = weighted_sq_norm(grid, coeffs[:, tail], w[tail])
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(total > 0, upper / np.where(total > 0, total, 1), 0.0)
        if np.max(frac) > resolution_tol:
            raise UnresolvedLadderError(
                f"Hdot^{s:g} has tail fraction {np.max(frac):.3g} > {resolution_tol:g}")
        vals = np.sqrt(total)
        norms[s] = vals.tolist()
        sup[s] = float(np.max(vals))
        bounded[s] = bool(np.isfinite(sup[s]) and sup[s] <= cap)
    linf = float(np.max(record.series("linf")))
    return LadderReport(exps, list(record.times), norms, sup, bounded, cap, linf)


# ------------------------------------------------------------------ twin runs


@dataclass
class TwinReport:
    """Difference w = u - v of two runs against the Groenwall envelope.

    ``K = 2 sup_t (||u_x||_inf + ||v_x||_inf) * c``; with c = 1/4 this is
    the rate in d/dt ||w||^2 <= (1/2)(||u_x||_inf + ||v_x||_inf) ||w||^2
    obtained from d_t w = -|D| m(D) w + d_x(w (u + v) / 2).
    """

    times: List[float]
    w_sq: List[float]
    envelope: List[float]
    K: float
    c: float
    perturbation_l2: float

    @property
    def w_norm(self) -> np.ndarray:
        return np.sqrt(np.asarray(self.w_sq))

    @property
    def max_w(self) -> float:
        return float(np.max(self.w_norm))

    @property
    def within_envelope(self) -> bool:
        return bool(np.all(np.asarray(self.w_sq) <= np.asarray(self.envelope) * (1 + 1e-9)
                           + 1e-300))

    def rows(self):
        out = [("t", "w_sq", "envelope")]
        out += list(zip(self.times, self.w_sq, self.envelope))
        return out

    def summary(self) -> dict:
        return {"K": self.K, "c": self.c, "perturbation_l2": self.perturbation_l2,
                "max_w": self.max_w, "within_envelope": self.within_envelope}


def twin_run_stability(u0: SpectralField, perturbation: SpectralField, cfg: SolverConfig,
                       c: float = GRONWALL_C, reference: Optional[RunRecord] = None
                       ) -> TwinReport:
    cfg = cfg.with_(adaptive_dt=False)
    ru = reference if reference is not None else run(cfg, u0)
    rv = run(cfg, u0 + perturbation)
    for name, r in (("u", ru), ("v", rv)):
        if not r.completed:
            raise RuntimeError(f"twin run {name} ended with {r.status}: {r.message}")
    diff = np.asarray(ru.snapshots) - np.asarray(rv.snapshots)
    w_sq = weighted_sq_norm(ru.grid, diff, 1.0)
    K = 2.0 * float(np.max(np.asarray(ru.max_dx) + np.asarray(rv.max_dx))) * c
    t = np.asarray(ru.times)
    env = w_sq[0] * np.exp(K * t)
    return TwinReport(t.tolist(), w_sq.tolist(), env.tolist(), K, c, perturbation.l2())


@dataclass
class LinearResponse:
    scales: List[float]
    max_w: List[float]
    ratios: List[float]
    expected: List[float]
    within_envelope: List[bool]

    @property
    def max_relative_deviation(self) -> float:
        return float(max(abs(r / e - 1) for r, e in zip(self.ratios, self.expected)))

    def rows(self):
        out = [("scale", "max_w", "within_envelope")]
        out += list(zip(self.scales, self.max_w, self.within_envelope))
        return out


def perturbation_scaling_study(u0: SpectralField, direction: SpectralField,
                               scales: Sequence[float], cfg: SolverConfig,
                               c: float = GRONWALL_C) -> LinearResponse:
    """Twin runs along ``direction`` at several scales; ratios of the sup-in-t
    difference norms for consecutive scales next to the scale ratios."""
    ref = run(cfg.with_(adaptive_dt=False), u0)
    reports = [twin_run_stability(u0, direction * s, cfg, c, reference=ref) for s in scales]
    mw = [r.max_w for r in reports]
    ratios = [mw[i] / mw[i + 1] for i in range(len(mw) - 1)]
    expected = [scales[i] / scales[i + 1] for i in range(len(scales) - 1)]
    return LinearResponse(list(scales), mw, ratios, expected,
                          [r.within_envelope for r in reports])


# ------------------------------------------------------------------ L-infinity


def linf_kernel_integral(eps_prime: float) -> Dict[str, float]:
    """int |xi|^(-1/2 - 2 eps') / m(xi) d xi over the line, with its majorant.

    Since m >= 1 and m(xi) >= |xi|^(1/2), the integral is at most
    2 (1 / (1/2 - 2 eps') + 1 / (2 eps')).
    """
    if not 0 < eps_prime < 0.25:
        raise ValueError("eps_prime must lie in (0, 1/4)")
    p = 0.5 + 2 * eps_prime

    def inv_m(x):
        return 1.0 / float(eval_whitham_m(x))

    # algebraic weight x^(-p) handles the endpoint singularity exactly
    inner, _ = quad(inv_m, 0, 1, weight="alg", wvar=(-p, 0.0), limit=200)
    outer, _ = quad(lambda x: x ** -p * inv_m(x), 1, np.inf, limit=200)
    return {"integral": 2 * (inner + outer),
            "majorant": 2 * (1 / (0.5 - 2 * eps_prime) + 1 / (2 * eps_prime)),
            "low": 2 * inner, "high": 2 * outer}


def linf_kernel_grid_sum(grid, eps_prime: float) -> float:
    xi = np.abs(grid.xi[grid.k != 0])
    return float(grid.dxi * np.sum(xi ** -(0.5 + 2 * eps_prime) / eval_whitham_m(xi)))


@dataclass
class LinfCriterion:
    eps_prime: float
    A: float
    linf0: float
    sup_linf: float
    ratio: float
    kernel_integral: float
    kernel_majorant: float
    kernel_grid_sum: float

    @property
    def kernel_finite(self) -> bool:
        return bool(np.isfinite(self.kernel_integral)
                    and self.kernel_integral <= self.kernel_majorant
                    and self.kernel_grid_sum <= self.kernel_majorant)

    def summary(self) -> dict:
        d = asdict(self)
        d["kernel_finite"] = self.kernel_finite
        d["C_star"] = self.ratio
        return d


def linf_criterion_check(record: RunRecord, eps_prime: float = 0.05) -> LinfCriterion:
    """Measures C* = sup_t ||u||_inf / (||u0||_inf + A^2) with
    A = ||u||_{L^4_t H^(3/4 + eps')} by the trapezoid rule over the record."""
    if not record.snapshots or not record.norms:
        raise ValueError("record has no snapshots to build the H^(3/4+eps') series")
    grid = record.grid
    hs = np.array([h_norm(SpectralField(grid, coeffs=c), 0.75 + eps_prime)
                   for c in record.snapshots])
    t = np.asarray(record.times)
    A = float(trapezoid(hs ** 4, t) ** 0.25) if len(t) > 1 else 0.0
    linf = record.series("linf")
    denom = linf[0] + A ** 2
    ratio = float(np.max(linf) / denom) if denom > 0 else 0.0
    k = linf_kernel_integral(eps_prime)
    out = LinfCriterion(eps_prime, A, float(linf[0]), float(np.max(linf)), ratio,
                        k["integral"], k["majorant"], linf_kernel_grid_sum(grid, eps_prime))
    log.info("L-inf criterion: C* = %.4g (A = %.4g)", ratio, A)
    return out


__all__ = [
    "EnergyBudget", "EnergyAudit", "energy_audit", "ladder_exponents", "LadderReport",
    "ladder_monitor", "TwinReport", "twin_run_stability", "LinearResponse",
    "perturbation_scaling_study", "linf_kernel_integral", "linf_kernel_grid_sum",
    "LinfCriterion", "linf_criterion_check", "sup_l2_distance", "UnresolvedLadderError",
    "EnergyInequalityError",
]
