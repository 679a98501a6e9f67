"""Mild solutions of the hyperviscous system by Picard iteration.

The Duhamel map on uniform time nodes t_j = j h is

    Phi(u)(t) = G(t) u0_eps - int_0^t G(t-s) A u(s) ds + int_0^t G(t-s) N(u(s)) ds

with ``G(t) = exp(-eps t ell(D))``, ``A = |D| m(D)``, ``N(u) = d/dx (u^2/2)``
(dealiased) and ``u0_eps`` the mollified data.  The s-integrals use the
composite trapezoid rule with the semigroup factor evaluated exactly at every
t - s.  Because the nodes are uniform, G(t_j - s_i) = r^(j-i) with
r = exp(-eps h ell), and each integral is a first-order recursion in j.

The iteration is the fixed-point equation e = e0 + L(e) - B(e, e) with
``e0 = G(t) u0_eps``; every iterate starts from e0.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from .operators import bilinear_kernel_constant, duality_constant, symbol_values
from .spectral_core import Grid, SpectralField, forward, inverse, weighted_sq_norm

log = logging.getLogger(__name__)


class NonConvergenceError(RuntimeError):
    """Picard iteration failed to reach the tolerance; shrink T."""


class QuadratureError(RuntimeError):
    """Time quadrature changes by more than the tolerance under node doubling."""


class InadmissibleConfigError(ValueError):
    """Fixed-point constants violate the contraction conditions."""


def mollifier_hat(xi, eps: float) -> np.ndarray:
    """Fourier transform of the unit-mass Gaussian mollifier at scale eps."""
    return np.exp(-0.5 * (eps * np.asarray(xi)) ** 2)


def mollify(u0: SpectralField, eps: float) -> SpectralField:
    if eps < 0:
        raise ValueError("eps must be >= 0")
    return SpectralField(u0.grid, coeffs=mollifier_hat(u0.grid.xi, eps) * u0.coeffs)


@dataclass
class FixedPointConfig:
    delta: float
    c_lin: float
    c_bil: float
    max_iters: int = 200
    tol: float = 1e-12

    @property
    def conditions(self) -> Tuple[float, float, float]:
        """(3 C_L, 9 C_B delta, C_L + 6 C_B delta); each must be < 1."""
        cb = self.c_bil * self.delta
        return 3 * self.c_lin, 9 * cb, self.c_lin + 6 * cb

    @property
    def admissible(self) -> bool:
        return all(c < 1 for c in self.conditions) and self.c_lin > 0 and self.c_bil * self.delta >= 0

    @property
    def contraction_bound(self) -> float:
        return self.c_lin + 6 * self.c_bil * self.delta


@dataclass
class DuhamelState:
    eps: float
    grid: Grid
    u0_mollified: SpectralField
    T: float
    n_nodes: int = 64
    dealias: bool = True
    nonlinear: bool = True

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("the mild-solution map needs eps > 0")
        if self.T <= 0 or self.n_nodes < 2:
            raise ValueError("need T > 0 and at least two intervals")

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_nodes + 1)

    @property
    def h(self) -> float:
        return self.T / self.n_nodes

    def with_nodes(self, n_nodes: int) -> "DuhamelState":
        return DuhamelState(self.eps, self.grid, self.u0_mollified, self.T, n_nodes,
                            self.dealias, self.nonlinear)


@dataclass
class FieldFamily:
    """Fourier coefficients of a field at a sequence of times, shape (n_t, n)."""

    grid: Grid
    times: np.ndarray
    coeffs: np.ndarray

    def l2_series(self) -> np.ndarray:
        return np.sqrt(weighted_sq_norm(self.grid, self.coeffs, 1.0))

    def sup_l2(self) -> float:
        return float(np.max(self.l2_series()))

    def at(self, j: int) -> SpectralField:
        return SpectralField(self.grid, coeffs=self.coeffs[j])

    def sup_distance(self, other: "FieldFamily") -> float:
        return float(np.max(np.sqrt(weighted_sq_norm(
            self.grid, self.coeffs - other.coeffs, 1.0))))


def mild_solution_data(u0: SpectralField, eps: float, T: float, n_nodes: int = 64,
                       **kw) -> DuhamelState:
    return DuhamelState(eps, u0.grid, mollify(u0, eps), T, n_nodes, **kw)


class _Operators:
    def __init__(self, state: DuhamelState):
        g = state.grid
        self.ell = symbol_values("hyperviscous_ell", g.xi)
        self.a = symbol_values("dissipation_a", g.xi)
        self.mask = g.dealias_mask if state.dealias else np.ones(g.n_points, bool)
        self.ik = g.ik * self.mask

    def nonlinear(self, grid: Grid, coeffs: np.ndarray) -> np.ndarray:
        u = inverse(grid, coeffs * self.mask)
        return self.ik * forward(grid, 0.5 * u * u)


def free_evolution(state: DuhamelState) -> FieldFamily:
    """e0(t) = G(t) (phi_eps * u0) on the nodes."""
    ell = symbol_values("hyperviscous_ell", state.grid.xi)
    t = state.nodes[:, None]
    return FieldFamily(state.grid, state.nodes,
                       np.exp(-state.eps * t * ell) * state.u0_mollified.coeffs)


def _trapezoid_duhamel(F: np.ndarray, r: np.ndarray, h: float) -> np.ndarray:
    """I_j = int_0^{t_j} G(t_j - s) F(s) ds by the trapezoid rule on the nodes."""
    out = np.zeros_like(F)
    S = F[0].copy()
    rj = np.ones_like(r)
    for j in range(1, F.shape[0]):
        S = r * S + F[j]
        rj = rj * r
        out[j] = h * (S - 0.5 * rj * F[0] - 0.5 * F[j])
    return out


def duhamel_terms(u: FieldFamily, state: DuhamelState, ops: Optional[_Operators] = None
                  ) -> Tuple[np.ndarray, np.ndarray]:
    """Return the linear term int G A u and the nonlinear term int G N(u)."""
    ops = ops or _Operators(state)
    r = np.exp(-state.eps * state.h * ops.ell)
    lin = _trapezoid_duhamel(ops.a * u.coeffs, r, state.h)
    if state.nonlinear:
        nl = _trapezoid_duhamel(ops.nonlinear(state.grid, u.coeffs), r, state.h)
    else:
        nl = np.zeros_like(lin)
    return lin, nl


def duhamel_map(u: FieldFamily, state: DuhamelState,
                ops: Optional[_Operators] = None) -> FieldFamily:
    if u.grid != state.grid or u.coeffs.shape[0] != state.n_nodes + 1:
        raise ValueError("family does not live on the state's grid and nodes")
    lin, nl = duhamel_terms(u, state, ops)
    e0 = free_evolution(state).coeffs
    return FieldFamily(state.grid, state.nodes, e0 - lin + nl)


@dataclass
class PicardTrace:
    distances: List[float] = field(default_factory=list)
    bound: float = 0.0
    converged: bool = False

    @property
    def ratios(self) -> np.ndarray:
        d = np.asarray(self.distances)
        if len(d) < 2:
            return np.array([])
        with np.errstate(divide="ignore", invalid="ignore"):
            return d[1:] / d[:-1]

    def rows(self):
        out = [("iter", "sup_distance", "bound_3delta")]
        out += [(i + 1, repr(d), repr(self.bound)) for i, d in enumerate(self.distances)]
        return out


def solve_fixed_point(state: DuhamelState, cfg: FixedPointConfig
                      ) -> Tuple[FieldFamily, PicardTrace]:
    if not cfg.admissible:
        raise InadmissibleConfigError(
            f"conditions (3C_L, 9C_B delta, C_L + 6C_B delta) = {cfg.conditions} "
            "must all be < 1")
    ops = _Operators(state)
    u = free_evolution(state)
    trace = PicardTrace(bound=3 * cfg.delta)
    for it in range(cfg.max_iters):
        new = duhamel_map(u, state, ops)
        d = new.sup_distance(u)
        trace.distances.append(d)
        u = new
        log.debug("picard iter %d: sup distance %.3e", it + 1, d)
        if d < cfg.tol:
            trace.converged = True
            return u, trace
        if not np.isfinite(d):
            break
    raise NonConvergenceError(
        f"no convergence in {cfg.max_iters} iterations (last distance "
        f"{trace.distances[-1]:.3g}); T={state.T:g} is too large for eps={state.eps:g}")


def fixed_point_residual(u: FieldFamily, state: DuhamelState) -> float:
    return duhamel_map(u, state).sup_distance(u)


def pde_residual(u: FieldFamily, state: DuhamelState) -> float:
    """sup over interior nodes of ||du/dt - RHS||_2 with centred differences."""
    ops = _Operators(state)
    c = u.coeffs
    dudt = (c[2:] - c[:-2]) / (2 * state.h)
    mid = c[1:-1]
    rhs = -(state.eps * ops.ell + ops.a) * mid
    if state.nonlinear:
        rhs = rhs + ops.nonlinear(state.grid, mid)
    return float(np.max(np.sqrt(weighted_sq_norm(state.grid, dudt - rhs, 1.0))))


def resolve_nodes(state: DuhamelState, cfg: FixedPointConfig, quad_tol: float = 1e-6,
                  max_doublings: int = 6) -> Tuple[FieldFamily, PicardTrace, DuhamelState]:
    """Double the node count until the solution moves by less than ``quad_tol``
    on the shared nodes."""
    sol, trace = solve_fixed_point(state, cfg)
    for _ in range(max_doublings):
        finer = state.with_nodes(2 * state.n_nodes)
        sol2, trace2 = solve_fixed_point(finer, cfg)
        coarse_view = FieldFamily(state.grid, state.nodes, sol2.coeffs[::2])
        change = coarse_view.sup_distance(sol)
        state, sol, trace = finer, sol2, trace2
        if change < quad_tol:
            return sol, trace, state
    raise QuadratureError(f"time quadrature not converged to {quad_tol:g} "
                          f"after {max_doublings} doublings")


# ------------------------------------------------------------ constants / T


@dataclass
class MeasuredConstants:
    """C_L(T) = c_lin sqrt(T/eps),  C_B(T) = c_bil eps^(-3/8) T^(5/8)."""

    c_lin: float
    c_bil: float
    kernel_sup: float

    def linear_bound(self, eps: float, T: float) -> float:
        return self.c_lin * math.sqrt(T / eps)

    def bilinear_bound(self, eps: float, T: float) -> float:
        return self.c_bil * eps ** -0.375 * T ** 0.625


def measured_constants(grid: Grid) -> MeasuredConstants:
    """Constants of the linear and bilinear Duhamel bounds on this grid.

    ``c_lin`` is the duality constant sup sqrt(tanhc(xi)/2).  For the
    bilinear term ||G(t) d/dx f||_2 <= ||d/dx G(t)||_2 ||f||_1 and
    ||uv/2||_1 <= ||u|| ||v|| / 2; integrating K (eps s)^(-3/8) over (0, T)
    gives c_bil = K * (1/2) * (8/5).
    """
    k = bilinear_kernel_constant(grid)
    return MeasuredConstants(duality_constant(grid), 0.8 * k, k)


def admissible_horizon(eps: float, data_norm: float, c_lin_hat: float,
                       c_bil_hat: float, safety: float = 0.9,
                       conditions: str = "basic") -> float:
    """Largest T (times ``safety``) meeting the small-time conditions.

    With X = c_lin eps^(-1/2) T^(1/2) and Y = c_bil eps^(-3/8) T^(5/8) ||u0||:

    * ``"basic"``: X < 1, Y < 1, X + Y < 1;
    * ``"contraction"``: 3X < 1, 9Y < 1, X + 6Y < 1
      with C_L = X and C_B delta = Y.
    """
    if min(eps, data_norm, c_lin_hat, c_bil_hat) <= 0:
        raise ValueError("all inputs must be positive")

    def X(T):
        return c_lin_hat * math.sqrt(T / eps)

    def Y(T):
        return c_bil_hat * eps ** -0.375 * T ** 0.625 * data_norm

    if conditions == "basic":
        constraints = [(X, 1.0), (Y, 1.0), (lambda T: X(T) + Y(T), 1.0)]
    elif conditions == "contraction":
        constraints = [(lambda T: 3 * X(T), 1.0), (lambda T: 9 * Y(T), 1.0),
                       (lambda T: X(T) + 6 * Y(T), 1.0)]
    else:
        raise ValueError(f"unknown condition set {conditions!r}")
    roots = [_increasing_root(f, level) for f, level in constraints]
    return safety * min(roots)


def horizon_roots(eps: float, data_norm: float, c_lin_hat: float,
                  c_bil_hat: float) -> Tuple[float, float, float]:
    """Closed-form roots of X = 1 and Y = 1 and the numerical root of X + Y = 1."""
    t_lin = eps / c_lin_hat ** 2
    t_bil = (eps ** 0.375 / (c_bil_hat * data_norm)) ** 1.6
    t_sum = _increasing_root(
        lambda T: c_lin_hat * math.sqrt(T / eps) + c_bil_hat * eps ** -0.375
        * T ** 0.625 * data_norm, 1.0)
    return t_lin, t_bil, t_sum


def _increasing_root(f, level: float) -> float:
    lo, hi = 0.0, 1.0
    while f(hi) < level:
        hi *= 2.0
        if hi > 1e300:
            raise ArithmeticError("no root found")
    return brentq(lambda T: f(T) - level, lo, hi, xtol=1e-300, rtol=1e-15, maxiter=500)


def fixed_point_config(state: DuhamelState, consts: MeasuredConstants,
                       max_iters: int = 200, tol: float = 1e-12) -> FixedPointConfig:
    """FixedPointConfig for ``state`` from measured constants."""
    delta = free_evolution(state).sup_l2()
    return FixedPointConfig(
        delta=delta,
        c_lin=consts.linear_bound(state.eps, state.T),
        c_bil=consts.bilinear_bound(state.eps, state.T),
        max_iters=max_iters, tol=tol)
