"""Norms of real fields and executable forms of the interpolation and
product inequalities.

All Sobolev-type quantities are Fourier sums with the unitary coefficient
convention, ``||f||^2_w = dx * sum w(xi_k) |F_k|^2``:

* ``L2``            w = 1
* ``Hdot^sigma``    w = |xi|^(2 sigma)   (the xi = 0 mode is ignored)
* ``H^sigma``       w = (1 + xi^2)^sigma
* ``N``             w = |xi| m(xi)
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Sequence

import numpy as np

from .operators import eval_whitham_m
from .spectral_core import Grid, SpectralField, padded_product, weighted_sq_norm


def hdot_weight(grid: Grid, sigma: float) -> np.ndarray:
    ax = np.abs(grid.xi)
    if sigma == 0:
        return np.ones_like(ax)
    out = np.zeros_like(ax)
    nz = ax > 0
    out[nz] = ax[nz] ** (2.0 * sigma)
    return out


def n_weight(grid: Grid) -> np.ndarray:
    return np.abs(grid.xi) * eval_whitham_m(grid.xi)


def l2_norm(f: SpectralField) -> float:
    return f.l2()


def hdot_norm(f: SpectralField, sigma: float) -> float:
    return float(math.sqrt(weighted_sq_norm(f.grid, f.coeffs, hdot_weight(f.grid, sigma))))


def h_norm(f: SpectralField, sigma: float) -> float:
    """Inhomogeneous H^sigma norm."""
    w = (1.0 + f.grid.xi ** 2) ** sigma
    return float(math.sqrt(weighted_sq_norm(f.grid, f.coeffs, w)))


def n_norm(f: SpectralField) -> float:
    return float(math.sqrt(weighted_sq_norm(f.grid, f.coeffs, n_weight(f.grid))))


def linf_norm(f: SpectralField) -> float:
    return f.linf()


@dataclass
class NormReport:
    t: float
    l2: float
    n_norm: float
    linf: float
    hs: Dict[float, float] = field(default_factory=dict)

    def header(self) -> list:
        return ["t", "l2", "n", "linf"] + [f"hdot_{s:g}" for s in sorted(self.hs)]

    def row(self) -> list:
        return [self.t, self.l2, self.n_norm, self.linf] + \
            [self.hs[s] for s in sorted(self.hs)]


def compute_norms(f: SpectralField, exponents: Iterable[float] = (),
                  t: float = 0.0) -> NormReport:
    exps = sorted(set(float(s) for s in exponents))
    if any(s < 0 for s in exps):
        raise ValueError("Sobolev exponents must be >= 0")
    return NormReport(
        t=float(t), l2=f.l2(), n_norm=n_norm(f), linf=f.linf(),
        hs={s: hdot_norm(f, s) for s in exps})


def check_interpolation_s(f: SpectralField, s: float) -> float:
    """||f||_{Hdot^s} / (||f||_2^{1-2s} ||f||_N^{2s}).

    For 0 < s <= 1/2 Hoelder's inequality and m >= 1 give a ratio <= 1.
    Larger ``s`` (up to 3/4) is accepted and the ratio returned unasserted.
    """
    if not 0 < s < 0.75:
        raise ValueError(f"s must lie in (0, 3/4), got {s}")
    l2 = f.l2()
    nn = n_norm(f)
    if l2 == 0:
        raise ValueError("interpolation ratio undefined for the zero field")
    if nn == 0:
        # only the xi = 0 mode is present, so Hdot^s vanishes too
        return 0.0
    return hdot_norm(f, s) / (l2 ** (1 - 2 * s) * nn ** (2 * s))


def check_endpoint_34(f: SpectralField) -> float:
    """||f||_2^2 + ||f||_N^2 - ||f||^2_{Hdot^{3/4}}; nonnegative for every f.

    Mode by mode 1 + |xi| m(xi) >= |xi|^(3/2) because
    (1 + xi^2) tanh(xi) >= xi^2.
    """
    w = 1.0 + n_weight(f.grid) - hdot_weight(f.grid, 0.75)
    return float(weighted_sq_norm(f.grid, f.coeffs, w))


def endpoint_scale(f: SpectralField) -> float:
    return f.l2() ** 2 + n_norm(f) ** 2


@dataclass
class ProductLawRatios:
    product_law: float
    kato_ponce: float


def check_product_laws(f: SpectralField, g: SpectralField, sigma: float,
                       delta: float) -> ProductLawRatios:
    """LHS/RHS ratios of the Sobolev product law and the Kato-Ponce rule.

    The product is formed alias-free on the doubled grid.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if not 0 <= delta <= 0.5:
        raise ValueError("delta must lie in [0, 1/2]")
    fg = padded_product(f, g)
    pl_rhs = hdot_norm(f, sigma) * hdot_norm(g, delta) + hdot_norm(g, sigma) * hdot_norm(f, delta)
    kp_rhs = hdot_norm(f, sigma) * g.linf() + hdot_norm(g, sigma) * f.linf()
    if pl_rhs == 0 or kp_rhs == 0:
        raise ValueError("degenerate right-hand side")
    # a negative order is fine on the torus: the xi = 0 mode is dropped
    pl_lhs = hdot_norm(fg, sigma + delta - 0.5)
    return ProductLawRatios(pl_lhs / pl_rhs, hdot_norm(fg, sigma) / kp_rhs)


def norm_reports_csv_header(exponents: Sequence[float]) -> list:
    return ["t", "l2", "n", "linf"] + [f"hdot_{s:g}" for s in sorted(exponents)]
