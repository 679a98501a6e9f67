"""Fourier multipliers and convolution semigroups.

Symbols are even, nonnegative functions of xi sampled in FFT order:

==================  ==========================
``whitham_m``       m(xi) = sqrt((1 + xi^2) tanh(xi) / xi)
``dissipation_a``   |xi| m(xi)
``hyperviscous_ell`` xi^2 (1 + xi^2)
``heat_sq``         xi^2
``quartic``         xi^4
``frac_laplacian``  |xi|^(2 s)
==================  ==========================

Kernel norms are torus norms of the periodised kernel, e.g.
``||K||_2^2 = (1 / 2L) sum_k |K_hat(xi_k)|^2``, which converges spectrally
to the whole-line value once the kernel is resolved and fits in the box.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .spectral_core import Grid, GridMismatchError, SpectralField, inverse, pad_coeffs

SYMBOL_NAMES = ("whitham_m", "dissipation_a", "hyperviscous_ell", "heat_sq",
                "quartic", "frac_laplacian")

TANHC_SERIES_CUTOFF = 1e-4
NYQUIST_TAIL_TOL = 1e-8


class UnderResolvedError(RuntimeError):
    """The grid does not resolve a kernel at the requested time."""


def tanhc(xi) -> np.ndarray:
    """tanh(xi)/xi with the removable singularity at 0 filled in."""
    xi = np.asarray(xi, dtype=float)
    out = np.empty_like(xi)
    small = np.abs(xi) < TANHC_SERIES_CUTOFF
    x2 = xi[small] ** 2
    out[small] = 1.0 - x2 / 3.0 + 2.0 * x2 * x2 / 15.0
    big = ~small
    out[big] = np.tanh(xi[big]) / xi[big]
    return out


def eval_whitham_m(xi):
    """Whitham dispersion symbol m(xi); m(0) = 1 and m(xi) ~ |xi|^(1/2)."""
    scalar = np.ndim(xi) == 0
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    val = np.sqrt((1.0 + xi * xi) * tanhc(xi))
    return float(val[0]) if scalar else val


def symbol_values(name: str, xi, s: Optional[float] = None) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    ax = np.abs(xi)
    if name == "whitham_m":
        return eval_whitham_m(xi)
    if name == "dissipation_a":
        return ax * eval_whitham_m(xi)
    if name == "hyperviscous_ell":
        return xi * xi * (1.0 + xi * xi)
    if name == "heat_sq":
        return xi * xi
    if name == "quartic":
        return xi ** 4
    if name == "frac_laplacian":
        if s is None or s < 0:
            raise ValueError("frac_laplacian needs an exponent s >= 0")
        out = np.zeros_like(ax)
        nz = ax > 0
        out[nz] = ax[nz] ** (2.0 * s)
        if s == 0:
            out[~nz] = 1.0
        return out
    raise ValueError(f"unknown symbol {name!r}; expected one of {SYMBOL_NAMES}")


@dataclass(frozen=True)
class MultiplierSymbol:
    """A named even symbol sampled on a grid."""

    name: str
    grid: Grid
    values: np.ndarray = field(repr=False, compare=False)
    s: Optional[float] = None

    def __call__(self, xi):
        return symbol_values(self.name, xi, self.s)


def make_symbol(name: str, grid: Grid, s: Optional[float] = None) -> MultiplierSymbol:
    vals = symbol_values(name, grid.xi, s)
    vals.setflags(write=False)
    return MultiplierSymbol(name, grid, vals, s)


def apply_multiplier(sym: MultiplierSymbol, f: SpectralField) -> SpectralField:
    if sym.grid != f.grid:
        raise GridMismatchError(f"symbol on {sym.grid}, field on {f.grid}")
    return SpectralField(f.grid, coeffs=sym.values * f.coeffs)


@dataclass(frozen=True)
class SemigroupKernel:
    """Multiplier exp(-t a(xi)) of the semigroup generated by -a(D)."""

    generator: MultiplierSymbol
    t: float
    values: np.ndarray = field(repr=False, compare=False)


def semigroup_kernel(gen: MultiplierSymbol, t: float) -> SemigroupKernel:
    if t < 0:
        raise ValueError(f"semigroup time must be >= 0, got {t}")
    vals = np.exp(-t * gen.values)
    vals.setflags(write=False)
    return SemigroupKernel(gen, float(t), vals)


def apply_semigroup(gen: MultiplierSymbol, t: float, f: SpectralField) -> SpectralField:
    if gen.grid != f.grid:
        raise GridMismatchError(f"generator on {gen.grid}, field on {f.grid}")
    return SpectralField(f.grid, coeffs=semigroup_kernel(gen, t).values * f.coeffs)


# ---------------------------------------------------------------- kernel norms


def fit_loglog_slope(x, y) -> tuple[float, float]:
    """Least-squares slope and intercept of log(y) against log(x)."""
    slope, intercept = np.polyfit(np.log(np.asarray(x, float)),
                                  np.log(np.asarray(y, float)), 1)
    return float(slope), float(intercept)


def _check_resolved(gen: MultiplierSymbol, t: float):
    tail = math.exp(-t * float(gen(gen.grid.xi_max)))
    if tail > NYQUIST_TAIL_TOL:
        raise UnderResolvedError(
            f"{gen.name} kernel at t={t:g}: multiplier at Nyquist is {tail:.3g} "
            f"(> {NYQUIST_TAIL_TOL:g}); refine the grid")


def kernel_l2_norm(gen: MultiplierSymbol, t: float, derivative_order: float = 0.0,
                   check: bool = True) -> float:
    """||(|D|^p) K_t||_{L2} on the torus for the kernel K_t = exp(-t a(D))."""
    if check:
        _check_resolved(gen, t)
    grid = gen.grid
    w = np.abs(grid.xi) ** (2.0 * derivative_order) if derivative_order else 1.0
    sq = np.sum(w * np.exp(-2.0 * t * gen.values)) / grid.length
    return float(math.sqrt(sq))


def kernel_samples(gen: MultiplierSymbol, t: float, derivative_order: float = 0.0,
                   refine: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Physical-space kernel on the (optionally zero-padded) grid.

    Returns ``(x, K)`` with K normalised so that convolution over the torus
    reproduces the multiplier.
    """
    grid = gen.grid
    w = np.abs(grid.xi) ** derivative_order if derivative_order else 1.0
    # unitary coefficients of the kernel: K_hat / (2L) * sqrt(n)
    coeffs = w * np.exp(-t * gen.values) * np.sqrt(grid.n_points) / grid.length
    # kernel is centred at x = 0, which is index n/2 of grid.x
    coeffs = coeffs * np.exp(1j * grid.xi * grid.x[0])
    fine = grid.refined(refine) if refine > 1 else grid
    c = pad_coeffs(grid, coeffs, refine) if refine > 1 else coeffs
    return fine.x, inverse(fine, c)


def kernel_l1_norm(gen: MultiplierSymbol, t: float, tol: float = 1e-6,
                   max_points: int = 1 << 20, certify: bool = True) -> float:
    """Trapezoid L1 norm of the kernel exp(-t a(D)).

    The physical grid is refined by spectral zero-padding until two
    successive values agree to ``tol``; with ``certify`` the domain and point
    count are then doubled and the value must again move by less than
    ``tol``.
    """
    _check_resolved(gen, t)
    grid = gen.grid

    def l1(g_sym: MultiplierSymbol) -> float:
        refine, prev = 2, None
        while True:
            x, k = kernel_samples(g_sym, t, refine=refine)
            val = float(np.sum(np.abs(k)) * (x[1] - x[0]))
            if prev is not None and abs(val - prev) < tol:
                return val
            if g_sym.grid.n_points * refine * 2 > max_points:
                raise UnderResolvedError(
                    f"L1 norm of {g_sym.name} kernel at t={t:g} not converged "
                    f"(last change {abs(val - prev):.3g})")
            prev = val
            refine *= 2

    val = l1(gen)
    if certify:
        big = make_symbol(gen.name, grid.enlarged(2), gen.s)
        val2 = l1(big)
        if abs(val2 - val) >= tol:
            raise UnderResolvedError(
                f"L1 norm changes by {abs(val2 - val):.3g} when the box is doubled")
    return val


def quartic_kernel_l2_exact(t: float, derivative_order: float) -> float:
    """Whole-line ||(|D|^p) h_t||_2 for h_t = exp(-t D^4), in closed form.

    (1/2pi) int |xi|^{2p} exp(-2 t xi^4) dxi
        = Gamma((2p+1)/4) (2t)^{-(2p+1)/4} / (4 pi).
    """
    q = (2.0 * derivative_order + 1.0) / 4.0
    return math.sqrt(math.gamma(q) * (2.0 * t) ** (-q) / (4.0 * math.pi))


@dataclass
class KernelStudy:
    generator: str
    derivative_order: float
    norm: str
    times: np.ndarray
    norms: np.ndarray
    slope: float
    intercept: float

    def rows(self):
        """CSV rows: ``(t, norm)`` pairs followed by a slope trailer."""
        out = [("t", "norm")]
        out += [(repr(float(t)), repr(float(v))) for t, v in zip(self.times, self.norms)]
        out.append(("slope", repr(self.slope)))
        return out


def kernel_norm_study(gen: MultiplierSymbol, derivative_order: float,
                      times: Sequence[float], norm: str = "l2") -> KernelStudy:
    """Measure kernel norms over ``times`` and fit the log-log slope."""
    times = np.asarray(sorted(times), dtype=float)
    if np.any(times <= 0):
        raise ValueError("times must be positive")
    if times[-1] / times[0] < 100:
        raise ValueError("times must span at least two decades")
    if norm == "l2":
        vals = [kernel_l2_norm(gen, t, derivative_order) for t in times]
    elif norm == "l1":
        if derivative_order:
            raise ValueError("L1 study is implemented for the kernel itself only")
        vals = [kernel_l1_norm(gen, t) for t in times]
    else:
        raise ValueError(f"norm must be 'l2' or 'l1', got {norm!r}")
    vals = np.asarray(vals)
    slope, icpt = fit_loglog_slope(times, vals)
    return KernelStudy(gen.name, float(derivative_order), norm, times, vals, slope, icpt)


# --------------------------------------------------------- space-time duality


def duality_mode_weights(grid: Grid) -> np.ndarray:
    """Per-mode value of eps * int_0^inf a^2 exp(-2 eps ell t) dt.

    Equals a^2 / (2 ell) = tanhc(xi) / 2 off xi = 0 and 0 at xi = 0, where
    the integrand vanishes identically.
    """
    a = symbol_values("dissipation_a", grid.xi)
    ell = symbol_values("hyperviscous_ell", grid.xi)
    out = np.zeros_like(a)
    nz = ell > 0
    out[nz] = a[nz] ** 2 / (2.0 * ell[nz])
    return out


def duality_norm(eps: float, psi: SpectralField) -> float:
    """|| [(-Lap)^(1/2) M G_{eps t}] * psi ||_{L2_t L2_x} over t in (0, inf)."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    w = duality_mode_weights(psi.grid)
    return float(math.sqrt(psi.grid.dx * np.sum(w * np.abs(psi.coeffs) ** 2) / eps))


@dataclass
class DualityStudy:
    eps: np.ndarray
    norms: np.ndarray
    slope: float
    intercept: float

    def rows(self):
        out = [("eps", "norm")]
        out += [(repr(float(e)), repr(float(v))) for e, v in zip(self.eps, self.norms)]
        out.append(("slope", repr(self.slope)))
        return out


def duality_bound_study(eps_values: Sequence[float], psi: SpectralField) -> DualityStudy:
    eps = np.asarray(sorted(eps_values), dtype=float)
    if np.any(eps <= 0):
        raise ValueError("eps values must be positive")
    if eps[-1] / eps[0] < 100:
        raise ValueError("eps values must span at least two decades")
    if psi.l2() == 0:
        raise ValueError("psi must be nonzero")
    vals = np.array([duality_norm(e, psi) for e in eps])
    slope, icpt = fit_loglog_slope(eps, vals)
    return DualityStudy(eps, vals, slope, icpt)


def duality_constant(grid: Grid) -> float:
    """sup_psi sqrt(eps) ||...||_{L2_t L2_x} / ||psi||_2 on this grid."""
    return float(math.sqrt(np.max(duality_mode_weights(grid))))


def bilinear_kernel_constant(grid: Grid, n_times: int = 400) -> float:
    """sup over tau of tau^(3/8) ||d/dx G_tau||_2 for G = exp(-tau ell(D)).

    The supremum is taken over a log-spaced sweep wide enough to contain the
    maximiser: for small tau the torus sum is limited by the grid and for
    large tau the heat factor takes over, so the weighted norm vanishes at
    both ends.
    """
    ell = make_symbol("hyperviscous_ell", grid)
    taus = np.logspace(-12, 6, n_times)
    vals = [tau ** 0.375 * kernel_l2_norm(ell, tau, 1.0, check=False) for tau in taus]
    i = int(np.argmax(vals))
    # refine around the discrete maximiser
    lo, hi = taus[max(i - 1, 0)], taus[min(i + 1, n_times - 1)]
    fine = np.geomspace(lo, hi, 200)
    best = max(tau ** 0.375 * kernel_l2_norm(ell, tau, 1.0, check=False) for tau in fine)
    return float(max(best, vals[i]))
