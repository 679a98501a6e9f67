"""Periodic grid, unitary DFT pair and the SpectralField container.

The whole-line problem is replaced by the torus x in [-L, L) with L the
half-length.  Frequencies are xi_k = pi k / L in standard FFT ordering.
Coefficients use the unitary ("ortho") normalisation, so the discrete
Parseval identity holds without extra factors and the physical L2 norm is
``sqrt(dx * sum |F_k|^2)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

import numpy as np

MIN_POINTS = 8


class GridMismatchError(ValueError):
    """Two objects that must share a grid do not."""


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [-half_length, half_length)."""

    n_points: int
    half_length: float

    def __post_init__(self):
        n = self.n_points
        if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
            raise TypeError(f"n_points must be an integer, got {n!r}")
        if n < MIN_POINTS:
            raise ValueError(f"n_points must be >= {MIN_POINTS}, got {n}")
        if n % 2:
            raise ValueError(f"n_points must be even, got {n}")
        if not np.isfinite(self.half_length) or self.half_length <= 0:
            raise ValueError(f"half_length must be positive, got {self.half_length}")

    @property
    def length(self) -> float:
        return 2.0 * self.half_length

    @property
    def dx(self) -> float:
        return self.length / self.n_points

    @property
    def dxi(self) -> float:
        """Frequency spacing pi / L."""
        return np.pi / self.half_length

    @cached_property
    def x(self) -> np.ndarray:
        return -self.half_length + self.dx * np.arange(self.n_points)

    @cached_property
    def k(self) -> np.ndarray:
        """Integer mode numbers in FFT order (0, 1, ..., n/2-1, -n/2, ..., -1)."""
        n = self.n_points
        return np.concatenate([np.arange(0, n // 2), np.arange(-n // 2, 0)])

    @cached_property
    def xi(self) -> np.ndarray:
        return self.dxi * self.k

    @property
    def xi_max(self) -> float:
        return self.dxi * (self.n_points // 2)

    @cached_property
    def nyquist_index(self) -> int:
        return self.n_points // 2

    @cached_property
    def ik(self) -> np.ndarray:
        """Symbol of d/dx with the unpaired Nyquist mode zeroed (keeps realness)."""
        d = 1j * self.xi
        d[self.nyquist_index] = 0.0
        return d

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keep |k| < n/3 so quadratic products alias only outside."""
        return 3 * np.abs(self.k) < self.n_points

    @property
    def dealias_cutoff(self) -> float:
        """Largest retained |xi| under the 2/3 rule."""
        return self.dxi * np.max(np.abs(self.k[self.dealias_mask]))

    def refined(self, factor: int = 2) -> "Grid":
        """Same domain, ``factor`` times more points."""
        return Grid(self.n_points * factor, self.half_length)

    def enlarged(self, factor: int = 2) -> "Grid":
        """Same dx, domain and point count multiplied by ``factor``."""
        return Grid(self.n_points * factor, self.half_length * factor)


def make_grid(n_points: int, half_length: float) -> Grid:
    return Grid(n_points, float(half_length))


def forward(grid: Grid, samples) -> np.ndarray:
    """Unitary DFT of real samples; returns coefficients in FFT order."""
    samples = np.asarray(samples)
    if samples.shape[-1] != grid.n_points:
        raise GridMismatchError(
            f"expected {grid.n_points} samples, got {samples.shape[-1]}")
    return np.fft.fft(samples, norm="ortho", axis=-1)


def inverse(grid: Grid, coeffs) -> np.ndarray:
    """Inverse unitary DFT; the imaginary round-off is discarded."""
    coeffs = np.asarray(coeffs)
    if coeffs.shape[-1] != grid.n_points:
        raise GridMismatchError(
            f"expected {grid.n_points} coefficients, got {coeffs.shape[-1]}")
    return np.fft.ifft(coeffs, norm="ortho", axis=-1).real


def reflect(coeffs: np.ndarray) -> np.ndarray:
    """Return c[-k] along the last axis."""
    return np.roll(coeffs[..., ::-1], 1, axis=-1)


def hermitian_defect(coeffs: np.ndarray) -> float:
    """max |c(-k) - conj(c(k))|; zero for coefficients of a real field."""
    coeffs = np.asarray(coeffs)
    return float(np.max(np.abs(reflect(coeffs) - np.conj(coeffs)), initial=0.0))


def l2_inner(grid: Grid, a: np.ndarray, b: np.ndarray) -> float:
    """Physical inner product int a * conj(b) dx from unitary coefficients."""
    return float(grid.dx * np.real(np.sum(a * np.conj(b), axis=-1)))


def weighted_sq_norm(grid: Grid, coeffs: np.ndarray, weight) -> np.ndarray:
    """dx * sum weight(xi) |F|^2 along the last axis."""
    return grid.dx * np.sum(weight * np.abs(coeffs) ** 2, axis=-1)


class SpectralField:
    """A real field stored as samples, coefficients, or both.

    Whichever representation was set last is authoritative; the other is
    rebuilt lazily.  Instances are treated as values: operations return new
    fields rather than mutating.
    """

    __slots__ = ("grid", "_samples", "_coeffs")

    def __init__(self, grid: Grid, samples=None, coeffs=None):
        if (samples is None) == (coeffs is None):
            raise ValueError("give exactly one of samples or coeffs")
        self.grid = grid
        self._samples: Optional[np.ndarray] = None
        self._coeffs: Optional[np.ndarray] = None
        if samples is not None:
            s = np.asarray(samples, dtype=float)
            if s.shape != (grid.n_points,):
                raise GridMismatchError(
                    f"samples shape {s.shape} does not match grid n={grid.n_points}")
            self._samples = s
        else:
            c = np.asarray(coeffs, dtype=complex)
            if c.shape != (grid.n_points,):
                raise GridMismatchError(
                    f"coeffs shape {c.shape} does not match grid n={grid.n_points}")
            # project onto the Hermitian subspace so the field stays real
            self._coeffs = 0.5 * (c + np.conj(reflect(c)))

    @classmethod
    def from_samples(cls, grid: Grid, samples) -> "SpectralField":
        return cls(grid, samples=samples)

    @classmethod
    def from_coeffs(cls, grid: Grid, coeffs) -> "SpectralField":
        return cls(grid, coeffs=coeffs)

    @classmethod
    def from_function(cls, grid: Grid, func: Callable[[np.ndarray], np.ndarray]
                      ) -> "SpectralField":
        return cls(grid, samples=func(grid.x))

    @classmethod
    def zeros(cls, grid: Grid) -> "SpectralField":
        return cls(grid, samples=np.zeros(grid.n_points))

    @property
    def authoritative(self) -> str:
        return "samples" if self._samples is not None and self._coeffs is None \
            else "coeffs" if self._samples is None else "both"

    @property
    def samples(self) -> np.ndarray:
        if self._samples is None:
            self._samples = inverse(self.grid, self._coeffs)
        return self._samples

    @property
    def coeffs(self) -> np.ndarray:
        if self._coeffs is None:
            self._coeffs = forward(self.grid, self._samples)
        return self._coeffs

    def _check(self, other: "SpectralField"):
        if other.grid != self.grid:
            raise GridMismatchError(f"{self.grid} vs {other.grid}")

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.grid, coeffs=self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.grid, coeffs=self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.grid, coeffs=self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return self * -1.0

    def l2(self) -> float:
        return float(np.sqrt(weighted_sq_norm(self.grid, self.coeffs, 1.0)))

    def linf(self) -> float:
        return float(np.max(np.abs(self.samples)))

    def derivative(self, order: int = 1) -> "SpectralField":
        return SpectralField(self.grid, coeffs=self.grid.ik ** order * self.coeffs)

    def dealiased(self) -> "SpectralField":
        return SpectralField(self.grid, coeffs=self.coeffs * self.grid.dealias_mask)

    def __repr__(self):
        return (f"SpectralField(n={self.grid.n_points}, L={self.grid.half_length:g}, "
                f"l2={self.l2():.6g})")


def pad_coeffs(grid: Grid, coeffs: np.ndarray, factor: int = 2) -> np.ndarray:
    """Zero-pad unitary coefficients onto ``grid.refined(factor)``.

    The unpaired Nyquist coefficient is split evenly between +-n/2 so the
    padded field is the real trigonometric interpolant.
    """
    n = grid.n_points
    m = n * factor
    out = np.zeros(coeffs.shape[:-1] + (m,), dtype=complex)
    half = n // 2
    out[..., :half] = coeffs[..., :half]
    out[..., m - half + 1:] = coeffs[..., half + 1:]
    out[..., half] = 0.5 * coeffs[..., half]
    out[..., m - half] = 0.5 * coeffs[..., half]
    return out * np.sqrt(factor)


def padded_product(f: SpectralField, g: SpectralField) -> SpectralField:
    """Alias-free product f*g on the grid with twice the points.

    Two trigonometric polynomials of degree <= n/2 multiply to one of degree
    <= n, which the doubled grid represents exactly.
    """
    f._check(g)
    fine = f.grid.refined(2)
    fs = inverse(fine, pad_coeffs(f.grid, f.coeffs))
    gs = inverse(fine, pad_coeffs(g.grid, g.coeffs))
    return SpectralField(fine, samples=fs * gs)
