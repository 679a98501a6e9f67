import math

import numpy as np
import pytest

from whitham.spectral_core import Grid, SpectralField


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def unit_grid():
    """Lambda = pi, so xi_k = k."""
    return Grid(64, math.pi)


@pytest.fixture
def wide_grid():
    return Grid(512, 32 * math.pi)


def random_real_field(grid, rng, decay=0.1):
    c = (rng.standard_normal(grid.n_points) + 1j * rng.standard_normal(grid.n_points))
    c *= np.exp(-decay * np.abs(grid.k))
    return SpectralField(grid, coeffs=c)


def direct_dft(samples):
    """O(n^2) unitary DFT, independent of numpy.fft."""
    n = len(samples)
    j = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(j, j) / n) @ samples / np.sqrt(n)


@pytest.fixture
def acceptance(request):
    """Record a PASS/FAIL line for an acceptance criterion."""
    lines = request.config.__dict__.setdefault("_acceptance_lines", {})

    def record(number, title, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {title}: {detail}"
        lines[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.__dict__.get("_acceptance_lines")
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
