import math

import hypothesis
import numpy as np
import pytest

from bfmhd.spectral import SpectralVectorField, make_grid
from bfmhd.verification import random_solenoidal

hypothesis.settings.register_profile("ci", max_examples=25, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.load_profile("ci")

TWO_PI = 2 * math.pi


@pytest.fixture
def grid16():
    return make_grid(16, TWO_PI)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def trig_field(grid, rng, n_modes=6, n_max=None):
    """Real 3-vector field as an explicit sum of cos/sin modes.

    Returns (physical values on the N grid, dict mode -> complex amplitude
    vector).  Amplitudes follow from cos = (e^+ + e^-)/2, sin = (e^+ - e^-)/2i,
    independent of any FFT.
    """
    N = grid.N
    n_max = N // 2 - 1 if n_max is None else n_max
    x, y, z = grid.coordinates()
    vals = np.zeros((3, N, N, N))
    coeffs = {}
    for _ in range(n_modes):
        n = tuple(int(v) for v in rng.integers(-n_max, n_max + 1, size=3))
        if n == (0, 0, 0):
            continue
        a = rng.standard_normal(3)
        b = rng.standard_normal(3)
        phase = grid.k0 * (n[0] * x + n[1] * y + n[2] * z)
        vals += a[:, None, None, None] * np.cos(phase) + b[:, None, None, None] * np.sin(phase)
        c = (a - 1j * b) / 2
        m = tuple(-v for v in n)
        coeffs[n] = coeffs.get(n, 0) + c
        coeffs[m] = coeffs.get(m, 0) + np.conj(c)
    return vals, coeffs


def coeff_at(f: SpectralVectorField, n):
    """Coefficient vector of integer mode n, using Hermitian symmetry for kz < 0."""
    N = f.grid.N
    if n[2] < 0:
        return np.conj(f.c[:, (-n[0]) % N, (-n[1]) % N, -n[2]])
    return f.c[:, n[0] % N, n[1] % N, n[2]]


def solenoidal(grid, seed=0, k_max=3.0, energy=None):
    f = random_solenoidal(grid, np.random.default_rng(seed), k_max)
    if energy is not None:
        from bfmhd.spectral import l2_norm_sq

        f = f * math.sqrt(energy / l2_norm_sq(f))
    return f


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion, echoed now and in the terminal summary."""

    def report(number, title, passed, detail=""):
        line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {title}" + (f" | {detail}" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print("\n" + line)
        return passed

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
