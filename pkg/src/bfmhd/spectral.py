"""Fourier machinery on the periodic box [0, L]^3.

Coefficients are stored on the real-to-complex half spectrum with shape
``(3, N, N, N//2 + 1)`` (kz fastest).  The forward transform carries the
1/N^3 factor, so a coefficient is the amplitude of its mode and Parseval reads

    ||f||_2^2 = L^3 * sum_k |f_hat(k)|^2

with the sum over the full spectrum.  In half-spectrum storage the planes
kz = 0 and kz = N/2 carry weight 1 and every other plane weight 2.

Wavenumber indices run over {-N/2+1, ..., N/2}; the Nyquist index N/2 is kept
explicitly.  Odd-order derivatives (gradient, divergence, curl) and the Leray
projector use the Nyquist-zeroed wavenumber ``k_eff`` so that ``div`` and the
projector agree and Hermitian symmetry is preserved.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft

__all__ = [
    "Grid",
    "SpectralVectorField",
    "PhysicalField",
    "make_grid",
    "padded_size",
    "pad_coeffs",
    "truncate_coeffs",
    "transform_forward",
    "transform_backward",
    "spectral_derivative",
    "leray_project",
    "dealias",
    "lp_norm",
    "l2_norm_sq",
    "grad_norm_sq",
    "inner",
    "divergence_residual",
    "field_mean",
]

DEALIAS_PADDING = 1.5


@dataclass(frozen=True)
class Grid:
    """Uniform collocation grid with N points per direction on a cube of edge L."""

    N: int
    L: float

    def __post_init__(self):
        if not isinstance(self.N, (int, np.integer)) or isinstance(self.N, bool):
            raise TypeError(f"N must be an integer, got {self.N!r}")
        if self.N < 4 or self.N % 2:
            raise ValueError(f"N must be an even integer >= 4, got {self.N}")
        if not np.isfinite(self.L) or self.L <= 0:
            raise ValueError(f"L must be positive and finite, got {self.L}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "L", float(self.L))

    @property
    def k0(self) -> float:
        return 2.0 * np.pi / self.L

    @property
    def lam(self) -> float:
        """Poincare constant (2 pi / L)^2."""
        return self.k0**2

    @property
    def volume(self) -> float:
        return self.L**3

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def nz(self) -> int:
        return self.N // 2 + 1

    @property
    def shape(self) -> tuple[int, int, int]:
        """Spectral (half-spectrum) shape of one scalar component."""
        return (self.N, self.N, self.nz)

    @cached_property
    def indices(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Integer mode indices (nx, ny, nz), broadcastable, Nyquist as +N/2."""
        n = np.fft.fftfreq(self.N, 1.0 / self.N).astype(np.int64)
        n[self.N // 2] = self.N // 2
        nz = np.arange(self.nz, dtype=np.int64)
        return n[:, None, None], n[None, :, None], nz[None, None, :]

    @cached_property
    def k(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(self.k0 * n.astype(float) for n in self.indices)

    @cached_property
    def k_eff(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        h = self.N // 2
        return tuple(np.where(np.abs(n) == h, 0.0, self.k0 * n) for n in self.indices)

    @cached_property
    def k2(self) -> np.ndarray:
        kx, ky, kz = self.k
        return kx**2 + ky**2 + kz**2

    @cached_property
    def inv_k2_eff(self) -> np.ndarray:
        kx, ky, kz = self.k_eff
        k2 = kx**2 + ky**2 + kz**2
        out = np.zeros_like(k2)
        np.divide(1.0, k2, out=out, where=k2 > 0)
        return out

    @cached_property
    def weights(self) -> np.ndarray:
        w = np.full(self.nz, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return w[None, None, :]

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        nx, ny, nz = self.indices
        cut = self.N / 3.0
        return (np.abs(nx) <= cut) & (np.abs(ny) <= cut) & (np.abs(nz) <= cut)

    def coordinates(self, padding: float = 1.0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Collocation coordinates (x, y, z) on the (optionally padded) grid, broadcastable."""
        M = padded_size(self.N, padding)
        x = self.L * np.arange(M) / M
        return x[:, None, None], x[None, :, None], x[None, None, :]


def make_grid(N: int, L: float) -> Grid:
    return Grid(N, L)


def padded_size(N: int, padding: float) -> int:
    M = int(round(N * padding))
    if M < N:
        raise ValueError(f"padding factor {padding} shrinks the grid")
    return M


@dataclass
class SpectralVectorField:
    """Half-spectrum coefficients of a real 3-vector field."""

    c: np.ndarray
    grid: Grid = field(repr=False)

    def __post_init__(self):
        expected = (3, *self.grid.shape)
        if self.c.shape != expected:
            raise ValueError(f"coefficient shape {self.c.shape} does not match grid {expected}")
        if self.c.dtype != np.complex128:
            self.c = self.c.astype(np.complex128)

    @classmethod
    def zeros(cls, grid: Grid) -> "SpectralVectorField":
        return cls(np.zeros((3, *grid.shape), dtype=np.complex128), grid)

    def copy(self) -> "SpectralVectorField":
        return SpectralVectorField(self.c.copy(), self.grid)

    def _check(self, other):
        if isinstance(other, SpectralVectorField):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.c
        return other

    def __add__(self, other):
        return SpectralVectorField(self.c + self._check(other), self.grid)

    def __sub__(self, other):
        return SpectralVectorField(self.c - self._check(other), self.grid)

    def __mul__(self, s):
        return SpectralVectorField(self.c * s, self.grid)

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralVectorField(-self.c, self.grid)


@dataclass
class PhysicalField:
    """Real samples on the M^3 collocation grid, M = round(padding * N).

    ``values`` has shape ``(3, M, M, M)`` for vector fields or ``(M, M, M)``
    for scalars.
    """

    values: np.ndarray
    grid: Grid = field(repr=False)
    padding: float = 1.0

    def __post_init__(self):
        M = self.M
        if self.values.shape[-3:] != (M, M, M) or self.values.ndim not in (3, 4):
            raise ValueError(f"values of shape {self.values.shape} do not fit an {M}^3 grid")

    @property
    def M(self) -> int:
        return padded_size(self.grid.N, self.padding)

    @property
    def is_vector(self) -> bool:
        return self.values.ndim == 4


def _pad_axis(a: np.ndarray, axis: int, N: int, M: int, half: bool) -> np.ndarray:
    h = N // 2
    a = np.moveaxis(a, axis, -1)
    out = np.zeros((*a.shape[:-1], M // 2 + 1 if half else M), dtype=a.dtype)
    out[..., :h] = a[..., :h]
    if half:
        out[..., h] = 0.5 * a[..., h]
    else:
        out[..., M - h + 1 :] = a[..., h + 1 :]
        out[..., h] = 0.5 * a[..., h]
        out[..., M - h] += 0.5 * a[..., h]
    return np.moveaxis(out, -1, axis)


def pad_coeffs(c: np.ndarray, N: int, M: int) -> np.ndarray:
    """Zero-pad half-spectrum coefficients from N^3 to M^3, splitting Nyquist modes."""
    if M == N:
        return c.copy()
    out = _pad_axis(c, -3, N, M, half=False)
    out = _pad_axis(out, -2, N, M, half=False)
    return _pad_axis(out, -1, N, M, half=True)


def truncate_coeffs(c: np.ndarray, M: int, N: int) -> np.ndarray:
    """Keep modes |n_i| < N/2 of an M^3 half spectrum; Nyquist modes of the N grid are zero."""
    if M == N:
        return c.copy()
    h = N // 2
    src = np.r_[0:h, M - h + 1 : M]
    dst = np.r_[0:h, h + 1 : N]
    out = np.zeros((*c.shape[:-3], N, N, h + 1), dtype=np.complex128)
    out[..., dst[:, None], dst[None, :], :h] = c[..., src[:, None], src[None, :], :h]
    return out


def transform_forward(f: PhysicalField) -> SpectralVectorField:
    M, N = f.M, f.grid.N
    values = f.values if f.is_vector else f.values[None]
    if values.shape[0] != 3:
        raise ValueError("transform_forward expects a 3-vector field")
    c = sfft.rfftn(values, axes=(-3, -2, -1), norm="forward")
    return SpectralVectorField(truncate_coeffs(c, M, N), f.grid)


def _backward(c: np.ndarray, grid: Grid, padding: float) -> np.ndarray:
    M = padded_size(grid.N, padding)
    cp = pad_coeffs(c, grid.N, M)
    return sfft.irfftn(cp, s=(M, M, M), axes=(-3, -2, -1), norm="forward")


def transform_backward(fhat: SpectralVectorField, padding: float = 1.0) -> PhysicalField:
    return PhysicalField(_backward(fhat.c, fhat.grid, padding), fhat.grid, padding)


def spectral_derivative(fhat: SpectralVectorField, kind: str):
    """Spectral derivative of a vector field.

    ``gradient`` returns coefficients ``g[j, i] = d_j f_i`` of shape (3, 3, ...),
    ``divergence`` a scalar coefficient array, ``curl`` and ``laplacian`` a
    :class:`SpectralVectorField`.
    """
    g = fhat.grid
    c = fhat.c
    kx, ky, kz = g.k_eff
    if kind == "gradient":
        return np.stack([1j * kx * c, 1j * ky * c, 1j * kz * c])
    if kind == "divergence":
        return 1j * (kx * c[0] + ky * c[1] + kz * c[2])
    if kind == "curl":
        return SpectralVectorField(
            1j * np.stack([ky * c[2] - kz * c[1], kz * c[0] - kx * c[2], kx * c[1] - ky * c[0]]), g
        )
    if kind == "laplacian":
        return SpectralVectorField(-g.k2 * c, g)
    raise ValueError(f"unknown derivative kind {kind!r}")


def project_coeffs(c: np.ndarray, grid: Grid) -> np.ndarray:
    kx, ky, kz = grid.k_eff
    kdot = (kx * c[0] + ky * c[1] + kz * c[2]) * grid.inv_k2_eff
    return np.stack([c[0] - kx * kdot, c[1] - ky * kdot, c[2] - kz * kdot])


def leray_project(fhat: SpectralVectorField) -> SpectralVectorField:
    return SpectralVectorField(project_coeffs(fhat.c, fhat.grid), fhat.grid)


def dealias(fhat: SpectralVectorField) -> SpectralVectorField:
    return SpectralVectorField(fhat.c * fhat.grid.dealias_mask, fhat.grid)


def lp_norm(f: PhysicalField, p: float) -> float:
    """Rectangle-rule L^p norm of the pointwise Euclidean magnitude."""
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    mag = np.sqrt(np.sum(f.values**2, axis=0)) if f.is_vector else np.abs(f.values)
    if np.isinf(p):
        return float(mag.max())
    cell = (f.grid.L / f.M) ** 3
    return float((cell * np.sum(mag**p)) ** (1.0 / p))


def inner(f: SpectralVectorField, g: SpectralVectorField) -> float:
    """L^2 inner product evaluated in coefficient space."""
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")
    gr = f.grid
    return float(gr.volume * np.sum(gr.weights * (f.c * g.c.conj()).real))


def l2_norm_sq(fhat: SpectralVectorField) -> float:
    gr = fhat.grid
    return float(gr.volume * np.sum(gr.weights * (fhat.c.real**2 + fhat.c.imag**2)))


def grad_norm_sq(fhat: SpectralVectorField) -> float:
    gr = fhat.grid
    return float(gr.volume * np.sum(gr.weights * gr.k2 * (fhat.c.real**2 + fhat.c.imag**2)))


def divergence_residual(fhat: SpectralVectorField) -> float:
    """max_k |k . f_hat(k)| / max_k |f_hat(k)|, zero for the zero field."""
    scale = np.abs(fhat.c).max()
    if scale == 0:
        return 0.0
    return float(np.abs(spectral_derivative(fhat, "divergence")).max() / scale)


def field_mean(fhat: SpectralVectorField) -> np.ndarray:
    return fhat.c[:, 0, 0, 0].real.copy()
