"""Right-hand side of the damped MHD system.

    du/dt = nu Lap u - (u.grad)u + (b.grad)b - a |u|^(2 alpha) u - grad p + f_u
    db/dt = kappa Lap b - (u.grad)b + (b.grad)u + f_b
    div u = 0

Quadratic products are formed on the 3/2-padded grid and truncated, then the
2/3 mask is applied.  The whole nonlinear tendency (damping and forcing
included) is dealiased, so a state that starts inside the 2/3 band stays there;
on that band the advective terms are exactly skew-symmetric.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.fft as sfft

from .spectral import (
    DEALIAS_PADDING,
    Grid,
    PhysicalField,
    SpectralVectorField,
    divergence_residual,
    pad_coeffs,
    padded_size,
    project_coeffs,
    truncate_coeffs,
)

DIV_TOL = 1e-8


class ConstraintViolation(ValueError):
    """Input field is not divergence-free to tolerance (corrupted state)."""


@dataclass(frozen=True)
class PhysParams:
    nu: float
    kappa: float
    a: float
    alpha: float

    def __post_init__(self):
        for name in ("nu", "kappa", "a", "alpha"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")
            object.__setattr__(self, name, float(v))

    def check_simulation(self):
        """Entry-point check: nu, kappa > 0 required; a = 0 is allowed but the damping-based bounds then do not apply."""
        if self.nu <= 0 or self.kappa <= 0:
            raise ValueError("simulation requires nu > 0 and kappa > 0")
        if self.a <= 0:
            warnings.warn("a = 0: classical MHD, the damping-based bounds do not apply", stacklevel=3)


@dataclass
class State:
    u_hat: SpectralVectorField
    b_hat: SpectralVectorField
    t: float = 0.0

    def __post_init__(self):
        if self.u_hat.grid != self.b_hat.grid:
            raise ValueError("u and b live on different grids")

    @property
    def grid(self) -> Grid:
        return self.u_hat.grid

    def copy(self) -> "State":
        return State(self.u_hat.copy(), self.b_hat.copy(), self.t)


SpectralForcing = Callable[[float], SpectralVectorField]


@dataclass
class Forcing:
    """Body forces as callables of time returning spectral fields; ``None`` means zero."""

    f_u: Optional[SpectralForcing] = None
    f_b: Optional[SpectralForcing] = None

    @property
    def is_zero(self) -> bool:
        return self.f_u is None and self.f_b is None


def _to_physical(c: np.ndarray, grid: Grid, M: int) -> np.ndarray:
    return sfft.irfftn(pad_coeffs(c, grid.N, M), s=(M, M, M), axes=(-3, -2, -1), norm="forward")


def _to_spectral(values: np.ndarray, grid: Grid, M: int) -> np.ndarray:
    return truncate_coeffs(sfft.rfftn(values, axes=(-3, -2, -1), norm="forward"), M, grid.N)


def _grad_coeffs(c: np.ndarray, grid: Grid) -> np.ndarray:
    kx, ky, kz = grid.k_eff
    return np.stack([1j * kx * c, 1j * ky * c, 1j * kz * c])


def _transport(v: np.ndarray, grad_w: np.ndarray) -> np.ndarray:
    # (v . grad) w, with grad_w[j, i] = d_j w_i
    return np.einsum("j...,ji...->i...", v, grad_w)


def _damping_phys(u: np.ndarray, a: float, alpha: float) -> np.ndarray:
    if alpha == 0:
        return a * u
    # (|u|^2)^alpha vanishes at u = 0 for every alpha > 0
    return a * np.sum(u * u, axis=0) ** alpha * u


def advect(v: SpectralVectorField, w: SpectralVectorField) -> SpectralVectorField:
    """Pseudospectral (v . grad) w: 3/2 padding, pointwise product, truncation, 2/3 mask."""
    if v.grid != w.grid:
        raise ValueError("advect: fields live on different grids")
    g = v.grid
    M = padded_size(g.N, DEALIAS_PADDING)
    phys = _to_physical(np.concatenate([v.c, _grad_coeffs(w.c, g).reshape(9, *g.shape)]), g, M)
    prod = _transport(phys[:3], phys[3:].reshape(3, 3, M, M, M))
    return SpectralVectorField(_to_spectral(prod, g, M) * g.dealias_mask, g)


def damping(u_hat: SpectralVectorField, a: float, alpha: float) -> SpectralVectorField:
    """a |u|^(2 alpha) u evaluated on the 3/2-padded grid and truncated."""
    if a < 0 or alpha < 0:
        raise ValueError("damping requires a >= 0 and alpha >= 0")
    g = u_hat.grid
    if alpha == 0:
        return u_hat * a
    M = padded_size(g.N, DEALIAS_PADDING)
    u = _to_physical(u_hat.c, g, M)
    return SpectralVectorField(_to_spectral(_damping_phys(u, a, alpha), g, M), g)


def check_constraints(state: State, tol: float = DIV_TOL):
    for name, f in (("u", state.u_hat), ("b", state.b_hat)):
        r = divergence_residual(f)
        if r > tol:
            raise ConstraintViolation(f"div {name} residual {r:.3e} exceeds {tol:.1e} at t={state.t}")


def nonlinear_terms(
    u_c: np.ndarray, b_c: np.ndarray, grid: Grid, params: PhysParams
) -> tuple[np.ndarray, np.ndarray]:
    """Unprojected, dealiased momentum and induction sources (no diffusion, no forcing).

    momentum  = -(u.grad)u + (b.grad)b - a|u|^(2 alpha) u
    induction = -(u.grad)b + (b.grad)u
    """
    M = padded_size(grid.N, DEALIAS_PADDING)
    n = grid.shape
    stacked = np.concatenate(
        [u_c, b_c, _grad_coeffs(u_c, grid).reshape(9, *n), _grad_coeffs(b_c, grid).reshape(9, *n)]
    )
    phys = _to_physical(stacked, grid, M)
    u, b = phys[0:3], phys[3:6]
    gu = phys[6:15].reshape(3, 3, M, M, M)
    gb = phys[15:24].reshape(3, 3, M, M, M)
    mom = _transport(b, gb) - _transport(u, gu)
    if params.a > 0:
        mom -= _damping_phys(u, params.a, params.alpha)
    ind = _transport(b, gu) - _transport(u, gb)
    out = _to_spectral(np.concatenate([mom, ind]), grid, M) * grid.dealias_mask
    return out[:3], out[3:]


def nonstiff_tendency(
    u_c: np.ndarray,
    b_c: np.ndarray,
    t: float,
    grid: Grid,
    params: PhysParams,
    forcing: Optional[Forcing] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Projected nonlinear + damping + forcing part of the tendency (what the RK tableau advances)."""
    mom, ind = nonlinear_terms(u_c, b_c, grid, params)
    if forcing is not None:
        if forcing.f_u is not None:
            mom = mom + forcing.f_u(t).c * grid.dealias_mask
        if forcing.f_b is not None:
            ind = ind + forcing.f_b(t).c * grid.dealias_mask
    return project_coeffs(mom, grid), ind


def tendency(
    state: State, params: PhysParams, forcing: Optional[Forcing] = None
) -> tuple[SpectralVectorField, SpectralVectorField]:
    """Full right-hand side (du_hat, db_hat) including diffusion."""
    check_constraints(state)
    g = state.grid
    du, db = nonstiff_tendency(state.u_hat.c, state.b_hat.c, state.t, g, params, forcing)
    du = du - params.nu * g.k2 * state.u_hat.c
    db = db - params.kappa * g.k2 * state.b_hat.c
    return SpectralVectorField(du, g), SpectralVectorField(db, g)


def pressure_hat(state: State, params: PhysParams) -> np.ndarray:
    """Zero-mean pressure coefficients solving -Lap p = div[(u.grad)u - (b.grad)b + a|u|^(2 alpha)u]."""
    g = state.grid
    mom, _ = nonlinear_terms(state.u_hat.c, state.b_hat.c, g, params)
    kx, ky, kz = g.k_eff
    # mom is minus the nonlinear terms
    return -1j * (kx * mom[0] + ky * mom[1] + kz * mom[2]) * g.inv_k2_eff


def pressure_recover(state: State, params: PhysParams) -> PhysicalField:
    g = state.grid
    p = sfft.irfftn(pressure_hat(state, params), s=(g.N,) * 3, norm="forward")
    return PhysicalField(p, g)
