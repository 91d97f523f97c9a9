"""Monitors and inequality checks for damped MHD trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .rhs import PhysParams, State
from .spectral import (
    DEALIAS_PADDING,
    PhysicalField,
    SpectralVectorField,
    divergence_residual,
    field_mean,
    grad_norm_sq,
    l2_norm_sq,
    lp_norm,
    spectral_derivative,
    transform_backward,
    transform_forward,
)


@dataclass
class MonitorRecord:
    t: float
    E: float
    grad_u_sq: float
    grad_b_sq: float
    u_damp_norm: float
    b_crit_norm: Optional[float]
    div_u_res: float
    div_b_res: float
    mean_u: tuple[float, float, float]
    mean_b: tuple[float, float, float]


def damping_exponent(alpha: float) -> float:
    return 2.0 * alpha + 2.0


def critical_b_exponent(alpha: float) -> Optional[float]:
    return 3.0 * (alpha + 1.0) / alpha if alpha > 0 else None


def monitor(state: State, params: PhysParams) -> MonitorRecord:
    u, b = state.u_hat, state.b_hat
    pdamp = damping_exponent(params.alpha)
    # same padded grid as the damping term, so <damping(u), u> = a * u_damp_norm
    u_damp = lp_norm(transform_backward(u, DEALIAS_PADDING), pdamp) ** pdamp
    pcrit = critical_b_exponent(params.alpha)
    b_crit = None if pcrit is None else lp_norm(transform_backward(b, DEALIAS_PADDING), pcrit)
    return MonitorRecord(
        t=float(state.t),
        E=l2_norm_sq(u) + l2_norm_sq(b),
        grad_u_sq=grad_norm_sq(u),
        grad_b_sq=grad_norm_sq(b),
        u_damp_norm=u_damp,
        b_crit_norm=b_crit,
        div_u_res=divergence_residual(u),
        div_b_res=divergence_residual(b),
        mean_u=tuple(field_mean(u)),
        mean_b=tuple(field_mean(b)),
    )


# -- absorbing ball -----------------------------------------------------------


def absorbing_ball_radius(params: PhysParams, L: float) -> float:
    """Squared radius R^2 = L^3 a^(-1/(2 alpha-1)) / max(kappa, nu) * (nu/lambda)^((2 alpha+2)/(2 alpha-1))."""
    alpha = params.alpha
    if alpha <= 0.5:
        raise ValueError(f"absorbing-ball radius needs alpha > 1/2, got {alpha}")
    if min(params.a, params.nu, params.kappa) <= 0:
        raise ValueError("absorbing-ball radius needs a, nu, kappa > 0")
    lam = (2.0 * math.pi / L) ** 2
    e = 2.0 * alpha - 1.0
    return L**3 * params.a ** (-1.0 / e) / max(params.kappa, params.nu) * (params.nu / lam) ** ((2 * alpha + 2) / e)


def young_constant(mu_u: float, a: float, alpha: float, volume: float) -> float:
    """K = max_{X>=0} (mu_u X - 2a X^(alpha+1) |Omega|^(-alpha)), closed form."""
    x_star = volume * (mu_u / (2.0 * a * (alpha + 1.0))) ** (1.0 / alpha)
    return mu_u * x_star * alpha / (alpha + 1.0)


def rigorous_rate(params: PhysParams, L: float) -> tuple[float, float]:
    """Envelope rate mu and Young constant K with dE/dt <= -mu E + K and K/mu <= R^2.

    Uses kappa ||grad b||^2 >= kappa lambda ||b||^2 (mean b = 0) and Hoelder
    ||u||_2^2 <= |Omega|^(alpha/(alpha+1)) ||u||_{2 alpha+2}^2 followed by
    Young on the damping term; viscosity is dropped since mean u may be nonzero.
    """
    R2 = absorbing_ball_radius(params, L)
    alpha, a = params.alpha, params.a
    vol = L**3
    lam = (2.0 * math.pi / L) ** 2
    mu_ball = 2.0 * a * (alpha + 1.0) * (R2 * (alpha + 1.0) / (alpha * vol)) ** alpha
    mu = min(2.0 * params.kappa * lam, mu_ball)
    return mu, young_constant(mu, a, alpha, vol)


def literal_rate(params: PhysParams, L: float) -> float:
    lam = (2.0 * math.pi / L) ** 2
    return 2.0 / lam * max(params.kappa, params.nu)


@dataclass
class EnvelopeReport:
    R2: float
    mu: float
    mu_literal: float
    rigorous_pass: bool
    rigorous_first_violation: Optional[float]
    literal_pass: bool
    literal_first_violation: Optional[float]
    nonincreasing: bool
    entered_ball_at: Optional[float]
    predicted_entry_time: float
    final_quartile_start: float
    final_quartile_max: float
    limsup_pass: bool

    @property
    def past_predicted_entry(self) -> bool:
        return self.final_quartile_start >= self.predicted_entry_time


def _envelope_violation(t, E, E0, R2, mu, rtol=1e-12):
    decay = np.exp(-mu * t)
    bound = E0 * decay + R2 * (1.0 - decay)
    bad = np.nonzero(E > bound * (1.0 + rtol))[0]
    return None if bad.size == 0 else float(t[bad[0]])


def decay_envelope_check(
    series: Sequence[MonitorRecord], params: PhysParams, L: float, limsup_slack: float = 0.05
) -> EnvelopeReport:
    if len(series) < 16:
        raise ValueError(f"envelope check needs >= 16 records, got {len(series)}")
    t = np.array([r.t for r in series])
    E = np.array([r.E for r in series])
    tr = t - t[0]
    E0 = E[0]
    R2 = absorbing_ball_radius(params, L)
    mu, _ = rigorous_rate(params, L)
    mu_lit = literal_rate(params, L)
    rig = _envelope_violation(tr, E, E0, R2, mu)
    lit = _envelope_violation(tr, E, E0, R2, mu_lit)
    inside = np.nonzero(E <= R2)[0]
    if E0 <= (1 + limsup_slack) * R2:
        t_entry = 0.0
    else:
        t_entry = math.log((E0 - R2) / (limsup_slack * R2)) / mu
    q_start = t[0] + 0.75 * (t[-1] - t[0])
    q_max = float(E[t >= q_start].max())
    return EnvelopeReport(
        R2=R2,
        mu=mu,
        mu_literal=mu_lit,
        rigorous_pass=rig is None,
        rigorous_first_violation=None if rig is None else rig + t[0],
        literal_pass=lit is None,
        literal_first_violation=None if lit is None else lit + t[0],
        nonincreasing=bool(np.all(np.diff(E) <= 0)),
        entered_ball_at=None if inside.size == 0 else float(t[inside[0]]),
        predicted_entry_time=t[0] + t_entry,
        final_quartile_start=float(q_start),
        final_quartile_max=q_max,
        limsup_pass=q_max <= (1 + limsup_slack) * R2,
    )


# -- monotonicity of the damping map ------------------------------------------


@dataclass
class MonotonicityReport:
    rhs: np.ndarray
    ratio: np.ndarray


def monotonicity_check(x, y, alpha: float) -> MonotonicityReport:
    """(|x|^(2a) x - |y|^(2a) y).(x - y) and its ratio to |x-y|^2 (|x|+|y|)^(2a).

    Accepts single 3-vectors or stacks of shape (..., 3); the ratio is NaN where
    the denominator vanishes.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    nx = np.linalg.norm(x, axis=-1)
    ny = np.linalg.norm(y, axis=-1)
    d = x - y
    fx = nx[..., None] ** (2 * alpha) * x
    fy = ny[..., None] ** (2 * alpha) * y
    rhs = np.sum((fx - fy) * d, axis=-1)
    den = np.sum(d * d, axis=-1) * (nx + ny) ** (2 * alpha)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(den > 0, rhs / np.where(den > 0, den, 1.0), np.nan)
    return MonotonicityReport(rhs=rhs, ratio=ratio)


def monotonicity_constant_1d(alpha: float, samples: int = 2_000_001) -> float:
    """Minimum of the monotonicity ratio over collinear pairs x = e, y = s e, s in [-1, 1).

    For fixed |x|, |y| the ratio is a linear-fractional function of the cosine
    of the angle between x and y, so its extremes sit at collinear or
    anti-collinear configurations; homogeneity and the x <-> y symmetry reduce
    the search to s in [-1, 1).
    """
    s = np.linspace(-1.0, 1.0, samples)[:-1]
    num = 1.0 - np.abs(s) ** (2 * alpha) * s
    den = (1.0 - s) * (1.0 + np.abs(s)) ** (2 * alpha)
    return float(np.min(num / den))


# -- Stroock-Varopoulos --------------------------------------------------------


@dataclass
class StroockVaropoulosReport:
    lhs: Optional[float]
    rhs0: Optional[float]
    ratio: Optional[float]
    slack: float
    passed: Optional[bool]

    @property
    def empty(self) -> bool:
        return self.ratio is None


def sv_prefactor(alpha: float) -> float:
    return 4.0 / 9.0 * alpha * (2 * alpha + 3) / (alpha + 1) ** 2


def _even_int(x: float) -> bool:
    return abs(x - round(x)) < 1e-12 and round(x) % 2 == 0 and x >= 0


def sv_polynomial_integrands(alpha: float) -> bool:
    """True when |b|^q and |b|^(2p-4) are polynomials in b (alpha = 1, 3, 3/5, ...)."""
    q = (alpha + 3.0) / alpha
    return _even_int(q) and _even_int((3.0 - alpha) / alpha)


def stroock_varopoulos_check(
    b, alpha: float, padding: float = 2.0, slack: Optional[float] = None
) -> StroockVaropoulosReport:
    """Ratio of -int Lap b . b |b|^q to (4/9) alpha(2 alpha+3)/(alpha+1)^2 ||grad |b|^p||^2.

    q = (alpha+3)/alpha, p = 3(alpha+1)/(2 alpha).  Lap b and grad b are exact
    spectral derivatives sampled on the padded grid; the powers of |b| are only
    formed pointwise, and grad |b|^p = p |b|^(p-2) (b . grad) b is used so no
    non-smooth composite is differentiated.
    """
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    if isinstance(b, PhysicalField):
        b = transform_forward(b)
    if slack is None:
        slack = 1e-6 if sv_polynomial_integrands(alpha) else 1e-3
    if not np.any(b.c):
        return StroockVaropoulosReport(None, None, None, slack, None)
    q = (alpha + 3.0) / alpha
    p = 1.5 * (alpha + 1.0) / alpha
    B = transform_backward(b, padding).values
    lap = transform_backward(spectral_derivative(b, "laplacian"), padding).values
    grad = spectral_derivative(b, "gradient")
    G = np.stack(
        [transform_backward(SpectralVectorField(grad[j], b.grid), padding).values for j in range(3)]
    )
    M = B.shape[-1]
    cell = (b.grid.L / M) ** 3
    mag2 = np.sum(B * B, axis=0)
    mag = np.sqrt(mag2)
    lhs = -cell * np.sum(np.sum(lap * B, axis=0) * mag**q)
    bgb = np.einsum("i...,ji...->j...", B, G)  # (b . d_j b) = |b| d_j |b|
    pos = mag > 0
    w = np.zeros_like(mag)
    w[pos] = mag[pos] ** (2 * p - 4)
    rhs0 = sv_prefactor(alpha) * p**2 * cell * np.sum(w * np.sum(bgb**2, axis=0))
    ratio = math.inf if rhs0 == 0 else lhs / rhs0
    return StroockVaropoulosReport(float(lhs), float(rhs0), float(ratio), slack, ratio >= 1 - slack)


# -- energy budget -------------------------------------------------------------


@dataclass
class EnergyBudget:
    t0: float
    t1: float
    dE: float
    dissipation_integral: float
    residual: float
    expected_scale: Optional[float] = field(default=None)


def dissipation_rate(r: MonitorRecord, params: PhysParams) -> float:
    return 2 * params.nu * r.grad_u_sq + 2 * params.kappa * r.grad_b_sq + 2 * params.a * r.u_damp_norm


def energy_budget(
    window: Sequence[MonitorRecord],
    params: PhysParams,
    rk_order: Optional[int] = None,
    dt: Optional[float] = None,
) -> EnergyBudget:
    if len(window) < 2:
        raise ValueError("energy budget needs at least 2 records")
    t = np.array([r.t for r in window])
    D = np.array([dissipation_rate(r, params) for r in window])
    dE = window[-1].E - window[0].E
    diss = float(np.trapezoid(D, t))
    scale = None
    if rk_order is not None:
        h = dt if dt is not None else float(np.max(np.diff(t)))
        scale = h ** min(rk_order, 2)
    return EnergyBudget(float(t[0]), float(t[-1]), dE, diss, dE + diss, scale)
