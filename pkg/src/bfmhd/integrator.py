"""Integrating-factor Runge-Kutta time stepping.

Diffusion is applied exactly through the factors exp(-nu |k|^2 tau) and
exp(-kappa |k|^2 tau); the projected nonlinearity, damping and forcing are
advanced explicitly by a Lawson-type RK2 (Heun) or RK4 tableau.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.fft as sfft

from .rhs import Forcing, PhysParams, State, check_constraints, nonstiff_tendency
from .spectral import SpectralVectorField

log = logging.getLogger(__name__)

EPS = 1e-30
MAX_HALVINGS = 8


class BlowUpError(RuntimeError):
    def __init__(self, t: float, msg: str = ""):
        self.t = t
        super().__init__(msg or f"non-finite state produced at t={t!r}")


@dataclass(frozen=True)
class TimeControls:
    dt_init: float
    dt_min: float
    dt_max: float
    t_end: float
    cfl_safety: float = 0.5
    rk_order: int = 4

    def __post_init__(self):
        if self.rk_order not in (2, 4):
            raise ValueError(f"rk_order must be 2 or 4, got {self.rk_order}")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if min(self.dt_init, self.dt_min, self.dt_max, self.t_end) <= 0:
            raise ValueError("time controls must be positive")
        if not self.dt_min <= self.dt_init <= self.dt_max < self.t_end:
            raise ValueError("need dt_min <= dt_init <= dt_max < t_end")

    @classmethod
    def fixed(cls, dt: float, t_end: float, rk_order: int = 4) -> "TimeControls":
        return cls(dt, dt, dt, t_end, 1.0, rk_order)

    @property
    def is_fixed(self) -> bool:
        return self.dt_min == self.dt_max


def _sup_norm(f: SpectralVectorField) -> float:
    g = f.grid
    v = sfft.irfftn(f.c, s=(g.N,) * 3, axes=(-3, -2, -1), norm="forward")
    return float(np.sqrt(np.max(np.sum(v * v, axis=0))))


def choose_dt(state: State, params: PhysParams, controls: TimeControls) -> float:
    if controls.is_fixed:
        dt = controls.dt_max
    else:
        u_inf = _sup_norm(state.u_hat)
        b_inf = _sup_norm(state.b_hat)
        adv = state.grid.dx / (u_inf + b_inf + EPS)
        damp = 1.0 / (params.a * u_inf ** (2 * params.alpha) + EPS)
        dt = float(np.clip(controls.cfl_safety * min(adv, damp), controls.dt_min, controls.dt_max))
    return min(dt, controls.t_end - state.t)


def if_rk_step(
    state: State,
    dt: float,
    params: PhysParams,
    forcing: Optional[Forcing] = None,
    rk_order: int = 4,
) -> State:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    check_constraints(state)
    g = state.grid
    t = state.t
    u, b = state.u_hat.c, state.b_hat.c

    def N(tt, uu, bb):
        return nonstiff_tendency(uu, bb, tt, g, params, forcing)

    eu = np.exp(-params.nu * g.k2 * dt)
    eb = np.exp(-params.kappa * g.k2 * dt)
    if rk_order == 2:
        k1u, k1b = N(t, u, b)
        k2u, k2b = N(t + dt, eu * (u + dt * k1u), eb * (b + dt * k1b))
        u1 = eu * (u + 0.5 * dt * k1u) + 0.5 * dt * k2u
        b1 = eb * (b + 0.5 * dt * k1b) + 0.5 * dt * k2b
    elif rk_order == 4:
        hu = np.exp(-params.nu * g.k2 * (0.5 * dt))
        hb = np.exp(-params.kappa * g.k2 * (0.5 * dt))
        k1u, k1b = N(t, u, b)
        k2u, k2b = N(t + 0.5 * dt, hu * (u + 0.5 * dt * k1u), hb * (b + 0.5 * dt * k1b))
        k3u, k3b = N(t + 0.5 * dt, hu * u + 0.5 * dt * k2u, hb * b + 0.5 * dt * k2b)
        k4u, k4b = N(t + dt, eu * u + dt * hu * k3u, eb * b + dt * hb * k3b)
        u1 = eu * u + (dt / 6.0) * (eu * k1u + 2.0 * hu * (k2u + k3u) + k4u)
        b1 = eb * b + (dt / 6.0) * (eb * k1b + 2.0 * hb * (k2b + k3b) + k4b)
    else:
        raise ValueError(f"rk_order must be 2 or 4, got {rk_order}")
    if not (np.isfinite(u1).all() and np.isfinite(b1).all()):
        raise BlowUpError(t + dt)
    return State(SpectralVectorField(u1, g), SpectralVectorField(b1, g), t + dt)


@dataclass
class Sink:
    """Callback ``fn(step, state)`` invoked every ``every`` steps and at the final step."""

    fn: Callable[[int, State], None]
    every: int = 1

    def __post_init__(self):
        if self.every < 1:
            raise ValueError("sink cadence must be >= 1")


def _emit(sinks: Sequence[Sink], step: int, state: State, final: bool):
    for s in sinks:
        if step % s.every == 0 or final:
            try:
                s.fn(step, state)
            except Exception as exc:
                raise RuntimeError(f"sink {s.fn!r} failed at step {step}, t={state.t!r}") from exc


def run(
    ic: State,
    params: PhysParams,
    controls: TimeControls,
    sinks: Sequence[Sink] = (),
    forcing: Optional[Forcing] = None,
    start_step: int = 0,
    emit_initial: bool = True,
) -> State:
    """Advance ``ic`` to ``controls.t_end``.  Sinks see (step, state) on their cadence."""
    params.check_simulation()
    state = ic
    step = start_step
    t_end = controls.t_end
    tiny = 1e-12 * max(1.0, abs(t_end))
    done = t_end - state.t <= tiny
    if emit_initial:
        _emit(sinks, step, state, final=done)
    while not done:
        dt = choose_dt(state, params, controls)
        remaining = t_end - state.t
        if remaining - dt <= 1e-9 * dt:
            dt = remaining
        for attempt in range(MAX_HALVINGS + 1):
            try:
                new = if_rk_step(state, dt, params, forcing, controls.rk_order)
                break
            except BlowUpError:
                if attempt == MAX_HALVINGS:
                    raise
                log.warning("non-finite step at t=%r, halving dt=%g", state.t, dt)
                dt *= 0.5
        step += 1
        done = t_end - new.t <= tiny
        if done:
            new.t = t_end
        state = new
        _emit(sinks, step, state, final=done)
    return state
