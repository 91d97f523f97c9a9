"""Initial conditions and verification experiments.

Experiments are reproducible from (configuration, seed): every random
ingredient is drawn from ``numpy.random.default_rng(seed)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.fft as sfft

from .integrator import TimeControls, run
from .rhs import Forcing, PhysParams, State
from .spectral import (
    Grid,
    PhysicalField,
    SpectralVectorField,
    dealias,
    divergence_residual,
    l2_norm_sq,
    leray_project,
    make_grid,
    pad_coeffs,
    project_coeffs,
    transform_backward,
    transform_forward,
    truncate_coeffs,
)

IC_KINDS = ("single_mode", "random_band", "taylor_green_like")


@dataclass(frozen=True)
class ICSpec:
    """Initial-condition recipe.

    ``single_mode``: u = amplitude cos(k.x) direction, b = b_amplitude cos(k.x) b_direction.
    ``random_band``: random divergence-free u, b with integer |n| <= k_max,
    total fluctuation energy ``energy`` split by ``b_fraction``.
    ``taylor_green_like``: u = amplitude (sin x cos y cos z, -cos x sin y cos z, 0),
    b = b_amplitude (sin y, sin z, sin x), in units of 2 pi / L.
    Means are added on top of the fluctuations.
    """

    kind: str = "random_band"
    amplitude: float = 1.0
    energy: float = 1.0
    mode: tuple[int, int, int] = (1, 0, 0)
    direction: tuple[float, float, float] = (0.0, 1.0, 0.0)
    b_amplitude: float = 0.0
    b_direction: tuple[float, float, float] = (0.0, 0.0, 1.0)
    k_max: float = 3.0
    b_fraction: float = 0.5
    seed: int = 0
    mean_u: tuple[float, float, float] = (0.0, 0.0, 0.0)
    mean_b: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.kind not in IC_KINDS:
            raise ValueError(f"unknown ic kind {self.kind!r}; expected one of {IC_KINDS}")
        if not 0 <= self.b_fraction <= 1:
            raise ValueError("b_fraction must lie in [0, 1]")
        if self.energy < 0:
            raise ValueError("energy must be >= 0")


def _single_mode_coeffs(grid: Grid, mode, direction, amplitude) -> np.ndarray:
    N = grid.N
    n = np.asarray(mode, dtype=np.int64)
    if np.any(np.abs(n) >= N // 2):
        raise ValueError(f"mode {tuple(mode)} outside the resolved band of an N={N} grid")
    e = np.asarray(direction, dtype=float)
    if not np.any(n):
        raise ValueError("single_mode needs a nonzero wavevector; use mean_u/mean_b for constants")
    if abs(e @ n) > 1e-14 * np.linalg.norm(e) * np.linalg.norm(n):
        raise ValueError(f"direction {tuple(direction)} is not transverse to mode {tuple(mode)}")
    c = np.zeros((3, *grid.shape), dtype=np.complex128)
    if n[2] < 0 or (n[2] == 0 and (n[0] < 0 or (n[0] == 0 and n[1] < 0))):
        n = -n
    ix, iy = n[0] % N, n[1] % N
    c[:, ix, iy, n[2]] += 0.5 * amplitude * e
    if n[2] == 0:
        c[:, (-n[0]) % N, (-n[1]) % N, 0] += 0.5 * amplitude * e
    return c


def random_solenoidal(grid: Grid, rng: np.random.Generator, k_max: float) -> SpectralVectorField:
    """Random real, zero-mean, divergence-free field inside the 2/3 band and |n| <= k_max."""
    c = rng.standard_normal((3, *grid.shape)) + 1j * rng.standard_normal((3, *grid.shape))
    nx, ny, nz = grid.indices
    nn = np.sqrt(nx**2 + ny**2 + nz**2)
    c *= (nn <= k_max) / (1.0 + nn**2)
    f = transform_forward(transform_backward(SpectralVectorField(c, grid)))  # Hermitian part
    f = leray_project(dealias(f))
    f.c[:, 0, 0, 0] = 0
    return f


def _scaled(f: SpectralVectorField, energy: float) -> SpectralVectorField:
    e = l2_norm_sq(f)
    if energy == 0 or e == 0:
        return f * 0.0
    return f * math.sqrt(energy / e)


def make_ic(spec: ICSpec, grid: Grid) -> State:
    if spec.kind == "single_mode":
        u = SpectralVectorField(_single_mode_coeffs(grid, spec.mode, spec.direction, spec.amplitude), grid)
        if spec.b_amplitude:
            b = SpectralVectorField(_single_mode_coeffs(grid, spec.mode, spec.b_direction, spec.b_amplitude), grid)
        else:
            b = SpectralVectorField.zeros(grid)
    elif spec.kind == "random_band":
        rng = np.random.default_rng(spec.seed)
        u = random_solenoidal(grid, rng, spec.k_max)
        b = random_solenoidal(grid, rng, spec.k_max)
        u = _scaled(u, (1.0 - spec.b_fraction) * spec.energy)
        b = _scaled(b, spec.b_fraction * spec.energy)
    else:
        x, y, z = (grid.k0 * xi for xi in grid.coordinates())
        A, B = spec.amplitude, spec.b_amplitude
        uv = np.stack(
            np.broadcast_arrays(
                A * np.sin(x) * np.cos(y) * np.cos(z), -A * np.cos(x) * np.sin(y) * np.cos(z), 0.0 * x
            )
        )
        bv = np.stack(np.broadcast_arrays(B * np.sin(y), B * np.sin(z), B * np.sin(x)))
        u = leray_project(transform_forward(PhysicalField(uv, grid)))
        b = leray_project(transform_forward(PhysicalField(bv, grid)))
    u.c[:, 0, 0, 0] += np.asarray(spec.mean_u, dtype=float)
    b.c[:, 0, 0, 0] += np.asarray(spec.mean_b, dtype=float)
    return State(u, b, 0.0)


def refine_state(state: State, N: int) -> State:
    """Zero-pad a state to a finer grid on the same box (explicit, never implicit)."""
    g = state.grid
    if N < g.N:
        raise ValueError("refine_state only pads to a finer grid")
    fine = make_grid(N, g.L)
    return State(
        SpectralVectorField(pad_coeffs(state.u_hat.c, g.N, N), fine),
        SpectralVectorField(pad_coeffs(state.b_hat.c, g.N, N), fine),
        state.t,
    )


def sup_norm(f: SpectralVectorField) -> float:
    v = transform_backward(f).values
    return float(np.sqrt(np.max(np.sum(v * v, axis=0))))


# -- manufactured solutions ----------------------------------------------------


def _one(t: float) -> float:
    return 1.0


def _zero(t: float) -> float:
    return 0.0


@dataclass
class ManufacturedField:
    """Separable closed form w*(t, x) = amplitude(t) * space(x, y, z).

    ``space`` maps broadcastable coordinate arrays to a (3, ...) array and must
    be periodic on the box and divergence-free; ``amplitude_rate`` is d/dt of
    ``amplitude``.
    """

    space: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    amplitude: Callable[[float], float] = _one
    amplitude_rate: Callable[[float], float] = _zero


def zero_field() -> ManufacturedField:
    return ManufacturedField(lambda x, y, z: np.zeros((3, *np.broadcast(x, y, z).shape)), _zero, _zero)


class ManufacturedForcing(Forcing):
    """Forcing that makes (u*, b*) an exact solution; also carries the exact solution."""

    def __init__(self, grid, params, u_hat_ref, b_hat_ref, ref_grid, u_star, b_star, pieces):
        self.grid = grid
        self.params = params
        self.ref_grid = ref_grid
        self.u_hat_ref = u_hat_ref
        self.b_hat_ref = b_hat_ref
        self.u_star = u_star
        self.b_star = b_star
        self._p = pieces
        super().__init__(f_u=self._f_u, f_b=self._f_b)

    def _f_u(self, t: float) -> SpectralVectorField:
        p, prm = self._p, self.params
        T, S = self.u_star.amplitude(t), self.b_star.amplitude(t)
        c = (self.u_star.amplitude_rate(t) + prm.nu * self.grid.k2 * T) * p["u"]
        c = c + T * T * p["P_uu"] - S * S * p["P_bb"]
        if prm.a > 0:
            c = c + prm.a * abs(T) ** (2 * prm.alpha) * T * p["P_damp"]
        return SpectralVectorField(c, self.grid)

    def _f_b(self, t: float) -> SpectralVectorField:
        p, prm = self._p, self.params
        T, S = self.u_star.amplitude(t), self.b_star.amplitude(t)
        c = (self.b_star.amplitude_rate(t) + prm.kappa * self.grid.k2 * S) * p["b"]
        c = c + T * S * p["induction"]
        return SpectralVectorField(c, self.grid)

    def exact_state(self, t: float) -> State:
        """Exact pair on the simulation grid (modes |n_i| < N/2)."""
        u = self.u_star.amplitude(t) * self._p["u"]
        b = self.b_star.amplitude(t) * self._p["b"]
        return State(SpectralVectorField(u, self.grid), SpectralVectorField(b, self.grid), t)

    def initial_state(self, t: float = 0.0) -> State:
        """Exact pair restricted to the 2/3 band, the state the solver can represent."""
        s = self.exact_state(t)
        return State(dealias(s.u_hat), dealias(s.b_hat), t)

    def error(self, state: State) -> float:
        """L^2 distance of a numerical state to the exact pair, measured on the reference grid."""
        N, R = self.grid.N, self.ref_grid.N
        t = state.t
        du = pad_coeffs(state.u_hat.c, N, R) - self.u_star.amplitude(t) * self.u_hat_ref.c
        db = pad_coeffs(state.b_hat.c, N, R) - self.b_star.amplitude(t) * self.b_hat_ref.c
        return math.sqrt(
            l2_norm_sq(SpectralVectorField(du, self.ref_grid)) + l2_norm_sq(SpectralVectorField(db, self.ref_grid))
        )


def _ref_products(U: np.ndarray, B: np.ndarray, ref: Grid, alpha: float) -> dict:
    def grad(c):
        kx, ky, kz = ref.k_eff
        g = np.stack([1j * kx * c, 1j * ky * c, 1j * kz * c]).reshape(9, *ref.shape)
        return sfft.irfftn(g, s=(ref.N,) * 3, axes=(-3, -2, -1), norm="forward").reshape(3, 3, *(ref.N,) * 3)

    def phys(c):
        return sfft.irfftn(c, s=(ref.N,) * 3, axes=(-3, -2, -1), norm="forward")

    def fwd(v):
        return sfft.rfftn(v, axes=(-3, -2, -1), norm="forward")

    u, b = phys(U), phys(B)
    gu, gb = grad(U), grad(B)
    tr = lambda v, gw: np.einsum("j...,ji...->i...", v, gw)  # noqa: E731
    out = {
        "uu": fwd(tr(u, gu)),
        "bb": fwd(tr(b, gb)),
        "induction": fwd(tr(u, gb) - tr(b, gu)),
        "damp": fwd((np.sum(u * u, axis=0) ** alpha) * u) if alpha > 0 else U.copy(),
    }
    return out


def manufactured_forcing(
    u_star: ManufacturedField,
    b_star: ManufacturedField,
    params: PhysParams,
    grid: Grid,
    ref_N: int = 96,
) -> ManufacturedForcing:
    """Assemble f_u, f_b so that (u*, b*) solves the forced system.

    f_u = d_t u* - nu Lap u* + P[(u*.grad)u* - (b*.grad)b* + a|u*|^(2 alpha) u*]
    f_b = d_t b* - kappa Lap b* + (u*.grad)b* - (b*.grad)u*

    Projecting the momentum sources is the same as adding grad p* with p* the
    zero-mean pressure of (u*, b*).  Spatial pieces are computed once on an
    ``ref_N``^3 grid and truncated to ``grid``; for separable closed forms the
    time dependence enters only through scalar amplitudes.
    """
    ref = make_grid(max(ref_N, grid.N), grid.L)
    xyz = ref.coordinates()
    U = sfft.rfftn(np.asarray(u_star.space(*xyz), dtype=float) * np.ones((3, *(ref.N,) * 3)), axes=(-3, -2, -1), norm="forward")
    B = sfft.rfftn(np.asarray(b_star.space(*xyz), dtype=float) * np.ones((3, *(ref.N,) * 3)), axes=(-3, -2, -1), norm="forward")
    for name, c in (("u*", U), ("b*", B)):
        r = divergence_residual(SpectralVectorField(c, ref))
        if r > 1e-9:
            raise ValueError(f"manufactured {name} is not divergence-free (residual {r:.2e})")
    prods = _ref_products(U, B, ref, params.alpha)
    N, R = grid.N, ref.N
    cut = lambda c: truncate_coeffs(c, R, N)  # noqa: E731
    pieces = {
        "u": cut(U),
        "b": cut(B),
        "P_uu": project_coeffs(cut(prods["uu"]), grid),
        "P_bb": project_coeffs(cut(prods["bb"]), grid),
        "P_damp": project_coeffs(cut(prods["damp"]), grid),
        "induction": cut(prods["induction"]),
    }
    return ManufacturedForcing(
        grid, params, SpectralVectorField(U, ref), SpectralVectorField(B, ref), ref, u_star, b_star, pieces
    )


def band_limited_pair(L: float) -> tuple[ManufacturedField, ManufacturedField]:
    """Trigonometric pair with low modes; every product stays inside the 2/3 band for N >= 16 (alpha = 1)."""
    k0 = 2 * math.pi / L

    def u_space(x, y, z):
        x, y, z = k0 * x, k0 * y, k0 * z
        return np.stack(
            np.broadcast_arrays(np.sin(x) * np.cos(y) * np.cos(z), -np.cos(x) * np.sin(y) * np.cos(z), 0.5 * np.sin(x + y))
        )

    def b_space(x, y, z):
        x, y, z = k0 * x, k0 * y, k0 * z
        return 0.5 * np.stack(np.broadcast_arrays(np.sin(y), np.sin(z), np.cos(x)))

    u = ManufacturedField(u_space, lambda t: math.cos(t), lambda t: -math.sin(t))
    b = ManufacturedField(b_space, lambda t: 1.0 + 0.5 * math.sin(2 * t), lambda t: math.cos(2 * t))
    return u, b


def smooth_pair(L: float, c: float = 2.0) -> tuple[ManufacturedField, ManufacturedField]:
    """Analytic but not band-limited pair; Fourier tails decay like exp(-|k| acosh c)."""
    k0 = 2 * math.pi / L

    def g(s):
        return 1.0 / (c + np.cos(s))

    def dg(s):
        return np.sin(s) / (c + np.cos(s)) ** 2

    def u_space(x, y, z):
        x, y, z = k0 * x, k0 * y, k0 * z
        # curl of (0, 0, g(x) g(y)) plus a z-independent third component
        return 0.5 * np.stack(np.broadcast_arrays(g(x) * dg(y), -dg(x) * g(y), g(x + y) - 1 / math.sqrt(c * c - 1)))

    def b_space(x, y, z):
        x, y, z = k0 * x, k0 * y, k0 * z
        m = 1 / math.sqrt(c * c - 1)
        return 0.3 * np.stack(np.broadcast_arrays(g(y + z) - m, g(z - x) - m, g(x) - m))

    u = ManufacturedField(u_space, lambda t: 1.0 + 0.25 * math.sin(t), lambda t: 0.25 * math.cos(t))
    b = ManufacturedField(b_space, lambda t: math.cos(t), lambda t: -math.sin(t))
    return u, b


@dataclass
class MMSConfig:
    params: PhysParams
    L: float = 2 * math.pi
    N: int = 16
    dt: float = 1e-3
    t_end: float = 0.5
    rk_order: int = 4
    ref_N: int = 96
    pair: str = "band_limited"  # or "smooth"

    def fields(self):
        if self.pair == "band_limited":
            return band_limited_pair(self.L)
        if self.pair == "smooth":
            return smooth_pair(self.L)
        raise ValueError(f"unknown manufactured pair {self.pair!r}")


@dataclass
class ConvergenceReport:
    kind: str
    levels: list
    errors: list[float]
    orders: list[float]
    ratios: list[float]
    nominal: Optional[float] = None
    passed: Optional[bool] = None

    def table(self) -> str:
        head = "# level error ratio order"
        rows = [f"{self.levels[0]} {self.errors[0]:.17g} - -"]
        for i in range(1, len(self.levels)):
            rows.append(f"{self.levels[i]} {self.errors[i]:.17g} {self.ratios[i-1]:.6g} {self.orders[i-1]:.6g}")
        return "\n".join([head, *rows])


def mms_error(cfg: MMSConfig, N: int, dt: float) -> float:
    grid = make_grid(N, cfg.L)
    u_star, b_star = cfg.fields()
    forcing = manufactured_forcing(u_star, b_star, cfg.params, grid, cfg.ref_N)
    ic = forcing.initial_state(0.0)
    n = max(2, round(cfg.t_end / dt))
    controls = TimeControls(dt, dt, dt, n * dt, 1.0, cfg.rk_order)
    final = run(ic, cfg.params, controls, forcing=forcing)
    return forcing.error(final)


def convergence_study(kind: str, base: MMSConfig, levels: Sequence) -> ConvergenceReport:
    """Temporal (levels = dt values, fixed N) or spatial (levels = N values, fixed dt) MMS study."""
    levels = list(levels)
    if len(levels) < 3:
        raise ValueError("convergence study needs at least 3 levels")
    if len(set(levels)) != len(levels):
        raise ValueError("convergence levels must be distinct")
    if kind == "temporal":
        errors = [mms_error(base, base.N, dt) for dt in levels]
        hs = levels
    elif kind == "spatial":
        errors = [mms_error(base, N, base.dt) for N in levels]
        hs = [1.0 / N for N in levels]
    else:
        raise ValueError(f"unknown study kind {kind!r}")
    ratios = [errors[i] / errors[i + 1] for i in range(len(errors) - 1)]
    orders = [math.log(ratios[i]) / math.log(hs[i] / hs[i + 1]) for i in range(len(ratios))]
    if kind == "temporal":
        nominal = float(base.rk_order)
        passed = all(abs(p - nominal) <= 0.2 for p in orders)
    else:
        nominal = None
        passed = all(r >= 10.0 for r in ratios)
    return ConvergenceReport(kind, levels, errors, orders, ratios, nominal, passed)


# -- continuous dependence -----------------------------------------------------


@dataclass
class DependenceReport:
    deltas: list[float]
    separations: list[float]
    scaled: list[float]
    t_end: float
    dt: float
    ratio_changes: list[float] = field(default_factory=list)
    passed: Optional[bool] = None

    def table(self) -> str:
        rows = ["# delta S S_over_delta2"]
        for d, s, r in zip(self.deltas, self.separations, self.scaled):
            rows.append(f"{d:.17g} {s:.17g} {'' if r is None else format(r, '.17g')}")
        return "\n".join(rows)


def perturbation_direction(grid: Grid, seed: int, k_max: float = 3.0) -> tuple[SpectralVectorField, SpectralVectorField]:
    """Fixed random divergence-free, zero-mean direction with ||v||^2 + ||d||^2 = 1."""
    rng = np.random.default_rng(seed)
    v = random_solenoidal(grid, rng, k_max)
    d = random_solenoidal(grid, rng, k_max)
    s = math.sqrt(l2_norm_sq(v) + l2_norm_sq(d))
    return v * (1 / s), d * (1 / s)


def default_dependence_dt(ic: State, t_end: float, cfl: float = 0.25, dt_cap: float = 0.02) -> float:
    speed = sup_norm(ic.u_hat) + sup_norm(ic.b_hat)
    dt = min(dt_cap, cfl * ic.grid.dx / speed) if speed > 0 else dt_cap
    return t_end / math.ceil(t_end / dt)


def dependence_experiment(
    base_ic: State,
    deltas: Sequence[float],
    params: PhysParams,
    t_end: Optional[float] = None,
    dt: Optional[float] = None,
    rk_order: int = 4,
    seed: int = 12345,
    tolerance: float = 0.1,
) -> DependenceReport:
    """Separation S(delta) = ||v(T)||^2 + ||d(T)||^2 of trajectories started delta apart.

    All members share grid, parameters, and a fixed step size; only the initial
    data differ.  T defaults to one box-crossing time L / ||u0||_inf.
    """
    if params.alpha < 1.5:
        warnings.warn("alpha < 3/2: uniqueness and continuous dependence are only guaranteed for alpha >= 3/2", stacklevel=2)
    deltas = [float(d) for d in deltas]
    if any(d < 0 for d in deltas) or any(d1 <= d2 for d1, d2 in zip(deltas, deltas[1:])):
        raise ValueError("deltas must be nonnegative and strictly decreasing")
    g = base_ic.grid
    if t_end is None:
        t_end = g.L / sup_norm(base_ic.u_hat)
    if dt is None:
        dt = default_dependence_dt(base_ic, t_end)
    n = max(2, round(t_end / dt))
    dt = t_end / n
    controls = TimeControls(dt, dt, dt, base_ic.t + t_end, 1.0, rk_order)
    base = run(base_ic, params, controls)
    v, d = perturbation_direction(g, seed)
    seps, scaled = [], []
    for delta in deltas:
        ic = State(base_ic.u_hat + v * delta, base_ic.b_hat + d * delta, base_ic.t) if delta else base_ic.copy()
        end = run(ic, params, controls)
        S = l2_norm_sq(end.u_hat - base.u_hat) + l2_norm_sq(end.b_hat - base.b_hat)
        seps.append(S)
        scaled.append(S / delta**2 if delta else None)
    nz = [s for s in scaled if s is not None]
    changes = [abs(nz[i + 1] / nz[i] - 1.0) for i in range(len(nz) - 1)]
    return DependenceReport(deltas, seps, scaled, t_end, dt, changes, all(c <= tolerance for c in changes))


# -- Galerkin mode refinement --------------------------------------------------


@dataclass
class RefinementReport:
    N_coarse: int
    N_fine: int
    difference: float


def mode_refinement_check(
    ic: State,
    params: PhysParams,
    t_end: float,
    fine_grid: Grid,
    dt: float,
    rk_order: int = 4,
) -> RefinementReport:
    """Run from ``ic`` on its own grid and zero-padded on ``fine_grid``; L^2 distance at t_end."""
    g = ic.grid
    if fine_grid.L != g.L:
        raise ValueError(f"box sizes differ: {g.L} vs {fine_grid.L}")
    if fine_grid.N <= g.N:
        raise ValueError("fine grid must have more modes than the coarse one")
    n = max(2, round((t_end - ic.t) / dt))
    dt = (t_end - ic.t) / n
    controls = TimeControls(dt, dt, dt, t_end, 1.0, rk_order)
    coarse = run(ic, params, controls)
    fine = run(refine_state(ic, fine_grid.N), params, controls)
    up = refine_state(coarse, fine_grid.N)
    diff = math.sqrt(l2_norm_sq(up.u_hat - fine.u_hat) + l2_norm_sq(up.b_hat - fine.b_hat))
    return RefinementReport(g.N, fine_grid.N, diff)


def refinement_sequence(ic: State, params: PhysParams, t_end: float, Ns: Sequence[int], dt: float, rk_order: int = 4):
    """Differences between successive resolutions, all started from the same coarse-grid data."""
    reports = []
    for Nc, Nf in zip(Ns, Ns[1:]):
        start = refine_state(ic, Nc) if Nc != ic.grid.N else ic
        reports.append(mode_refinement_check(start, params, t_end, make_grid(Nf, ic.grid.L), dt, rk_order))
    return reports
