"""Time integration of the hybrid kinetic system.

Space-homogeneous runs advance only the collision operator. 1D runs use
Strang splitting: half a transport step, a full collision step, half a
transport step. Transport is first-order upwind per velocity node, with an
optional minmod-limited second-order variant.
"""
from __future__ import annotations

import time as _time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import ConfigurationError, PositivityError, StepSizeError
from .grid import SpatialGrid, VelocityGrid
from .hybrid import (
    MixtureSpec,
    SelectorField,
    bgk_relaxation,
    collision_rhs,
    entropy_report,
    scaling_matrix,
    _fields,
    _pair_terms,
    _selector_bits,
)
from .collision_bgk import _g_bar, lambda_coefficient
from .moments import global_fields, matched_maxwellian_fields, maxwellian_fields, moment_fields

__all__ = [
    "KineticState",
    "TimeControls",
    "StepStats",
    "Snapshot",
    "Audit",
    "RunResult",
    "transport_step",
    "collision_step",
    "conserved_totals",
    "max_collision_frequency",
    "stable_dt",
    "integrate",
    "run_space_homogeneous",
    "run_1d3v",
    "SCHEMES",
    "BOUNDARIES",
]

SCHEMES = ("explicit_rk2", "implicit_bgk_exponential")
BOUNDARIES = ("periodic", "copy")
NEGATIVE_TOLERANCE = 1e-12


@dataclass
class KineticState:
    distributions: list
    grids: list
    space: SpatialGrid
    time: float = 0.0

    def __post_init__(self):
        if len(self.distributions) != len(self.grids):
            raise ConfigurationError("one velocity grid per species is required")
        for k, (f, g) in enumerate(zip(self.distributions, self.grids)):
            if f.shape != (self.space.cells, g.size):
                raise ConfigurationError(
                    f"species {k}: distribution shape {f.shape} does not match "
                    f"({self.space.cells}, {g.size})")

    @property
    def n_species(self) -> int:
        return len(self.distributions)

    def copy(self) -> "KineticState":
        return KineticState([f.copy() for f in self.distributions], list(self.grids), self.space, self.time)


@dataclass
class TimeControls:
    dt: float | str = "auto"
    t_end: float = 1.0
    cfl: float = 0.9
    collision_scheme: str = "explicit_rk2"
    epsilon: float = 1.0
    scaling: str = "unscaled"
    boundary: str = "periodic"
    limiter: bool = False
    equilibrium_tolerance: float = 0.0
    wall_clock_limit: float | None = None

    def __post_init__(self):
        if isinstance(self.dt, str):
            if self.dt != "auto":
                raise ConfigurationError(f"dt must be a positive number or 'auto', got {self.dt!r}")
        elif not (np.isfinite(self.dt) and self.dt > 0):
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= 0:
            raise ConfigurationError(f"t_end must be >= 0, got {self.t_end}")
        if not 0 < self.cfl <= 1:
            raise ConfigurationError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.collision_scheme not in SCHEMES:
            raise ConfigurationError(f"unknown collision scheme {self.collision_scheme!r}; use one of {SCHEMES}")
        if not self.epsilon > 0:
            raise ConfigurationError(f"epsilon must be positive, got {self.epsilon}")
        if self.boundary not in BOUNDARIES:
            raise ConfigurationError(f"unknown boundary {self.boundary!r}; use one of {BOUNDARIES}")


@dataclass
class StepStats:
    clipped: int = 0
    min_value: float = np.inf


# ---------------------------------------------------------------- transport

def _ghosted(f: np.ndarray, width: int, boundary: str) -> np.ndarray:
    if boundary == "periodic":
        return np.concatenate([f[-width:], f, f[:width]], axis=0)
    return np.concatenate([np.repeat(f[:1], width, axis=0), f, np.repeat(f[-1:], width, axis=0)], axis=0)


def _minmod(a, b):
    return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def _upwind_increment(f: np.ndarray, vx: np.ndarray, dx: float, boundary: str, limiter: bool) -> np.ndarray:
    """-(F_{c+1/2} - F_{c-1/2}) / dx for advection with node velocities ``vx``."""
    vp = np.maximum(vx, 0.0)
    vm = np.minimum(vx, 0.0)
    if not limiter:
        g = _ghosted(f, 1, boundary)
        left, right = g[:-1], g[1:]
        flux = vp * left + vm * right
    else:
        g = _ghosted(f, 2, boundary)
        slope = _minmod(g[1:-1] - g[:-2], g[2:] - g[1:-1])
        cells = g[1:-1]
        left = cells[:-1] + 0.5 * slope[:-1]
        right = cells[1:] - 0.5 * slope[1:]
        flux = vp * left + vm * right
    return -(flux[1:] - flux[:-1]) / dx


def transport_step(state: KineticState, dt: float, boundary: str = "periodic",
                   limiter: bool = False, cfl: float = 1.0) -> KineticState:
    """Advance free streaming along x by ``dt``."""
    if boundary not in BOUNDARIES:
        raise ConfigurationError(f"unknown boundary {boundary!r}")
    dx = state.space.dx
    vmax = max(g.max_abs_vx for g in state.grids)
    if dt * vmax > cfl * dx * (1.0 + 1e-12):
        raise StepSizeError(f"transport step dt={dt:.4g} exceeds the CFL bound {cfl * dx / vmax:.4g}")
    out = []
    for f, g in zip(state.distributions, state.grids):
        vx = g.nodes[:, 0]
        if limiter:
            f1 = f + dt * _upwind_increment(f, vx, dx, boundary, True)
            new = 0.5 * f + 0.5 * (f1 + dt * _upwind_increment(f1, vx, dx, boundary, True))
        else:
            new = f + dt * _upwind_increment(f, vx, dx, boundary, False)
        out.append(new)
    return KineticState(out, state.grids, state.space, state.time)


# ---------------------------------------------------------------- collision

def _enforce_positivity(dists, stats: StepStats):
    for k, f in enumerate(dists):
        floor = -NEGATIVE_TOLERANCE * np.max(f, axis=1, keepdims=True)
        low = f.min()
        stats.min_value = min(stats.min_value, float(low))
        if low >= 0:
            continue
        if np.any(f < floor):
            c, node = np.unravel_index(np.argmin(f - floor), f.shape)
            raise PositivityError(
                f"species {k}: value {f[c, node]:.3e} in cell {c} is below the positivity "
                f"tolerance; reduce dt")
        neg = f < 0
        stats.clipped += int(neg.sum())
        f[neg] = 0.0


def max_collision_frequency(dists, selector, spec: MixtureSpec, grids, scale: np.ndarray,
                            boltzmann_only: bool = False) -> float:
    """Largest scaled relaxation or loss frequency over cells and species."""
    fields = _fields(dists, spec, grids)
    C = dists[0].shape[0]
    bits = _selector_bits(selector, spec, C)
    best = 0.0
    S = spec.n_species
    for i in range(S):
        total = np.zeros(C)
        for j in range(S):
            b = bits[(min(i, j), max(i, j))]
            kernel = spec.kernel(i, j)
            n_j = fields[j][0]
            if kernel.variant == "maxwell":
                rate_b = 4.0 * np.pi * kernel.strength * n_j
            else:
                reach = np.linalg.norm(grids[i].bounds_max - grids[i].bounds_min) \
                    + np.linalg.norm(grids[j].bounds_max - grids[j].bounds_min)
                rate_b = 4.0 * np.pi * kernel.strength * reach * n_j
            if boltzmann_only:
                rate = np.where(b == 1, rate_b, 0.0)
            else:
                rate_bgk = bgk_relaxation_frequency(i, j, fields, spec)
                rate = np.where(b == 1, rate_b, rate_bgk)
            total += scale[i, j] * rate
        best = max(best, float(total.max()))
    return best


def bgk_relaxation_frequency(i, j, fields, spec: MixtureSpec) -> np.ndarray:
    from .collision_bgk import _g_bar, lambda_coefficient
    m_i, m_j = spec.species[i].mass, spec.species[j].mass
    du = fields[i][1] - fields[j][1]
    g = _g_bar(fields[i][2], fields[j][2], np.einsum("cd,cd->c", du, du), m_i, m_j)
    return spec.nu_multiplier(i, j) * lambda_coefficient(spec.kernel(i, j), g) * fields[j][0]


def _rk2(dists, rhs):
    """Heun's method; ``rhs`` returns increments already multiplied by dt."""
    k1 = rhs(dists)
    stage = [f + k for f, k in zip(dists, k1)]
    k2 = rhs(stage)
    return [0.5 * f + 0.5 * (s + k) for f, s, k in zip(dists, stage, k2)]


def collision_step(state: KineticState, selector: SelectorField, spec: MixtureSpec, dt: float,
                   scheme: str = "explicit_rk2", scaling: str = "unscaled", epsilon: float = 1.0,
                   stats: StepStats | None = None) -> KineticState:
    """Advance the scaled hybrid collision operator by ``dt`` in every cell.

    ``explicit_rk2`` is Heun's method. ``implicit_bgk_exponential`` splits
    the BGK terms into intra-species and cross-species relaxation, each
    solved by exact exponentials toward Maxwellian targets (see
    ``_bgk_relaxation_step``); Boltzmann pairs, if any, are added
    explicitly with the same two-stage update in between two half
    relaxations.
    """
    if scheme not in SCHEMES:
        raise ConfigurationError(f"unknown collision scheme {scheme!r}")
    if not dt > 0:
        raise StepSizeError(f"dt must be positive, got {dt}")
    stats = StepStats() if stats is None else stats
    grids = state.grids
    scale = scaling_matrix(spec, scaling, epsilon)
    ang = spec.angular
    dists = state.distributions
    C = dists[0].shape[0]
    bits = _selector_bits(selector, spec, C)
    has_boltzmann = any(np.any(b == 1) for b in bits.values())

    if scheme == "explicit_rk2":
        nu_max = max_collision_frequency(dists, selector, spec, grids, scale)
        if dt * nu_max > 2.0 * (1.0 + 1e-12):
            raise StepSizeError(
                f"explicit collision step dt={dt:.4g} exceeds the stability bound 2/nu = {2.0 / nu_max:.4g}")

        def rhs(fs):
            out = collision_rhs(fs, selector, spec, grids, ang, scale)
            return [dt * r for r in out]

        new = _rk2(dists, rhs)
    else:
        relax = lambda fs, h: _bgk_relaxation_step(fs, bits, spec, grids, scale, h)
        if not has_boltzmann:
            new = relax(dists, dt)
        else:
            nu_max = max_collision_frequency(dists, selector, spec, grids, scale, boltzmann_only=True)
            if dt * nu_max > 2.0 * (1.0 + 1e-12):
                raise StepSizeError(
                    f"Boltzmann pairs are explicit: dt={dt:.4g} exceeds 2/nu = {2.0 / nu_max:.4g}")
            boltz_bits = _only_boltzmann(bits)

            def rhs(fs):
                fields = _fields(fs, spec, grids)
                terms = _pair_terms(fs, boltz_bits, spec, grids, ang, fields)
                out = []
                for i in range(spec.n_species):
                    acc = np.zeros_like(fs[i])
                    for j in range(spec.n_species):
                        acc = acc + scale[i, j] * terms[(i, j)]
                    out.append(dt * acc)
                return out

            half = relax(dists, 0.5 * dt)
            mid = _rk2(half, rhs)
            new = relax(mid, 0.5 * dt)
    _enforce_positivity(new, stats)
    return KineticState(new, grids, state.space, state.time)


def _only_boltzmann(bits):
    """Selector dict where BGK cells are skipped entirely (marked 2)."""
    return {p: np.where(b == 1, 1, 2).astype(np.uint8) for p, b in bits.items()}


def _relax_toward(f, target, decay):
    return target + (f - target) * decay[:, None]


def _intra_relaxation(dists, bits, spec: MixtureSpec, grids, scale, dt):
    """Exact solution of the intra-species BGK terms (moments do not change)."""
    out = [f.copy() for f in dists]
    fields = _fields(dists, spec, grids)
    for i in range(spec.n_species):
        cells = np.flatnonzero(bits[(i, i)] == 0)
        if cells.size == 0:
            continue
        rel = bgk_relaxation(i, i, fields, spec, grids, cells)
        out[i][cells] = _relax_toward(dists[i][cells], rel.attractor, np.exp(-scale[i, i] * rel.nu * dt))
    return out


def _phi(x):
    """(1 - exp(-x)) / x with the limit 1 at x = 0."""
    out = np.ones_like(x)
    nz = x > 1e-300
    out[nz] = -np.expm1(-x[nz]) / x[nz]
    return out


def _pair_exchange(lam, s, m_i, m_j, n_i, n_j, P, E_th, w0, D0, t):
    """Closed-form pair exchange at constant lambda over time ``t``.

    The consistent BGK pair (like the Maxwell-molecule Boltzmann pair)
    relaxes w = u_i - u_j at rate k_u and the temperature gap D = T_i - T_j
    at rate k_T, with D forced by |w|^2. Returns u_i, u_j, T_i, T_j.
    ``P`` is the pair momentum and ``E_th`` the pair total energy.
    """
    M = m_i + m_j
    rho_i, rho_j = m_i * n_i, m_j * n_j
    K = s * lam * rho_i * rho_j / M
    k_u = K * (1.0 / rho_i + 1.0 / rho_j)
    k_T = 2.0 * K / M * (1.0 / n_i + 1.0 / n_j)
    c = 2.0 * K / (3.0 * M) * (m_j / n_i - m_i / n_j)
    w = w0 * np.exp(-k_u * t)[:, None]
    w2 = np.einsum("cd,cd->c", w0, w0)
    slow, gap = np.minimum(k_T, 2.0 * k_u), np.abs(k_T - 2.0 * k_u)
    D = D0 * np.exp(-k_T * t) + c * w2 * t * np.exp(-slow * t) * _phi(gap * t)
    U = P / (rho_i + rho_j)[:, None]
    u_i = U + (rho_j / (rho_i + rho_j))[:, None] * w
    u_j = U - (rho_i / (rho_i + rho_j))[:, None] * w
    theta = E_th - 0.5 * rho_i * np.einsum("cd,cd->c", u_i, u_i) - 0.5 * rho_j * np.einsum("cd,cd->c", u_j, u_j)
    T_i = (theta + 1.5 * n_j * D) / (1.5 * (n_i + n_j))
    return u_i, u_j, T_i, T_i - D


def _cross_relaxation(dists, i, j, cells, spec: MixtureSpec, grids, scale, dt):
    """One BGK cross pair over ``dt``.

    The pair's moments obey a closed exchange ODE that is solved exactly
    (lambda is taken at a midpoint predictor, which only matters for
    speed-dependent kernels). Each species then relaxes exactly, at its
    frequency, toward the Maxwellian that makes its end-of-step moments
    equal to the ODE solution.
    """
    m_i, m_j = spec.species[i].mass, spec.species[j].mass
    f_i, f_j = dists[i][cells], dists[j][cells]
    n_i, u_i, T_i = moment_fields(f_i, grids[i], m_i)
    n_j, u_j, T_j = moment_fields(f_j, grids[j], m_j)
    s = scale[i, j]
    if scale[j, i] != s:
        raise ConfigurationError("cross-pair scaling must be symmetric")
    P = m_i * n_i[:, None] * u_i + m_j * n_j[:, None] * u_j
    E = 1.5 * (n_i * T_i + n_j * T_j) + 0.5 * m_i * n_i * np.einsum("cd,cd->c", u_i, u_i) \
        + 0.5 * m_j * n_j * np.einsum("cd,cd->c", u_j, u_j)
    kernel = spec.kernel(i, j)

    def lam(ui, uj, Ti, Tj):
        du = ui - uj
        return lambda_coefficient(kernel, _g_bar(Ti, Tj, np.einsum("cd,cd->c", du, du), m_i, m_j))

    args = (m_i, m_j, n_i, n_j, P, E, u_i - u_j, T_i - T_j)
    mid = _pair_exchange(lam(u_i, u_j, T_i, T_j) * np.ones_like(n_i), s, *args, 0.5 * dt)
    lam_mid = lam(*mid) * np.ones_like(n_i)
    ends = _pair_exchange(lam_mid, s, *args, dt)
    out = [f.copy() for f in dists]
    build = matched_maxwellian_fields if spec.matched else maxwellian_fields
    mult = spec.nu_multiplier(i, j)
    for k, m, n, u0, T0, u1, T1, f, n_o in ((i, m_i, n_i, u_i, T_i, ends[0], ends[2], f_i, n_j),
                                            (j, m_j, n_j, u_j, T_j, ends[1], ends[3], f_j, n_i)):
        x = s * mult * lam_mid * n_o * dt
        decay = np.exp(-x)
        gain = -np.expm1(-x)
        P0, P1 = m * n[:, None] * u0, m * n[:, None] * u1
        E0 = 1.5 * n * T0 + 0.5 * m * n * np.einsum("cd,cd->c", u0, u0)
        E1 = 1.5 * n * T1 + 0.5 * m * n * np.einsum("cd,cd->c", u1, u1)
        u_t = (P1 - decay[:, None] * P0) / (gain * m * n)[:, None]
        E_t = (E1 - decay * E0) / gain
        T_t = (E_t - 0.5 * m * n * np.einsum("cd,cd->c", u_t, u_t)) / (1.5 * n)
        if np.any(~(T_t > 0)):
            raise StepSizeError(f"BGK exchange of pair {(i, j)}: relaxation target has nonpositive "
                                f"temperature; reduce dt")
        target = build(m, n, u_t, T_t, grids[k])
        out[k][cells] = _relax_toward(f, target, decay)
    return out


def _bgk_relaxation_step(dists, bits, spec: MixtureSpec, grids, scale, dt):
    """Strang splitting of intra-species and cross-species BGK relaxation."""
    cross = [(i, j) for i, j in spec.unordered_pairs() if i != j]
    f = _intra_relaxation(dists, bits, spec, grids, scale, 0.5 * dt)
    sweeps = [(p, dt) for p in cross] if len(cross) == 1 else \
        [(p, 0.5 * dt) for p in cross] + [(p, 0.5 * dt) for p in reversed(cross)]
    for (i, j), h in sweeps:
        cells = np.flatnonzero(bits[(i, j)] == 0)
        if cells.size:
            f = _cross_relaxation(f, i, j, cells, spec, grids, scale, h)
    return _intra_relaxation(f, bits, spec, grids, scale, 0.5 * dt)


# ---------------------------------------------------------------- drivers

def conserved_totals(state: KineticState, spec: MixtureSpec):
    """Species masses (S,), total momentum (3,), total energy, momentum scale."""
    dx = state.space.dx
    mass = np.empty(state.n_species)
    mom = np.zeros(3)
    energy = 0.0
    mom_scale = 0.0
    for k, (f, g, sp) in enumerate(zip(state.distributions, state.grids, spec.species)):
        w = g.cell_weight * dx
        col = f.sum(axis=0)
        mass[k] = col.sum() * w
        mom += sp.mass * (col @ g.nodes) * w
        energy += 0.5 * sp.mass * (col @ g.speed_squared) * w
        mom_scale += sp.mass * (col @ np.sqrt(g.speed_squared)) * w
    return mass, mom, energy, mom_scale


@dataclass
class Snapshot:
    time: float
    centers: np.ndarray
    n: np.ndarray          # (S, C)
    u: np.ndarray          # (S, C, 3)
    T: np.ndarray          # (S, C)
    mix_n: np.ndarray
    mix_u: np.ndarray
    mix_T: np.ndarray
    distributions: list | None = None


def snapshot(state: KineticState, spec: MixtureSpec, with_distributions: bool = False) -> Snapshot:
    fields = _fields(state.distributions, spec, state.grids)
    n = np.stack([f[0] for f in fields])
    u = np.stack([f[1] for f in fields])
    T = np.stack([f[2] for f in fields])
    mn, _, mu, mT = global_fields(spec.masses, n, u, T)
    dists = [f.copy() for f in state.distributions] if with_distributions else None
    return Snapshot(state.time, np.array(state.space.centers), n, u, T, mn, mu, mT, dists)


@dataclass
class Audit:
    mass_drift: float = 0.0
    momentum_drift: float = 0.0
    energy_drift: float = 0.0
    max_step_mass_drift: float = 0.0
    max_step_momentum_drift: float = 0.0
    max_step_energy_drift: float = 0.0
    max_h_increase: float = -np.inf
    max_production: float = -np.inf
    production_violations: int = 0
    clipped: int = 0
    steps: int = 0

    def lines(self) -> list[str]:
        out = [
            f"species_mass_drift={self.mass_drift:.3e}",
            f"momentum_drift={self.momentum_drift:.3e}",
            f"energy_drift={self.energy_drift:.3e}",
            f"max_conservation_drift={max(self.mass_drift, self.momentum_drift, self.energy_drift):.3e}",
            f"steps={self.steps} clipped_values={self.clipped}",
        ]
        if np.isfinite(self.max_production):
            out.append(f"max_entropy_production={self.max_production:.3e} "
                       f"production_sign_violations={self.production_violations}")
        if np.isfinite(self.max_h_increase):
            out.append(f"max_h_increase={self.max_h_increase:.3e}")
        return out


@dataclass
class RunResult:
    snapshots: list = field(default_factory=list)
    times: list = field(default_factory=list)
    h: list = field(default_factory=list)
    production: list = field(default_factory=list)
    audit: Audit = field(default_factory=Audit)
    state: KineticState | None = None
    truncated: bool = False
    converged: bool = False


def stable_dt(state: KineticState, selector: SelectorField, spec: MixtureSpec,
              controls: TimeControls, transport: bool) -> float:
    """Automatic step: CFL bound and, for explicit parts, 0.5 / frequency."""
    bounds = []
    if transport:
        vmax = max(g.max_abs_vx for g in state.grids)
        bounds.append(controls.cfl * state.space.dx / vmax)
    scale = scaling_matrix(spec, controls.scaling, controls.epsilon)
    if controls.collision_scheme == "implicit_bgk_exponential":
        # stiff BGK relaxation is exact; only the O(1) rates limit accuracy
        nu = max(max_collision_frequency(state.distributions, selector, spec, state.grids, scale,
                                         boltzmann_only=True),
                 max_collision_frequency(state.distributions, selector, spec, state.grids,
                                         np.minimum(scale, 1.0)))
    else:
        nu = max_collision_frequency(state.distributions, selector, spec, state.grids, scale)
    if nu > 0:
        bounds.append(0.5 / nu)
    if not bounds:
        return controls.t_end if controls.t_end > 0 else 1.0
    return min(bounds)


def _drift(a, b, scale):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))) / scale) if scale > 0 else 0.0


def integrate(state: KineticState, selector: SelectorField | Callable, spec: MixtureSpec,
              controls: TimeControls, transport: bool, output_times=None,
              with_distributions: bool = False, entropy: bool = False,
              on_snapshot: Callable | None = None, record_every_step: bool = False) -> RunResult:
    """Advance ``state`` to ``controls.t_end``.

    ``selector`` may be a callable ``t -> SelectorField`` for time-dependent
    selection. Snapshots are taken at ``output_times`` (always including the
    initial and final states).
    """
    state = state.copy()
    t_end = controls.t_end
    times = sorted(set([0.0, t_end] + [t for t in (output_times or []) if 0 < t < t_end]))
    pending = list(times)
    result = RunResult()
    stats = StepStats()
    audit = result.audit
    mass0, mom0, e0, pscale = conserved_totals(state, spec)
    prev = (mass0, mom0, e0)
    get_selector = selector if callable(selector) else (lambda t: selector)
    wall0 = _time.monotonic()

    def record(st):
        snap = snapshot(st, spec, with_distributions)
        result.snapshots.append(snap)
        if on_snapshot is not None:
            on_snapshot(snap)

    h_prev = None
    if entropy:
        rep = entropy_report(state.distributions, get_selector(0.0), spec, state.grids, spec.angular,
                             pair_scale=scaling_matrix(spec, controls.scaling, controls.epsilon))
        h_prev = rep.h_value
        result.h.append(rep.h_value)
        result.production.append(float(rep.production.max()))
        audit.max_production = max(audit.max_production, float(rep.production.max()))
        audit.production_violations += rep.violations
    result.times.append(state.time)
    record(state)
    pending.pop(0)

    while pending:
        if controls.wall_clock_limit is not None and _time.monotonic() - wall0 > controls.wall_clock_limit:
            result.truncated = True
            break
        sel = get_selector(state.time)
        dt = controls.dt if controls.dt != "auto" else stable_dt(state, sel, spec, controls, transport)
        target = pending[0]
        if state.time + dt >= target - 1e-12 * max(1.0, abs(target)):
            dt = target - state.time
        if dt <= 0:
            pending.pop(0)
            continue
        if transport:
            state = transport_step(state, 0.5 * dt, controls.boundary, controls.limiter, controls.cfl)
        state = collision_step(state, sel, spec, dt, controls.collision_scheme, controls.scaling,
                               controls.epsilon, stats)
        if transport:
            state = transport_step(state, 0.5 * dt, controls.boundary, controls.limiter, controls.cfl)
        state.time = target if abs(state.time + dt - target) <= 1e-12 * max(1.0, abs(target)) else state.time + dt
        audit.steps += 1
        mass, mom, e, _ = conserved_totals(state, spec)
        audit.max_step_mass_drift = max(audit.max_step_mass_drift, float(np.max(np.abs(mass - prev[0]) / mass0)))
        audit.max_step_momentum_drift = max(audit.max_step_momentum_drift, _drift(mom, prev[1], pscale))
        audit.max_step_energy_drift = max(audit.max_step_energy_drift, _drift(e, prev[2], e0))
        prev = (mass, mom, e)
        if record_every_step:
            result.times.append(state.time)
        if entropy:
            rep = entropy_report(state.distributions, sel, spec, state.grids, spec.angular,
                                 pair_scale=scaling_matrix(spec, controls.scaling, controls.epsilon))
            result.h.append(rep.h_value)
            result.production.append(float(rep.production.max()))
            audit.max_h_increase = max(audit.max_h_increase, rep.h_value - h_prev)
            h_prev = rep.h_value
            audit.max_production = max(audit.max_production, float(rep.production.max()))
            audit.production_violations += rep.violations
        if state.time >= pending[0] - 1e-12 * max(1.0, abs(pending[0])):
            pending.pop(0)
            if not record_every_step:
                result.times.append(state.time)
            record(state)
        if controls.equilibrium_tolerance > 0 and _at_equilibrium(state, spec, controls.equilibrium_tolerance):
            result.converged = True
            if result.snapshots[-1].time != state.time:
                record(state)
                if not record_every_step:
                    result.times.append(state.time)
            break

    mass, mom, e, _ = conserved_totals(state, spec)
    audit.mass_drift = float(np.max(np.abs(mass - mass0) / mass0))
    audit.momentum_drift = _drift(mom, mom0, pscale)
    audit.energy_drift = _drift(e, e0, e0)
    audit.clipped = stats.clipped
    result.state = state
    return result


def _at_equilibrium(state: KineticState, spec: MixtureSpec, tol: float) -> bool:
    fields = _fields(state.distributions, spec, state.grids)
    n = np.stack([f[0] for f in fields])
    u = np.stack([f[1] for f in fields])
    T = np.stack([f[2] for f in fields])
    _, _, mu, mT = global_fields(spec.masses, n, u, T)
    du = np.max(np.abs(u - mu[None]))
    dT = np.max(np.abs(T - mT[None]))
    return max(du, dT) < tol


def run_space_homogeneous(config) -> RunResult:
    """Run a single-cell configuration (see ``mixkin.config``)."""
    from .scenarios import build_kinetic

    setup = build_kinetic(config)
    if setup.state.space.cells != 1:
        raise ConfigurationError("space-homogeneous runs need exactly one cell")
    return integrate(setup.state, setup.selector, setup.spec, setup.controls, transport=False,
                     output_times=setup.output_times, with_distributions=setup.with_distributions,
                     entropy=setup.entropy, record_every_step=True)


def run_1d3v(config, on_snapshot: Callable | None = None) -> RunResult:
    """Run a 1D-in-space configuration with Strang splitting."""
    from .scenarios import build_kinetic

    setup = build_kinetic(config)
    return integrate(setup.state, setup.selector, setup.spec, setup.controls, transport=True,
                     output_times=setup.output_times, with_distributions=setup.with_distributions,
                     entropy=setup.entropy, on_snapshot=on_snapshot)
