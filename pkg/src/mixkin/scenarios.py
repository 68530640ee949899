"""Turn a ``RunConfig`` into solver inputs and run the Euler-level models."""
from __future__ import annotations

import time as _time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import hydro
from .collision_boltzmann import KernelModel
from .config import RunConfig
from .errors import ConfigurationError
from .grid import SpatialGrid, VelocityGrid, build_spatial_grid, build_velocity_grid, default_velocity_bounds
from .hybrid import MixtureSpec, SelectorField
from .moments import SpeciesParams, global_fields, matched_maxwellian_fields, maxwellian_fields, moment_fields
from .solver import Audit, KineticState, RunResult, Snapshot, TimeControls

__all__ = [
    "KineticSetup",
    "build_spec",
    "initial_profiles",
    "velocity_grids",
    "build_selector",
    "output_times",
    "build_kinetic",
    "HydroRun",
    "run_hydro",
    "StudyRow",
    "run_epsilon_study",
    "profile_distance",
]


def build_spec(config: RunConfig) -> MixtureSpec:
    kernels, nus = {}, {}
    for p in config.pairs:
        if p.kernel == "maxwell":
            kernels[p.species] = KernelModel.maxwell_molecules(p.strength)
        else:
            kernels[p.species] = KernelModel.hard_sphere(p.strength)
        nus[p.species] = p.nu_multiplier
    species = tuple(SpeciesParams(s.name, s.mass) for s in config.species)
    return MixtureSpec(species, kernels=kernels, nu_multipliers=nus, matched=config.collision.matched,
                       angular_order=config.collision.angular_order, deposit=config.collision.deposit)


def initial_profiles(config: RunConfig, centers: np.ndarray):
    """Cell values ``n (S, C)``, ``u (S, C, 3)``, ``T (S, C)``; later regions win."""
    S, C = config.n_species, centers.size
    n = np.full((S, C), np.nan)
    u = np.zeros((S, C, 3))
    T = np.full((S, C), np.nan)
    for s, sp in enumerate(config.species):
        for r in sp.regions:
            inside = (centers >= r.x_min) & (centers < r.x_max)
            n[s, inside] = r.n
            u[s, inside] = r.u
            T[s, inside] = r.T
        missing = np.flatnonzero(np.isnan(n[s]))
        if missing.size:
            raise ConfigurationError(
                f"species '{sp.name}': cell {missing[0]} (x = {centers[missing[0]]:.6g}) is not covered by any region")
    return n, u, T


def velocity_grids(config: RunConfig, n, u, T) -> list[VelocityGrid]:
    """One grid per species.

    Explicit bounds are shared by all species. Otherwise every box is centered
    at the mass-averaged initial velocity, with half-width
    ``width_factor * sqrt(T_ref / m_i)`` plus the largest drift, where
    ``T_ref`` bounds the equilibrium temperature reachable from the initial
    data.
    """
    vg = config.velocity_grid
    if vg.bounds_min is not None:
        g = build_velocity_grid(vg.bounds_min, vg.bounds_max, vg.points)
        return [g] * config.n_species
    masses = np.array([s.mass for s in config.species])
    rho = masses[:, None] * n
    center = np.einsum("sc,scd->d", rho, u) / rho.sum()
    drift2 = np.einsum("scd,scd->sc", u - center, u - center)
    T_ref = float(T.max() + (masses[:, None] * drift2).max() / 3.0)
    grids = []
    for s, m in enumerate(masses):
        lo, hi = default_velocity_bounds(center, np.sqrt(T_ref / m), float(np.sqrt(drift2[s].max())),
                                         vg.width_factor)
        grids.append(build_velocity_grid(lo, hi, vg.points))
    return grids


def build_selector(config: RunConfig, space: SpatialGrid) -> SelectorField:
    rules = [(r.x_min, r.x_max, r.species[0], r.species[1], r.bit) for r in config.rules]
    return SelectorField.from_rules(space.centers, config.n_species, rules,
                                    default=config.collision.selector_default)


def output_times(config: RunConfig) -> list[float]:
    t_end = config.time.t_end
    step = config.output.interval
    if step is None:
        return [0.0, t_end]
    k = np.arange(1, int(np.floor(t_end / step * (1 + 1e-12))) + 1)
    times = [0.0] + [float(t) for t in k * step if t < t_end * (1 - 1e-12)] + [t_end]
    return times


def time_controls(config: RunConfig) -> TimeControls:
    t = config.time
    return TimeControls(dt=t.dt, t_end=t.t_end, cfl=t.cfl, collision_scheme=t.scheme, epsilon=t.epsilon,
                        scaling=t.scaling, boundary=config.space.boundary, limiter=config.space.limiter,
                        equilibrium_tolerance=t.equilibrium_tolerance, wall_clock_limit=t.wall_clock_limit)


@dataclass
class KineticSetup:
    state: KineticState
    selector: SelectorField
    spec: MixtureSpec
    controls: TimeControls
    output_times: list
    with_distributions: bool
    entropy: bool


def _initial_distribution(spec, s, n, u, T, grid):
    build = matched_maxwellian_fields if spec.matched else maxwellian_fields
    return build(spec.species[s].mass, n, u, T, grid)


def build_kinetic(config: RunConfig) -> KineticSetup:
    space = build_spatial_grid(config.space.length, config.space.cells)
    spec = build_spec(config)
    n, u, T = initial_profiles(config, space.centers)
    grids = velocity_grids(config, n, u, T)
    dists = [_initial_distribution(spec, s, n[s], u[s], T[s], grids[s]) for s in range(config.n_species)]
    state = KineticState(dists, grids, space, 0.0)
    return KineticSetup(state, build_selector(config, space), spec, time_controls(config), output_times(config),
                        config.output.include_distributions, config.entropy)


# ---------------------------------------------------------------- Euler-level runs

@dataclass
class HydroRun:
    snapshots: list = field(default_factory=list)
    audit: Audit = field(default_factory=Audit)
    state: object = None
    truncated: bool = False
    light_grid: VelocityGrid | None = None


def _st_snapshot(state: hydro.EulerStateST, t, centers) -> Snapshot:
    n_s, u, T = state.primitives()
    S = n_s.shape[0]
    u_s = np.broadcast_to(u, (S,) + u.shape).copy()
    T_s = np.broadcast_to(T, (S,) + T.shape).copy()
    return Snapshot(t, centers, n_s, u_s, T_s, n_s.sum(axis=0), u, T)


def _mt_snapshot(state: hydro.EulerStateMT, t, centers) -> Snapshot:
    n, u, T = state.primitives()
    mn, _, mu, mT = global_fields(state.masses, n, u, T)
    return Snapshot(t, centers, n, u, T, mn, mu, mT)


def _kf_snapshot(state: hydro.KineticFluidState, t, centers, masses, heavy, light_grid) -> Snapshot:
    light = 1 - heavy
    n_h, u_h, T_h = state.heavy_primitives(masses[heavy])
    n_l, u_l, T_l = moment_fields(state.f, light_grid, masses[light], species=light)
    n = np.empty((2, centers.size))
    u = np.empty((2, centers.size, 3))
    T = np.empty((2, centers.size))
    n[heavy], u[heavy], T[heavy] = n_h, u_h, T_h
    n[light], u[light], T[light] = n_l, u_l, T_l
    mn, _, mu, mT = global_fields(masses, n, u, T)
    return Snapshot(t, centers, n, u, T, mn, mu, mT)


def _totals(snap: Snapshot, masses, dx):
    """Species masses, total momentum and total energy from moment fields."""
    mass = snap.n.sum(axis=1) * dx
    rho = masses[:, None] * snap.n
    mom = np.einsum("sc,scd->d", rho, snap.u) * dx
    energy = float((0.5 * rho * np.einsum("scd,scd->sc", snap.u, snap.u) + 1.5 * snap.n * snap.T).sum() * dx)
    return mass, mom, energy


def _march(state, step: Callable, auto_dt: Callable, snap: Callable, config: RunConfig, masses, dx,
           on_snapshot: Callable | None) -> HydroRun:
    run = HydroRun()
    audit = run.audit
    pending = output_times(config)
    t = 0.0
    wall0 = _time.monotonic()

    def record(st, tt):
        s = snap(st, tt)
        run.snapshots.append(s)
        if on_snapshot is not None:
            on_snapshot(s)
        return s

    first = record(state, 0.0)
    pending.pop(0)
    m0, p0, e0 = _totals(first, masses, dx)
    # thermal momentum scale, comparable to the kinetic sum of m |v| f
    speed = np.linalg.norm(first.u, axis=-1) + np.sqrt(3.0 * first.T / masses[:, None])
    pscale = float(np.sum(masses[:, None] * first.n * speed) * dx)
    prev = (m0, p0, e0)
    limit = config.time.wall_clock_limit
    while pending:
        if limit is not None and _time.monotonic() - wall0 > limit:
            run.truncated = True
            break
        dt = config.time.dt if config.time.dt != "auto" else auto_dt(state)
        target = pending[0]
        if t + dt >= target - 1e-12 * max(1.0, target):
            dt = target - t
        state = step(state, dt)
        t = target if abs(t + dt - target) <= 1e-12 * max(1.0, target) else t + dt
        audit.steps += 1
        current = snap(state, t)
        m, p, e = _totals(current, masses, dx)
        audit.max_step_mass_drift = max(audit.max_step_mass_drift, float(np.max(np.abs(m - prev[0]) / m0)))
        audit.max_step_momentum_drift = max(audit.max_step_momentum_drift,
                                            float(np.max(np.abs(p - prev[1]))) / pscale)
        audit.max_step_energy_drift = max(audit.max_step_energy_drift, abs(e - prev[2]) / e0)
        prev = (m, p, e)
        if t >= pending[0] - 1e-12 * max(1.0, pending[0]):
            pending.pop(0)
            record(state, t)
    audit.mass_drift = float(np.max(np.abs(prev[0] - m0) / m0))
    audit.momentum_drift = float(np.max(np.abs(prev[1] - p0))) / pscale
    audit.energy_drift = abs(prev[2] - e0) / e0
    run.state = state
    return run


def run_hydro(config: RunConfig, model: str | None = None, cells: int | None = None,
              on_snapshot: Callable | None = None) -> HydroRun:
    """Run ``euler_st``, ``euler_mt`` or ``kinetic_fluid`` for ``config``.

    ``cells`` overrides the spatial resolution (used for reference runs).
    """
    model = model or config.scenario
    space = build_spatial_grid(config.space.length, cells or config.space.cells)
    centers = np.array(space.centers)
    dx = space.dx
    spec = build_spec(config)
    masses = spec.masses
    n, u, T = initial_profiles(config, centers)
    bc, lim, cfl = config.space.boundary, config.space.limiter, config.time.cfl
    transport = space.cells > 1 or config.scenario != "space_homogeneous"

    if model == "euler_st":
        _, _, mu, mT = global_fields(masses, n, u, T)
        state = hydro.EulerStateST.from_primitive(masses, n, mu, mT)
        return _march(state,
                      lambda st, dt: hydro.euler_single_T_step(st, dt, dx, bc, lim, cfl),
                      lambda st: hydro.st_dt(st, dx, cfl),
                      lambda st, t: _st_snapshot(st, t, centers), config, masses, dx, on_snapshot)
    if model == "euler_mt":
        state = hydro.EulerStateMT.from_primitive(masses, n, u, T)
        return _march(state,
                      lambda st, dt: hydro.euler_multi_T_step(st, dt, spec, dx, bc, lim, transport, cfl),
                      lambda st: hydro.mt_dt(st, spec, dx, cfl, transport),
                      lambda st, t: _mt_snapshot(st, t, centers), config, masses, dx, on_snapshot)
    if model == "kinetic_fluid":
        heavy = int(np.argmax(masses))
        light = 1 - heavy
        grids = velocity_grids(config, n, u, T)
        f = _initial_distribution(spec, light, n[light], u[light], T[light], grids[light])
        rho_h = masses[heavy] * n[heavy]
        state = hydro.KineticFluidState(
            n[heavy].copy(), rho_h[:, None] * u[heavy],
            0.5 * rho_h * np.einsum("cd,cd->c", u[heavy], u[heavy]) + 1.5 * n[heavy] * T[heavy], f)
        coll = config.collision.light_heavy
        heavy_grid = grids[heavy] if coll == "boltzmann" else None
        run = _march(state,
                     lambda st, dt: hydro.kinetic_fluid_step(st, dt, spec, coll, grids[light], heavy_grid, dx, bc,
                                                             lim, transport, cfl),
                     lambda st: hydro.kf_dt(st, spec, grids[light], dx, cfl, transport),
                     lambda st, t: _kf_snapshot(st, t, centers, masses, heavy, grids[light]),
                     config, masses, dx, on_snapshot)
        run.light_grid = grids[light]
        return run
    raise ConfigurationError(f"unknown fluid model {model!r}")


# ---------------------------------------------------------------- epsilon study

def _coarsen(values: np.ndarray, factor: int) -> np.ndarray:
    """Average consecutive blocks of ``factor`` cells along the last axis."""
    if factor == 1:
        return values
    shape = values.shape[:-1] + (values.shape[-1] // factor, factor)
    return values.reshape(shape).mean(axis=-1)


def profile_distance(values: np.ndarray, reference: np.ndarray) -> float:
    """Mean absolute difference normalized by the largest reference magnitude."""
    values = np.asarray(values, dtype=float)
    reference = np.asarray(reference, dtype=float)
    scale = float(np.max(np.abs(reference)))
    if scale == 0.0:
        return float(np.mean(np.abs(values)))
    return float(np.mean(np.abs(values - reference)) / scale)


def compared_profiles(snap: Snapshot, reference: str, heavy: int | None = None) -> dict[str, np.ndarray]:
    if reference == "euler_st":
        return {"n": snap.mix_n, "ux": snap.mix_u[:, 0], "T": snap.mix_T}
    if reference == "euler_mt":
        out = {}
        for s in range(snap.n.shape[0]):
            out[f"n{s}"] = snap.n[s]
            out[f"ux{s}"] = snap.u[s, :, 0]
            out[f"T{s}"] = snap.T[s]
        return out
    return {"n_heavy": snap.n[heavy]}


def _coarsen_axis(a: np.ndarray, axis: int, factor: int) -> np.ndarray:
    return np.moveaxis(_coarsen(np.moveaxis(a, axis, -1), factor), -1, axis)


def _coarse_snapshot(snap: Snapshot, factor: int) -> Snapshot:
    return Snapshot(snap.time, _coarsen(snap.centers, factor), _coarsen(snap.n, factor),
                    _coarsen_axis(snap.u, 1, factor), _coarsen(snap.T, factor), _coarsen(snap.mix_n, factor),
                    _coarsen_axis(snap.mix_u, 0, factor), _coarsen(snap.mix_T, factor))


@dataclass
class StudyRow:
    epsilon: float
    distances: dict
    audit: Audit

    @property
    def distance(self) -> float:
        return max(self.distances.values())


def run_epsilon_study(config: RunConfig, run_kinetic: Callable | None = None):
    """Kinetic runs for each epsilon against one Euler-level reference run.

    Returns ``(rows, reference_snapshot)``. The reference uses
    ``reference_refinement`` times more cells and is averaged back onto the
    kinetic grid before comparison.
    """
    from .solver import run_1d3v

    run_kinetic = run_kinetic or run_1d3v
    factor = config.study.reference_refinement
    ref_cfg = replace(config, scenario=config.study.reference)
    ref = run_hydro(ref_cfg, config.study.reference, cells=config.space.cells * factor)
    ref_snap = _coarse_snapshot(ref.snapshots[-1], factor)
    heavy = int(np.argmax([s.mass for s in config.species]))
    ref_prof = compared_profiles(ref_snap, config.study.reference, heavy)
    rows = []
    for eps in config.study.epsilons:
        cfg = replace(config, scenario="transport_1d", time=replace(config.time, epsilon=eps))
        result: RunResult = run_kinetic(cfg)
        prof = compared_profiles(result.snapshots[-1], config.study.reference, heavy)
        rows.append(StudyRow(eps, {k: profile_distance(prof[k], ref_prof[k]) for k in ref_prof}, result.audit))
    return rows, ref_snap
