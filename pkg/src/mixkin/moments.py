"""Macroscopic moments of discrete distributions and Maxwellian construction.

Scalar-per-cell API (``species_moments``, ``maxwellian``, ...) mirrors the
batched field API (``moment_fields``, ``maxwellian_fields``, ...) used by the
solvers, where distributions have shape ``(cells, nodes)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigurationError,
    DegenerateDensityError,
    InvalidTemperatureError,
    NonConvergenceError,
)
from .grid import VelocityGrid

__all__ = [
    "SpeciesMoments",
    "GlobalMoments",
    "SpeciesParams",
    "density_floor",
    "species_moments",
    "moment_fields",
    "global_moments",
    "global_fields",
    "maxwellian",
    "maxwellian_fields",
    "moment_matched_maxwellian",
    "matched_maxwellian_fields",
]

DENSITY_FLOOR_FACTOR = 1e-14
NEWTON_MAX_ITER = 50
NEWTON_TOL = 1e-14
NEWTON_ACCEPT = 1e-12


@dataclass(frozen=True)
class SpeciesParams:
    name: str
    mass: float

    def __post_init__(self):
        if not np.isfinite(self.mass) or self.mass <= 0:
            raise ConfigurationError(f"species {self.name!r}: mass must be positive, got {self.mass}")


@dataclass(frozen=True, eq=False)
class SpeciesMoments:
    n: float
    u: np.ndarray
    T: float

    def __post_init__(self):
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float).reshape(3))


@dataclass(frozen=True, eq=False)
class GlobalMoments:
    n: float
    rho: float
    u: np.ndarray
    T: float


def density_floor(grid: VelocityGrid) -> float:
    """Densities at or below this value are treated as vacuum."""
    return DENSITY_FLOOR_FACTOR * grid.box_volume


def _as_cells(f: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    grid.check_values(f)
    return f.reshape(-1, grid.size)


def moment_fields(f: np.ndarray, grid: VelocityGrid, mass: float, species=None):
    """Batched moments of ``f`` with shape ``(cells, nodes)``.

    Returns ``(n, u, T)`` with shapes ``(cells,)``, ``(cells, 3)``, ``(cells,)``.
    """
    fc = _as_cells(f, grid)
    w = grid.cell_weight
    shifted = grid.nodes - grid.center
    n = fc.sum(axis=1) * w
    floor = density_floor(grid)
    bad = np.flatnonzero(~(n > floor))
    if bad.size:
        c = int(bad[0])
        raise DegenerateDensityError(
            f"density {n[c]:.3e} at or below floor {floor:.3e}"
            + (f" for species {species}" if species is not None else "")
            + f" in cell {c}",
            species=species, cell=c,
        )
    p = (fc @ shifted) * w
    e = (fc @ np.einsum("kd,kd->k", shifted, shifted)) * w
    du = p / n[:, None]
    T = mass * (e / n - np.einsum("cd,cd->c", du, du)) / 3.0
    return n, du + grid.center, T


def species_moments(f: np.ndarray, grid: VelocityGrid, mass: float,
                    species=None, cell=None) -> SpeciesMoments:
    f = np.asarray(f, dtype=float)
    if f.ndim != 1:
        raise ConfigurationError("species_moments expects a single-cell distribution")
    try:
        n, u, T = moment_fields(f[None, :], grid, mass, species)
    except DegenerateDensityError as exc:
        exc.cell = cell
        raise
    return SpeciesMoments(float(n[0]), u[0], float(T[0]))


def global_fields(masses, n: np.ndarray, u: np.ndarray, T: np.ndarray):
    """Mixture fields from stacked species fields ``n (S, C)``, ``u (S, C, 3)``, ``T (S, C)``."""
    m = np.asarray(masses, dtype=float)[:, None]
    n_tot = n.sum(axis=0)
    rho_s = m * n
    rho = rho_s.sum(axis=0)
    u_mix = np.einsum("sc,scd->cd", rho_s, u) / rho[:, None]
    du = u - u_mix[None]
    drift = np.einsum("sc,scd,scd->c", rho_s, du, du)
    T_mix = (n * T).sum(axis=0) / n_tot + drift / (3.0 * n_tot)
    return n_tot, rho, u_mix, T_mix


def global_moments(per_species) -> GlobalMoments:
    per_species = list(per_species)
    if not per_species:
        raise ConfigurationError("global_moments needs at least one species")
    masses = [p.mass for p, _ in per_species]
    n = np.array([[m.n] for _, m in per_species])
    u = np.array([[m.u] for _, m in per_species])
    T = np.array([[m.T] for _, m in per_species])
    if len(per_species) == 1:
        mom = per_species[0][1]
        return GlobalMoments(mom.n, masses[0] * mom.n, mom.u.copy(), mom.T)
    n_tot, rho, u_mix, T_mix = global_fields(masses, n, u, T)
    return GlobalMoments(float(n_tot[0]), float(rho[0]), u_mix[0], float(T_mix[0]))


def _check_temperature(T) -> None:
    T = np.asarray(T)
    if not np.all(T > 0) or not np.all(np.isfinite(T)):
        raise InvalidTemperatureError(f"temperature must be positive and finite, got min {np.min(T)}")


def maxwellian_fields(mass: float, n, u, T, grid: VelocityGrid) -> np.ndarray:
    """Analytic Maxwellians sampled at the nodes, shape ``(cells, nodes)``."""
    n = np.atleast_1d(np.asarray(n, dtype=float))
    u = np.asarray(u, dtype=float).reshape(-1, 3)
    T = np.atleast_1d(np.asarray(T, dtype=float))
    _check_temperature(T)
    d2 = (grid.speed_squared[None, :] - 2.0 * (u @ grid.nodes.T)
          + np.einsum("cd,cd->c", u, u)[:, None])
    coef = n * (mass / (2.0 * np.pi * T)) ** 1.5
    return coef[:, None] * np.exp(-mass * d2 / (2.0 * T[:, None]))


def maxwellian(mass: float, moments: SpeciesMoments, grid: VelocityGrid) -> np.ndarray:
    _check_temperature(moments.T)
    d = grid.nodes - moments.u
    d2 = np.einsum("kd,kd->k", d, d)
    coef = moments.n * (mass / (2.0 * np.pi * moments.T)) ** 1.5
    return coef * np.exp(-mass * d2 / (2.0 * moments.T))


def _newton_chunk(mass, n, u, T, grid: VelocityGrid):
    """Damped Newton on ``f = exp(a + b.xi + c|xi|^2)``, ``xi = (v - u)/s``.

    Works in the scaled variable so the 5x5 Jacobian stays well conditioned.
    Returns the values, the scaled parameters, ``s`` and the final residual.
    """
    C = n.size
    s = np.sqrt(T / mass)
    w = grid.cell_weight
    xi = (grid.nodes[None, :, :] - u[:, None, :]) / s[:, None, None]
    phi = np.empty(xi.shape[:2] + (5,))
    phi[..., 0] = 1.0
    phi[..., 1:4] = xi
    phi[..., 4] = np.einsum("cnd,cnd->cn", xi, xi)
    del xi
    target = np.zeros((C, 5))
    target[:, 0] = n
    target[:, 4] = 3.0 * n

    def evaluate(p, rows):
        with np.errstate(over="ignore", invalid="ignore"):
            f = np.exp(np.einsum("cnk,ck->cn", phi[rows], p))
        res = np.einsum("cn,cnk->ck", f, phi[rows]) * w - target[rows]
        err = np.max(np.abs(res), axis=1) / n[rows]
        return f, res, np.where(np.isfinite(err), err, np.inf)

    params = np.zeros((C, 5))
    params[:, 0] = np.log(n / ((2.0 * np.pi) ** 1.5 * s**3))
    params[:, 4] = -0.5
    everything = np.arange(C)
    f, res, err = evaluate(params, everything)
    active = err > NEWTON_TOL
    for _ in range(NEWTON_MAX_ITER):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        jac = np.einsum("cn,cnk,cnl->ckl", f[idx] * w, phi[idx], phi[idx])
        try:
            step = np.linalg.solve(jac, -res[idx][..., None])[..., 0]
        except np.linalg.LinAlgError:
            break
        lam = np.ones(idx.size)
        done = np.zeros(idx.size, dtype=bool)
        for _ in range(30):
            todo = np.flatnonzero(~done)
            if todo.size == 0:
                break
            rows = idx[todo]
            trial = params[rows] + lam[todo, None] * step[todo]
            f_t, res_t, err_t = evaluate(trial, rows)
            good = (trial[:, 4] < 0) & (err_t < err[rows])
            acc = rows[good]
            params[acc], f[acc], res[acc] = trial[good], f_t[good], res_t[good]
            old = err[acc].copy()
            err[acc] = err_t[good]
            done[todo[good]] = True
            # slow progress near the round-off floor ends the iteration
            slow = acc[(err[acc] > 0.25 * old) & (err[acc] <= NEWTON_ACCEPT)]
            active[slow] = False
            lam[todo[~good]] *= 0.5
        active[idx[~done]] = False
        active &= err > NEWTON_TOL
    return f, params, s, err


def matched_maxwellian_fields(mass: float, n, u, T, grid: VelocityGrid,
                              chunk_nodes: int = 2_000_000) -> np.ndarray:
    """Moment-matched Maxwellians, shape ``(cells, nodes)``.

    The discrete density, velocity and temperature of every row equal the
    targets to 1e-12 relative; otherwise ``NonConvergenceError`` is raised.
    """
    n = np.atleast_1d(np.asarray(n, dtype=float))
    u = np.asarray(u, dtype=float).reshape(-1, 3)
    T = np.atleast_1d(np.asarray(T, dtype=float))
    _check_temperature(T)
    if np.any(~(n > 0)):
        raise DegenerateDensityError("moment matching needs a positive target density",
                                     cell=int(np.flatnonzero(~(n > 0))[0]))
    out = np.empty((n.size, grid.size))
    step = max(1, chunk_nodes // grid.size)
    for start in range(0, n.size, step):
        sl = slice(start, start + step)
        f, _, _, err = _newton_chunk(mass, n[sl], u[sl], T[sl], grid)
        if np.any(~(err <= NEWTON_ACCEPT)):
            worst = int(np.nanargmax(np.where(np.isfinite(err), err, np.inf)))
            raise NonConvergenceError(
                f"moment matching failed in cell {start + worst} (residual {err[worst]:.3e}); "
                "the velocity grid does not resolve the target Maxwellian",
                residual=float(err[worst]),
            )
        out[sl] = f
    return out


def moment_matched_maxwellian(mass: float, target: SpeciesMoments, grid: VelocityGrid,
                              return_params: bool = False):
    """Maxwellian-shaped ``exp(a + b.v + c|v|^2)`` with exact discrete moments.

    With ``return_params`` also returns ``(a, b, c)`` in velocity coordinates.
    """
    n = np.array([target.n], dtype=float)
    u = target.u[None, :]
    T = np.array([target.T], dtype=float)
    _check_temperature(T)
    if not target.n > 0:
        raise DegenerateDensityError("moment matching needs a positive target density")
    f, params, s, err = _newton_chunk(mass, n, u, T, grid)
    if not err[0] <= NEWTON_ACCEPT:
        raise NonConvergenceError(
            f"moment matching failed (residual {err[0]:.3e}); "
            "the velocity grid does not resolve the target Maxwellian",
            residual=float(err[0]),
        )
    if not return_params:
        return f[0]
    a, b, c = params[0, 0], params[0, 1:4], params[0, 4]
    s0 = s[0]
    c_v = c / s0**2
    b_v = b / s0 - 2.0 * c_v * target.u
    a_v = a - b @ target.u / s0 + c_v * (target.u @ target.u)
    return f[0], (a_v, b_v, c_v)
