"""Finite-volume solvers for the Euler-level limits of the kinetic model.

* single-temperature (ST) mixture Euler equations: species densities, one
  velocity and one temperature;
* multi-temperature (MT) system: per-species Euler equations coupled by the
  closed-form momentum and energy exchange rates;
* kinetic-fluid (KF) system: Euler equations for the heavy species and a
  kinetic equation for the light one, which collides with the local
  Maxwellian of the heavy gas.

Fluxes are local Lax-Friedrichs (Rusanov) in x with the full 3-vector
momentum carried. Time stepping is SSP-RK2 (Heun); an optional minmod
reconstruction makes the spatial discretization second order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .collision_boltzmann import boltzmann_pair
from .collision_bgk import _g_bar, coefficient_fields, lambda_coefficient
from .errors import AdmissibilityError, ConfigurationError, PositivityError, StepSizeError
from .grid import VelocityGrid
from .hybrid import MixtureSpec
from .moments import matched_maxwellian_fields, maxwellian_fields, moment_fields
from .solver import _upwind_increment

__all__ = [
    "GAMMA",
    "EulerStateST",
    "EulerStateMT",
    "KineticFluidState",
    "rusanov_flux",
    "euler_single_T_step",
    "euler_multi_T_step",
    "kinetic_fluid_step",
    "exchange_sources",
    "st_dt",
    "mt_dt",
    "kf_dt",
]

GAMMA = 5.0 / 3.0
MODELS = ("ST", "MT-species", "KF-heavy")


def _ghost(U: np.ndarray, width: int, boundary: str) -> np.ndarray:
    if boundary == "periodic":
        return np.concatenate([U[-width:], U, U[:width]], axis=0)
    if boundary == "copy":
        return np.concatenate([np.repeat(U[:1], width, 0), U, np.repeat(U[-1:], width, 0)], axis=0)
    raise ConfigurationError(f"unknown boundary {boundary!r}")


def _minmod(a, b):
    return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


# conserved layout for one fluid: [densities..., mx, my, mz, E]

def _primitives(U: np.ndarray, masses: np.ndarray, cells_offset: int = 0):
    S = masses.size
    n_s = U[:, :S]
    n = n_s.sum(axis=1)
    rho = n_s @ masses
    mom = U[:, S:S + 3]
    E = U[:, S + 3]
    u = mom / rho[:, None]
    internal = E - 0.5 * np.einsum("cd,cd->c", mom, u)
    bad = ~((n_s > 0).all(axis=1) & (internal > 0) & np.isfinite(internal))
    if np.any(bad):
        c = int(np.flatnonzero(bad)[0]) - cells_offset
        raise AdmissibilityError(f"inadmissible fluid state in cell {c} "
                                 f"(densities {n_s[c + cells_offset]}, internal energy {internal[c + cells_offset]:.3e})",
                                 cell=c)
    p = (GAMMA - 1.0) * internal
    T = p / n
    c_s = np.sqrt(GAMMA * p / rho)
    return n, rho, u, p, T, c_s


def _physical_flux(U, masses, prims):
    S = masses.size
    n, rho, u, p, T, c_s = prims
    ux = u[:, 0]
    F = np.empty_like(U)
    F[:, :S] = U[:, :S] * ux[:, None]
    F[:, S:S + 3] = U[:, S:S + 3] * ux[:, None]
    F[:, S] += p
    F[:, S + 3] = (U[:, S + 3] + p) * ux
    return F


def _rusanov(UL, UR, masses, offset=0):
    pl = _primitives(UL, masses, offset)
    pr = _primitives(UR, masses, offset)
    FL = _physical_flux(UL, masses, pl)
    FR = _physical_flux(UR, masses, pr)
    s = np.maximum(np.abs(pl[2][:, 0]) + pl[5], np.abs(pr[2][:, 0]) + pr[5])
    return 0.5 * (FL + FR) - 0.5 * s[:, None] * (UR - UL)


def rusanov_flux(left, right, model: str, masses) -> np.ndarray:
    """Local Lax-Friedrichs flux between two conserved vectors.

    ``model`` ``"ST"`` takes ``[n_1, ..., n_S, mx, my, mz, E]`` with the
    species masses; ``"MT-species"`` and ``"KF-heavy"`` take
    ``[n, mx, my, mz, E]`` of a single species.
    """
    if model not in MODELS:
        raise ConfigurationError(f"unknown flux model {model!r}; use one of {MODELS}")
    masses = np.atleast_1d(np.asarray(masses, dtype=float))
    if model != "ST" and masses.size != 1:
        raise ConfigurationError(f"{model} flux takes a single species mass")
    UL = np.asarray(left, dtype=float)[None, :]
    UR = np.asarray(right, dtype=float)[None, :]
    if UL.shape[1] != masses.size + 4 or UR.shape != UL.shape:
        raise ConfigurationError("conserved vectors do not match the species count")
    return _rusanov(UL, UR, masses)[0]


def _divergence(U, masses, dx, boundary, limiter):
    """-(F_{c+1/2} - F_{c-1/2})/dx and the largest signal speed."""
    if limiter:
        G = _ghost(U, 2, boundary)
        slope = _minmod(G[1:-1] - G[:-2], G[2:] - G[1:-1])
        cells = G[1:-1]
        UL = cells[:-1] + 0.5 * slope[:-1]
        UR = cells[1:] - 0.5 * slope[1:]
        # fall back to first order where the reconstruction is inadmissible
        for side, base in ((UL, cells[:-1]), (UR, cells[1:])):
            bad = ~_admissible(side, masses)
            side[bad] = base[bad]
        F = _rusanov(UL, UR, masses, 1)
    else:
        G = _ghost(U, 1, boundary)
        F = _rusanov(G[:-1], G[1:], masses, 1)
    return -(F[1:] - F[:-1]) / dx


def _admissible(U, masses):
    S = masses.size
    n_s = U[:, :S]
    rho = n_s @ masses
    with np.errstate(divide="ignore", invalid="ignore"):
        internal = U[:, S + 3] - 0.5 * np.einsum("cd,cd->c", U[:, S:S + 3], U[:, S:S + 3]) / rho
    return (n_s > 0).all(axis=1) & (internal > 0)


def _signal_speed(U, masses):
    n, rho, u, p, T, c_s = _primitives(U, masses)
    return float(np.max(np.abs(u[:, 0]) + c_s))


def _check(U, masses):
    _primitives(U, masses)
    return U


@dataclass
class EulerStateST:
    """Single-temperature mixture: ``n (S, C)``, ``mom (C, 3)``, ``E (C,)``."""

    n: np.ndarray
    mom: np.ndarray
    E: np.ndarray
    masses: np.ndarray

    @classmethod
    def from_primitive(cls, masses, n, u, T) -> "EulerStateST":
        masses = np.asarray(masses, dtype=float)
        n = np.atleast_2d(np.asarray(n, dtype=float))
        u = np.asarray(u, dtype=float).reshape(-1, 3)
        T = np.asarray(T, dtype=float).reshape(-1)
        rho = masses @ n
        mom = rho[:, None] * u
        E = 0.5 * rho * np.einsum("cd,cd->c", u, u) + 1.5 * n.sum(axis=0) * T
        return cls(n, mom, E, masses)

    def pack(self) -> np.ndarray:
        return np.column_stack([self.n.T, self.mom, self.E])

    @classmethod
    def unpack(cls, U, masses) -> "EulerStateST":
        S = masses.size
        return cls(U[:, :S].T.copy(), U[:, S:S + 3].copy(), U[:, S + 3].copy(), masses)

    def primitives(self):
        """``(n_species (S, C), u (C, 3), T (C,))``."""
        n, rho, u, p, T, _ = _primitives(self.pack(), self.masses)
        return self.n.copy(), u, T


def euler_single_T_step(state: EulerStateST, dt: float, dx: float, boundary: str = "periodic",
                        limiter: bool = False, cfl: float = 1.0) -> EulerStateST:
    masses = np.asarray(state.masses, dtype=float)
    U = state.pack()
    s = _signal_speed(U, masses)
    if dt * s > cfl * dx * (1 + 1e-12):
        raise StepSizeError(f"Euler step dt={dt:.4g} exceeds the CFL bound {cfl * dx / s:.4g}")
    U1 = U + dt * _divergence(U, masses, dx, boundary, limiter)
    _check(U1, masses)
    U2 = 0.5 * U + 0.5 * (U1 + dt * _divergence(U1, masses, dx, boundary, limiter))
    _check(U2, masses)
    return EulerStateST.unpack(U2, masses)


def st_dt(state: EulerStateST, dx: float, cfl: float) -> float:
    return cfl * dx / _signal_speed(state.pack(), np.asarray(state.masses, dtype=float))


# ---------------------------------------------------------------- multi-temperature

@dataclass
class EulerStateMT:
    """Per-species Euler fields: ``n (S, C)``, ``mom (S, C, 3)``, ``E (S, C)``."""

    n: np.ndarray
    mom: np.ndarray
    E: np.ndarray
    masses: np.ndarray

    @classmethod
    def from_primitive(cls, masses, n, u, T) -> "EulerStateMT":
        masses = np.asarray(masses, dtype=float)
        n = np.atleast_2d(np.asarray(n, dtype=float))
        u = np.asarray(u, dtype=float).reshape(n.shape + (3,))
        T = np.asarray(T, dtype=float).reshape(n.shape)
        rho = masses[:, None] * n
        mom = rho[..., None] * u
        E = 0.5 * rho * np.einsum("scd,scd->sc", u, u) + 1.5 * n * T
        return cls(n, mom, E, masses)

    def species_block(self, s: int) -> np.ndarray:
        return np.column_stack([self.n[s], self.mom[s], self.E[s]])

    def primitives(self):
        """``(n (S, C), u (S, C, 3), T (S, C))``."""
        rho = self.masses[:, None] * self.n
        u = self.mom / rho[..., None]
        T = (self.E - 0.5 * rho * np.einsum("scd,scd->sc", u, u)) / (1.5 * self.n)
        return self.n.copy(), u, T


def exchange_sources(masses, kernel, n1, u1, T1, n2, u2, T2):
    """Closed-form (R_12, S_12) per cell, with lambda evaluated at g_bar."""
    m1, m2 = masses
    du = u2 - u1
    g = _g_bar(T1, T2, np.einsum("cd,cd->c", du, du), m1, m2)
    lam = lambda_coefficient(kernel, g)
    M = m1 + m2
    nn = n1 * n2
    R = (lam * (m1 * m2 / M) * nn)[:, None] * du
    S = lam * (m1 * m2 / M**2) * nn * (3.0 * (T2 - T1) + np.einsum("cd,cd->c", m1 * u1 + m2 * u2, du))
    return R, S


def _source_rate(masses, kernel, n, u, T):
    """Relaxation rate of the exchange terms, used for the explicit bound."""
    m1, m2 = masses
    du = u[1] - u[0]
    g = _g_bar(T[0], T[1], np.einsum("cd,cd->c", du, du), m1, m2)
    lam = np.broadcast_to(lambda_coefficient(kernel, g), n[0].shape)
    return float(np.max(lam * (n[0] + n[1])))


def _mt_rhs(blocks, masses, kernel, dx, boundary, limiter, transport=True):
    S = len(blocks)
    incs = []
    prims = []
    for s in range(S):
        m = masses[s:s + 1]
        incs.append(_divergence(blocks[s], m, dx, boundary, limiter) if transport
                    else np.zeros_like(blocks[s]))
        n, rho, u, p, T, _ = _primitives(blocks[s], m)
        prims.append((n, u, T))
    R, Sx = exchange_sources(masses, kernel, *prims[0], *prims[1])
    incs[0][:, 1:4] += R
    incs[0][:, 4] += Sx
    incs[1][:, 1:4] -= R
    incs[1][:, 4] -= Sx
    return incs


def euler_multi_T_step(state: EulerStateMT, dt: float, spec: MixtureSpec, dx: float = 1.0,
                       boundary: str = "periodic", limiter: bool = False, transport: bool = True,
                       cfl: float = 1.0) -> EulerStateMT:
    """One SSP-RK2 step of the two-species multi-temperature system.

    Sources are the closed-form exchange rates and are exactly antisymmetric.
    ``transport=False`` integrates the space-uniform ODE system only.
    """
    masses = np.asarray(state.masses, dtype=float)
    if masses.size != 2:
        raise ConfigurationError("the multi-temperature solver handles binary mixtures")
    kernel = spec.kernel(0, 1)
    n, u, T = state.primitives()
    rate = _source_rate(masses, kernel, n, u, T)
    if dt * rate > 0.5 * (1 + 1e-12):
        raise StepSizeError(f"explicit sources need dt <= {0.5 / rate:.4g}, got {dt:.4g}")
    blocks = [state.species_block(s) for s in range(2)]
    if transport:
        s_max = max(_signal_speed(b, masses[s:s + 1]) for s, b in enumerate(blocks))
        if dt * s_max > cfl * dx * (1 + 1e-12):
            raise StepSizeError(f"Euler step dt={dt:.4g} exceeds the CFL bound {cfl * dx / s_max:.4g}")
    k1 = _mt_rhs(blocks, masses, kernel, dx, boundary, limiter, transport)
    stage = [b + dt * k for b, k in zip(blocks, k1)]
    for s, b in enumerate(stage):
        _check(b, masses[s:s + 1])
    k2 = _mt_rhs(stage, masses, kernel, dx, boundary, limiter, transport)
    new = [0.5 * b + 0.5 * (st + dt * k) for b, st, k in zip(blocks, stage, k2)]
    for s, b in enumerate(new):
        _check(b, masses[s:s + 1])
    return EulerStateMT(np.stack([b[:, 0] for b in new]), np.stack([b[:, 1:4] for b in new]),
                        np.stack([b[:, 4] for b in new]), masses)


def mt_dt(state: EulerStateMT, spec: MixtureSpec, dx: float, cfl: float, transport: bool = True) -> float:
    masses = np.asarray(state.masses, dtype=float)
    n, u, T = state.primitives()
    bounds = [0.5 / max(_source_rate(masses, spec.kernel(0, 1), n, u, T), 1e-300)]
    if transport:
        s_max = max(_signal_speed(state.species_block(s), masses[s:s + 1]) for s in range(2))
        bounds.append(cfl * dx / s_max)
    return min(bounds)


# ---------------------------------------------------------------- kinetic-fluid

@dataclass
class KineticFluidState:
    """Heavy Euler fields ``n (C,)``, ``mom (C, 3)``, ``E (C,)`` and light ``f (C, nodes)``."""

    n: np.ndarray
    mom: np.ndarray
    E: np.ndarray
    f: np.ndarray

    def heavy_block(self) -> np.ndarray:
        return np.column_stack([self.n, self.mom, self.E])

    def heavy_primitives(self, heavy_mass: float):
        rho = heavy_mass * self.n
        u = self.mom / rho[:, None]
        T = (self.E - 0.5 * rho * np.einsum("cd,cd->c", u, u)) / (1.5 * self.n)
        return self.n.copy(), u, T


def _kf_roles(spec: MixtureSpec):
    if spec.n_species != 2:
        raise ConfigurationError("the kinetic-fluid solver handles binary mixtures")
    heavy = int(np.argmax(spec.masses))
    return heavy, 1 - heavy


def _kf_rhs(U, f, spec, collision, light_grid, heavy_grid, dx, boundary, limiter, transport):
    heavy, light = _kf_roles(spec)
    m_h, m_l = spec.species[heavy].mass, spec.species[light].mass
    mh = np.array([m_h])
    inc_U = _divergence(U, mh, dx, boundary, limiter) if transport else np.zeros_like(U)
    inc_f = _upwind_increment(f, light_grid.nodes[:, 0], dx, boundary, limiter) if transport else np.zeros_like(f)
    n_h, _, u_h, _, T_h, _ = _primitives(U, mh)
    n_l, u_l, T_l = moment_fields(f, light_grid, m_l, species=light)
    kernel = spec.kernel(0, 1)
    if collision == "bgk":
        du = u_l - u_h
        du2 = np.einsum("cd,cd->c", du, du)
        lam = np.broadcast_to(lambda_coefficient(kernel, _g_bar(T_l, T_h, du2, m_l, m_h)), n_l.shape)
        nu = spec.nu_multiplier(0, 1) * lam * n_h
        a, b, gamma = coefficient_fields(m_l, m_h, n_h, lam, nu)
        u_a = (1 - a)[:, None] * u_l + a[:, None] * u_h
        T_a = (1 - b) * T_l + b * T_h + gamma * du2
        build = matched_maxwellian_fields if spec.matched else maxwellian_fields
        M = build(m_l, n_l, u_a, T_a, light_grid)
        q = nu[:, None] * (M - f)
        # heavy sources are the exact negatives of the light exchange
        w = light_grid.cell_weight
        R_l = m_l * (q @ light_grid.nodes) * w
        S_l = 0.5 * m_l * (q @ light_grid.speed_squared) * w
    elif collision == "boltzmann":
        if heavy_grid is None:
            raise ConfigurationError("the Boltzmann coupling needs a heavy-species velocity grid")
        M_h = matched_maxwellian_fields(m_h, n_h, u_h, T_h, heavy_grid)
        pair = spec.pair(light, heavy)
        q = np.empty_like(f)
        for c in range(f.shape[0]):
            q[c], _ = boltzmann_pair(f[c], M_h[c], pair, kernel, light_grid, heavy_grid,
                                     spec.angular, spec.deposit, spec.prune)
        w = light_grid.cell_weight
        R_l = m_l * (q @ light_grid.nodes) * w
        S_l = 0.5 * m_l * (q @ light_grid.speed_squared) * w
    else:
        raise ConfigurationError(f"unknown light-heavy collision model {collision!r}")
    inc_U[:, 1:4] -= R_l
    inc_U[:, 4] -= S_l
    return inc_U, inc_f + q


def kinetic_fluid_step(state: KineticFluidState, dt: float, spec: MixtureSpec, collision: str,
                       light_grid: VelocityGrid, heavy_grid: VelocityGrid | None = None,
                       dx: float = 1.0, boundary: str = "periodic", limiter: bool = False,
                       transport: bool = True, cfl: float = 1.0) -> KineticFluidState:
    """One SSP-RK2 step of the coupled heavy-fluid / light-kinetic system.

    Both subsystems advance in lock-step stages. The heavy momentum and
    energy sources are the negatives of the light species' collisional gains,
    so the exchange is antisymmetric by construction; with matched BGK they
    coincide with the closed-form exchange rates.
    """
    heavy, light = _kf_roles(spec)
    mh = np.array([spec.species[heavy].mass])
    U = state.heavy_block()
    if transport:
        s_max = max(_signal_speed(U, mh), light_grid.max_abs_vx)
        if dt * s_max > cfl * dx * (1 + 1e-12):
            raise StepSizeError(f"kinetic-fluid step dt={dt:.4g} exceeds the CFL bound {cfl * dx / s_max:.4g}")
    args = (spec, collision, light_grid, heavy_grid, dx, boundary, limiter, transport)
    kU, kf = _kf_rhs(U, state.f, *args)
    U1, f1 = U + dt * kU, state.f + dt * kf
    _check(U1, mh)
    kU2, kf2 = _kf_rhs(U1, f1, *args)
    U2 = 0.5 * U + 0.5 * (U1 + dt * kU2)
    f2 = 0.5 * state.f + 0.5 * (f1 + dt * kf2)
    _check(U2, mh)
    if np.any(f2 < -1e-12 * f2.max()):
        raise PositivityError("light-species distribution lost positivity; reduce dt")
    f2 = np.maximum(f2, 0.0)
    return KineticFluidState(U2[:, 0].copy(), U2[:, 1:4].copy(), U2[:, 4].copy(), f2)


def kf_dt(state: KineticFluidState, spec: MixtureSpec, light_grid: VelocityGrid, dx: float,
          cfl: float, transport: bool = True) -> float:
    heavy, light = _kf_roles(spec)
    mh = np.array([spec.species[heavy].mass])
    n_h, u_h, T_h = state.heavy_primitives(mh[0])
    kernel = spec.kernel(0, 1)
    g = _g_bar(T_h, T_h, 0.0, mh[0], spec.species[light].mass)
    nu = np.max(spec.nu_multiplier(0, 1) * np.asarray(lambda_coefficient(kernel, g)) * n_h)
    bounds = [0.5 / max(nu, 1e-300)]
    if transport:
        bounds.append(cfl * dx / max(_signal_speed(state.heavy_block(), mh), light_grid.max_abs_vx))
    return min(bounds)
