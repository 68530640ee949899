"""Binary Boltzmann collision operator on discrete velocity grids.

The operator is evaluated by direct quadrature over pre-collision pairs and
angular nodes. Post-collision velocities generally fall between nodes; their
contribution is spread onto the surrounding nodes with a quadratic (default)
or trilinear interpolation stencil, see ``_kernels``. ``weak_form_moment``
evaluates the same integral along an independent path (gather with trilinear
interpolation of f) and serves as a cross-check.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from . import _kernels
from .errors import ConfigurationError
from .grid import AngularQuadrature, VelocityGrid

__all__ = [
    "KernelModel",
    "CollisionPair",
    "kernel_eval",
    "post_collision_velocities",
    "boltzmann_operator",
    "boltzmann_pair",
    "weak_form_moment",
    "DEPOSITS",
]

DEPOSITS = {"trilinear": _kernels.LINEAR, "quadratic": _kernels.QUADRATIC}


@dataclass(frozen=True)
class KernelModel:
    """Isotropic collision kernel sigma(|g|).

    ``variant`` is ``"maxwell"`` (sigma = strength) or ``"hard_sphere"``
    (sigma = strength * |g|).
    """

    variant: str
    strength: float

    def __post_init__(self):
        if self.variant not in ("maxwell", "hard_sphere"):
            raise ConfigurationError(f"unknown kernel variant {self.variant!r}")
        if not np.isfinite(self.strength) or self.strength < 0:
            raise ConfigurationError(f"kernel strength must be >= 0, got {self.strength}")

    @classmethod
    def maxwell_molecules(cls, strength: float) -> "KernelModel":
        return cls("maxwell", float(strength))

    @classmethod
    def hard_sphere(cls, diameter_coeff: float) -> "KernelModel":
        return cls("hard_sphere", float(diameter_coeff))

    @property
    def code(self) -> int:
        return 0 if self.variant == "maxwell" else 1

    def __call__(self, g_mod):
        return kernel_eval(self, g_mod)


def kernel_eval(model: KernelModel, g_mod):
    g_mod = np.asarray(g_mod, dtype=float)
    if model.variant == "maxwell":
        out = np.full_like(g_mod, model.strength)
    else:
        out = model.strength * g_mod
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class CollisionPair:
    species_i: int
    species_j: int
    alpha_ij: float
    alpha_ji: float

    @classmethod
    def from_masses(cls, i: int, j: int, m_i: float, m_j: float) -> "CollisionPair":
        M = m_i + m_j
        return cls(i, j, m_i / M, m_j / M)

    @property
    def same_species(self) -> bool:
        return self.species_i == self.species_j


def post_collision_velocities(v, w, omega, pair: CollisionPair):
    """Elastic post-collision velocities; broadcasts over leading axes."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    omega = np.asarray(omega, dtype=float)
    g = np.linalg.norm(v - w, axis=-1)[..., None]
    c = pair.alpha_ij * v + pair.alpha_ji * w
    return c + pair.alpha_ji * g * omega, c - pair.alpha_ij * g * omega


def _grid_args(grid: VelocityGrid):
    return (np.ascontiguousarray(grid.bounds_min, dtype=float),
            np.ascontiguousarray(grid.spacing, dtype=float),
            grid.points_per_axis)


def _check(f, grid: VelocityGrid, ang: AngularQuadrature, deposit: str):
    f = np.ascontiguousarray(f, dtype=float)
    if f.ndim != 1:
        raise ConfigurationError("collision operators act on one cell at a time")
    grid.check_values(f)
    if ang.nodes.ndim != 2 or ang.nodes.shape[1] != 3 or ang.nodes.shape[0] != ang.weights.shape[0]:
        raise ConfigurationError("angular quadrature nodes and weights do not match")
    if deposit not in DEPOSITS:
        raise ConfigurationError(f"unknown deposit stencil {deposit!r}; use one of {sorted(DEPOSITS)}")
    if deposit == "quadratic" and grid.points_per_axis < 3:
        raise ConfigurationError("quadratic deposit needs at least 3 points per axis")
    return f


def _sweep(f_i, f_j, pair, kernel, grid_i, grid_j, ang, deposit, do_i, do_j, prune):
    same = pair.same_species
    f_i = _check(f_i, grid_i, ang, deposit)
    f_j = f_i if same else _check(f_j, grid_j, ang, deposit)
    lo_i, h_i, n_i = _grid_args(grid_i)
    lo_j, h_j, n_j = _grid_args(grid_j)
    if same:
        scale_i = scale_j = 0.5 * grid_i.cell_weight
        do_i = do_j = True
    else:
        scale_i, scale_j = grid_j.cell_weight, grid_i.cell_weight
    return _kernels.collision_sweep(
        f_i, f_j, lo_i, h_i, n_i, lo_j, h_j, n_j,
        np.ascontiguousarray(ang.nodes), np.ascontiguousarray(ang.weights),
        pair.alpha_ij, pair.alpha_ji, kernel.code, kernel.strength,
        scale_i, scale_j, do_i, do_j, same, DEPOSITS[deposit], prune,
    )


def _conservative_repair(q, f, grids, weights_m, shift):
    """Add ``f_s * (mu0_s + mu_p . m_s v + mu_e m_s |v|^2 / 2)`` to each ``q_s``.

    The multipliers restore zero mass per species and zero total momentum
    and energy. The correction is proportional to f, so it never creates
    negative values where f vanishes.
    """
    S = len(q)
    dim = S + 4
    A = np.zeros((dim, dim))
    d = np.zeros(dim)
    basis = []
    for s in range(S):
        g = grids[s]
        v = g.nodes - shift
        phi = np.zeros((g.size, dim))
        phi[:, s] = 1.0
        phi[:, S:S + 3] = weights_m[s] * v
        phi[:, S + 3] = 0.5 * weights_m[s] * np.einsum("kd,kd->k", v, v)
        wf = g.cell_weight * f[s]
        A += phi.T @ (wf[:, None] * phi)
        d += g.cell_weight * (q[s] @ phi)
        basis.append(phi)
    scale = np.sqrt(np.maximum(np.diag(A), 1e-300))
    try:
        mu = np.linalg.solve(A / np.outer(scale, scale), -d / scale) / scale
    except np.linalg.LinAlgError:
        return q
    return [q[s] + f[s] * (basis[s] @ mu) for s in range(S)]


def _finish(gain, loss, f, grids, pair, deposit):
    if deposit == "trilinear":
        return [g - l for g, l in zip(gain, loss)]
    q = [np.maximum(g, 0.0) - l for g, l in zip(gain, loss)]
    masses = [pair.alpha_ij] if pair.same_species else [pair.alpha_ij, pair.alpha_ji]
    shift = 0.5 * (grids[0].center + grids[-1].center)
    return _conservative_repair(q, f, grids, masses, shift)


def boltzmann_pair(f_i, f_j, pair: CollisionPair, kernel: KernelModel, grid_i: VelocityGrid,
                   grid_j: VelocityGrid, ang: AngularQuadrature, deposit: str = "quadratic",
                   prune: float = 0.0):
    """``(Q_ij(f_i, f_j), Q_ji(f_j, f_i))`` from a single sweep.

    With the quadratic stencil, negative gain values (from negative stencil
    weights in sparsely populated regions) are dropped and the conservation
    laws are restored by ``_conservative_repair``. The trilinear stencil is
    used as is. For the same species both entries are Q_ii.
    """
    gi, li, gj, lj = _sweep(f_i, f_j, pair, kernel, grid_i, grid_j, ang, deposit, True, True, prune)
    red = _kernels.reduce_chunks
    if pair.same_species:
        f = np.asarray(f_i, dtype=float)
        (q,) = _finish([red(gi)], [red(li)], [f], [grid_i], pair, deposit)
        return q, q
    f = [np.asarray(f_i, dtype=float), np.asarray(f_j, dtype=float)]
    q_i, q_j = _finish([red(gi), red(gj)], [red(li), red(lj)], f, [grid_i, grid_j], pair, deposit)
    return q_i, q_j


def boltzmann_operator(f_i, f_j, pair: CollisionPair, kernel: KernelModel, grid: VelocityGrid,
                       ang: AngularQuadrature, grid_j: VelocityGrid | None = None,
                       deposit: str = "quadratic", prune: float = 0.0) -> np.ndarray:
    """Q_ij(f_i, f_j) at every node of ``grid`` (the grid of species i).

    For ``pair.same_species`` the operator is Q_ii(f_i, f_i) and ``f_j`` is
    ignored. ``prune`` drops pre-collision pairs whose weight is below
    ``prune * max f_i * max f_j``; dropped pairs leave both gain and loss, so
    conservation is unaffected.
    """
    grid_j = grid if grid_j is None else grid_j
    return boltzmann_pair(f_i, f_j, pair, kernel, grid, grid_j, ang, deposit, prune)[0]


def _interpolator(f, grid: VelocityGrid):
    return RegularGridInterpolator(grid.axes, np.asarray(f, dtype=float).reshape(grid.shape),
                                   method="linear", bounds_error=False, fill_value=0.0)


def weak_form_moment(f_i, f_j, phi, pair: CollisionPair, kernel: KernelModel, grid: VelocityGrid,
                     ang: AngularQuadrature, grid_j: VelocityGrid | None = None,
                     block: int = 32) -> float:
    """Weak form of Q_ij tested against ``phi`` by direct summation.

    ``phi`` is a callable on velocity arrays of shape ``(..., 3)``. Off-grid
    values of f come from trilinear interpolation with zero extension.
    """
    grid_j = grid if grid_j is None else grid_j
    f_i = np.asarray(f_i, dtype=float)
    f_j = f_i if pair.same_species else np.asarray(f_j, dtype=float)
    grid.check_values(f_i)
    grid_j.check_values(f_j)
    interp_i = _interpolator(f_i, grid)
    interp_j = _interpolator(f_j, grid_j)
    W = grid_j.nodes
    om = ang.nodes
    total = 0.0
    for start in range(0, grid.size, block):
        V = grid.nodes[start:start + block]
        fa = f_i[start:start + block]
        g = np.linalg.norm(V[:, None, :] - W[None, :, :], axis=-1)
        sig = np.asarray(kernel_eval(kernel, g))
        c = pair.alpha_ij * V[:, None, :] + pair.alpha_ji * W[None, :, :]
        vp = c[:, :, None, :] + pair.alpha_ji * g[:, :, None, None] * om[None, None, :, :]
        wp = c[:, :, None, :] - pair.alpha_ij * g[:, :, None, None] * om[None, None, :, :]
        post = interp_i(vp) * interp_j(wp)
        pre = (fa[:, None] * f_j[None, :])[:, :, None]
        dphi = phi(vp) - phi(V)[:, None, None]
        total += np.einsum("abk,ab,k->", dphi * (post - pre), sig, ang.weights)
    return -0.5 * total * grid.cell_weight * grid_j.cell_weight
