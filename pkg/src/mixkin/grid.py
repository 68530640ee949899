"""Velocity and physical space discretizations.

The velocity space is a cell-centered uniform Cartesian lattice integrated
with the midpoint rule; physical space is a 1D slab of uniform cells.
Distributions over a velocity grid are stored flat in C order of the
``(ix, iy, iz)`` node indices.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "VelocityGrid",
    "AngularQuadrature",
    "SpatialGrid",
    "build_velocity_grid",
    "build_angular_quadrature",
    "build_spatial_grid",
    "default_velocity_bounds",
]


@dataclass(frozen=True, eq=False)
class VelocityGrid:
    bounds_min: np.ndarray
    bounds_max: np.ndarray
    points_per_axis: int

    @cached_property
    def spacing(self) -> np.ndarray:
        return (self.bounds_max - self.bounds_min) / self.points_per_axis

    @cached_property
    def cell_weight(self) -> float:
        return float(np.prod(self.spacing))

    @cached_property
    def axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        k = np.arange(self.points_per_axis) + 0.5
        return tuple(self.bounds_min[d] + k * self.spacing[d] for d in range(3))

    @cached_property
    def nodes(self) -> np.ndarray:
        """Node velocities, shape ``(N**3, 3)``."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        out = np.stack([m.ravel() for m in mesh], axis=1)
        out.setflags(write=False)
        return out

    @cached_property
    def speed_squared(self) -> np.ndarray:
        out = np.einsum("kd,kd->k", self.nodes, self.nodes)
        out.setflags(write=False)
        return out

    @property
    def size(self) -> int:
        return self.points_per_axis**3

    @property
    def shape(self) -> tuple[int, int, int]:
        n = self.points_per_axis
        return (n, n, n)

    @property
    def box_volume(self) -> float:
        return float(np.prod(self.bounds_max - self.bounds_min))

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.bounds_min + self.bounds_max)

    @property
    def max_abs_vx(self) -> float:
        return float(np.max(np.abs(self.axes[0])))

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Midpoint quadrature over the last axis of ``values``."""
        return values.sum(axis=-1) * self.cell_weight

    def check_values(self, values: np.ndarray, name: str = "distribution") -> None:
        if values.shape[-1] != self.size:
            raise ConfigurationError(
                f"{name} has {values.shape[-1]} velocity nodes, grid has {self.size}"
            )


def build_velocity_grid(bounds_min, bounds_max, points_per_axis: int) -> VelocityGrid:
    lo = np.asarray(bounds_min, dtype=float).reshape(-1)
    hi = np.asarray(bounds_max, dtype=float).reshape(-1)
    if lo.size == 1:
        lo = np.repeat(lo, 3)
    if hi.size == 1:
        hi = np.repeat(hi, 3)
    if lo.shape != (3,) or hi.shape != (3,):
        raise ConfigurationError("velocity bounds must be scalars or 3-vectors")
    if not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)):
        raise ConfigurationError("velocity bounds must be finite")
    if np.any(hi <= lo):
        raise ConfigurationError(f"bounds_max {hi} must exceed bounds_min {lo} componentwise")
    if int(points_per_axis) != points_per_axis or points_per_axis < 2:
        raise ConfigurationError(f"points_per_axis must be an integer >= 2, got {points_per_axis}")
    lo.setflags(write=False)
    hi.setflags(write=False)
    return VelocityGrid(lo, hi, int(points_per_axis))


def default_velocity_bounds(center, max_thermal_speed: float, max_drift: float,
                            width_factor: float = 6.0) -> tuple[np.ndarray, np.ndarray]:
    """Box centered at ``center`` with half-width ``width_factor * sqrt(T/m) + drift``."""
    c = np.asarray(center, dtype=float)
    half = width_factor * max_thermal_speed + max_drift
    return c - half, c + half


@dataclass(frozen=True, eq=False)
class AngularQuadrature:
    nodes: np.ndarray
    weights: np.ndarray
    order: int = field(default=0)

    @property
    def size(self) -> int:
        return len(self.weights)

    def integrate(self, values: np.ndarray) -> np.ndarray:
        return np.tensordot(values, self.weights, axes=([-1], [0]))


def build_angular_quadrature(order: int) -> AngularQuadrature:
    """Product rule: ``order`` Gauss-Legendre nodes in the polar cosine times
    ``order`` uniformly spaced azimuths. Exact for spherical polynomials of
    degree ``order - 1``."""
    if int(order) != order or order < 2:
        raise ConfigurationError(f"angular quadrature order must be an integer >= 2, got {order}")
    order = int(order)
    mu, w_mu = np.polynomial.legendre.leggauss(order)
    phi = 2.0 * np.pi * (np.arange(order) + 0.5) / order
    sin_t = np.sqrt(1.0 - mu * mu)
    nodes = np.empty((order * order, 3))
    nodes[:, 0] = np.outer(sin_t, np.cos(phi)).ravel()
    nodes[:, 1] = np.outer(sin_t, np.sin(phi)).ravel()
    nodes[:, 2] = np.repeat(mu, order)
    nodes /= np.linalg.norm(nodes, axis=1)[:, None]
    weights = np.repeat(w_mu, order) * (2.0 * np.pi / order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return AngularQuadrature(nodes, weights, order)


@dataclass(frozen=True)
class SpatialGrid:
    length: float
    cells: int

    @property
    def dx(self) -> float:
        return self.length / self.cells

    @cached_property
    def centers(self) -> np.ndarray:
        out = (np.arange(self.cells) + 0.5) * self.dx
        out.setflags(write=False)
        return out


def build_spatial_grid(length: float, cells: int) -> SpatialGrid:
    if not np.isfinite(length) or length <= 0:
        raise ConfigurationError(f"spatial length must be positive, got {length}")
    if int(cells) != cells or cells < 1:
        raise ConfigurationError(f"cell count must be a positive integer, got {cells}")
    return SpatialGrid(float(length), int(cells))
