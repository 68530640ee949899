"""Space-dependent hybrid Boltzmann/BGK collision model and entropy diagnostics.

For every species pair and spatial cell a selector bit chooses between the
binary Boltzmann operator (1) and its consistent BGK approximation (0).
Distributions are passed per species as arrays of shape ``(cells, nodes_i)``;
species may live on different velocity grids.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .collision_bgk import coefficient_fields, lambda_coefficient, _check_frequency, _g_bar
from .collision_boltzmann import CollisionPair, KernelModel, boltzmann_pair
from .errors import ConfigurationError, InvalidStateError
from .grid import AngularQuadrature, VelocityGrid, build_angular_quadrature
from .moments import SpeciesParams, matched_maxwellian_fields, maxwellian_fields, moment_fields

__all__ = [
    "MixtureSpec",
    "SelectorField",
    "EntropyReport",
    "PairRelaxation",
    "bgk_relaxation",
    "collision_rhs",
    "hybrid_rhs",
    "pure_boltzmann_rhs",
    "pure_bgk_rhs",
    "h_functional",
    "entropy_flux",
    "entropy_production",
    "entropy_report",
    "scaling_matrix",
    "SCALINGS",
]

SCALINGS = ("uniform", "intra_dominant", "heavy_dominant", "unscaled")


def _pair_key(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i <= j else (j, i)


@dataclass(frozen=True, eq=False)
class MixtureSpec:
    """Species, kernels and collision numerics shared by all solvers.

    ``kernels`` and ``nu_multipliers`` are keyed by unordered pairs; missing
    entries fall back to ``default_kernel`` and 1.0.
    """

    species: tuple[SpeciesParams, ...]
    default_kernel: KernelModel = field(default_factory=lambda: KernelModel.maxwell_molecules(1.0 / (4.0 * np.pi)))
    kernels: dict = field(default_factory=dict)
    nu_multipliers: dict = field(default_factory=dict)
    matched: bool = True
    angular_order: int = 8
    deposit: str = "quadratic"
    prune: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "species", tuple(self.species))
        if not self.species:
            raise ConfigurationError("a mixture needs at least one species")
        S = len(self.species)
        for table in (self.kernels, self.nu_multipliers):
            for key in list(table):
                i, j = key
                if not (0 <= i < S and 0 <= j < S):
                    raise ConfigurationError(f"pair {key} references a species outside 0..{S - 1}")
        object.__setattr__(self, "kernels", {_pair_key(*k): v for k, v in self.kernels.items()})
        object.__setattr__(self, "nu_multipliers", {_pair_key(*k): float(v) for k, v in self.nu_multipliers.items()})
        for k, v in self.nu_multipliers.items():
            if not v >= 0.5:
                raise ConfigurationError(
                    f"nu multiplier {v} for pair {k} violates nu >= lambda n_j / 2")

    @property
    def n_species(self) -> int:
        return len(self.species)

    @property
    def masses(self) -> np.ndarray:
        return np.array([s.mass for s in self.species])

    def kernel(self, i: int, j: int) -> KernelModel:
        return self.kernels.get(_pair_key(i, j), self.default_kernel)

    def nu_multiplier(self, i: int, j: int) -> float:
        return self.nu_multipliers.get(_pair_key(i, j), 1.0)

    def pair(self, i: int, j: int) -> CollisionPair:
        return CollisionPair.from_masses(i, j, self.species[i].mass, self.species[j].mass)

    @cached_property
    def angular(self) -> AngularQuadrature:
        return build_angular_quadrature(self.angular_order)

    def unordered_pairs(self) -> list[tuple[int, int]]:
        S = self.n_species
        return [(i, j) for i in range(S) for j in range(i, S)]


class SelectorField:
    """Per-cell Boltzmann (1) / BGK (0) bits for every unordered species pair."""

    def __init__(self, cells: int, n_species: int, default: int = 0):
        if cells < 1 or n_species < 1:
            raise ConfigurationError("selector needs at least one cell and one species")
        self.cells = int(cells)
        self.n_species = int(n_species)
        self.pairs = [(i, j) for i in range(n_species) for j in range(i, n_species)]
        self._index = {p: k for k, p in enumerate(self.pairs)}
        self.bits = np.full((self.cells, len(self.pairs)), _bit(default), dtype=np.uint8)

    @classmethod
    def uniform(cls, cells: int, n_species: int, bit: int) -> "SelectorField":
        return cls(cells, n_species, bit)

    @classmethod
    def from_pair_bits(cls, cells: int, n_species: int, pair_bits: dict) -> "SelectorField":
        sel = cls(cells, n_species)
        for (i, j), b in pair_bits.items():
            sel.set(i, j, b)
        return sel

    @classmethod
    def from_rules(cls, centers: np.ndarray, n_species: int, rules: Sequence, default: int = 0) -> "SelectorField":
        """Apply ``(x_min, x_max, i, j, bit)`` rules in order; later rules win.

        A rule covers the cells whose centers lie in ``[x_min, x_max)``.
        """
        centers = np.asarray(centers, dtype=float)
        sel = cls(centers.size, n_species, default)
        for x_lo, x_hi, i, j, b in rules:
            mask = (centers >= x_lo) & (centers < x_hi)
            sel.set(i, j, b, np.flatnonzero(mask))
        return sel

    def index(self, i: int, j: int) -> int:
        key = _pair_key(i, j)
        if key not in self._index:
            raise ConfigurationError(f"pair {(i, j)} references a species outside 0..{self.n_species - 1}")
        return self._index[key]

    def set(self, i: int, j: int, bit: int, cells=slice(None)) -> None:
        self.bits[cells, self.index(i, j)] = _bit(bit)

    def get(self, cell: int, i: int, j: int) -> int:
        return int(self.bits[cell, self.index(i, j)])

    def pair_bits(self, i: int, j: int) -> np.ndarray:
        return self.bits[:, self.index(i, j)]

    def matrix(self, cell: int) -> np.ndarray:
        S = self.n_species
        out = np.zeros((S, S), dtype=np.uint8)
        for (i, j), k in self._index.items():
            out[i, j] = out[j, i] = self.bits[cell, k]
        return out

    def copy(self) -> "SelectorField":
        other = SelectorField(self.cells, self.n_species)
        other.bits = self.bits.copy()
        return other

    def subset(self, cells) -> "SelectorField":
        other = SelectorField(1, self.n_species)
        other.bits = np.ascontiguousarray(self.bits[cells]).reshape(-1, len(self.pairs))
        other.cells = other.bits.shape[0]
        return other


def _bit(b) -> int:
    if b not in (0, 1, True, False):
        raise ConfigurationError(f"selector bits must be 0 or 1, got {b!r}")
    return int(b)


def scaling_matrix(spec: MixtureSpec, scaling: str, epsilon: float) -> np.ndarray:
    """Multiplier of pair (i, j) in species i's equation."""
    if scaling not in SCALINGS:
        raise ConfigurationError(f"unknown scaling {scaling!r}; use one of {SCALINGS}")
    if not epsilon > 0:
        raise ConfigurationError(f"epsilon must be positive, got {epsilon}")
    S = spec.n_species
    if scaling == "unscaled":
        return np.ones((S, S))
    if scaling == "uniform":
        return np.full((S, S), 1.0 / epsilon)
    if scaling == "intra_dominant":
        out = np.ones((S, S))
        np.fill_diagonal(out, 1.0 / epsilon)
        return out
    if S != 2:
        raise ConfigurationError("heavy_dominant scaling is defined for binary mixtures")
    heavy = int(np.argmax(spec.masses))
    light = 1 - heavy
    out = np.ones((2, 2))
    out[heavy, heavy] = 1.0 / epsilon
    out[light, light] = epsilon
    return out


def _fields(dists, spec: MixtureSpec, grids):
    return [moment_fields(f, g, s.mass, species=k)
            for k, (f, g, s) in enumerate(zip(dists, grids, spec.species))]


@dataclass
class PairRelaxation:
    """Frequency and attractor of the ordered BGK pair (i, j) in every cell."""

    nu: np.ndarray
    attractor: np.ndarray
    n: np.ndarray
    u: np.ndarray
    T: np.ndarray


def bgk_relaxation(i: int, j: int, fields, spec: MixtureSpec, grids, cells=None,
                   matched: bool | None = None) -> PairRelaxation:
    """Attractor Maxwellian M_ij and frequency nu_ij from species fields."""
    matched = spec.matched if matched is None else matched
    sl = slice(None) if cells is None else cells
    m_i, m_j = spec.species[i].mass, spec.species[j].mass
    n_i, u_i, T_i = (x[sl] for x in fields[i])
    n_j, u_j, T_j = (x[sl] for x in fields[j])
    du = u_i - u_j
    du2 = np.einsum("cd,cd->c", du, du)
    lam = lambda_coefficient(spec.kernel(i, j), _g_bar(T_i, T_j, du2, m_i, m_j))
    nu = spec.nu_multiplier(i, j) * lam * n_j
    _check_frequency(nu, lam, n_j)
    nu = np.broadcast_to(nu, n_i.shape).astype(float)
    if i == j:
        u_a, T_a = u_i, T_i
    else:
        a, b, gamma = coefficient_fields(m_i, m_j, n_j, lam, nu)
        u_a = (1.0 - a)[:, None] * u_i + a[:, None] * u_j
        T_a = (1.0 - b) * T_i + b * T_j + gamma * du2
        if np.any(~(T_a > 0)):
            raise InvalidStateError(f"auxiliary temperature of pair {(i, j)} is not positive")
    build = matched_maxwellian_fields if matched else maxwellian_fields
    attractor = build(m_i, n_i, u_a, T_a, grids[i])
    return PairRelaxation(nu, attractor, n_i, u_a, T_a)


def _pair_terms(dists, selector_bits, spec: MixtureSpec, grids, ang, fields):
    """Q_ij for every ordered pair, shape ``(cells, nodes_i)``.

    Bit 0 selects BGK, 1 Boltzmann; any other value leaves the term zero.
    """
    S = spec.n_species
    C = dists[0].shape[0]
    terms = {}
    for i, j in spec.unordered_pairs():
        bits = selector_bits[(i, j)]
        q_ij = np.zeros_like(dists[i])
        q_ji = q_ij if i == j else np.zeros_like(dists[j])
        bgk_cells = np.flatnonzero(bits == 0)
        if bgk_cells.size:
            sub = bgk_cells if bgk_cells.size < C else None
            for a, b, out in ((i, j, q_ij), (j, i, q_ji)) if i != j else ((i, i, q_ij),):
                rel = bgk_relaxation(a, b, fields, spec, grids, sub)
                f_a = dists[a] if sub is None else dists[a][bgk_cells]
                out[bgk_cells] = rel.nu[:, None] * (rel.attractor - f_a)
        pair = spec.pair(i, j)
        kernel = spec.kernel(i, j)
        for c in np.flatnonzero(bits == 1):
            qa, qb = boltzmann_pair(dists[i][c], dists[j][c], pair, kernel, grids[i], grids[j],
                                    ang, spec.deposit, spec.prune)
            q_ij[c] = qa
            if i != j:
                q_ji[c] = qb
        terms[(i, j)] = q_ij
        terms[(j, i)] = q_ji
    return terms


def _selector_bits(selector, spec: MixtureSpec, cells: int) -> dict:
    S = spec.n_species
    if isinstance(selector, SelectorField):
        if selector.n_species != S or selector.cells != cells:
            raise ConfigurationError(
                f"selector is {selector.cells} cells x {selector.n_species} species, state is {cells} x {S}")
        return {p: selector.pair_bits(*p) for p in spec.unordered_pairs()}
    mat = np.asarray(selector)
    if mat.shape != (S, S) or np.any(mat != mat.T):
        raise ConfigurationError("a per-cell selector must be a symmetric species x species 0/1 matrix")
    return {(i, j): np.full(cells, _bit(int(mat[i, j])), dtype=np.uint8) for i, j in spec.unordered_pairs()}


def _as_cells(dists, grids):
    out = []
    for f, g in zip(dists, grids):
        f = np.asarray(f, dtype=float)
        g.check_values(f)
        out.append(f.reshape(-1, g.size))
    return out


def _grids(grids, S):
    if isinstance(grids, VelocityGrid):
        return [grids] * S
    grids = list(grids)
    if len(grids) != S:
        raise ConfigurationError(f"need {S} velocity grids, got {len(grids)}")
    return grids


def collision_rhs(dists, selector, spec: MixtureSpec, grids, ang: AngularQuadrature | None = None,
                  pair_scale: np.ndarray | None = None, return_terms: bool = False):
    """Hybrid collision right-hand side for all cells.

    ``dists[i]`` has shape ``(cells, nodes_i)``; ``selector`` is a
    ``SelectorField`` or a symmetric (S, S) bit matrix applied to every cell.
    ``pair_scale[i, j]`` multiplies the (i, j) term of species i.
    """
    S = spec.n_species
    if len(dists) != S:
        raise ConfigurationError(f"state has {len(dists)} species, mixture has {S}")
    grids = _grids(grids, S)
    dists = _as_cells(dists, grids)
    ang = spec.angular if ang is None else ang
    C = dists[0].shape[0]
    bits = _selector_bits(selector, spec, C)
    fields = _fields(dists, spec, grids)
    terms = _pair_terms(dists, bits, spec, grids, ang, fields)
    scale = np.ones((S, S)) if pair_scale is None else np.asarray(pair_scale, dtype=float)
    rhs = []
    for i in range(S):
        acc = np.zeros_like(dists[i])
        for j in range(S):
            acc = acc + scale[i, j] * terms[(i, j)]
        rhs.append(acc)
    return (rhs, terms) if return_terms else rhs


def hybrid_rhs(state, selector, spec: MixtureSpec, grid, ang: AngularQuadrature | None = None):
    """Per-species hybrid collision values at a single cell."""
    S = spec.n_species
    grids = _grids(grid, S)
    if isinstance(selector, SelectorField):
        if selector.cells != 1:
            raise ConfigurationError("hybrid_rhs takes the selector of a single cell")
    rhs = collision_rhs([np.asarray(f)[None, :] for f in state], selector, spec, grids, ang)
    return [r[0] for r in rhs]


def pure_boltzmann_rhs(state, spec: MixtureSpec, grid, ang: AngularQuadrature | None = None):
    """Sum of binary Boltzmann operators at one cell (reference path)."""
    S = spec.n_species
    grids = _grids(grid, S)
    ang = spec.angular if ang is None else ang
    # each unordered pair is swept once, in canonical order, so Q_ij and Q_ji
    # come from the same sum
    q = {}
    for i, j in spec.unordered_pairs():
        q[(i, j)], q[(j, i)] = boltzmann_pair(state[i], state[j], spec.pair(i, j), spec.kernel(i, j),
                                              grids[i], grids[j], ang, spec.deposit, spec.prune)
    out = []
    for i in range(S):
        acc = np.zeros(grids[i].size)
        for j in range(S):
            acc = acc + 1.0 * q[(i, j)]
        out.append(acc)
    return out


def pure_bgk_rhs(state, spec: MixtureSpec, grid):
    """Sum of consistent BGK operators at one cell (reference path)."""
    S = spec.n_species
    grids = _grids(grid, S)
    dists = _as_cells([np.asarray(f)[None, :] for f in state], grids)
    fields = _fields(dists, spec, grids)
    out = []
    for i in range(S):
        acc = np.zeros_like(dists[i])
        for j in range(S):
            rel = bgk_relaxation(i, j, fields, spec, grids)
            acc = acc + 1.0 * (rel.nu[:, None] * (rel.attractor - dists[i]))
        out.append(acc[0])
    return out


def _log(f, floor):
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        raise InvalidStateError("distribution has negative values")
    if floor is None:
        if np.any(f <= 0):
            raise InvalidStateError("entropy production needs strictly positive distributions")
        return np.log(f)
    return np.log(np.maximum(f, floor))


def _flogf(f):
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        raise InvalidStateError("distribution has negative values")
    out = np.zeros_like(f)
    pos = f > 0
    out[pos] = f[pos] * (np.log(f[pos]) - 1.0)
    return out


def h_functional(state, grid) -> float:
    grids = _grids(grid, len(state))
    return float(sum(g.cell_weight * _flogf(f).sum() for f, g in zip(state, grids)))


def entropy_flux(state, grid) -> float:
    grids = _grids(grid, len(state))
    return float(sum(g.cell_weight * (_flogf(f) @ g.nodes[:, 0]) for f, g in zip(state, grids)))


def entropy_production(state, selector, spec: MixtureSpec, grid, ang: AngularQuadrature | None = None,
                       floor: float | None = None, pair_scale=None) -> float:
    """Sum over pairs of <Q_ij, log f_i> at one cell.

    With ``floor`` the logarithm is taken of ``max(f, floor)``; otherwise any
    nonpositive value is an error.
    """
    S = spec.n_species
    grids = _grids(grid, S)
    logs = [_log(f, floor) for f in state]
    _, terms = collision_rhs([np.asarray(f)[None, :] for f in state], selector, spec, grids, ang,
                             pair_scale, return_terms=True)
    scale = np.ones((S, S)) if pair_scale is None else np.asarray(pair_scale)
    total = 0.0
    for i, j in spec.unordered_pairs():
        total += scale[i, j] * grids[i].cell_weight * (terms[(i, j)][0] @ logs[i])
        if i != j:
            total += scale[j, i] * grids[j].cell_weight * (terms[(j, i)][0] @ logs[j])
    return float(total)


@dataclass
class EntropyReport:
    h_value: float
    flux: np.ndarray
    production: np.ndarray
    violations: int


def entropy_report(dists, selector: SelectorField, spec: MixtureSpec, grids,
                   ang: AngularQuadrature | None = None, tolerance: float = 1e-8,
                   floor: float = 1e-300, pair_scale=None) -> EntropyReport:
    """Per-cell entropy diagnostics; ``h_value`` is the sum over cells."""
    S = spec.n_species
    grids = _grids(grids, S)
    dists = _as_cells(dists, grids)
    C = dists[0].shape[0]
    h = 0.0
    flux = np.empty(C)
    prod = np.empty(C)
    for c in range(C):
        cell = [f[c] for f in dists]
        h += h_functional(cell, grids)
        flux[c] = entropy_flux(cell, grids)
        prod[c] = entropy_production(cell, selector.subset([c]), spec, grids, ang, floor, pair_scale)
    return EntropyReport(h, flux, prod, int(np.sum(prod > tolerance)))
