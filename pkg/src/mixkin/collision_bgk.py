"""Consistent BGK relaxation operators for binary interactions in a mixture.

Each ordered pair (i, j) relaxes f_i toward a Maxwellian with auxiliary
parameters (n_ij, u_ij, T_ij) chosen so that the momentum and energy
exchange rates equal those of the Boltzmann operator for Maxwell molecules.
All coefficient helpers broadcast over numpy arrays, so the solvers can call
them with per-cell fields.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .errors import ConstraintViolationError, InvalidStateError
from .collision_boltzmann import KernelModel, kernel_eval
from .grid import VelocityGrid
from .moments import SpeciesMoments, matched_maxwellian_fields, maxwellian_fields

__all__ = [
    "BgkCoefficients",
    "AuxiliaryFields",
    "mean_relative_speed",
    "lambda_coefficient",
    "default_frequency",
    "bgk_coefficients",
    "auxiliary_fields",
    "bgk_operator",
    "exchange_rates_closed_form",
    "coefficient_fields",
]

FrequencyRule = Union[float, Callable[[float, float], float]]


def _g_bar(T_i, T_j, du2, m_i, m_j):
    return np.sqrt(3.0 * (T_i / m_i + T_j / m_j) + du2)


def mean_relative_speed(mom_i: SpeciesMoments, mom_j: SpeciesMoments, m_i: float, m_j: float) -> float:
    du = mom_i.u - mom_j.u
    return float(_g_bar(mom_i.T, mom_j.T, du @ du, m_i, m_j))


def lambda_coefficient(kernel: KernelModel, g_bar):
    """Momentum-transfer rate for an isotropic kernel: 4 pi sigma(g_bar)."""
    out = 4.0 * np.pi * np.asarray(kernel_eval(kernel, g_bar))
    return out if out.ndim else float(out)


def default_frequency(lambda_ij, n_j, safety: float = 1.0):
    nu = safety * np.asarray(lambda_ij) * np.asarray(n_j)
    _check_frequency(nu, lambda_ij, n_j)
    return nu if np.ndim(nu) else float(nu)


def _check_frequency(nu, lambda_ij, n_j):
    bound = 0.5 * np.asarray(lambda_ij) * np.asarray(n_j)
    if np.any(np.asarray(nu) < bound):
        raise ConstraintViolationError(
            f"relaxation frequency below lambda*n_j/2 (min nu - bound = {np.min(np.asarray(nu) - bound):.3e})"
        )


@dataclass(frozen=True)
class BgkCoefficients:
    a: float
    b: float
    gamma: float
    lam: float
    nu: float


@dataclass(frozen=True, eq=False)
class AuxiliaryFields:
    n: float
    u: np.ndarray
    T: float


def coefficient_fields(m_i, m_j, n_j, lam, nu):
    """(a, b, gamma) for an ordered pair; zero where nu vanishes."""
    lam = np.asarray(lam, dtype=float)
    nu = np.asarray(nu, dtype=float)
    M = m_i + m_j
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(nu > 0, lam * m_j * n_j / (nu * M), 0.0)
        # 2 m_j / M - a, written so that it is exactly 0 at nu = lam n_j / 2
        rest = np.where(nu > 0, m_j * (2.0 * nu - lam * n_j) / (nu * M), 0.0)
    b = 2.0 * a * m_i / M
    gamma = m_i * a * rest / 3.0
    return a, b, gamma


def _nu_from_rule(nu_rule, lam, n_j):
    if callable(nu_rule):
        nu = nu_rule(lam, n_j)
        _check_frequency(nu, lam, n_j)
        return nu
    return default_frequency(lam, n_j, 1.0 if nu_rule is None else float(nu_rule))


def bgk_coefficients(m_i: float, m_j: float, mom_i: SpeciesMoments, mom_j: SpeciesMoments,
                     kernel: KernelModel, nu_rule: FrequencyRule = 1.0) -> BgkCoefficients:
    """Coefficients of the ordered pair (i, j).

    ``nu_rule`` is a safety multiplier on ``lambda * n_j`` or a callable
    ``(lambda, n_j) -> nu``.
    """
    lam = lambda_coefficient(kernel, mean_relative_speed(mom_i, mom_j, m_i, m_j))
    nu = float(_nu_from_rule(nu_rule, lam, mom_j.n))
    a, b, gamma = coefficient_fields(m_i, m_j, mom_j.n, lam, nu)
    return BgkCoefficients(float(a), float(b), float(gamma), float(lam), nu)


def auxiliary_fields(coeffs: BgkCoefficients | None, mom_i: SpeciesMoments,
                     mom_j: SpeciesMoments) -> AuxiliaryFields:
    """Attractor parameters. ``coeffs=None`` selects the single-species case."""
    if coeffs is None:
        return AuxiliaryFields(mom_i.n, mom_i.u.copy(), mom_i.T)
    du = mom_i.u - mom_j.u
    u = (1.0 - coeffs.a) * mom_i.u + coeffs.a * mom_j.u
    T = (1.0 - coeffs.b) * mom_i.T + coeffs.b * mom_j.T + coeffs.gamma * (du @ du)
    if not T > 0:
        raise InvalidStateError(f"auxiliary temperature {T} is not positive")
    return AuxiliaryFields(mom_i.n, u, float(T))


def bgk_operator(f_i: np.ndarray, aux: AuxiliaryFields, m_i: float, nu_ij: float,
                 grid: VelocityGrid, matched: bool = True) -> np.ndarray:
    grid.check_values(np.asarray(f_i))
    build = matched_maxwellian_fields if matched else maxwellian_fields
    attractor = build(m_i, aux.n, aux.u, aux.T, grid)[0]
    return nu_ij * (attractor - f_i)


def exchange_rates_closed_form(m_1: float, m_2: float, mom_1: SpeciesMoments,
                               mom_2: SpeciesMoments, lambda_12: float):
    """Momentum and energy (1/2 m|v|^2) gained by species 1 from species 2."""
    M = m_1 + m_2
    nn = mom_1.n * mom_2.n
    du = mom_2.u - mom_1.u
    R = lambda_12 * (m_1 * m_2 / M) * nn * du
    S = lambda_12 * (m_1 * m_2 / M**2) * nn * (
        3.0 * (mom_2.T - mom_1.T) + (m_1 * mom_1.u + m_2 * mom_2.u) @ du)
    return R, float(S)
