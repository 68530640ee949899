"""Independent reference solutions used by the tests.

Nothing here imports the package's numerics; formulas are re-derived so
that agreement is a genuine cross-check.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from scipy.special import comb


# ---------------------------------------------------------------- exact Riemann solver

def _pressure_function(p, rho, pk, c, gamma):
    if p > pk:
        A = 2.0 / ((gamma + 1.0) * rho)
        B = (gamma - 1.0) / (gamma + 1.0) * pk
        return (p - pk) * math.sqrt(A / (p + B))
    return 2.0 * c / (gamma - 1.0) * ((p / pk) ** ((gamma - 1.0) / (2.0 * gamma)) - 1.0)


def exact_riemann(left, right, gamma, x, t, x0=0.5):
    """Density, velocity and pressure of the ideal-gas Riemann problem.

    ``left`` and ``right`` are ``(rho, u, p)``.
    """
    rl, ul, pl = left
    rr, ur, pr = right
    cl = math.sqrt(gamma * pl / rl)
    cr = math.sqrt(gamma * pr / rr)
    f = lambda p: _pressure_function(p, rl, pl, cl, gamma) + _pressure_function(p, rr, pr, cr, gamma) + ur - ul
    p_star = brentq(f, 1e-12, 10.0 * max(pl, pr), xtol=1e-15, rtol=1e-15)
    u_star = 0.5 * (ul + ur) + 0.5 * (_pressure_function(p_star, rr, pr, cr, gamma)
                                      - _pressure_function(p_star, rl, pl, cl, gamma))
    g1 = (gamma - 1.0) / (gamma + 1.0)
    out = np.empty((3, len(x)))
    for k, xi in enumerate(x):
        s = (xi - x0) / t
        if s <= u_star:
            rho, u, p, c = rl, ul, pl, cl
            if p_star > pl:
                shock = ul - cl * math.sqrt((gamma + 1) / (2 * gamma) * p_star / pl + (gamma - 1) / (2 * gamma))
                if s >= shock:
                    rho = rl * (p_star / pl + g1) / (g1 * p_star / pl + 1.0)
                    u, p = u_star, p_star
            else:
                c_star = cl * (p_star / pl) ** ((gamma - 1) / (2 * gamma))
                head, tail = ul - cl, u_star - c_star
                if s >= tail:
                    rho = rl * (p_star / pl) ** (1 / gamma)
                    u, p = u_star, p_star
                elif s > head:
                    u = 2.0 / (gamma + 1) * (cl + (gamma - 1) / 2 * ul + s)
                    c = 2.0 / (gamma + 1) * (cl + (gamma - 1) / 2 * (ul - s))
                    rho = rl * (c / cl) ** (2 / (gamma - 1))
                    p = pl * (c / cl) ** (2 * gamma / (gamma - 1))
        else:
            rho, u, p = rr, ur, pr
            if p_star > pr:
                shock = ur + cr * math.sqrt((gamma + 1) / (2 * gamma) * p_star / pr + (gamma - 1) / (2 * gamma))
                if s <= shock:
                    rho = rr * (p_star / pr + g1) / (g1 * p_star / pr + 1.0)
                    u, p = u_star, p_star
            else:
                c_star = cr * (p_star / pr) ** ((gamma - 1) / (2 * gamma))
                head, tail = ur + cr, u_star + c_star
                if s <= tail:
                    rho = rr * (p_star / pr) ** (1 / gamma)
                    u, p = u_star, p_star
                elif s < head:
                    u = 2.0 / (gamma + 1) * (-cr + (gamma - 1) / 2 * ur + s)
                    c = 2.0 / (gamma + 1) * (cr - (gamma - 1) / 2 * (ur - s))
                    rho = rr * (c / cr) ** (2 / (gamma - 1))
                    p = pr * (c / cr) ** (2 * gamma / (gamma - 1))
        out[:, k] = rho, u, p
    return out


# ---------------------------------------------------------------- upwind advection

def upwind_binomial(f0, courant, steps):
    """Closed form of ``steps`` first-order upwind steps (periodic, c in [0, 1]).

    Each step is the convex combination ``(1 - c) f_k + c f_{k-1}``, so the
    result is the binomial mixture of shifted copies of ``f0``.
    """
    f0 = np.asarray(f0, dtype=float)
    out = np.zeros_like(f0)
    for j in range(steps + 1):
        out += comb(steps, j, exact=False) * courant**j * (1.0 - courant) ** (steps - j) * np.roll(f0, j)
    return out


# ---------------------------------------------------------------- exchange ODE

def exchange_ode(m, n, u0, T0, sigma, t_eval, kernel="maxwell"):
    """Space-uniform two-temperature relaxation by momentum/energy exchange.

    Integrates d(rho_1 u_1)/dt = R, dE_1/dt = S and the opposite for
    species 2 with an adaptive high-order method. Returns ``u (2, K, 3)``
    and ``T (2, K)`` at ``t_eval``.
    """
    m1, m2 = m
    n1, n2 = n
    M = m1 + m2

    def lam(u1, u2, T1, T2):
        if kernel == "maxwell":
            return 4.0 * math.pi * sigma
        du = u1 - u2
        g = math.sqrt(3.0 * (T1 / m1 + T2 / m2) + du @ du)
        return 4.0 * math.pi * sigma * g

    def unpack(y):
        p1, p2 = y[0:3], y[3:6]
        u1, u2 = p1 / (m1 * n1), p2 / (m2 * n2)
        T1 = (y[6] - 0.5 * m1 * n1 * u1 @ u1) / (1.5 * n1)
        T2 = (y[7] - 0.5 * m2 * n2 * u2 @ u2) / (1.5 * n2)
        return u1, u2, T1, T2

    def rhs(t, y):
        u1, u2, T1, T2 = unpack(y)
        L = lam(u1, u2, T1, T2)
        R = L * m1 * m2 / M * n1 * n2 * (u2 - u1)
        S = L * m1 * m2 / M**2 * n1 * n2 * (3.0 * (T2 - T1) + (m1 * u1 + m2 * u2) @ (u2 - u1))
        return np.concatenate([R, -R, [S, -S]])

    u0 = np.asarray(u0, dtype=float)
    y0 = np.concatenate([m1 * n1 * u0[0], m2 * n2 * u0[1],
                         [0.5 * m1 * n1 * u0[0] @ u0[0] + 1.5 * n1 * T0[0],
                          0.5 * m2 * n2 * u0[1] @ u0[1] + 1.5 * n2 * T0[1]]])
    sol = solve_ivp(rhs, (0.0, float(np.max(t_eval))), y0, method="DOP853", t_eval=t_eval,
                    rtol=1e-12, atol=1e-14)
    u = np.empty((2, len(t_eval), 3))
    T = np.empty((2, len(t_eval)))
    for k in range(len(t_eval)):
        u1, u2, T1, T2 = unpack(sol.y[:, k])
        u[0, k], u[1, k], T[0, k], T[1, k] = u1, u2, T1, T2
    return u, T


def maxwellian_grid(mass, n, u, T, nodes):
    """Continuous Maxwellian sampled at velocity nodes."""
    d = nodes - np.asarray(u, dtype=float)
    return n * (mass / (2.0 * math.pi * T)) ** 1.5 * np.exp(-mass * np.einsum("kd,kd->k", d, d) / (2.0 * T))
