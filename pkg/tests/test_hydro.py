import numpy as np
import pytest

from mixkin.collision_boltzmann import KernelModel
from mixkin.errors import AdmissibilityError, ConfigurationError, StepSizeError
from mixkin.grid import build_velocity_grid
from mixkin.hybrid import MixtureSpec
from mixkin.hydro import (
    GAMMA,
    EulerStateMT,
    EulerStateST,
    KineticFluidState,
    euler_multi_T_step,
    euler_single_T_step,
    exchange_sources,
    kinetic_fluid_step,
    kf_dt,
    mt_dt,
    rusanov_flux,
    st_dt,
)
from mixkin.moments import SpeciesParams, matched_maxwellian_fields, moment_fields

from oracles import exact_riemann, exchange_ode

MAXWELL = KernelModel.maxwell_molecules(1.0 / (4.0 * np.pi))


def _run_st(state, dx, t_end, boundary="copy", limiter=False, cfl=0.8):
    t = 0.0
    while t < t_end - 1e-14:
        dt = min(st_dt(state, dx, cfl), t_end - t)
        state = euler_single_T_step(state, dt, dx, boundary, limiter, cfl)
        t += dt
    return state


def _sod(N, limiter=False, t_end=0.15):
    x = (np.arange(N) + 0.5) / N
    rho = np.where(x < 0.5, 1.0, 0.125)
    p = np.where(x < 0.5, 1.0, 0.1)
    st = EulerStateST.from_primitive([1.0], rho[None, :], np.zeros((N, 3)), p / rho)
    st = _run_st(st, 1.0 / N, t_end, limiter=limiter)
    exact = exact_riemann((1.0, 0.0, 1.0), (0.125, 0.0, 0.1), GAMMA, x, t_end)
    return np.mean(np.abs(st.n[0] - exact[0]))


# ---------------------------------------------------------------- Rusanov flux

def test_flux_is_consistent_and_symmetric():
    U = np.array([1.3, 0.4, 0.1, 0.0, 2.0])
    p = (GAMMA - 1) * (U[4] - 0.5 * (U[1] ** 2 + U[2] ** 2) / U[0])
    u = U[1] / U[0]
    physical = np.array([U[0] * u, U[1] * u + p, U[2] * u, 0.0, (U[4] + p) * u])
    np.testing.assert_allclose(rusanov_flux(U, U, "MT-species", 1.0), physical, rtol=1e-14)
    L = np.array([1.0, 0.5, 0, 0, 2.0])
    R = np.array([1.0, -0.5, 0, 0, 2.0])
    assert rusanov_flux(L, R, "KF-heavy", 1.0)[0] == 0.0
    mix = np.array([0.5, 0.7, 0.2, 0, 0, 2.0])
    assert rusanov_flux(mix, mix, "ST", [1.0, 2.0]).shape == (6,)


def test_flux_rejects_bad_input():
    with pytest.raises(ConfigurationError):
        rusanov_flux(np.ones(5), np.ones(5), "XX", 1.0)
    with pytest.raises(AdmissibilityError, match="cell"):
        rusanov_flux(np.array([1.0, 3.0, 0, 0, 1.0]), np.ones(5), "MT-species", 1.0)


# ---------------------------------------------------------------- single temperature

def test_uniform_state_is_unchanged():
    st = EulerStateST.from_primitive([1.0, 2.0], np.full((2, 10), 0.5), np.tile([0.3, 0.1, 0], (10, 1)),
                                     np.ones(10))
    out = euler_single_T_step(st, 0.01, 0.1)
    np.testing.assert_allclose(out.pack(), st.pack(), rtol=1e-14)


def test_sod_matches_exact_riemann_solution():
    assert _sod(400) < 0.02


def test_sod_convergence_order_with_limiter():
    errors = [_sod(N, limiter=True) for N in (100, 200, 400)]
    order = np.log2(errors[0] / errors[2]) / 2
    assert order >= 0.8


def test_first_order_converges_at_rate_one_on_smooth_data():
    errors = []
    for N in (50, 100, 200):
        x = (np.arange(N) + 0.5) / N
        rho = 1.0 + 0.2 * np.sin(2 * np.pi * x)
        st = EulerStateST.from_primitive([1.0], rho[None, :], np.tile([1.0, 0, 0], (N, 1)), 1.0 / rho)
        st = _run_st(st, 1.0 / N, 0.2, boundary="periodic", cfl=0.5)
        exact = 1.0 + 0.2 * np.sin(2 * np.pi * (x - 0.2))
        errors.append(np.mean(np.abs(st.n[0] - exact)))
    orders = np.log2(np.array(errors[:-1]) / errors[1:])
    assert np.all(orders > 0.9)


def test_species_ratio_is_advected_passively():
    N = 100
    x = (np.arange(N) + 0.5) / N
    n = np.where(x < 0.5, 1.0, 0.125)
    Y = 0.3 + 0.4 * (x > 0.25) * (x < 0.7)
    T = np.where(x < 0.5, 1.0, 0.8)
    mix = EulerStateST.from_primitive([1.0, 1.0], np.stack([Y * n, (1 - Y) * n]), np.zeros((N, 3)), T)
    single = EulerStateST.from_primitive([1.0], n[None, :], np.zeros((N, 3)), T)
    t, dx = 0.0, 1.0 / N
    while t < 0.1 - 1e-14:
        dt = min(st_dt(single, dx, 0.8), 0.1 - t)
        mix = euler_single_T_step(mix, dt, dx, "copy")
        single = euler_single_T_step(single, dt, dx, "copy")
        t += dt
    np.testing.assert_allclose(mix.n.sum(axis=0), single.n[0], rtol=1e-12)
    np.testing.assert_allclose(mix.mom, single.mom, rtol=1e-12, atol=1e-14)
    ratio = mix.n[0] / mix.n.sum(axis=0)
    assert ratio.min() >= 0.3 - 1e-12 and ratio.max() <= 0.7 + 1e-12


def test_st_conservation_periodic():
    N = 64
    x = (np.arange(N) + 0.5) / N
    st = EulerStateST.from_primitive([1.0, 3.0], np.stack([1 + 0.3 * np.sin(2 * np.pi * x), 0.5 + 0 * x]),
                                     np.column_stack([0.2 * np.cos(2 * np.pi * x), 0.1 + 0 * x, 0 * x]),
                                     1.0 + 0.2 * np.cos(4 * np.pi * x))
    before = st.pack().sum(axis=0)
    out = _run_st(st, 1.0 / N, 0.3, boundary="periodic", limiter=True)
    np.testing.assert_allclose(out.pack().sum(axis=0), before, rtol=1e-11, atol=1e-11 * np.abs(before).max())


def test_st_cfl_and_admissibility_errors():
    st = EulerStateST.from_primitive([1.0], np.ones((1, 4)), np.zeros((4, 3)), np.ones(4))
    with pytest.raises(StepSizeError, match="CFL"):
        euler_single_T_step(st, 1.0, 0.1)
    st.E[2] = -1.0
    with pytest.raises(AdmissibilityError, match="cell 2") as info:
        euler_single_T_step(st, 1e-4, 0.1)
    assert info.value.cell == 2


# ---------------------------------------------------------------- multi temperature

SPEC = MixtureSpec((SpeciesParams("a", 1.0), SpeciesParams("b", 4.0)))


def test_mt_uniform_state_matches_exchange_ode():
    m, n = (1.0, 4.0), (1.0, 0.5)
    u0 = [[0.5, 0.1, 0.0], [-0.2, 0.0, 0.3]]
    T0 = [1.5, 0.6]
    st = EulerStateMT.from_primitive(m, np.array(n)[:, None], np.array(u0)[:, None, :], np.array(T0)[:, None])
    dt, steps = 1e-3, 1000
    for _ in range(steps):
        st = euler_multi_T_step(st, dt, SPEC, transport=False)
    u_ref, T_ref = exchange_ode(m, n, u0, T0, 1.0 / (4 * np.pi), np.array([dt * steps]))
    _, u, T = st.primitives()
    np.testing.assert_allclose(u[:, 0], u_ref[:, 0], atol=1e-6)
    np.testing.assert_allclose(T[:, 0], T_ref[:, 0], rtol=1e-6)


def test_mt_equal_species_states_decouple():
    n = np.array([[1.0, 0.8], [0.5, 0.4]])
    u = np.tile([0.2, 0.0, 0.0], (2, 2, 1))
    T = np.ones((2, 2))
    st = EulerStateMT.from_primitive([1.0, 4.0], n, u, T)
    _, u_, T_ = st.primitives()
    R, S = exchange_sources([1.0, 4.0], MAXWELL, n[0], u_[0], T_[0], n[1], u_[1], T_[1])
    assert np.all(R == 0) and np.all(S == 0)


def test_mt_sources_are_exactly_antisymmetric(rng):
    for _ in range(50):
        n1, n2 = rng.uniform(0.1, 2, (2, 3))
        u1, u2 = rng.normal(size=(2, 3, 3))
        T1, T2 = rng.uniform(0.2, 3, (2, 3))
        m = rng.uniform(0.5, 5, 2)
        for kernel in (MAXWELL, KernelModel.hard_sphere(0.3)):
            R, S = exchange_sources(m, kernel, n1, u1, T1, n2, u2, T2)
            R2, S2 = exchange_sources(m[::-1], kernel, n2, u2, T2, n1, u1, T1)
            assert np.all(R + R2 == 0) and np.all(S + S2 == 0)


def test_mt_totals_conserved_over_many_steps():
    N = 16
    x = (np.arange(N) + 0.5) / N
    n = np.stack([1 + 0.2 * np.sin(2 * np.pi * x), 0.5 + 0.1 * np.cos(2 * np.pi * x)])
    u = np.stack([np.column_stack([0.3 + 0 * x, 0.1 + 0 * x, 0 * x]), np.column_stack([-0.2 + 0 * x, 0 * x, 0 * x])])
    T = np.stack([1.0 + 0 * x, 0.5 + 0.1 * x])
    st = EulerStateMT.from_primitive([1.0, 4.0], n, u, T)
    dx = 1.0 / N
    mom0, E0, n0 = st.mom.sum(axis=(0, 1)), st.E.sum(), st.n.sum(axis=1)
    for _ in range(1000):
        st = euler_multi_T_step(st, 0.5 * mt_dt(st, SPEC, dx, 0.8), SPEC, dx)
    np.testing.assert_allclose(st.mom.sum(axis=(0, 1)), mom0, atol=1e-12 * np.abs(mom0).max())
    assert st.E.sum() == pytest.approx(E0, rel=1e-12)
    np.testing.assert_allclose(st.n.sum(axis=1), n0, rtol=1e-12)


def test_mt_source_step_bound():
    st = EulerStateMT.from_primitive([1.0, 4.0], np.array([[1.0], [1.0]]), np.zeros((2, 1, 3)), np.ones((2, 1)))
    with pytest.raises(StepSizeError, match="sources"):
        euler_multi_T_step(st, 1.0, SPEC, transport=False)


# ---------------------------------------------------------------- kinetic-fluid

KF_SPEC = MixtureSpec((SpeciesParams("heavy", 25.0), SpeciesParams("light", 1.0)))
LIGHT = build_velocity_grid(-6, 6, 10)


def _kf_state(cells, n_h, u_h, T_h, n_l, u_l, T_l):
    f = matched_maxwellian_fields(1.0, np.full(cells, n_l), np.tile(u_l, (cells, 1)), np.full(cells, T_l), LIGHT)
    rho = 25.0 * n_h
    u = np.tile(u_h, (cells, 1))
    E = 0.5 * rho * np.einsum("cd,cd->c", u, u) + 1.5 * n_h * T_h
    return KineticFluidState(np.full(cells, n_h), rho * u, np.full(cells, E), f)


def test_kf_equilibrium_is_stationary():
    st = _kf_state(4, 1.0, [0.05, 0, 0], 1.0, 0.5, [0.05, 0, 0], 1.0)
    dt = kf_dt(st, KF_SPEC, LIGHT, 0.25, 0.8)
    out = kinetic_fluid_step(st, dt, KF_SPEC, "bgk", LIGHT, dx=0.25)
    np.testing.assert_allclose(out.f, st.f, rtol=0, atol=1e-12 * st.f.max())
    np.testing.assert_allclose(out.E, st.E, rtol=1e-12)
    np.testing.assert_allclose(out.mom, st.mom, atol=1e-12)


def test_kf_exchange_is_antisymmetric_and_matches_closed_form():
    st = _kf_state(1, 1.0, [0.1, 0, 0], 1.2, 0.5, [-0.3, 0.2, 0], 0.7)
    dt = 1e-3
    out = kinetic_fluid_step(st, dt, KF_SPEC, "bgk", LIGHT, transport=False)
    w = LIGHT.cell_weight

    def light(f):
        return (f @ LIGHT.nodes) * w, 0.5 * (f @ LIGHT.speed_squared) * w

    (p0, e0), (p1, e1) = light(st.f), light(out.f)
    np.testing.assert_allclose(out.mom - st.mom, -(p1 - p0), atol=1e-8 * np.abs(p1 - p0).max())
    np.testing.assert_allclose(out.E - st.E, -(e1 - e0), atol=1e-12)
    n, u, T = moment_fields(st.f, LIGHT, 1.0)
    R, _ = exchange_sources([1.0, 25.0], MAXWELL, n, u, T, st.n, st.mom / 25.0, np.array([1.2]))
    np.testing.assert_allclose((p1 - p0) / dt, R, rtol=1e-2, atol=1e-12)


def test_kf_rejects_unknown_coupling():
    st = _kf_state(1, 1.0, [0, 0, 0], 1.0, 0.5, [0, 0, 0], 1.0)
    with pytest.raises(ConfigurationError):
        kinetic_fluid_step(st, 1e-3, KF_SPEC, "fokker-planck", LIGHT, transport=False)
    with pytest.raises(ConfigurationError, match="heavy-species velocity grid"):
        kinetic_fluid_step(st, 1e-3, KF_SPEC, "boltzmann", LIGHT, transport=False)
