import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mbl.errors import DomainError, IntegrationError
from mbl.meshing import MMPDEConfig, MonitorConfig
from mbl.model import GravityModel, SymmetricModel
from mbl.solver import (BoundaryConditions, BoundaryKind, InitialProfile, MovingMeshProblem,
                        ProfileKind, UniformProblem, _extrapolate, _lagrange_derivative_weights,
                        banded_jacobians, consistent_ydot, diagnostics, flat_runs, integrate,
                        interface_fluxes, mesh_quality_history, moving_mesh_initial_state,
                        physical_residual, solve_moving, uniform_reference)
from mbl.travelling_wave import WaveKind

SYM = SymmetricModel()


def test_tanh_profile():
    p = InitialProfile(ProfileKind.TANH_FRONT, u_B=0.8, u0=0.1, x0=0.3, steepness=50)
    assert p(0.3) == pytest.approx(0.45)
    assert p(-10.0) == pytest.approx(0.8)
    assert p(10.0) == pytest.approx(0.1)
    p.check_domain(0.0, 1.0)
    with pytest.raises(DomainError):
        p.check_domain(0.5, 1.0)


def test_piecewise_profile_levels():
    p = InitialProfile("piecewise-three-level", u1=0.25, u2=0.85, u3=0.0, x1=0.75, x2=2.25)
    np.testing.assert_allclose(p(np.array([0.0, 1.5, 3.0])), [0.25, 0.85, 0.0], atol=1e-12)
    with pytest.raises(DomainError):
        InitialProfile("piecewise-three-level", x1=2.0, x2=1.0)
    with pytest.raises(DomainError):
        InitialProfile(u_B=1.5)
    with pytest.raises(DomainError):
        InitialProfile(steepness=0.0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), tau=st.floats(0.0, 5.0))
def test_residual_telescopes_to_boundary_fluxes(seed, tau):
    # sum of the interior rows = sum hbar q + Phi_{N-1/2} - Phi_{1/2}
    rng = np.random.default_rng(seed)
    n = 15
    x = np.cumsum(rng.uniform(0.5, 1.5, n)) / n
    u = rng.uniform(0, 1, n)
    ud, xd = rng.normal(size=n), rng.normal(size=n)
    res = physical_residual(SYM, tau, u, x, ud, xd)
    ux = np.empty(n)
    ux[1:-1] = (u[2:] - u[:-2]) / (x[2:] - x[:-2])
    ux[0] = (u[1] - u[0]) / (x[1] - x[0])
    ux[-1] = (u[-1] - u[-2]) / (x[-1] - x[-2])
    q = ud - ux * xd
    phi = interface_fluxes(SYM, tau, u, x, q)
    hbar = 0.5 * (x[2:] - x[:-2])
    assert res.sum() == pytest.approx((hbar * q[1:-1]).sum() + phi[-1] - phi[0], rel=1e-10,
                                      abs=1e-10)


def test_steady_state_has_zero_residual():
    x = np.linspace(0, 1, 11)
    u = np.full(11, 0.4)
    z = np.zeros(11)
    np.testing.assert_allclose(physical_residual(SYM, 1.0, u, x, z, z), 0.0, atol=1e-15)


def _moving_problem(N=12):
    prob = MovingMeshProblem(model=SYM, tau=0.5, monitor=MonitorConfig(),
                             mmpde=MMPDEConfig(N=N, tau_mmpde=1e-2))
    prof = InitialProfile(ProfileKind.TANH_FRONT, u_B=0.8, u0=0.1, x0=0.5, steepness=8)
    return prob, moving_mesh_initial_state(prob, prof, 0.0, 1.0)


def _dense_fd(fun, v, h=1e-7):
    r0 = fun(v)
    J = np.empty((r0.size, v.size))
    for j in range(v.size):
        e = v.copy()
        e[j] += h * max(1.0, abs(v[j]))
        J[:, j] = (fun(e) - r0) / (e[j] - v[j])
    return J


def _unband(ab, l, u, n):
    A = np.zeros((n, n))
    for j in range(n):
        for i in range(max(0, j - u), min(n, j + l + 1)):
            A[i, j] = ab[l + u + i - j, j]
    return A


def test_banded_jacobian_matches_dense_finite_differences():
    prob, y = _moving_problem()
    rng = np.random.default_rng(1)
    yd = 0.1 * rng.normal(size=y.size)
    yd[1] = yd[-1] = 0.0
    alpha = prob.frozen_alpha(y)
    jy, jd, _ = banded_jacobians(prob, 0.0, y, yd, alpha=alpha)
    n = y.size
    Jy = _dense_fd(lambda v: prob.residual(0.0, v, yd, alpha), y)
    Jd = _dense_fd(lambda v: prob.residual(0.0, y, v, alpha), yd)
    scale = np.abs(Jy).max()
    np.testing.assert_allclose(_unband(jy, prob.lower, prob.upper, n), Jy, atol=1e-5 * scale)
    np.testing.assert_allclose(_unband(jd, prob.lower, prob.upper, n), Jd,
                               atol=1e-5 * np.abs(Jd).max())


def test_consistent_initial_derivative():
    prob, y = _moving_problem()
    yd = consistent_ydot(prob, 0.0, y)
    r = prob.residual(0.0, y, yd)
    assert np.abs(r).max() < 1e-8 * max(1.0, np.abs(yd).max())


@settings(max_examples=40, deadline=None)
@given(gaps=st.lists(st.floats(0.1, 1.0), min_size=2, max_size=3),
       coef=st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_bdf_weights_and_extrapolation_are_exact_for_low_degree(gaps, coef):
    ts = [0.0]
    for g in gaps:
        ts.append(ts[-1] - g)
    deg = len(ts) - 1
    p = np.polynomial.Polynomial(coef[:deg + 1])
    c = _lagrange_derivative_weights(ts)
    assert sum(cj * p(tj) for cj, tj in zip(c, ts)) == pytest.approx(p.deriv()(0.0), abs=1e-8)
    past = ts[1:]
    q = np.polynomial.Polynomial(coef[:len(past)])
    ext = _extrapolate(past, [np.array([q(t)]) for t in past], 0.0)
    assert ext[0] == pytest.approx(q(0.0), abs=1e-8)


def test_integrate_rejects_bad_span_and_honours_wall_limit():
    prob = UniformProblem(model=SYM, tau=0.0, x=np.linspace(0, 1, 11))
    y0 = np.linspace(0.8, 0.1, 11)
    with pytest.raises(DomainError):
        integrate(prob, y0, (1.0, 0.0))
    with pytest.raises(IntegrationError) as info:
        integrate(prob, y0, (0.0, 1.0), wall_limit=0.0)
    assert info.value.state is not None


def test_outputs_land_on_requested_times():
    prof = InitialProfile(ProfileKind.TANH_FRONT, u_B=0.8, u0=0.1, x0=0.5, steepness=5)
    s = uniform_reference(SymmetricModel(eps=0.1), 0.5, 40, (0.0, 0.1), prof, (0.0, 1.0),
                          output_times=[0.025, 0.05])
    assert s.times == pytest.approx([0.0, 0.025, 0.05, 0.1], abs=1e-14)
    assert s.final.t == pytest.approx(0.1)
    assert s.accepted > 0


def test_uniform_self_convergence_is_second_order():
    model = SymmetricModel(eps=0.1)
    prof = InitialProfile(ProfileKind.TANH_FRONT, u_B=0.8, u0=0.1, x0=0.5, steepness=5)
    sols = {}
    for N in (25, 50, 100, 200):
        s = uniform_reference(model, 0.5, N, (0.0, 0.2), prof, (0.0, 1.0), rtol=1e-9,
                              atol=1e-11)
        sols[N] = s.u[-1]
    err = [np.abs(sols[N] - sols[2 * N][::2]).max() for N in (25, 50, 100)]
    rates = np.log2(np.array(err[:-1]) / np.array(err[1:]))
    assert np.all((rates >= 1.7) & (rates <= 2.3))


@pytest.fixture(scope="module")
def small_moving_run():
    prof = InitialProfile(ProfileKind.TANH_FRONT, u_B=0.75, u0=0.0, x0=0.0, steepness=200)
    return solve_moving(GravityModel(vT=0.6), 2.13, prof, (-0.25, 1.5), 0.1,
                        mmpde=MMPDEConfig(N=60, tau_mmpde=1e-4), output_times=[0.05])


def test_moving_run_conserves_mass_and_keeps_mesh_quality(small_moving_run):
    s = small_moving_run
    q = mesh_quality_history(s)
    assert q["max_mass_defect"] <= 10 * 1e-6
    assert q["min_dx"] > 0
    assert 2 / 3 * 0.95 <= q["min_ratio"] and q["max_ratio"] <= 1.5 * 1.05
    for x in s.x:
        assert np.all(np.diff(x) > 0)
    assert s.x[-1][0] == pytest.approx(-0.25, abs=1e-12)
    assert s.x[-1][-1] == pytest.approx(1.5, abs=1e-12)
    # Dirichlet ends keep their values
    assert s.u[-1][0] == pytest.approx(0.75, abs=1e-9)


def test_moving_run_is_deterministic(small_moving_run):
    prof = InitialProfile(ProfileKind.TANH_FRONT, u_B=0.75, u0=0.0, x0=0.0, steepness=200)
    again = solve_moving(GravityModel(vT=0.6), 2.13, prof, (-0.25, 1.5), 0.1,
                         mmpde=MMPDEConfig(N=60, tau_mmpde=1e-4), output_times=[0.05])
    for a, b in zip(small_moving_run.u, again.u):
        assert np.array_equal(a, b)


def test_neumann_boundary_rows():
    prob = UniformProblem(model=SYM, tau=0.0, x=np.linspace(0, 1, 21),
                          bc=BoundaryConditions("neumann"))
    assert prob.bc.kind is BoundaryKind.NEUMANN
    prof = InitialProfile(ProfileKind.TANH_FRONT, u_B=0.6, u0=0.2, x0=0.5, steepness=40)
    s = integrate(prob, prof(prob.x), (0.0, 0.01))
    u = s.u[-1]
    assert u[0] == pytest.approx(u[1], abs=1e-8)
    assert u[-1] == pytest.approx(u[-2], abs=1e-8)


# -- diagnostics on synthetic profiles -------------------------------------------------

X = np.linspace(0.0, 3.0, 3001)


def _step(x, at, k=300.0):
    return 0.5 * (1.0 - np.tanh(k * (x - at)))


def test_monotone_plateau_profile():
    # rarefaction from 0.9 down to 0.7, plateau, then the front
    u = 0.7 + 0.2 * np.clip(1.0 - X / 0.5, 0, 1)
    u = u * _step(X, 2.0)
    d = diagnostics(X, u)
    assert d.morphology == WaveKind.MONOTONE_PLATEAU.value
    assert d.plateau_height == pytest.approx(0.7, abs=2e-3)
    assert d.front_position == pytest.approx(2.0, abs=1e-2)


def test_non_monotone_plateau_and_overshoot_profiles():
    u = 0.6 + 0.2 * (1 - _step(X, 1.0)) - 0.8 * (1 - _step(X, 2.0))
    d = diagnostics(X, u)
    assert d.morphology == WaveKind.NON_MONOTONE_PLATEAU.value
    assert d.plateau_height == pytest.approx(0.8, abs=2e-3)
    bump = 0.6 + 0.1 * np.exp(-((X - 1.99) / 0.003) ** 2)
    d = diagnostics(X, bump * _step(X, 2.0))
    assert d.morphology == WaveKind.NON_MONOTONE_OVERSHOOT.value
    assert d.plateau_height is None


# a front resolved by thousands of nodes, as on a moving mesh
XF = np.concatenate([np.linspace(0.0, 1.95, 391)[:-1], np.linspace(1.95, 2.05, 2001),
                     np.linspace(2.05, 3.0, 191)[1:]])


def _with_slope_noise(u, amplitude, seed):
    """Rebuild ``u`` from its increments, each scaled by ``1 + amplitude * U(-1, 1)``."""
    du = np.diff(u) * (1 + amplitude * np.random.default_rng(seed).uniform(-1, 1, u.size - 1))
    return np.concatenate([[u[0]], u[0] + np.cumsum(du)])


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), amplitude=st.floats(0.0, 0.05))
def test_plateau_survives_wiggles_in_a_resolved_front(seed, amplitude):
    mid = np.searchsorted(XF, 1.5)
    u = 0.6 + 0.2 * (1 - _step(XF, 1.0)) - 0.8 * (1 - _step(XF, 2.0, k=100.0))
    u = _with_slope_noise(u, amplitude, seed)
    d = diagnostics(XF, u)
    assert d.morphology == WaveKind.NON_MONOTONE_PLATEAU.value
    assert d.plateau_height == pytest.approx(u[mid], abs=2e-3)
    u = (0.7 + 0.2 * np.clip(1.0 - XF / 0.5, 0, 1)) * _step(XF, 2.0, k=100.0)
    u = _with_slope_noise(u, amplitude, seed)
    d = diagnostics(XF, u)
    assert d.morphology == WaveKind.MONOTONE_PLATEAU.value
    assert d.plateau_height == pytest.approx(u[mid], abs=2e-3)


def test_no_plateau_profile_and_basin():
    d = diagnostics(X, 0.5 * _step(X, 1.5, k=5.0))
    assert d.morphology == WaveKind.MONOTONE_NO_PLATEAU.value
    assert d.plateau_height is None
    u = 0.3 - 0.2 * (_step(X, 1.5) - _step(X, 0.5)) + 0.4 * (1 - _step(X, 1.5))
    u = u * _step(X, 2.5)
    d = diagnostics(X, u)
    assert d.basin_height == pytest.approx(0.1, abs=2e-3)


def test_flat_profile_has_no_front():
    d = diagnostics(X, np.full_like(X, 0.3))
    assert d.front_position is None and d.morphology is None
    runs = flat_runs(X, np.full_like(X, 0.3))
    assert len(runs) == 1 and runs[0].level == pytest.approx(0.3)
