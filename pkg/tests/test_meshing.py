import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mbl.errors import DomainError, MeshError
from mbl.meshing import (Closure, MeshState, MMPDEConfig, MonitorConfig, MonitorKind,
                         check_mesh, critical_fraction, initial_mesh, intensity, mmpde_residual,
                         monitor_values, quality_report, smooth)
from mbl.solver import InitialProfile, ProfileKind


def test_config_validation():
    with pytest.raises(DomainError):
        MonitorConfig(beta=1.2)
    with pytest.raises(DomainError):
        MonitorConfig(beta=0.0)
    with pytest.raises(DomainError):
        MonitorConfig(m=0)
    with pytest.raises(DomainError):
        MonitorConfig(alpha_arc=0.0)
    with pytest.raises(DomainError):
        MMPDEConfig(N=4)
    with pytest.raises(DomainError):
        MMPDEConfig(tau_mmpde=0.0)
    with pytest.raises(DomainError):
        MMPDEConfig(sigma=-1.0)
    with pytest.raises(ValueError):
        MMPDEConfig(closure="bogus")
    assert MonitorConfig(kind="arc-length").kind is MonitorKind.ARC_LENGTH
    assert MMPDEConfig(closure="velocity").closure is Closure.VELOCITY
    assert MMPDEConfig(sigma=2.0).gamma == 6.0


def test_check_mesh_detects_crossing():
    with pytest.raises(MeshError):
        check_mesh(np.array([0.0, 0.5, 0.4, 1.0]))
    with pytest.raises(MeshError):
        MeshState(x=[0.0, 0.0, 1.0])
    np.testing.assert_allclose(check_mesh(np.array([0.0, 0.25, 1.0])), [0.25, 0.75])
    assert MeshState(x=np.linspace(0, 1, 11)).N == 10


@settings(max_examples=40, deadline=None)
@given(a=st.floats(-2, 2), b=st.floats(0.1, 3), beta=st.floats(0.05, 0.95))
def test_linear_profile_on_uniform_mesh_gives_uniform_monitor(a, b, beta):
    x = np.linspace(0, 1, 41)
    om = monitor_values(MonitorConfig(beta=beta), a + b * x, x)
    # |u_xi| = b everywhere and alpha = b
    np.testing.assert_allclose(om, b, rtol=1e-12)


def test_monitor_formulas():
    x = np.array([0.0, 0.1, 0.3, 1.0])
    u = np.array([1.0, 1.0, 0.5, 0.0])
    arc = monitor_values(MonitorConfig(kind="arc-length", alpha_arc=2.0), u, x)
    np.testing.assert_allclose(arc, np.sqrt(1 + 2.0 * (np.diff(u) / np.diff(x)) ** 2))
    g = np.abs(np.diff(u)) * 3
    sm = monitor_values(MonitorConfig(beta=0.9), u, x)
    np.testing.assert_allclose(sm, 0.1 * g.mean() + 0.9 * g)
    assert intensity(u) == pytest.approx(g.mean())
    np.testing.assert_allclose(monitor_values(MonitorConfig(), u, x, alpha=5.0), 0.5 + 0.9 * g)
    assert np.all(monitor_values(MonitorConfig(), np.ones(4), x) > 0)
    with pytest.raises(DomainError):
        monitor_values(MonitorConfig(), u[:-1], x)


@settings(max_examples=40, deadline=None)
@given(c=st.floats(-5, 5), gamma=st.floats(0, 10), n=st.integers(3, 30))
def test_smoothing_preserves_constants_and_is_linear(c, gamma, n):
    v = np.full(n, c)
    np.testing.assert_allclose(smooth(v, gamma, reflect=True), v, atol=1e-12 * (1 + abs(c)))
    assert smooth(v, gamma).shape == (n - 2,)
    rng = np.random.default_rng(n)
    a, b = rng.normal(size=n), rng.normal(size=n)
    np.testing.assert_allclose(smooth(a + 2 * b, gamma, reflect=True),
                               smooth(a, gamma, reflect=True) + 2 * smooth(b, gamma, reflect=True),
                               atol=1e-10)


def test_smoothing_stencil():
    v = np.array([1.0, 2.0, 4.0, 8.0])
    np.testing.assert_allclose(smooth(v, 1.0), [2 - (1 - 4 + 4), 4 - (2 - 8 + 8)])
    np.testing.assert_allclose(smooth(v, 1.0, reflect=True)[[0, -1]], [1 - (1 - 2 + 2), 8 - (4 - 16 + 8)])


@pytest.mark.parametrize("closure", list(Closure))
def test_mmpde_residual_vanishes_on_equidistributed_static_mesh(closure):
    cfg = MMPDEConfig(N=20, sigma=0.0, closure=closure)
    rng = np.random.default_rng(0)
    dx = rng.uniform(0.5, 1.5, 20)
    x = np.concatenate(([0.0], np.cumsum(dx)))
    omega = 1.0 / dx  # omega * dx constant
    res = mmpde_residual(cfg, MeshState(x=x), omega)
    np.testing.assert_allclose(res, 0.0, atol=1e-9)
    # a perturbed monitor drives the mesh
    assert np.abs(mmpde_residual(cfg, MeshState(x=x), omega * (1 + 0.1 * x[1:]))).max() > 1e-3


def test_mmpde_pins_end_nodes():
    cfg = MMPDEConfig(N=10)
    x = np.linspace(0, 1, 11)
    xd = np.linspace(1, 2, 11)
    res = mmpde_residual(cfg, MeshState(x=x, xdot=xd), np.ones(10))
    assert res[0] == 1.0 and res[-1] == 2.0


def test_quality_report_bounds():
    x = np.array([0.0, 1.0, 2.5, 4.75])
    q = quality_report(x, np.ones(3), MMPDEConfig(N=8, sigma=2.0))
    assert q.max_ratio == pytest.approx(1.5)
    assert q.quasi_uniform
    q = quality_report(np.array([0.0, 1.0, 2.7]), np.ones(2), MMPDEConfig(N=8, sigma=2.0))
    assert not q.quasi_uniform
    assert quality_report(x, 1.0 / np.diff(x)).equidistribution_defect == pytest.approx(0.0)


def test_critical_fraction():
    # a single jump holds all the variation in one interval
    assert critical_fraction(np.r_[np.ones(10), np.zeros(10)], 0.9) == pytest.approx(1 / 19)
    # a linear profile spreads it evenly
    assert critical_fraction(np.linspace(0, 1, 101), 0.9) == pytest.approx(0.9)
    assert np.isnan(critical_fraction(np.ones(5)))


@settings(max_examples=15, deadline=None)
@given(x0=st.floats(0.2, 0.8), k=st.floats(5, 400), sigma=st.sampled_from([1.0, 2.0, 3.0]))
def test_initial_mesh_is_quasi_uniform_and_concentrated(x0, k, sigma):
    prof = InitialProfile(ProfileKind.TANH_FRONT, u_B=0.9, u0=0.0, x0=x0, steepness=k)
    cfg = MMPDEConfig(N=100, sigma=sigma)
    mesh = initial_mesh(MonitorConfig(), cfg, prof, 0.0, 1.0)
    dx = np.diff(mesh.x)
    assert mesh.x[0] == 0.0 and mesh.x[-1] == 1.0
    r = dx[1:] / dx[:-1]
    lo, hi = sigma / (sigma + 1), (sigma + 1) / sigma
    assert r.max() <= hi * 1.05 and r.min() >= lo * 0.95
    # smallest interval sits at the front
    i = int(np.argmin(dx))
    assert abs(0.5 * (mesh.x[i] + mesh.x[i + 1]) - x0) < 0.1


def test_initial_mesh_for_flat_profile_is_uniform():
    prof = InitialProfile(ProfileKind.TANH_FRONT, u_B=0.3, u0=0.3, x0=0.5)
    mesh = initial_mesh(MonitorConfig(), MMPDEConfig(N=16), prof, 0.0, 1.0)
    np.testing.assert_allclose(mesh.x, np.linspace(0, 1, 17))
    with pytest.raises(DomainError):
        initial_mesh(MonitorConfig(), MMPDEConfig(N=16), prof, 1.0, 0.0)
