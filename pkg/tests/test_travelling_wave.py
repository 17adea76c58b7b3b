import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mbl.errors import AnalysisError, DomainError
from mbl.model import GravityModel, SymmetricModel
from mbl.travelling_wave import (EquilibriumType, Region, TWProblem, WaveKind, analyse,
                                 bifurcation_diagram, classify_wave, eigenvalues,
                                 equilibrium_type, inflection_point, shock_speed,
                                 solve_slope_ode, tau_for_plateau, tau_spiral, tau_star,
                                 u_alpha, u_bar_for_tau, u_under)

SYM = SymmetricModel(M=0.5, eps=1e-3)
GRAV = GravityModel(vT=0.6)


@settings(max_examples=30, deadline=None)
@given(M=st.floats(0.2, 5.0))
def test_u_alpha_closed_form_for_u0_zero(M):
    # tangent from the origin to u^2/(u^2 + M(1-u)^2) touches at sqrt(M/(1+M))
    m = SymmetricModel(M=M)
    assert u_alpha(m, 0.0) == pytest.approx(math.sqrt(M / (1 + M)), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(u0=st.floats(0.0, 0.3))
def test_u_alpha_is_a_tangency_point(u0):
    ua = u_alpha(GRAV, u0)
    assert ua > inflection_point(GRAV) > u0
    s = shock_speed(GRAV, ua, u0)
    assert float(GRAV.flux_derivative(ua)) == pytest.approx(s, rel=1e-9)


def test_inflection_point_separates_convex_and_concave_parts():
    ui = inflection_point(SYM)
    assert float(SYM.flux_second_derivative(ui - 1e-3)) > 0
    assert float(SYM.flux_second_derivative(ui + 1e-3)) < 0


@settings(max_examples=30, deadline=None)
@given(frac=st.floats(0.05, 0.95))
def test_u_under_has_the_same_secant_slope(frac):
    ua = u_alpha(SYM, 0.0)
    u_bar = ua + frac * (1 - ua)
    uu = u_under(SYM, 0.0, u_bar)
    assert 0.0 < uu < ua
    assert shock_speed(SYM, uu, 0.0) == pytest.approx(shock_speed(SYM, u_bar, 0.0), rel=1e-10)


def test_u_under_requires_plateau_above_u_alpha():
    with pytest.raises(AnalysisError):
        u_under(SYM, 0.0, 0.5)


@settings(max_examples=50, deadline=None)
@given(u_l=st.floats(0.35, 0.95), u_r=st.floats(0.0, 0.3),
       eps=st.floats(1e-3, 0.1))
def test_equilibrium_type_switches_at_tau_spiral(u_l, u_r, eps):
    m = SymmetricModel(eps=eps)
    ts = tau_spiral(m, u_l, u_r)
    s = shock_speed(m, u_l, u_r)
    if ts is None:
        # F'(u_l) <= s: a saddle for every tau
        assert equilibrium_type(m, u_l, s, 10.0) is EquilibriumType.SADDLE
        return
    _, _, disc = eigenvalues(m, u_l, s, ts)
    assert abs(disc) <= 1e-10 * float(m.pc_derivative(u_l)) ** 2
    assert equilibrium_type(m, u_l, s, ts * (1 + 1e-8)) is EquilibriumType.SPIRAL
    assert equilibrium_type(m, u_l, s, ts * (1 - 1e-8)) is EquilibriumType.UNSTABLE_NODE


def test_bifurcation_diagram_is_monotone():
    diag = bifurcation_diagram(SYM, 0.0, np.linspace(0.6, 0.8, 6))
    assert np.all(np.diff(diag.taus) > 0)
    assert np.all(np.diff(diag.u_unders) < 0)
    assert diag.taus[0] > diag.tau_star
    assert diag.tau_star == pytest.approx(0.7545, abs=5e-4)


def test_bifurcation_grid_must_exceed_u_alpha():
    with pytest.raises(DomainError):
        bifurcation_diagram(SYM, 0.0, [0.5, 0.7])


@pytest.mark.parametrize("u_bar", [0.65, 0.7130, 0.8])
def test_tau_for_plateau_and_u_bar_for_tau_are_inverse(u_bar):
    tau = tau_for_plateau(SYM, 0.0, u_bar)
    assert u_bar_for_tau(SYM, 0.0, tau) == pytest.approx(u_bar, abs=1e-7)


def test_tau_for_plateau_reference_point():
    # tau = 5 gives the plateau 0.7130 of the symmetric reference table
    assert tau_for_plateau(SYM, 0.0, 0.7130) == pytest.approx(5.0, rel=2e-3)


def test_plateau_heights_are_bounded_for_constant_diffusion():
    # u_bar(tau) saturates below 0.85 for the symmetric model, so no tau reaches it
    with pytest.raises(AnalysisError):
        tau_for_plateau(SYM, 0.0, 0.85)


def test_tau_for_plateau_rejects_heights_below_u_alpha():
    with pytest.raises(DomainError):
        tau_for_plateau(SYM, 0.0, 0.3)


def test_slope_profile_at_the_connecting_tau():
    tau = tau_for_plateau(SYM, 0.0, 0.75)
    prof = solve_slope_ode(SYM, 0.0, 0.75, tau)
    assert abs(prof.mismatch) < 1e-6
    assert np.all(prof.w[1:-1] > 0)
    assert prof.u[0] == pytest.approx(0.0, abs=1e-6)
    # slightly off the connection the mismatch changes sign
    lo = solve_slope_ode(SYM, 0.0, 0.75, 0.98 * tau).mismatch
    hi = solve_slope_ode(SYM, 0.0, 0.75, 1.02 * tau).mismatch
    assert lo < 0 < hi


def test_slope_ode_argument_checks():
    with pytest.raises(DomainError):
        solve_slope_ode(SYM, 0.5, 0.4, 1.0)
    with pytest.raises(DomainError):
        solve_slope_ode(SYM, 0.0, 0.7, 0.0)


def test_tau_star_is_the_threshold_for_plateaus():
    ts = tau_star(SYM, 0.0)
    assert analyse(SYM, 0.95, 0.0, 0.9 * ts).u_bar is None
    r = analyse(SYM, 0.95, 0.0, 1.2 * ts)
    assert r.u_bar is not None and r.u_bar > r.u_alpha


@pytest.mark.parametrize("u_B, tau, region, kind", [
    (0.9, 0.5, Region.A1, WaveKind.MONOTONE_NO_PLATEAU),
    (0.5, 0.3, Region.C1, WaveKind.MONOTONE_NO_PLATEAU),
    (0.5, 0.5, Region.C2, WaveKind.MONOTONE_NO_PLATEAU),
    (0.85, 3.5, Region.A2, WaveKind.MONOTONE_PLATEAU),
    (0.66, 5.0, Region.B, WaveKind.NON_MONOTONE_PLATEAU),
    (0.3, 0.2, Region.C1, WaveKind.MONOTONE_NO_PLATEAU),
])
def test_classification_regions(u_B, tau, region, kind):
    r = analyse(SYM, u_B, 0.0, tau)
    assert r.region is region
    assert r.description is kind
    assert classify_wave(SYM, u_B, 0.0, tau) is kind


def test_overshoot_region_needs_spiral():
    r = analyse(GravityModel(vT=0.4), 0.6325, 0.0, 3.3812)
    assert r.region is Region.C2
    assert r.description is WaveKind.NON_MONOTONE_OVERSHOOT
    assert r.tau > r.tau_s


def test_increasing_data_are_reflected():
    r = analyse(SYM, 0.25, 0.85, 3.5)
    assert r.switched
    assert r.description is WaveKind.NON_MONOTONE_BASIN
    assert r.u_under == pytest.approx(0.1036, abs=5e-4)
    assert r.u_bar == pytest.approx(0.3155, abs=5e-4)
    assert r.as_row()["description"] == "Non-monotone basin"


def test_unsupported_configurations():
    with pytest.raises(AnalysisError):
        analyse(SYM, 0.9, 0.7, 1.0)  # decreasing data with u0 above the inflection
    with pytest.raises(DomainError):
        TWProblem(SYM, 0.5, 0.5, 1.0)
    with pytest.raises(DomainError):
        TWProblem(SYM, 1.5, 0.0, 1.0)
    with pytest.raises(DomainError):
        shock_speed(SYM, 0.3, 0.3)
    assert TWProblem(SYM, 0.8, 0.0, 1.0).s == pytest.approx(shock_speed(SYM, 0.8, 0.0))
