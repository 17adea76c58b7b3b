"""Travelling-wave analysis of the modified Buckley-Leverett equation.

A travelling wave ``u(x - s t)`` connecting ``u_l`` (left) to ``u_r`` (right)
solves

    -s (u - u_r) + F(u) - F(u_r) = -H p_c'(u) u' - s tau H u''

with ``s`` the Rankine-Hugoniot speed.  Inverting the profile and writing
``w(u) = -u'`` gives the first-order slope equation

    s tau H w w' - H p_c' w = s (u - u_r) - (F(u) - F(u_r)),

which is integrated in phase-plane form (``u`` and ``w`` as functions of the
travelling coordinate) so that nothing is singular where ``w`` vanishes.  The
plateau height ``u_bar`` of an undercompressive wave is the value for which
the trajectory leaving the saddle ``(u_r, 0)`` lands exactly on
``(u_bar, 0)``; ``tau`` for a given ``u_bar`` follows by shooting.

Waves that increase from left to right (``u_I < u_0``, ``u_B < u_0``) are
handled by reflecting the model, ``v = 1 - u``.
"""

from __future__ import annotations

import enum
import math
import warnings
from concurrent.futures import Executor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize

from .errors import AnalysisError, DomainError
from .model import Model

SHOOT_RTOL = 1e-10
TAU_BRACKET = (1e-3, 1e6)
TAU_XTOL = 1e-8
SHOOT_METHOD = "dop853"
STAR_OFFSET = 1e-3


class Region(str, enum.Enum):
    A1 = "A1"
    A2 = "A2"
    B = "B"
    C1 = "C1"
    C2 = "C2"


REGION_TEXT = {
    Region.A1: "Rarefaction wave from u_B down to u_alpha trailing an admissible Lax shock "
               "from u_alpha down to u_0",
    Region.A2: "Rarefaction wave from u_B down to u_bar trailing an undercompressive shock "
               "from u_bar down to u_0",
    Region.B: "An admissible Lax shock from u_B up to u_bar (may exhibit oscillations near "
              "u_B) trailing an undercompressive shock from u_bar down to u_0",
    Region.C1: "An admissible Lax shock from u_B down to u_0",
    Region.C2: "An admissible Lax shock from u_B down to u_0 (may exhibit oscillations near u_B)",
}


class WaveKind(str, enum.Enum):
    RAREFACTION_THEN_LAX = "A1"
    RAREFACTION_THEN_UNDERCOMPRESSIVE = "A2"
    LAX_UP_THEN_UNDERCOMPRESSIVE = "B"
    PLAIN_LAX = "C1"
    LAX_WITH_OSCILLATIONS = "C2"
    MONOTONE_BASIN = "Monotone basin"
    NON_MONOTONE_BASIN = "Non-monotone basin"
    MONOTONE_PLATEAU = "Monotone plateau"
    NON_MONOTONE_PLATEAU = "Non-monotone plateau"
    NON_MONOTONE_OVERSHOOT = "Non-monotone overshoot"
    MONOTONE_NO_PLATEAU = "Monotone, no plateau"

    @classmethod
    def from_region(cls, region: Region) -> "WaveKind":
        return cls(region.value)


_SWITCHED = {
    WaveKind.MONOTONE_PLATEAU: WaveKind.MONOTONE_BASIN,
    WaveKind.NON_MONOTONE_PLATEAU: WaveKind.NON_MONOTONE_BASIN,
}


class EquilibriumType(str, enum.Enum):
    SADDLE = "saddle"
    UNSTABLE_NODE = "unstable node"
    SPIRAL = "spiral"


@dataclass(frozen=True)
class TWProblem:
    model: Model
    u_l: float
    u_r: float
    tau: float

    def __post_init__(self):
        for name in ("u_l", "u_r"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name}={v} outside [0, 1]")
        if self.u_l == self.u_r:
            raise DomainError("u_l and u_r must differ")

    @property
    def s(self) -> float:
        return shock_speed(self.model, self.u_l, self.u_r)


@dataclass
class TWResult:
    """Travelling-wave quantities for one ``(u_B, u_0, tau)`` query.

    Absent values (the tables' ``--`` cells) are ``None``.
    """

    u_B: float
    u0: float
    tau: float
    s: float
    u_alpha: float
    tau_star: float
    tau_s: float | None
    u_under: float | None
    u_bar: float | None
    region: Region
    description: WaveKind
    switched: bool = False

    def as_row(self) -> dict:
        return {
            "u_B": self.u_B, "u_0": self.u0, "tau": self.tau, "tau_star": self.tau_star,
            "tau_s": self.tau_s, "u_alpha": self.u_alpha, "u_under": self.u_under,
            "u_bar": self.u_bar, "description": self.description.value,
        }


@dataclass
class SlopeProfile:
    """Sampled solution ``w(u)`` of the slope equation."""

    u: np.ndarray
    w: np.ndarray
    mismatch: float
    reached: bool
    u_end: float


@dataclass
class BifurcationDiagram:
    u0: float
    u_alpha: float
    tau_star: float
    samples: list = field(default_factory=list)  # (u_bar, tau)
    u_under_of_tau: list = field(default_factory=list)  # (tau, u_under)

    @property
    def taus(self):
        return np.array([t for _, t in self.samples])

    @property
    def u_bars(self):
        return np.array([u for u, _ in self.samples])

    @property
    def u_unders(self):
        return np.array([u for _, u in self.u_under_of_tau])


# -- elementary quantities ----------------------------------------------------

def shock_speed(model: Model, u_l: float, u_r: float) -> float:
    if u_l == u_r:
        raise DomainError("shock speed undefined for u_l == u_r")
    return float((model.flux(u_l) - model.flux(u_r)) / (u_l - u_r))


def _scan_roots(fun, a, b, n=10001):
    grid = np.linspace(a, b, n)
    vals = fun(grid)
    idx = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    return grid, vals, idx


def inflection_point(model: Model) -> float:
    """First convex-to-concave inflection of ``F`` in ``(0, 1)``."""
    lo, hi = model.saturation_range()
    d2 = model.flux_second_derivative
    with np.errstate(all="ignore"):
        grid, vals, idx = _scan_roots(d2, lo + 1e-4, hi - 1e-4)
    for k in idx:
        if vals[k] > 0 > vals[k + 1]:
            return float(optimize.bisect(d2, grid[k], grid[k + 1], xtol=1e-14))
    raise AnalysisError("flux has no convex-to-concave inflection point")


def _tangent_residual(model, u0):
    f0 = float(model.flux(u0))

    def res(u):
        return model.flux_derivative(u) * (u - u0) - (model.flux(u) - f0)

    return res


def u_alpha(model: Model, u0: float) -> float:
    """Tangency point: ``F'(u) = (F(u) - F(u0)) / (u - u0)`` with ``u > u0``."""
    u_i = inflection_point(model)
    if not u0 < u_i:
        raise AnalysisError(f"u0={u0} is not below the inflection point {u_i:.4f}")
    res = _tangent_residual(model, u0)
    hi = model.saturation_range()[1]
    grid, vals, idx = _scan_roots(res, u_i, hi - 1e-9, 4001)
    if idx.size == 0:
        raise AnalysisError(f"no tangent point above u0={u0}")
    k = idx[0]
    return float(optimize.brentq(res, grid[k], grid[k + 1], xtol=1e-15, rtol=1e-15))


def u_under(model: Model, u0: float, u_bar: float, u_alpha_value: float | None = None) -> float:
    """Root in ``(u0, u_alpha)`` of equal secant slopes from ``u0``."""
    ua = u_alpha(model, u0) if u_alpha_value is None else u_alpha_value
    if not u_bar > ua:
        raise AnalysisError(f"u_bar={u_bar} must exceed u_alpha={ua}")
    f0 = float(model.flux(u0))
    s = (float(model.flux(u_bar)) - f0) / (u_bar - u0)

    def res(u):
        return (model.flux(u) - f0) - s * (u - u0)

    a = u0 + 1e-12 * max(1.0, abs(u0))
    if res(a) * res(ua) >= 0:
        grid, vals, idx = _scan_roots(res, u0 + 1e-9, ua)
        if idx.size == 0:
            raise AnalysisError("could not bracket u_under")
        a, ua = grid[idx[-1]], grid[idx[-1] + 1]
    return float(optimize.brentq(res, a, ua, xtol=1e-15, rtol=1e-15))


def tau_spiral(model: Model, u_l: float, u_r: float) -> float | None:
    """Threshold above which ``(u_l, 0)`` is a spiral; ``None`` if ``F'(u_l) <= s``."""
    s = shock_speed(model, u_l, u_r)
    gap = float(model.flux_derivative(u_l)) - s
    if gap <= 0.0 or s <= 0.0:
        return None
    return float(model.diffusion(u_l) * model.pc_derivative(u_l) ** 2 / (4.0 * s * gap))


def eigenvalues(model: Model, u_eq: float, s: float, tau: float):
    """Eigenvalues of the linearised first-order travelling-wave system."""
    h = float(model.diffusion(u_eq))
    dpc = float(model.pc_derivative(u_eq))
    gap = float(model.flux_derivative(u_eq)) - s
    disc = dpc**2 - 4.0 * s * tau * gap / h
    root = np.sqrt(complex(disc))
    return (-dpc + root) / (2 * s * tau), (-dpc - root) / (2 * s * tau), disc


def equilibrium_type(model: Model, u_eq: float, s: float, tau: float) -> EquilibriumType:
    lp, lm, disc = eigenvalues(model, u_eq, s, tau)
    if disc < 0:
        return EquilibriumType.SPIRAL
    if lp.real * lm.real < 0:
        return EquilibriumType.SADDLE
    return EquilibriumType.UNSTABLE_NODE


# -- shooting on the slope equation -------------------------------------------

class _SlopeSystem:
    """Phase-plane form of the slope equation for a wave from ``u_bar`` down to ``u_r``.

    With ``theta = -eta`` the profile is traced from the right state back
    towards the left one:  ``du/dtheta = w``,
    ``dw/dtheta = (g(u) + H p_c' w) / (s tau H)``.
    """

    def __init__(self, model: Model, u_r: float, u_bar: float, tau: float):
        self.model = model
        self.u_r = u_r
        self.u_bar = u_bar
        self.tau = tau
        self.f_r = model.point_terms(u_r)[0]
        self.s = (model.point_terms(u_bar)[0] - self.f_r) / (u_bar - u_r)
        if self.s <= 0:
            raise AnalysisError("wave speed must be positive")

    def rhs(self, theta, y):
        u, w = y
        # trial stages may step below u_r once a trajectory turns back; the
        # terms are frozen there (the shot is already a stall)
        f, h, dpc = self.model.point_terms(max(u, self.u_r))
        g = self.s * (u - self.u_r) - (f - self.f_r)
        return [w, (g + h * dpc * w) / (self.s * self.tau * h)]

    def launch_slope(self) -> float:
        """Unstable eigen-slope ``w/(u - u_r)`` of the saddle at ``u_r``."""
        m = self.model
        _, h, dpc = m.point_terms(self.u_r)
        b = -h * dpc
        c = self.s - float(m.flux_derivative(self.u_r))
        a = self.s * self.tau * h
        if c <= 0:
            raise AnalysisError("right state is not a saddle (F'(u_r) >= s)")
        return 2.0 * c / (b + math.sqrt(b * b + 4.0 * a * c))


def _hermite_root(t0, y0, d0, t1, y1, d1, comp, level):
    """Locate ``y[comp] = level`` on the cubic Hermite interpolant of one step."""
    h = t1 - t0

    def interp(x):
        s = (x - t0) / h
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        return np.array([h00 * y0[k] + h10 * h * d0[k] + h01 * y1[k] + h11 * h * d1[k]
                         for k in range(2)])

    a, b = t0, t1
    fa = interp(a)[comp] - level
    fb = interp(b)[comp] - level
    if fa * fb > 0:
        return y1
    x = optimize.brentq(lambda t: interp(t)[comp] - level, a, b, xtol=1e-15 * max(1.0, abs(b)))
    return interp(x)


def solve_slope_ode(model: Model, u_r: float, u_bar: float, tau: float,
                    rtol: float = SHOOT_RTOL) -> SlopeProfile:
    """Integrate ``w(u)`` from the saddle at ``u_r`` towards ``u_bar``.

    ``mismatch`` is ``w(u_bar)`` when the trajectory reaches ``u_bar`` and
    ``-(u_bar - u_hit)`` when ``w`` (nearly) vanishes first at ``u_hit``, both
    made dimensionless.  It changes sign from negative to positive as ``tau``
    passes the value of the exact connection.
    """
    if not u_r < u_bar:
        raise DomainError("need u_r < u_bar")
    if not tau > 0:
        raise DomainError("tau must be positive")
    sys_ = _SlopeSystem(model, u_r, u_bar, tau)
    delta = 1e-6 * (u_bar - u_r)
    sigma = sys_.launch_slope()
    # Below the connecting tau the trajectory either turns back (w = 0) or
    # creeps into the middle equilibrium, which attracts in theta; a small
    # positive threshold catches both.  The absolute tolerance on w keeps the
    # integrator from chasing round-off once w is tiny.
    w_scale = sigma * (u_bar - u_r)
    w_floor = 1e-8 * w_scale

    ts, ys = [0.0], [np.array([u_r + delta, sigma * delta])]
    state = {"event": None}

    def solout(t, y):
        if t == ts[-1]:
            return 0
        ts.append(t)
        ys.append(np.array(y))
        if y[0] >= u_bar:
            state["event"] = "reach"
            return -1
        if y[1] <= w_floor:
            state["event"] = "stall"
            return -1
        return 0

    solver = integrate.ode(sys_.rhs)
    solver.set_integrator(SHOOT_METHOD, rtol=[rtol, rtol], atol=[1e-14 * (u_bar - u_r), 1e-12 * w_scale],
                          nsteps=10**6)
    solver.set_solout(solout)
    solver.set_initial_value(ys[0], 0.0)
    theta_max = 2.0 * math.log(1.0 / 1e-6) / sigma
    for _ in range(200):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            solver.integrate(theta_max)
        if state["event"] is not None:
            break
        code = solver.get_return_code()
        if code == -4:
            # the stiffness test fired; restarting resets it and the
            # explicit method is still efficient enough here
            solver.set_initial_value(ys[-1], ts[-1])
            continue
        if code < 0:
            raise AnalysisError(f"slope integration failed (code {code})")
        theta_max *= 2.0
    else:
        raise AnalysisError("slope trajectory neither reached u_bar nor stalled")
    t0, t1 = ts[-2], ts[-1]
    y0, y1 = ys[-2], ys[-1]
    d0, d1 = sys_.rhs(t0, y0), sys_.rhs(t1, y1)
    u = np.array([y[0] for y in ys])
    w = np.array([y[1] for y in ys])
    u[0], w[0] = u_r, 0.0
    reached = state["event"] == "reach"
    if reached:
        y_end = _hermite_root(t0, y0, d0, t1, y1, d1, 0, u_bar)
        mismatch = float(y_end[1]) / w_scale
        u_end = u_bar
        u[-1], w[-1] = u_bar, y_end[1]
    else:
        y_end = _hermite_root(t0, y0, d0, t1, y1, d1, 1, w_floor)
        u_end = float(y_end[0])
        mismatch = -(u_bar - u_end) / (u_bar - u_r)
        u[-1], w[-1] = u_end, 0.0
    return SlopeProfile(u=u, w=w, mismatch=mismatch, reached=reached, u_end=u_end)


def _mismatch(model, u_r, u_bar, tau):
    return solve_slope_ode(model, u_r, u_bar, tau).mismatch


def tau_for_plateau(model: Model, u_r: float, u_bar: float, guess: float = 1.0,
                    bracket=TAU_BRACKET, xtol=TAU_XTOL) -> float:
    """Shoot for the ``tau`` whose wave connects ``u_bar`` to ``u_r``.

    The root is bracketed by stepping a decade at a time from ``guess``
    (within ``bracket``) and then refined by Brent's method on ``log tau``.
    Very small ``tau`` makes the slope equation stiff, so the expansion
    never probes further below the root than one decade.
    Plateau heights at or below ``u_alpha`` have no such wave.
    """
    ua = u_alpha(model, u_r)
    if not ua < u_bar < 1.0:
        raise DomainError(f"u_bar must lie in (u_alpha, 1) = ({ua:.6g}, 1), got {u_bar}")
    lo_lim, hi_lim = math.log(bracket[0]), math.log(bracket[1])

    def fun(logtau):
        return _mismatch(model, u_r, u_bar, math.exp(logtau))

    x = min(max(math.log(guess), lo_lim), hi_lim)
    fx = fun(x)
    step = math.log(10.0) * (1.0 if fx < 0 else -1.0)
    while True:
        y = min(max(x + step, lo_lim), hi_lim)
        if y == x:
            raise AnalysisError(
                f"no sign change of the shooting mismatch for tau in {bracket} (u_bar={u_bar})")
        fy = fun(y)
        if fx * fy <= 0:
            break
        x, fx = y, fy
    a, b = sorted((x, y))
    root = optimize.brentq(fun, a, b, xtol=xtol * 0.5, rtol=xtol * 0.5)
    return math.exp(root)


def _cache_key(model, u0):
    return (model, float(u0))


@lru_cache(maxsize=256)
def _tau_star_cached(model, u0):
    ua = u_alpha(model, u0)
    t1 = tau_for_plateau(model, u0, ua * (1.0 + STAR_OFFSET))
    t2 = tau_for_plateau(model, u0, ua * (1.0 + 0.5 * STAR_OFFSET))
    return 2.0 * t2 - t1


def tau_star(model: Model, u0: float) -> float:
    """Bifurcation threshold: limit of ``tau(u_bar)`` as ``u_bar -> u_alpha``."""
    return _tau_star_cached(model, float(u0))


def u_bar_for_tau(model: Model, u0: float, tau: float, u_alpha_value: float | None = None,
                  xtol: float = 1e-12) -> float:
    """Plateau height ``u_bar(tau)`` for ``tau > tau_star``."""
    ua = u_alpha(model, u0) if u_alpha_value is None else u_alpha_value
    lo = ua * (1.0 + 1e-6)
    f_lo = _mismatch(model, u0, lo, tau)
    if f_lo <= 0:
        raise AnalysisError(f"tau={tau} does not exceed tau_star for u0={u0}")
    top = model.saturation_range()[1]
    hi = None
    for frac in (0.1, 0.2, 0.35, 0.5, 0.65, 0.8, 0.9, 0.95, 0.99, 0.999):
        cand = ua + frac * (top - ua)
        try:
            val = _mismatch(model, u0, cand, tau)
        except AnalysisError:
            break
        if val < 0:
            hi = cand
            break
        lo = cand
    if hi is None:
        raise AnalysisError(f"could not bracket u_bar for tau={tau}")
    return float(optimize.brentq(lambda ub: _mismatch(model, u0, ub, tau), lo, hi,
                                 xtol=xtol, rtol=1e-12))


def bifurcation_diagram(model: Model, u0: float, u_bar_grid, executor: Executor | None = None
                        ) -> BifurcationDiagram:
    """Sample ``tau(u_bar)`` and the companion ``u_under(tau)`` on a grid."""
    ua = u_alpha(model, u0)
    grid = sorted(float(u) for u in u_bar_grid)
    if grid and grid[0] <= ua:
        raise DomainError("u_bar grid must lie above u_alpha")
    mapper = executor.map if executor is not None else map
    taus = list(mapper(lambda ub: tau_for_plateau(model, u0, ub), grid))
    diagram = BifurcationDiagram(u0=u0, u_alpha=ua, tau_star=tau_star(model, u0))
    diagram.samples = list(zip(grid, taus))
    diagram.u_under_of_tau = [(t, u_under(model, u0, ub, ua)) for ub, t in diagram.samples]
    return diagram


# -- classification -----------------------------------------------------------

def _standard(model, u_B, u0, tau, digits=None):
    def spiral_of(u_l, u_r):
        if digits is not None:
            u_l, u_r = round(u_l, digits), round(u_r, digits)
        return tau_spiral(model, u_l, u_r)

    ua = u_alpha(model, u0)
    ts = tau_star(model, u0)
    u_bar = u_low = None
    if tau > ts:
        u_bar = u_bar_for_tau(model, u0, tau, ua)
        u_low = u_under(model, u0, u_bar, ua)
    if u_bar is None:
        spiral = spiral_of(u_B, u0)
        if u_B > ua:
            region, kind = Region.A1, WaveKind.MONOTONE_NO_PLATEAU
            s = shock_speed(model, ua, u0)
        else:
            oscill = spiral is not None and tau > spiral
            region = Region.C2 if oscill else Region.C1
            kind = WaveKind.MONOTONE_NO_PLATEAU
            s = shock_speed(model, u_B, u0)
    elif u_B >= u_bar:
        region, kind = Region.A2, WaveKind.MONOTONE_PLATEAU
        spiral = spiral_of(u_B, u_bar) if u_B > u_bar else None
        s = shock_speed(model, u_bar, u0)
    elif u_B > u_low:
        region, kind = Region.B, WaveKind.NON_MONOTONE_PLATEAU
        spiral = spiral_of(u_B, u_bar)
        s = shock_speed(model, u_bar, u0)
    else:
        spiral = spiral_of(u_B, u0)
        oscill = spiral is not None and tau > spiral
        region = Region.C2 if oscill else Region.C1
        kind = WaveKind.NON_MONOTONE_OVERSHOOT if oscill else WaveKind.MONOTONE_NO_PLATEAU
        s = shock_speed(model, u_B, u0)
    return TWResult(u_B=u_B, u0=u0, tau=tau, s=s, u_alpha=ua, tau_star=ts, tau_s=spiral,
                    u_under=u_low, u_bar=u_bar, region=region, description=kind)


def analyse(model: Model, u_B: float, u0: float, tau: float,
            digits: int | None = None) -> TWResult:
    """Full travelling-wave analysis of the Riemann data ``(u_B | u0)``.

    Decreasing data with ``u0`` below the inflection point are treated
    directly; increasing data with ``u0`` above it are reflected.

    ``tau_s`` is very sensitive to its end states when ``F'(u_l)`` is close
    to ``s``.  With ``digits`` set, it is evaluated from states rounded to
    that many decimals, which is how published tables are usually produced.
    """
    u_i = inflection_point(model)
    if u0 < u_i and u_B > u0:
        return _standard(model, u_B, u0, tau, digits)
    if u0 > u_i and u_B < u0:
        ref = model.reflected()
        if 1.0 - u0 < inflection_point(ref):
            r = _standard(ref, 1.0 - u_B, 1.0 - u0, tau, digits)
            return TWResult(
                u_B=u_B, u0=u0, tau=tau, s=r.s, u_alpha=1.0 - r.u_alpha, tau_star=r.tau_star,
                tau_s=r.tau_s,
                u_under=None if r.u_bar is None else 1.0 - r.u_bar,
                u_bar=None if r.u_under is None else 1.0 - r.u_under,
                region=r.region, description=_SWITCHED.get(r.description, r.description),
                switched=True)
    raise AnalysisError(
        f"unsupported configuration u_B={u_B}, u0={u0} (inflection point {u_i:.4f})")


def classify_wave(model: Model, u_B: float, u0: float, tau: float) -> WaveKind:
    return analyse(model, u_B, u0, tau).description
