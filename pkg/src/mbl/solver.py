"""Method-of-lines solver for the MBL equation on a moving mesh.

The physical PDE is written in Lagrangian form,

    (I - tau d/dx H d/dx)(udot - u_x xdot) + d/dx F + d/dx [H d/dx p_c] = 0,

and discretised conservatively: with ``q = udot - u_x xdot`` and interface
fluxes

    Phi_{i+1/2} = (F_i + F_{i+1})/2 + H_{i+1/2} (p_{i+1} - p_i)/dx_i
                  - tau H_{i+1/2} (q_{i+1} - q_i)/dx_i,

node ``i`` satisfies ``hbar_i q_i + Phi_{i+1/2} - Phi_{i-1/2} = 0`` with
``hbar_i = (dx_{i-1} + dx_i)/2``.  Every difference is the centred
second-order one on the non-uniform mesh, and the trapezoidal mass
``sum hbar_i u_i`` changes only through the end fluxes.

The unknowns are interleaved, ``y = (u_0, x_0, u_1, x_1, ...)``, so the
coupled physical/MMPDE system ``R(t, y, ydot) = 0`` has a banded Jacobian.
It is integrated with a variable-step, variable-order (1-2) BDF method,
Newton iterations and banded LU factorisations.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import lapack

from .errors import DomainError, IntegrationError, MeshError
from .meshing import (MMPDEConfig, MeshState, MonitorConfig, check_mesh, intensity,
                      mmpde_rows, monitor_values)
from .model import Model, Variant

H_FLOOR = 1e-14
CLIP_TOL = 1e-9
RTOL = 1e-6
ATOL = 1e-8


class BoundaryKind(str, enum.Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"


@dataclass(frozen=True)
class BoundaryConditions:
    """Boundary data for ``u``; mesh ends are always pinned.

    Dirichlet rows keep the end values of the initial profile
    (``udot = 0``); Neumann rows keep the end differences ``u_0 - u_1`` and
    ``u_N - u_{N-1}`` of the initial profile, which vanish for data that are
    flat at the ends (differentiated form, so no row is algebraic).
    """

    kind: BoundaryKind = BoundaryKind.DIRICHLET

    def __post_init__(self):
        object.__setattr__(self, "kind", BoundaryKind(self.kind))


class ProfileKind(str, enum.Enum):
    TANH_FRONT = "tanh-front"
    PIECEWISE_THREE_LEVEL = "piecewise-three-level"


@dataclass(frozen=True)
class InitialProfile:
    """Initial saturation.

    ``tanh-front``: ``u0 + (uB - u0)(1 - tanh(k (x - x0)))/2``.
    ``piecewise-three-level``: ``u1`` up to ``x1``, ``u2`` up to ``x2`` and
    ``u3`` beyond, with the jumps smoothed by the same ``tanh`` steepness.
    """

    kind: ProfileKind = ProfileKind.TANH_FRONT
    u_B: float = 0.75
    u0: float = 0.0
    x0: float = 0.0
    u1: float = 0.25
    u2: float = 0.85
    u3: float = 0.0
    x1: float = 0.75
    x2: float = 2.25
    steepness: float = 200.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ProfileKind(self.kind))
        for name in ("u_B", "u0", "u1", "u2", "u3"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name}={v} outside [0, 1]")
        if not self.steepness > 0:
            raise DomainError("steepness must be positive")
        if self.kind is ProfileKind.PIECEWISE_THREE_LEVEL and not self.x1 < self.x2:
            raise DomainError("need x1 < x2")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        k = self.steepness
        if self.kind is ProfileKind.TANH_FRONT:
            return self.u0 + 0.5 * (self.u_B - self.u0) * (1.0 - np.tanh(k * (x - self.x0)))
        step1 = 0.5 * (1.0 + np.tanh(k * (x - self.x1)))
        step2 = 0.5 * (1.0 + np.tanh(k * (x - self.x2)))
        return self.u1 + (self.u2 - self.u1) * step1 + (self.u3 - self.u2) * step2

    def check_domain(self, x_l, x_r):
        pts = (self.x0,) if self.kind is ProfileKind.TANH_FRONT else (self.x1, self.x2)
        for p in pts:
            if not x_l < p < x_r:
                raise DomainError(f"break point {p} outside the domain ({x_l}, {x_r})")


# -- physical discretisation ---------------------------------------------------------

def _constitutive(model: Model, u):
    """``F, H, p_c`` at nodes, clamping away from a singular capillary law."""
    if model.variant is Variant.BROOKS_COREY:
        lo = model.saturation_range()[0] + 1e-9
        u = np.clip(u, lo, 1.0)
    return model.flux(u), model.diffusion(u), model.pc(u)


def _nodal_slope(u, x):
    ux = np.empty_like(u)
    ux[1:-1] = (u[2:] - u[:-2]) / (x[2:] - x[:-2])
    ux[0] = (u[1] - u[0]) / (x[1] - x[0])
    ux[-1] = (u[-1] - u[-2]) / (x[-1] - x[-2])
    return ux


def interface_fluxes(model: Model, tau: float, u, x, q):
    """``Phi_{i+1/2}`` for ``i = 0..N-1``."""
    dx = np.diff(x)
    F, H, P = _constitutive(model, u)
    Hh = 0.5 * (H[1:] + H[:-1])
    Ht = np.maximum(Hh, H_FLOOR)
    return 0.5 * (F[1:] + F[:-1]) + Hh * np.diff(P) / dx - tau * Ht * np.diff(q) / dx


def physical_residual(model: Model, tau: float, u, x, udot, xdot) -> np.ndarray:
    """Residual of the Lagrangian MBL equation at the interior nodes ``1..N-1``."""
    u = np.asarray(u, dtype=float)
    x = np.asarray(x, dtype=float)
    dx = check_mesh(x)
    q = np.asarray(udot, dtype=float) - _nodal_slope(u, x) * np.asarray(xdot, dtype=float)
    phi = interface_fluxes(model, tau, u, x, q)
    hbar = 0.5 * (dx[1:] + dx[:-1])
    res = hbar * q[1:-1] + np.diff(phi)
    if not np.all(np.isfinite(res)):
        raise IntegrationError("non-finite physical residual")
    return res


def _boundary_rows(bc: BoundaryConditions, u, udot):
    if bc.kind is BoundaryKind.DIRICHLET:
        return udot[0], udot[-1]
    return udot[0] - udot[1], udot[-1] - udot[-2]


# -- problems -------------------------------------------------------------------------

@dataclass
class MovingMeshProblem:
    """The coupled physical PDE + smoothed MMPDE system on an interleaved grid."""

    model: Model
    tau: float
    monitor: MonitorConfig
    mmpde: MMPDEConfig
    bc: BoundaryConditions = field(default_factory=BoundaryConditions)

    lower = 5
    upper = 5

    def split(self, y):
        return y[0::2], y[1::2]

    def join(self, u, x):
        y = np.empty(2 * u.size)
        y[0::2] = u
        y[1::2] = x
        return y

    def residual(self, t, y, ydot, alpha=None):
        u, x = self.split(y)
        ud, xd = self.split(ydot)
        res = np.empty_like(y)
        res[2:-2:2] = physical_residual(self.model, self.tau, u, x, ud, xd)
        res[0], res[-2] = _boundary_rows(self.bc, u, ud)
        omega = monitor_values(self.monitor, u, x, alpha)
        res[1::2] = mmpde_rows(self.mmpde, x, xd, omega)
        return res

    def frozen_alpha(self, y):
        """Value of the global monitor intensity kept fixed in Jacobian probes."""
        if self.monitor.kind.value != "smoothed":
            return None
        return intensity(y[0::2], self.monitor.m)

    def weights(self, y, rtol, atol):
        u, x = self.split(y)
        length = x[-1] - x[0]
        sc = np.empty_like(y)
        sc[0::2] = atol + rtol * np.abs(u)
        sc[1::2] = atol * length + rtol * np.abs(x)
        return sc

    def check(self, y):
        check_mesh(y[1::2])


@dataclass
class UniformProblem:
    """The same physical discretisation on a fixed uniform mesh (``xdot = 0``)."""

    model: Model
    tau: float
    x: np.ndarray
    bc: BoundaryConditions = field(default_factory=BoundaryConditions)

    lower = 1
    upper = 1

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self._zeros = np.zeros_like(self.x)

    def split(self, y):
        return y, self.x

    def residual(self, t, y, ydot, alpha=None):
        res = np.empty_like(y)
        res[1:-1] = physical_residual(self.model, self.tau, y, self.x, ydot, self._zeros)
        res[0], res[-1] = _boundary_rows(self.bc, y, ydot)
        return res

    def frozen_alpha(self, y):
        return None

    def weights(self, y, rtol, atol):
        return atol + rtol * np.abs(y)

    def check(self, y):
        pass


def assemble_dae(problem: MovingMeshProblem, t: float, y, ydot) -> np.ndarray:
    """Full residual ``R(t, y, ydot)`` of the interleaved system."""
    return problem.residual(t, np.asarray(y, dtype=float), np.asarray(ydot, dtype=float))


# -- banded linear algebra --------------------------------------------------------------

def banded_jacobians(problem, t, y, ydot, r0=None, alpha=None):
    """Finite-difference ``dR/dy`` and ``dR/dydot`` in LAPACK band storage.

    Columns ``l + u + 1`` apart never share a row, so each matrix needs only
    ``l + u + 1`` residual evaluations.
    """
    l, u = problem.lower, problem.upper
    n = y.size
    width = l + u + 1
    if r0 is None:
        r0 = problem.residual(t, y, ydot, alpha)
    out = []
    for which in (0, 1):
        base = y if which == 0 else ydot
        ab = np.zeros((2 * l + u + 1, n))
        eps = math.sqrt(np.finfo(float).eps)
        h = eps * np.maximum(np.abs(base), 1.0 if which else np.abs(base).max() * 1e-3 + 1e-8)
        for c in range(width):
            cols = np.arange(c, n, width)
            pert = base.copy()
            pert[cols] += h[cols]
            hh = pert[cols] - base[cols]
            if which == 0:
                r = problem.residual(t, pert, ydot, alpha)
            else:
                r = problem.residual(t, y, pert, alpha)
            d = r - r0
            for j, step in zip(cols, hh):
                lo, hi = max(0, j - u), min(n, j + l + 1)
                ab[l + u + np.arange(lo, hi) - j, j] = d[lo:hi] / step
        out.append(ab)
    return out[0], out[1], r0


class _BandLU:
    def __init__(self, ab, l, u):
        self.l, self.u = l, u
        self.lu, self.piv, info = lapack.dgbtrf(ab, l, u)
        if info != 0:
            raise np.linalg.LinAlgError(f"singular banded matrix (info={info})")

    def solve(self, b):
        x, info = lapack.dgbtrs(self.lu, self.l, self.u, b, self.piv)
        if info != 0:
            raise np.linalg.LinAlgError("banded solve failed")
        return x


# -- time integration -----------------------------------------------------------------------

@dataclass
class SolverState:
    t: float
    u: np.ndarray
    x: np.ndarray
    h: float = 0.0
    order: int = 1
    error: float = 0.0

    @property
    def mesh(self) -> MeshState:
        return MeshState(x=self.x)


@dataclass
class StepRecord:
    t: float
    h: float
    order: int
    error: float
    newton: int
    mass: float
    mass_defect: float
    min_dx: float
    max_ratio: float
    min_ratio: float
    clip: float


@dataclass
class Series:
    """Snapshots at the requested output times plus per-step bookkeeping."""

    times: list = field(default_factory=list)
    u: list = field(default_factory=list)
    x: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    accepted: int = 0
    rejected: int = 0
    newton_failures: int = 0
    newton_iters: int = 0
    jacobians: int = 0
    wall_time: float = 0.0

    def snapshot(self, k=-1) -> SolverState:
        return SolverState(t=self.times[k], u=self.u[k], x=self.x[k])

    @property
    def final(self) -> SolverState:
        return self.snapshot(-1)

    def max_mass_defect(self) -> float:
        return max((s.mass_defect for s in self.steps), default=0.0)


def _lagrange_derivative_weights(ts):
    """Weights ``c_j`` with ``p'(ts[0]) = sum c_j y_j`` for the interpolant."""
    t0 = ts[0]
    k = len(ts)
    c = np.zeros(k)
    for j in range(k):
        # derivative of the j-th Lagrange basis polynomial at t0
        others = [ts[m] for m in range(k) if m != j]
        denom = np.prod([ts[j] - o for o in others])
        if j == 0:
            c[j] = sum(1.0 / (t0 - o) for o in others)
        else:
            num = np.prod([t0 - o for o in others if o != t0])
            c[j] = num / denom
    return c


def _extrapolate(ts, ys, t):
    """Value at ``t`` of the polynomial through ``(ts, ys)``."""
    out = np.zeros_like(ys[0])
    for j, (tj, yj) in enumerate(zip(ts, ys)):
        w = 1.0
        for m, tm in enumerate(ts):
            if m != j:
                w *= (t - tm) / (tj - tm)
        out += w * yj
    return out


def _mass(problem, y):
    u, x = problem.split(y)
    return float(np.sum(0.5 * (u[1:] + u[:-1]) * np.diff(x)))


def _mass_rate(problem, y, ydot):
    """Exact semi-discrete ``dM/dt``: end fluxes plus the end half cells."""
    u, x = problem.split(y)
    ud, xd = problem.split(ydot)
    if isinstance(problem, UniformProblem):
        xd = np.zeros_like(x)
    q = ud - _nodal_slope(u, x) * xd
    phi = interface_fluxes(problem.model, problem.tau, u, x, q)
    dx = np.diff(x)
    return float(phi[0] - phi[-1] + 0.5 * dx[0] * q[0] + 0.5 * dx[-1] * q[-1])


def _rms(v, w):
    return float(np.sqrt(np.mean((v / w) ** 2)))


def consistent_ydot(problem, t, y):
    """Solve ``R(t, y, ydot) = 0`` for ``ydot`` (the system is linear in it)."""
    zero = np.zeros_like(y)
    alpha = problem.frozen_alpha(y)
    r0 = problem.residual(t, y, zero, alpha)
    _, jd, _ = banded_jacobians(problem, t, y, zero, r0, alpha)
    lu = _BandLU(jd, problem.lower, problem.upper)
    yd = lu.solve(-r0)
    # one Newton correction with the true (unfrozen) residual
    r1 = problem.residual(t, y, yd)
    return yd + lu.solve(-r1)


def integrate(problem, y0, t_span, output_times: Sequence[float] | None = None,
              rtol: float = RTOL, atol: float = ATOL, h0: float | None = None,
              h_min: float | None = None, max_steps: int = 2_000_000,
              on_step: Callable | None = None, max_order: int = 2,
              wall_limit: float | None = None) -> Series:
    """Variable-step BDF1/BDF2 integration of ``R(t, y, ydot) = 0``.

    Newton iterations reuse the Jacobian while they converge quickly; a new
    one is formed on slow convergence or failure.  The local error is
    estimated from the predictor-corrector difference and controlled in
    the weighted RMS norm.  Node crossing counts as a Newton failure.
    """
    t0, t_end = map(float, t_span)
    if not t_end > t0:
        raise DomainError("t_span must be increasing")
    outs = sorted(set(float(t) for t in (output_times or [])) | {t_end})
    outs = [t for t in outs if t0 < t <= t_end]
    y = np.array(y0, dtype=float)
    problem.check(y)
    series = Series()
    series.times.append(t0)
    u, x = problem.split(y)
    series.u.append(u.copy())
    series.x.append(np.array(x, dtype=float))
    start = time.perf_counter()

    ydot = consistent_ydot(problem, t0, y)
    span = t_end - t0
    w = problem.weights(y, rtol, atol)
    if h0 is None:
        nrm = _rms(ydot, w)
        h0 = min(0.5 * span, 0.01 / max(nrm, 1e-12))
        h0 = max(h0, 1e-12 * span)
    h_min = h_min if h_min is not None else 1e-14 * max(span, abs(t_end))
    h = min(h0, outs[0] - t0)

    hist_t = [t0]
    hist_y = [y.copy()]
    order = 1
    jac = None  # (J_y, J_ydot, y_at)
    lu = None
    lu_key = None
    mass = _mass(problem, y)
    rate = _mass_rate(problem, y, ydot)
    fails = 0
    out_idx = 0
    t = t0

    for _ in range(max_steps):
        if wall_limit is not None and time.perf_counter() - start > wall_limit:
            raise IntegrationError(f"wall-clock limit reached at t={t:.6g}",
                                   state=SolverState(t=t, u=problem.split(y)[0].copy(),
                                                     x=np.array(problem.split(y)[1])))
        t_new = t + h
        k = min(order, len(hist_t))
        ts = [t_new] + hist_t[-1:-k - 1:-1]
        c = _lagrange_derivative_weights(ts)
        past = sum(c[j] * hist_y[-j] for j in range(1, k + 1))
        if len(hist_t) == 1:
            y_pred = y + h * ydot
        else:
            kp = min(k + 1, len(hist_t))
            y_pred = _extrapolate(hist_t[-kp:], hist_y[-kp:], t_new)

        w = problem.weights(y, rtol, atol)
        converged = False
        newton = 0
        fresh = False
        for attempt in range(2):
            if jac is None:
                alpha = problem.frozen_alpha(y_pred)
                jy, jd, _ = banded_jacobians(problem, t_new, y_pred, c[0] * y_pred + past,
                                             alpha=alpha)
                jac = (jy, jd)
                series.jacobians += 1
                lu_key = None
                fresh = True
            if lu_key != c[0]:
                try:
                    lu = _BandLU(jac[0] + c[0] * jac[1], problem.lower, problem.upper)
                except np.linalg.LinAlgError:
                    break
                lu_key = c[0]
            yn = y_pred.copy()
            prev = None
            ok = False
            for it in range(6):
                newton += 1
                try:
                    problem.check(yn)
                    r = problem.residual(t_new, yn, c[0] * yn + past)
                except (MeshError, IntegrationError, FloatingPointError, ValueError):
                    break
                dy = lu.solve(-r)
                yn = yn + dy
                nrm = _rms(dy, w)
                if not np.isfinite(nrm):
                    break
                if prev is not None:
                    ratio = nrm / prev
                    if ratio > 0.9:
                        break
                    if ratio / (1.0 - ratio) * nrm < 0.03 or nrm < 1e-4:
                        ok = True
                        break
                elif nrm < 1e-4:
                    ok = True
                    break
                prev = nrm
            if ok:
                try:
                    problem.check(yn)
                    ok = True
                except MeshError:
                    ok = False
            if ok:
                converged = True
                break
            if fresh:
                break
            jac = None
        series.newton_iters += newton

        if not converged:
            series.rejected += 1
            series.newton_failures += 1
            fails += 1
            jac = None
            h *= 0.25
            order = 1
            if h < h_min:
                raise IntegrationError(
                    f"Newton failed to converge at t={t:.6g} with h={h:.3e}",
                    state=SolverState(t=t, u=problem.split(y)[0].copy(),
                                      x=np.array(problem.split(y)[1])))
            continue

        # local error estimate from the predictor
        if len(hist_t) == 1:
            cerr = 0.5
        else:
            cerr = h / (t_new - hist_t[-min(k + 1, len(hist_t))])
        err = _rms(cerr * (yn - y_pred), w)
        if err > 1.0:
            series.rejected += 1
            fails += 1
            h *= max(0.2, 0.9 * err ** (-1.0 / (k + 1)))
            if fails >= 3:
                order = 1
            if h < h_min:
                raise IntegrationError(
                    f"step size underflow at t={t:.6g}",
                    state=SolverState(t=t, u=problem.split(y)[0].copy(),
                                      x=np.array(problem.split(y)[1])))
            continue

        # accept
        fails = 0
        ydot_new = c[0] * yn + past
        u_new, x_new = problem.split(yn)
        clip = float(max(0.0, -u_new.min(), u_new.max() - 1.0))
        if clip > CLIP_TOL:
            u_clipped = np.clip(u_new, -CLIP_TOL, 1.0 + CLIP_TOL)
            if isinstance(problem, UniformProblem):
                yn = u_clipped
            else:
                yn = yn.copy()
                yn[0::2] = u_clipped
        mass_new = _mass(problem, yn)
        rate_new = _mass_rate(problem, yn, ydot_new)
        defect = abs((mass_new - mass) - 0.5 * h * (rate + rate_new)) / max(abs(mass_new), 1e-300)
        y, ydot, t = yn, ydot_new, t_new
        mass, rate = mass_new, rate_new
        hist_t.append(t)
        hist_y.append(y.copy())
        if len(hist_t) > 3:
            hist_t.pop(0)
            hist_y.pop(0)
        series.accepted += 1
        x_cur = problem.split(y)[1]
        dxs = np.diff(x_cur)
        ratios = dxs[1:] / dxs[:-1]
        rec = StepRecord(t=t, h=h, order=k, error=err, newton=newton, mass=mass,
                         mass_defect=defect, min_dx=float(dxs.min()),
                         max_ratio=float(ratios.max()), min_ratio=float(ratios.min()),
                         clip=clip)
        series.steps.append(rec)
        if on_step is not None:
            on_step(t, y, rec)

        # output
        reached = False
        if out_idx < len(outs) and t >= outs[out_idx] - 1e-12 * max(1.0, abs(t)):
            u_o, x_o = problem.split(y)
            series.times.append(t)
            series.u.append(np.array(u_o, dtype=float))
            series.x.append(np.array(x_o, dtype=float))
            out_idx += 1
            reached = True
        if out_idx >= len(outs):
            break

        # next step size and order
        factor = min(2.0, max(0.2, 0.9 * max(err, 1e-10) ** (-1.0 / (k + 1))))
        if order < max_order and len(hist_t) >= 3:
            order = 2
        h = min(h * factor, outs[out_idx] - t)
        if outs[out_idx] - t - h < 1e-3 * h:
            h = outs[out_idx] - t
    else:
        raise IntegrationError("maximum number of steps exceeded")
    series.wall_time = time.perf_counter() - start
    return series


# -- drivers ---------------------------------------------------------------------------------

def moving_mesh_initial_state(problem: MovingMeshProblem, profile: InitialProfile, x_l, x_r):
    from .meshing import initial_mesh
    mesh = initial_mesh(problem.monitor, problem.mmpde, profile, x_l, x_r)
    u = profile(mesh.x)
    return problem.join(u, mesh.x)


def solve_moving(model: Model, tau: float, profile: InitialProfile, domain, T: float,
                 monitor: MonitorConfig | None = None, mmpde: MMPDEConfig | None = None,
                 bc: BoundaryConditions | None = None, output_times=None,
                 rtol=RTOL, atol=ATOL, **kw) -> Series:
    """Moving-mesh solve of the MBL equation on ``domain`` up to time ``T``."""
    x_l, x_r = map(float, domain)
    profile.check_domain(x_l, x_r)
    monitor = monitor or MonitorConfig()
    mmpde = mmpde or MMPDEConfig(tau_mmpde=1e-3 * T)
    problem = MovingMeshProblem(model=model, tau=tau, monitor=monitor, mmpde=mmpde,
                                bc=bc or BoundaryConditions())
    y0 = moving_mesh_initial_state(problem, profile, x_l, x_r)
    return integrate(problem, y0, (0.0, T), output_times, rtol=rtol, atol=atol, **kw)


def uniform_reference(model: Model, tau: float, N: int, t_span, profile: InitialProfile,
                      domain, bc: BoundaryConditions | None = None, output_times=None,
                      rtol=RTOL, atol=ATOL, **kw) -> Series:
    """Brute-force oracle: same discretisation on a fixed uniform mesh."""
    x_l, x_r = map(float, domain)
    profile.check_domain(x_l, x_r)
    x = np.linspace(x_l, x_r, int(N) + 1)
    problem = UniformProblem(model=model, tau=tau, x=x, bc=bc or BoundaryConditions())
    return integrate(problem, profile(x), t_span, output_times, rtol=rtol, atol=atol, **kw)


def mesh_quality_history(series: Series) -> dict:
    """Extremes of the per-step mesh records."""
    if not series.steps:
        return {}
    return {
        "min_dx": min(s.min_dx for s in series.steps),
        "max_ratio": max(s.max_ratio for s in series.steps),
        "min_ratio": min(s.min_ratio for s in series.steps),
        "max_clip": max(s.clip for s in series.steps),
        "max_mass_defect": series.max_mass_defect(),
    }


# -- profile diagnostics ---------------------------------------------------------------------

FLAT_TOL = 2e-3
FLAT_MIN_FRACTION = 0.02
TOP_TOL = 1e-3
TOP_FRACTION = 5e-3
KNEE_RATIO = 1.1
FRONT_FRACTION = 0.1
SLOPE_NOISE = 0.2


@dataclass(frozen=True)
class FlatRun:
    """A maximal stretch of nodes whose values stay within ``FLAT_TOL``."""

    start: int
    stop: int
    level: float
    x_start: float
    x_stop: float


def flat_runs(x, u, tol: float = FLAT_TOL, min_length: float | None = None) -> list[FlatRun]:
    """Greedy left-to-right segmentation of ``u`` into flat runs."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if min_length is None:
        min_length = FLAT_MIN_FRACTION * (x[-1] - x[0])
    runs = []
    i, n = 0, u.size
    while i < n:
        lo = hi = u[i]
        j = i
        while j + 1 < n:
            lo2, hi2 = min(lo, u[j + 1]), max(hi, u[j + 1])
            if hi2 - lo2 > tol:
                break
            lo, hi, j = lo2, hi2, j + 1
        if x[j] - x[i] >= min_length:
            runs.append(FlatRun(i, j, float(np.median(u[i:j + 1])), float(x[i]), float(x[j])))
        i = j + 1
    return runs


@dataclass
class Diagnostics:
    """Features of a final-time profile; absent features are ``None``."""

    plateau_height: float | None
    basin_height: float | None
    max_neg_slope: float | None
    front_position: float | None
    morphology: str | None

    def as_dict(self) -> dict:
        return {"plateau_height": self.plateau_height, "basin_height": self.basin_height,
                "max_neg_slope": self.max_neg_slope, "front_position": self.front_position,
                "morphology": self.morphology}


def _top_width(x, u, k, delta):
    """Length of the stretch around node ``k`` where ``u >= u[k] - delta``."""
    a = b = k
    while a > 0 and u[a - 1] >= u[k] - delta:
        a -= 1
    while b < u.size - 1 and u[b + 1] >= u[k] - delta:
        b += 1
    return x[b] - x[a]


def diagnostics(x, u, tol: float = TOP_TOL, top_fraction: float = TOP_FRACTION,
                knee_ratio: float = KNEE_RATIO) -> Diagnostics:
    """Plateau, basin, steepest descent and position of the leading front.

    The leading front is the rightmost descent through half the height
    between the right state and the profile maximum.  Walking left from it
    across the steep part of ``-u_x`` and on to the next slope minimum gives
    the knee behind the front.  A knee that is a local maximum of ``u`` is a plateau when its top
    (within ``tol``) is at least ``top_fraction`` of the domain wide and an
    overshoot otherwise.  A knee that is a slope minimum, with a steeper
    rarefaction further back and a level drop above ``2 tol``, is a monotone
    plateau.  The basin is the lowest flat run lying below both neighbours.
    """
    from .travelling_wave import WaveKind

    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    length = x[-1] - x[0]
    runs = flat_runs(x, u)
    basin = None
    for r0, r1, r2 in zip(runs, runs[1:], runs[2:]):
        if r1.level < r0.level - 2 * FLAT_TOL and r1.level < r2.level - 2 * FLAT_TOL:
            basin = r1.level if basin is None else min(basin, r1.level)

    u_r = u[-1]
    if not u.max() - u_r > 2 * tol:
        return Diagnostics(None, basin, None, None, None)
    half = u_r + 0.5 * (u.max() - u_r)
    i_f = int(np.nonzero(u >= half)[0][-1])
    if i_f >= u.size - 1:
        return Diagnostics(None, basin, None, None, None)
    g = -np.diff(u) / np.diff(x)
    front = float(x[i_f] + (half - u[i_f]) * (x[i_f + 1] - x[i_f]) / (u[i_f + 1] - u[i_f]))
    # steepest part of the front: the positive-slope stretch through i_f.  A finely
    # resolved front wiggles in -u_x, so going left we first cross everything
    # steeper than FRONT_FRACTION of the peak, then follow the running slope
    # minimum until the slope exceeds it by a factor 1 + SLOPE_NOISE.
    lo, hi = i_f, i_f
    while hi + 1 < g.size and g[hi + 1] > 0:
        hi += 1
    peak = g[i_f:hi + 1].max()
    while lo > 0 and g[lo - 1] > FRONT_FRACTION * peak:
        lo -= 1
        peak = max(peak, g[lo])
    k = lo  # knee node: left end of the last interval of the front
    while lo > 0 and 0 < g[lo - 1] <= (1 + SLOPE_NOISE) * g[k]:
        lo -= 1
        if g[lo] < g[k]:
            k = lo
    max_neg_slope = float(g[k:hi + 1].max())
    behind = [r for r in runs if r.stop <= k and abs(r.level - u[k]) > 2 * tol]
    i_back = behind[-1].stop if behind else 0
    back_level = u[i_back]
    p = i_back + int(np.argmax(u[i_back:i_f + 1]))

    plateau = None
    if u[p] > back_level + 2 * tol:
        if _top_width(x, u, p, tol) >= top_fraction * length:
            plateau = float(u[p])
            kind = WaveKind.NON_MONOTONE_PLATEAU
        else:
            kind = WaveKind.NON_MONOTONE_OVERSHOOT
    else:
        kind = WaveKind.MONOTONE_NO_PLATEAU
        if k > i_back + 1 and back_level - u[k] > 2 * tol:
            g_back = g[i_back:k].max()
            if g_back > knee_ratio * max(g[k], 0.0):
                plateau = float(u[k])
                kind = WaveKind.MONOTONE_PLATEAU
    return Diagnostics(plateau, basin, max_neg_slope, front, kind.value)
