"""Monitor functions and the smoothed moving-mesh PDE.

The mesh ``x_0 < x_1 < ... < x_N`` is driven towards equidistribution of a
monitor ``omega`` (one value per interval) by the smoothed MMPDE

    d/dxi (ndot~ / omega) = -(1/tau_s) d/dxi (n~ / omega),
    n~ = [I - sigma (sigma + 1) dxi^2 d^2/dxi^2] n,

with point concentration ``n = 1/x_xi``.  The temporal smoothing ``tau_s``
relaxes the mesh, the spatial smoothing ``sigma`` keeps neighbouring
intervals within a factor ``(sigma + 1)/sigma`` of each other.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg

from .errors import DomainError, MeshError

OMEGA_FLOOR = 1e-12
INITIAL_MESH_TOL = 1e-8
INITIAL_MESH_MAXITER = 50


class MonitorKind(str, enum.Enum):
    ARC_LENGTH = "arc-length"
    SMOOTHED = "smoothed"


@dataclass(frozen=True)
class MonitorConfig:
    kind: MonitorKind = MonitorKind.SMOOTHED
    alpha_arc: float = 1.0
    beta: float = 0.9
    m: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", MonitorKind(self.kind))
        if not 0.0 < self.beta < 1.0:
            raise DomainError(f"beta must lie in (0, 1), got {self.beta}")
        if int(self.m) != self.m or self.m < 1:
            raise DomainError(f"m must be a positive integer, got {self.m}")
        if not self.alpha_arc > 0:
            raise DomainError(f"alpha_arc must be positive, got {self.alpha_arc}")


class Closure(str, enum.Enum):
    """Treatment of the nodes next to the pinned ends.

    ``reflected`` applies the MMPDE there too, mirroring the end interval in
    the smoothing stencil; ``velocity`` imposes ``xdot_{i+1} - 2 xdot_i +
    xdot_{i-1} = 0`` instead.
    """

    REFLECTED = "reflected"
    VELOCITY = "velocity"


@dataclass(frozen=True)
class MMPDEConfig:
    N: int = 200
    tau_mmpde: float = 1e-3
    sigma: float = 2.0
    closure: Closure = Closure.REFLECTED

    def __post_init__(self):
        object.__setattr__(self, "closure", Closure(self.closure))
        if int(self.N) != self.N or self.N < 8:
            raise DomainError(f"N must be an integer >= 8, got {self.N}")
        if not self.tau_mmpde > 0:
            raise DomainError(f"tau_mmpde must be positive, got {self.tau_mmpde}")
        if self.sigma < 0:
            raise DomainError(f"sigma must be non-negative, got {self.sigma}")

    @property
    def gamma(self) -> float:
        return self.sigma * (self.sigma + 1.0)


@dataclass
class MeshState:
    x: np.ndarray
    xdot: np.ndarray = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if self.xdot is None:
            self.xdot = np.zeros_like(self.x)
        check_mesh(self.x)

    @property
    def N(self) -> int:
        return self.x.size - 1

    @property
    def spacing(self) -> np.ndarray:
        return np.diff(self.x)


def check_mesh(x) -> np.ndarray:
    """Return the interval lengths, raising :class:`MeshError` on crossing."""
    dx = np.diff(x)
    if not np.all(np.isfinite(dx)) or np.any(dx <= 0.0):
        k = int(np.argmin(dx)) if np.all(np.isfinite(dx)) else -1
        raise MeshError(f"mesh degenerated at interval {k} (min dx = {np.min(dx):.3e})")
    return dx


# -- monitors -----------------------------------------------------------------

def _floored(omega):
    return np.maximum(omega, OMEGA_FLOOR * max(float(np.max(omega)), 1.0))


def monitor_values(config: MonitorConfig, u, x, alpha: float | None = None) -> np.ndarray:
    """Monitor ``omega_{i+1/2}`` on each of the ``N`` intervals.

    ``alpha`` overrides the intensity ``alpha(t)`` of the smoothed monitor
    (it is otherwise computed from ``u``).
    """
    u = np.asarray(u, dtype=float)
    x = np.asarray(x, dtype=float)
    if u.shape != x.shape:
        raise DomainError("u and x must have the same length")
    dx = check_mesh(x)
    du = np.diff(u)
    if config.kind is MonitorKind.ARC_LENGTH:
        return _floored(np.sqrt(1.0 + config.alpha_arc * (du / dx) ** 2))
    return _floored(_smoothed(du, config.beta, config.m, alpha))


def intensity(u, m: int = 1) -> float:
    """``alpha(t)``: the discrete integral of ``|u_xi|^(1/m)`` over ``[0, 1]``."""
    du = np.diff(np.asarray(u, dtype=float))
    return float(np.sum(np.abs(du * du.size) ** (1.0 / m)) / du.size)


def _smoothed(du, beta, m, alpha=None):
    n = du.size
    g = np.abs(du * n) ** (1.0 / m)
    if alpha is None:
        alpha = g.sum() / n
    return (1.0 - beta) * alpha + beta * g


# -- smoothing operator ---------------------------------------------------------

def smooth(v, gamma: float, reflect: bool = False) -> np.ndarray:
    """Apply ``I - gamma * delta^2`` to interval values ``v``.

    Without ``reflect`` only the entries ``1..N-2`` (which have both
    neighbours) are returned; with it the end values are mirrored so that all
    ``N`` entries are returned.
    """
    v = np.asarray(v, dtype=float)
    if reflect:
        ext = np.concatenate(([v[0]], v, [v[-1]]))
        return ext[1:-1] - gamma * (ext[2:] - 2.0 * ext[1:-1] + ext[:-2])
    return v[1:-1] - gamma * (v[2:] - 2.0 * v[1:-1] + v[:-2])


def mmpde_residual(config: MMPDEConfig, mesh: MeshState, omega) -> np.ndarray:
    """Residual of the discrete smoothed MMPDE at every node ``0..N``.

    Interior rows hold the MMPDE proper (see :class:`Closure` for the rows
    next to the ends) and rows ``0``, ``N`` pin the end nodes
    (``xdot = 0``).
    """
    return mmpde_rows(config, mesh.x, mesh.xdot, omega)


def mmpde_rows(config: MMPDEConfig, x, xd, omega) -> np.ndarray:
    """Array form of :func:`mmpde_residual` used inside the DAE residual."""
    dx = check_mesh(x)
    omega = np.asarray(omega, dtype=float)
    gamma = config.gamma
    res = np.empty_like(x)
    n, ndot = 1.0 / dx, -np.diff(xd) / dx**2
    if config.closure is Closure.REFLECTED:
        sn = smooth(n, gamma, reflect=True) / omega
        snd = smooth(ndot, gamma, reflect=True) / omega
        res[1:-1] = (snd[1:] - snd[:-1]) + (sn[1:] - sn[:-1]) / config.tau_mmpde
    else:
        # smoothed point concentrations on intervals 1..N-2
        sn = smooth(n, gamma) / omega[1:-1]
        snd = smooth(ndot, gamma) / omega[1:-1]
        res[2:-2] = (snd[1:] - snd[:-1]) + (sn[1:] - sn[:-1]) / config.tau_mmpde
        res[1] = xd[2] - 2.0 * xd[1] + xd[0]
        res[-2] = xd[-1] - 2.0 * xd[-2] + xd[-3]
    res[0] = xd[0]
    res[-1] = xd[-1]
    return res


# -- diagnostics --------------------------------------------------------------------

@dataclass
class QualityReport:
    max_ratio: float
    min_ratio: float
    equidistribution_defect: float
    min_dx: float
    quasi_uniform: bool
    bounds: tuple = field(default=(0.0, np.inf))

    def as_dict(self) -> dict:
        return {"max_ratio": self.max_ratio, "min_ratio": self.min_ratio,
                "equidistribution_defect": self.equidistribution_defect,
                "min_dx": self.min_dx, "quasi_uniform": self.quasi_uniform}


def quality_report(mesh: MeshState | np.ndarray, omega, config: MMPDEConfig | None = None,
                   slack: float = 0.05) -> QualityReport:
    """Adjacent-interval ratios, equidistribution defect and smallest interval.

    ``quasi_uniform`` checks ``sigma/(sigma+1) <= dx_{i+1}/dx_i <=
    (sigma+1)/sigma`` with the given relative ``slack``.
    """
    x = mesh.x if isinstance(mesh, MeshState) else np.asarray(mesh, dtype=float)
    dx = check_mesh(x)
    ratio = dx[1:] / dx[:-1]
    mass = np.asarray(omega, dtype=float) * dx
    c = mass.mean()
    defect = float(np.max(np.abs(mass - c)) / c)
    if config is not None and config.sigma > 0:
        lo = config.sigma / (config.sigma + 1.0) * (1.0 - slack)
        hi = (config.sigma + 1.0) / config.sigma * (1.0 + slack)
    else:
        lo, hi = 0.0, np.inf
    ok = bool(ratio.min() >= lo and ratio.max() <= hi)
    return QualityReport(max_ratio=float(ratio.max()), min_ratio=float(ratio.min()),
                         equidistribution_defect=defect, min_dx=float(dx.min()),
                         quasi_uniform=ok, bounds=(lo, hi))


def critical_fraction(u, beta: float = 0.9) -> float:
    """Fraction of intervals in the smallest set holding ``beta`` of the variation.

    The intervals are ranked by ``|u_{i+1} - u_i|`` (the discrete ``|u_xi|``
    mass) and the fewest needed to reach ``beta`` of the total are counted.
    Returns ``nan`` for a constant profile.
    """
    du = np.sort(np.abs(np.diff(np.asarray(u, dtype=float))))[::-1]
    total = du.sum()
    if total == 0.0:
        return float("nan")
    k = int(np.searchsorted(np.cumsum(du), beta * total * (1.0 - 1e-12))) + 1
    return k / du.size


# -- initial mesh ----------------------------------------------------------------

def _fine_density(monitor: MonitorConfig, profile, x_l, x_r, N, fine=50):
    """The x-form of the monitor on a fine grid (cell-centred values).

    The smoothed monitor becomes ``(1 - beta) mean(|u_x|^(1/m)) + beta
    |u_x|^(1/m)`` and the arc-length monitor is used as is; both are
    independent of the mesh being built.
    """
    xf = np.linspace(x_l, x_r, fine * N + 1)
    uf = np.asarray(profile(xf), dtype=float)
    ux = np.abs(np.diff(uf) / np.diff(xf))
    if monitor.kind is MonitorKind.ARC_LENGTH:
        rho = np.sqrt(1.0 + monitor.alpha_arc * ux**2)
    else:
        g = ux ** (1.0 / monitor.m)
        rho = (1.0 - monitor.beta) * g.mean() + monitor.beta * g
    return xf, rho


def _graded_mesh(xf, rho, N, grade):
    """Equidistribute ``1/h`` where ``h = 1/rho`` is limited to slope ``grade``."""
    xc = 0.5 * (xf[1:] + xf[:-1])
    h = 1.0 / rho
    h = np.minimum(h, grade * xc + np.minimum.accumulate(h - grade * xc))
    h = np.minimum(h, np.minimum.accumulate((h + grade * xc)[::-1])[::-1] - grade * xc)
    cum = np.concatenate(([0.0], np.cumsum(np.diff(xf) / h)))
    x = np.interp(np.linspace(0.0, cum[-1], N + 1), cum, xf)
    x[0], x[-1] = xf[0], xf[-1]
    return x


def initial_mesh(monitor: MonitorConfig, mmpde: MMPDEConfig,
                 profile: Callable[[np.ndarray], np.ndarray], x_l: float, x_r: float,
                 tol: float = INITIAL_MESH_TOL, maxiter: int = INITIAL_MESH_MAXITER
                 ) -> MeshState:
    """Equidistributing, quasi-uniform mesh for the initial profile.

    The monitor is evaluated on a fine grid and equidistributed exactly by
    inverting its cumulative integral.  To respect the quasi-uniformity
    bound of the smoothed MMPDE, the local cell size ``1/omega`` is first
    limited to a maximal slope; that slope is found by bisection (to ``tol``)
    as the largest one whose mesh keeps adjacent ratios inside
    ``[sigma/(sigma+1), (sigma+1)/sigma]``.  Falls back to a uniform mesh when
    no admissible grading is found within ``maxiter`` bisection steps.
    """
    if not x_r > x_l:
        raise DomainError("need x_l < x_r")
    N = mmpde.N
    uniform = np.linspace(x_l, x_r, N + 1)
    xf, rho = _fine_density(monitor, profile, x_l, x_r, N)
    if np.ptp(rho) <= 1e-12 * rho.max():
        return MeshState(x=uniform)
    if mmpde.sigma == 0:
        return MeshState(x=_graded_mesh(xf, rho, N, np.inf))
    bound = 1.0 + 0.95 * (1.0 / mmpde.sigma)

    def ok(grade):
        x = _graded_mesh(xf, rho, N, grade)
        dx = np.diff(x)
        if np.any(dx <= 0):
            return False, x
        r = dx[1:] / dx[:-1]
        return bool(r.max() <= bound and r.min() >= 1.0 / bound), x

    good, x = ok(1e6)
    if good:
        return MeshState(x=x)
    lo, hi = math.log(1e-8), math.log(1e6)
    best = None
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        good, x = ok(math.exp(mid))
        if good:
            lo, best = mid, x
        else:
            hi = mid
        if hi - lo <= tol:
            break
    return MeshState(x=uniform if best is None else best)
