"""Constitutive functions of the modified Buckley-Leverett equation.

The saturation equation is

    u_t + F(u)_x = -[H(u) (p_c(u) - tau u_t)_x]_x

and every physics variant supplies the triple ``(F, H, p_c)`` together with
analytic derivatives.  Three variants are provided:

* :class:`SymmetricModel` -- S-shaped flux without gravity, constant ``H``.
* :class:`GravityModel` -- the same fractional flow with a gravity term.
* :class:`BrooksCoreyModel` -- the full dimensional model with Brooks-Corey
  relative permeabilities and capillary pressure, in SI units.

Model objects are frozen dataclasses; the methods are raw vectorised
evaluations without range checks.  The module-level functions
(:func:`flux`, :func:`pc`, ...) validate their input first.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, fields
from functools import cached_property

import numpy as np
from scipy import optimize

from .errors import AnalysisError, DomainError, SingularityError


class Variant(str, enum.Enum):
    SYMMETRIC = "symmetric"
    GRAVITY = "gravity"
    BROOKS_COREY = "brooks-corey"


def _ratio(a, da, d2a, b, db, d2b):
    """Return ``a/(a+b)`` and its first two derivatives."""
    s = a + b
    ds = da + db
    num = da * b - a * db
    dnum = d2a * b - a * d2b
    f = a / s
    df = num / s**2
    d2f = (dnum * s - 2.0 * num * ds) / s**3
    return f, df, d2f


class Model:
    """Common interface; subclasses implement the mobility pieces."""

    variant: Variant
    has_gravity = False

    # -- to be provided by subclasses ------------------------------------
    def _fractional(self, u):
        raise NotImplementedError

    def _carrier(self, u):
        """Return ``(k, k', k'')`` with ``F = f * k / phi``."""
        raise NotImplementedError

    porosity = 1.0

    # -- public evaluations ----------------------------------------------
    def fractional_flow(self, u):
        return self._fractional(np.asarray(u, dtype=float))[0]

    def flux(self, u):
        u = np.asarray(u, dtype=float)
        f = self._fractional(u)[0]
        k = self._carrier(u)[0]
        return f * k / self.porosity

    def flux_derivative(self, u):
        u = np.asarray(u, dtype=float)
        f, df, _ = self._fractional(u)
        k, dk, _ = self._carrier(u)
        return (df * k + f * dk) / self.porosity

    def flux_second_derivative(self, u):
        u = np.asarray(u, dtype=float)
        f, df, d2f = self._fractional(u)
        k, dk, d2k = self._carrier(u)
        return (d2f * k + 2.0 * df * dk + f * d2k) / self.porosity

    def diffusion(self, u):
        raise NotImplementedError

    def pc(self, u):
        raise NotImplementedError

    def pc_derivative(self, u):
        raise NotImplementedError

    def point_terms(self, u: float):
        """Scalar ``(F, H, p_c')`` at one saturation; used by the ODE shooting."""
        return (float(self.flux(u)), float(self.diffusion(u)), float(self.pc_derivative(u)))

    def reflected(self) -> "Model":
        """Model for ``v = 1 - u``; swaps the roles of increasing and decreasing waves."""
        return ReflectedModel(self)

    def saturation_range(self):
        """Closed interval on which all functions are finite."""
        return 0.0, 1.0


@dataclass(frozen=True)
class SymmetricModel(Model):
    """``F = u^2 / (u^2 + M (1-u)^2)``, ``H = eps^2``, ``p_c = -u / eps``."""

    M: float = 0.5
    eps: float = 1e-3
    variant = Variant.SYMMETRIC

    def __post_init__(self):
        if not self.M > 0:
            raise DomainError(f"M must be positive, got {self.M}")
        if not self.eps > 0:
            raise DomainError(f"eps must be positive, got {self.eps}")

    def _fractional(self, u):
        one = np.ones_like(u)
        return _ratio(u * u, 2.0 * u, 2.0 * one,
                      self.M * (1.0 - u) ** 2, -2.0 * self.M * (1.0 - u), 2.0 * self.M * one)

    def _carrier(self, u):
        one = np.ones_like(u)
        return one, 0.0 * one, 0.0 * one

    def diffusion(self, u):
        return np.full_like(np.asarray(u, dtype=float), self.eps**2)

    def point_terms(self, u):
        a = u * u
        f = a / (a + self.M * (1.0 - u) ** 2)
        return f * self._carrier_point(u), self.eps**2, -1.0 / self.eps

    def _carrier_point(self, u):
        return 1.0

    def pc(self, u):
        return -np.asarray(u, dtype=float) / self.eps

    def pc_derivative(self, u):
        return np.full_like(np.asarray(u, dtype=float), -1.0 / self.eps)


@dataclass(frozen=True)
class GravityModel(SymmetricModel):
    """Symmetric model with the flux multiplied by ``vT + C (1-u)^2``.

    The factor ``(1-u)^2`` is the non-wetting relative permeability, so
    ``F(u) = vT`` has the root ``u = sqrt(M vT / C)``.
    """

    M: float = 10.0
    eps: float = 1e-3
    vT: float = 0.6
    C: float = 10.0
    variant = Variant.GRAVITY
    has_gravity = True

    def __post_init__(self):
        super().__post_init__()
        if self.C < 0:
            raise DomainError(f"C must be non-negative, got {self.C}")

    def _carrier(self, u):
        return (self.vT + self.C * (1.0 - u) ** 2,
                -2.0 * self.C * (1.0 - u),
                2.0 * self.C * np.ones_like(u))

    def _carrier_point(self, u):
        return self.vT + self.C * (1.0 - u) ** 2

    def boundary_residual(self, u):
        return self.flux(u) - self.vT


# Table values for 20/30 sand; only the imbibition branch is used.
SAND_20_30 = {
    "kappa": 2.5e-3,
    "phi": 0.35,
    "drainage": {"u_re": 0.0, "lambda": 5.57, "p_d": 850.0},
    "imbibition": {"u_re": 0.0, "lambda": 5.0, "p_d": 490.0},
}


@dataclass(frozen=True)
class BrooksCoreyModel(Model):
    """Full model with Brooks-Corey constitutive laws (SI units)."""

    vT: float = 1.32e-4
    rho_w: float = 998.21
    rho_n: float = 1.2754
    mu_w: float = 1.002e-3
    mu_n: float = 1.82e-5
    g: float = 9.81
    kappa: float = SAND_20_30["kappa"]
    phi: float = SAND_20_30["phi"]
    u_re: float = SAND_20_30["imbibition"]["u_re"]
    lam: float = SAND_20_30["imbibition"]["lambda"]
    p_d: float = SAND_20_30["imbibition"]["p_d"]
    K: float = field(init=False)
    variant = Variant.BROOKS_COREY
    has_gravity = True

    def __post_init__(self):
        for name in ("vT", "rho_w", "rho_n", "mu_w", "mu_n", "g", "kappa", "phi", "lam", "p_d"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if not 0.0 <= self.u_re < 1.0:
            raise DomainError("u_re must lie in [0, 1)")
        object.__setattr__(self, "K", self.kappa * self.mu_w / (self.rho_w * self.g))

    @property
    def porosity(self):
        return self.phi

    def effective(self, u):
        return (np.asarray(u, dtype=float) - self.u_re) / (1.0 - self.u_re)

    def relperm_w(self, u):
        return self.effective(u) ** ((2.0 + 3.0 * self.lam) / self.lam)

    def relperm_n(self, u):
        e = self.effective(u)
        return (1.0 - e) ** 2 * (1.0 - e ** ((2.0 + self.lam) / self.lam))

    def _mobilities(self, u):
        e = (u - self.u_re) / (1.0 - self.u_re)
        c = 1.0 / (1.0 - self.u_re)
        p = (2.0 + 3.0 * self.lam) / self.lam
        q = (2.0 + self.lam) / self.lam
        aw = self.K / self.mu_w
        an = self.K / self.mu_n
        with np.errstate(divide="ignore", invalid="ignore"):
            kw = e**p
            dkw = p * e ** (p - 1.0) * c
            d2kw = p * (p - 1.0) * e ** (p - 2.0) * c * c
            eq = e**q
            kn = (1.0 - e) ** 2 * (1.0 - eq)
            dkn = (-2.0 * (1.0 - e) * (1.0 - eq) - (1.0 - e) ** 2 * q * e ** (q - 1.0)) * c
            d2kn = (2.0 * (1.0 - eq) + 4.0 * (1.0 - e) * q * e ** (q - 1.0)
                    - (1.0 - e) ** 2 * q * (q - 1.0) * e ** (q - 2.0)) * c * c
        return (aw * kw, aw * dkw, aw * d2kw), (an * kn, an * dkn, an * d2kn)

    def mobility_n(self, u):
        return self._mobilities(np.asarray(u, dtype=float))[1][0]

    def _fractional(self, u):
        (a, da, d2a), (b, db, d2b) = self._mobilities(u)
        return _ratio(a, da, d2a, b, db, d2b)

    def _carrier(self, u):
        _, (b, db, d2b) = self._mobilities(u)
        grav = (self.rho_w - self.rho_n) * self.g
        return self.vT + grav * b, grav * db, grav * d2b

    def diffusion(self, u):
        u = np.asarray(u, dtype=float)
        (a, _, _), (b, _, _) = self._mobilities(u)
        return b * a / (a + b) / self.phi

    def pc(self, u):
        e = self.effective(u)
        if np.any(e <= 0.0):
            raise SingularityError("Brooks-Corey capillary pressure is singular at u_e = 0")
        return self.p_d * e ** (-1.0 / self.lam)

    def pc_derivative(self, u):
        e = self.effective(u)
        if np.any(e <= 0.0):
            raise SingularityError("Brooks-Corey capillary pressure is singular at u_e = 0")
        return -self.p_d / self.lam * e ** (-1.0 / self.lam - 1.0) / (1.0 - self.u_re)

    def point_terms(self, u):
        e = (u - self.u_re) / (1.0 - self.u_re)
        if e <= 0.0:
            raise SingularityError("Brooks-Corey capillary pressure is singular at u_e = 0")
        kw = e ** ((2.0 + 3.0 * self.lam) / self.lam)
        kn = (1.0 - e) ** 2 * (1.0 - e ** ((2.0 + self.lam) / self.lam))
        a = self.K / self.mu_w * kw
        b = self.K / self.mu_n * kn
        f = a / (a + b)
        flux = f * (self.vT + (self.rho_w - self.rho_n) * self.g * b) / self.phi
        dpc = -self.p_d / self.lam * e ** (-1.0 / self.lam - 1.0) / (1.0 - self.u_re)
        return flux, b * f / self.phi, dpc

    def boundary_residual(self, u):
        # v_T f + lambda_n f (rho_w - rho_n) g - v_T, i.e. phi F(u) - v_T
        return self.phi * self.flux(u) - self.vT

    def saturation_range(self):
        return self.u_re, 1.0


@dataclass(frozen=True)
class ReflectedModel(Model):
    """The model seen through ``v = 1 - u``.

    ``G(v) = F(1) - F(1 - v)``, ``H~(v) = H(1 - v)``, ``p~(v) = -p_c(1 - v)``.
    Wave speeds and ``tau`` are unchanged by the reflection.
    """

    base: Model

    @property
    def variant(self):
        return self.base.variant

    def flux(self, v):
        v = np.asarray(v, dtype=float)
        return self.base.flux(1.0) - self.base.flux(1.0 - v)

    def flux_derivative(self, v):
        return self.base.flux_derivative(1.0 - np.asarray(v, dtype=float))

    def flux_second_derivative(self, v):
        return -self.base.flux_second_derivative(1.0 - np.asarray(v, dtype=float))

    def fractional_flow(self, v):
        return 1.0 - self.base.fractional_flow(1.0 - np.asarray(v, dtype=float))

    def diffusion(self, v):
        return self.base.diffusion(1.0 - np.asarray(v, dtype=float))

    def pc(self, v):
        return -self.base.pc(1.0 - np.asarray(v, dtype=float))

    def pc_derivative(self, v):
        return self.base.pc_derivative(1.0 - np.asarray(v, dtype=float))

    def point_terms(self, v):
        f, h, dpc = self.base.point_terms(1.0 - v)
        return self._flux_one - f, h, dpc

    @cached_property
    def _flux_one(self):
        return float(self.base.flux(1.0))

    def reflected(self):
        return self.base

    def saturation_range(self):
        lo, hi = self.base.saturation_range()
        return 1.0 - hi, 1.0 - lo


# -- validated module-level operations ---------------------------------------

_CLASSES = {}


@dataclass(frozen=True)
class ModelSpec:
    """Variant tag plus parameter record; :meth:`build` returns the model."""

    variant: Variant
    params: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        items = dict(self.params)
        object.__setattr__(self, "params", tuple(sorted(items.items())))
        self.build()

    @staticmethod
    def parameter_names(variant) -> tuple:
        cls = _CLASSES[Variant(variant)]
        return tuple(f.name for f in fields(cls) if f.init)

    def build(self) -> Model:
        cls = _CLASSES[self.variant]
        allowed = self.parameter_names(self.variant)
        for key, _ in self.params:
            if key not in allowed:
                raise DomainError(f"unknown {self.variant.value} parameter {key!r}")
        return cls(**dict(self.params))


def _checked(u, lo=0.0, hi=1.0):
    arr = np.asarray(u, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < lo) or np.any(arr > hi):
        raise DomainError(f"saturation outside [{lo}, {hi}]: {u!r}")
    return arr


def fractional_flow(model: Model, u):
    return model.fractional_flow(_checked(u))


def flux(model: Model, u):
    return model.flux(_checked(u))


def flux_derivative(model: Model, u):
    return model.flux_derivative(_checked(u))


def diffusion(model: Model, u):
    return model.diffusion(_checked(u))


def pc(model: Model, u):
    return model.pc(_checked(u))


def pc_derivative(model: Model, u):
    return model.pc_derivative(_checked(u))


def boundary_saturation(model: Model, lo=1e-9, tol=1e-13) -> float:
    """Saturation at which the inflow boundary is in equilibrium with ``vT``.

    Solves ``F(u) = vT`` (gravity model) or
    ``vT f + lambda_n f (rho_w - rho_n) g = vT`` (full model), returning the
    smallest root in ``(lo, 1]``.  ``u = 1`` is always a (degenerate) root of
    both equations, so the first sign change from the left is taken.
    """
    if not model.has_gravity:
        raise DomainError("boundary saturation needs a model with gravity and vT")
    res = model.boundary_residual
    grid = np.linspace(lo, 1.0, 2001)
    vals = res(grid)
    scale = abs(model.vT)
    crossing = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    if crossing.size == 0:
        if abs(vals[-1]) <= 1e-12 * scale:
            return 1.0
        raise AnalysisError(f"no boundary saturation in ({lo}, 1] for vT={model.vT}")
    k = crossing[0]
    a, b = grid[k], grid[k + 1]
    root = optimize.brentq(res, a, b, xtol=tol, rtol=4 * np.finfo(float).eps)
    # Newton polish on the analytic derivative
    for _ in range(3):
        r = float(res(root))
        if model.variant is Variant.BROOKS_COREY:
            d = model.phi * float(model.flux_derivative(root))
        else:
            d = float(model.flux_derivative(root))
        if d == 0.0:
            break
        step = r / d
        if not a <= root - step <= b:
            break
        root -= step
    return float(root)


_CLASSES.update({
    Variant.SYMMETRIC: SymmetricModel,
    Variant.GRAVITY: GravityModel,
    Variant.BROOKS_COREY: BrooksCoreyModel,
})
