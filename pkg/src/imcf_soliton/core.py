"""Problem data and pointwise formulas for rotationally symmetric IMCF solitons.

The hypersurface is the revolution graph ``(r(y) * omega, y)`` in R^n x R with
``omega`` on the unit sphere S^{n-1}.  Its radius function obeys

    r'' / (1 + r'^2) = (n - 1) / r - (1 + r'^2) / (lam * (r - y r'))

and everything here is a pure function of ``Params`` and a phase point
``State = (y, r, r')``.  All functions accept scalars or numpy arrays in the
``State`` fields.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DomainError, ParamError

ArrayLike = Union[float, np.ndarray]

#: |lam * (n - 1) - 1| at or below this is treated as the critical cylinder.
CRITICAL_RTOL = 1e-12
#: hard relative floor on the denominator lam * w.
DENOM_FLOOR = 1e-300


class Regime(str, enum.Enum):
    EXPANDER = "Expander"
    CRITICAL_CYLINDER = "CriticalCylinder"
    CONTRACTING = "Contracting"
    NEGATIVE_LAMBDA = "NegativeLambda"


@dataclass(frozen=True)
class Params:
    """Dimension ``n`` (n >= 2), soliton constant ``lam`` and initial radius ``mu``."""

    n: int
    lam: float
    mu: float

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n:
            raise ParamError(f"n must be an integer, got {self.n!r}", field="n")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "mu", float(self.mu))
        if self.n < 2:
            raise ParamError(f"n must be >= 2, got {self.n}", field="n")
        if not math.isfinite(self.lam) or self.lam == 0.0:
            raise ParamError(f"lambda must be finite and nonzero, got {self.lam}", field="lambda")
        if not math.isfinite(self.mu) or self.mu <= 0.0:
            raise ParamError(f"mu must be finite and > 0, got {self.mu}", field="mu")

    @property
    def regime(self) -> Regime:
        return classify_regime(self)

    @property
    def initial_curvature(self) -> float:
        """Closed-form r''(0) = (n - 1 - 1/lam) / mu."""
        return (self.n - 1 - 1.0 / self.lam) / self.mu


@dataclass(frozen=True)
class State:
    y: ArrayLike
    r: ArrayLike
    rp: ArrayLike


@dataclass(frozen=True)
class DerivedState:
    rpp: ArrayLike
    rppp: ArrayLike
    w: ArrayLike
    H: ArrayLike


def classify_regime(p: Params) -> Regime:
    if p.lam < 0:
        return Regime.NEGATIVE_LAMBDA
    excess = p.lam * (p.n - 1) - 1.0
    if abs(excess) <= CRITICAL_RTOL:
        return Regime.CRITICAL_CYLINDER
    return Regime.EXPANDER if excess > 0 else Regime.CONTRACTING


def structural_w(s: State) -> ArrayLike:
    """w = r - y r'; stays bounded away from zero along expander profiles."""
    return s.r - s.y * s.rp


def _check_domain(p: Params, s: State) -> ArrayLike:
    w = structural_w(s)
    r = np.asarray(s.r)
    if np.any(~(r > 0)):
        raise DomainError(f"radius left the domain r > 0 (min r = {np.min(r)!r})")
    floor = DENOM_FLOOR * (1.0 + abs(p.lam) * (np.abs(s.r) + np.abs(s.y * s.rp)))
    if np.any(~(np.abs(p.lam * w) >= floor)):
        raise DomainError("denominator lam * (r - y r') vanished")
    return w


def rhs(p: Params, s: State) -> ArrayLike:
    """Second derivative r'' dictated by the profile equation."""
    w = _check_domain(p, s)
    q = 1.0 + s.rp * s.rp
    return q * ((p.n - 1) / s.r - q / (p.lam * w))


def third_derivative(p: Params, s: State) -> ArrayLike:
    """Exact derivative of ``rhs`` along a solution.

    Where r'' = 0 this collapses to -(1 + r'^2)(n - 1) r' / r^2, the quantity
    that forces r'' to cross zero downward at most once.
    """
    w = _check_domain(p, s)
    rp, r, y = s.rp, s.r, s.y
    q = 1.0 + rp * rp
    rpp = q * ((p.n - 1) / r - q / (p.lam * w))
    lw = p.lam * w
    return q * (
        2.0 * rp * rpp * rpp / (q * q)
        - (p.n - 1) * rp / (r * r)
        - 2.0 * rp * rpp / lw
        - y * q * rpp / (lw * w)
    )


def mean_curvature(p: Params, s: State) -> ArrayLike:
    """Mean curvature of the revolution hypersurface, interior-normal convention.

    Sum of n - 1 parallel curvatures 1/(r sqrt(1+r'^2)) and the meridian
    curvature -r''/(1+r'^2)^{3/2}.
    """
    rpp = rhs(p, s)
    q = 1.0 + s.rp * s.rp
    return (p.n - 1) / (s.r * np.sqrt(q)) - rpp / q**1.5


def soliton_residual(p: Params, s: State) -> ArrayLike:
    """lam * H * <X, -nu> - 1 with <X, nu> = -(r - y r') / sqrt(1 + r'^2).

    Vanishes identically when r'' comes from :func:`rhs`; callers perturbing
    the state see a nonzero value.
    """
    w = structural_w(s)
    H = mean_curvature(p, s)
    return p.lam * H * w / np.sqrt(1.0 + s.rp * s.rp) - 1.0


def soliton_residual_with_rpp(p: Params, s: State, rpp: ArrayLike) -> ArrayLike:
    """Residual of the geometric identity for an externally supplied r''."""
    w = _check_domain(p, s)
    q = 1.0 + s.rp * s.rp
    H = (p.n - 1) / (s.r * np.sqrt(q)) - rpp / q**1.5
    return p.lam * H * w / np.sqrt(q) - 1.0


def yform_residual(p: Params, r: ArrayLike, y: ArrayLike, y_r: ArrayLike, y_rr: ArrayLike) -> ArrayLike:
    """Left side of the graph form y_rr + (n-1)/r (1+y_r^2) y_r - (1+y_r^2)^2 / (lam (r y_r - y))."""
    r = np.asarray(r, dtype=float)
    if np.any(~(r > 0)):
        raise DomainError("radius left the domain r > 0")
    if not (np.all(np.isfinite(y_r)) and np.all(np.isfinite(y_rr))):
        raise DomainError("y(r) data must be finite; a flat stretch of r(y) cannot be inverted")
    d = r * y_r - y
    floor = DENOM_FLOOR * (1.0 + abs(p.lam) * (np.abs(r * y_r) + np.abs(y)))
    if np.any(~(np.abs(p.lam * d) >= floor)):
        raise DomainError("denominator lam * (r y_r - y) vanished")
    q = 1.0 + y_r * y_r
    return y_rr + (p.n - 1) / r * q * y_r - q * q / (p.lam * d)


def derived_state(p: Params, s: State) -> DerivedState:
    return DerivedState(
        rpp=rhs(p, s),
        rppp=third_derivative(p, s),
        w=structural_w(s),
        H=mean_curvature(p, s),
    )
