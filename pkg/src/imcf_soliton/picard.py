"""Constructive local solution near y = 0 by Picard iteration.

The first-order system g' = h, h' = F(s, g, h) with g(0) = mu, h(0) = 0 is
recast as the integral map

    Phi_1(g, h)(y) = mu + int_0^y h
    Phi_2(g, h)(y) = int_0^y (1 + h^2) ((n - 1)/g - (1 + h^2)/(lam (g - s h))) ds

on pairs of continuous functions over [0, eps], normed by the larger of the two
sup norms.  On the closed ball of radius eta around (mu, 0) the map is a
1/2-contraction once eps <= eps2, with eps2 given in closed form by
:func:`contraction_constants`.  Integrals use the composite trapezoid rule on
a uniform grid; the rule has positive weights summing to y, so every bound
used for the continuous map carries over to the discrete one.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Params
from .errors import DomainError, NoConvergence, ParamError

DEFAULT_POINTS = 256
#: slack granted to the contraction ratio on top of 1/2.
QUADRATURE_SLACK = 1e-3


@dataclass(frozen=True)
class ContractionConstants:
    eta: float
    eps1: float
    c2: float
    c3: float
    eps2: float


@dataclass(frozen=True, eq=False)
class GridPair:
    """Sampled pair (g, h) on a grid that starts at 0."""

    grid: np.ndarray
    g: np.ndarray
    h: np.ndarray

    @property
    def eps(self) -> float:
        return float(self.grid[-1])

    def distance(self, other: "GridPair") -> float:
        return max(float(np.max(np.abs(self.g - other.g))), float(np.max(np.abs(self.h - other.h))))

    def ball_radius(self, mu: float) -> float:
        """Distance to the centre (mu, 0) of the ball."""
        return max(float(np.max(np.abs(self.g - mu))), float(np.max(np.abs(self.h))))


def contraction_constants(p: Params, eta: float | None = None) -> ContractionConstants:
    if eta is None:
        eta = p.mu / 4.0
    if not (0.0 < eta <= p.mu / 4.0):
        raise ParamError(f"eta must lie in (0, mu/4] = (0, {p.mu / 4.0}], got {eta}", field="eta")
    n1, mu, al = p.n - 1, p.mu, abs(p.lam)
    e2 = 1.0 + eta * eta
    bracket = 4.0 * n1 / (3.0 * mu) + 2.0 * e2 / (al * mu)
    eps1 = min(0.5, eta / e2 / bracket)
    c2 = 2.0 * eta * bracket + 16.0 * n1 * e2 / (9.0 * mu * mu)
    c3 = 2.0 * (eta * (1.25 * mu + eta) + e2)
    lip = c2 + 4.0 * e2 * c3 / (al * mu * mu)
    eps2 = min(eps1, 0.5 / lip)
    return ContractionConstants(eta=eta, eps1=eps1, c2=c2, c3=c3, eps2=eps2)


def uniform_grid(eps: float, n_points: int = DEFAULT_POINTS) -> np.ndarray:
    if n_points < 2:
        raise ParamError("need at least two grid points", field="n_points")
    return np.linspace(0.0, eps, n_points)


def _cumtrapz(values: np.ndarray, grid: np.ndarray) -> np.ndarray:
    out = np.empty_like(values)
    out[0] = 0.0
    np.cumsum(0.5 * (values[1:] + values[:-1]) * np.diff(grid), out=out[1:])
    return out


def phi_map(p: Params, pair: GridPair) -> GridPair:
    s, g, h = pair.grid, pair.g, pair.h
    denom = g - s * h
    if np.any(denom < p.mu / 2.0):
        raise DomainError(
            f"g - s h dropped to {np.min(denom):.6g} < mu/2; input pair is outside the ball"
        )
    q = 1.0 + h * h
    integrand = q * ((p.n - 1) / g - q / (p.lam * denom))
    return GridPair(grid=s, g=p.mu + _cumtrapz(h, s), h=_cumtrapz(integrand, s))


def picard_solve(
    p: Params,
    eta: float | None = None,
    tol: float = 1e-14,
    max_iter: int = 200,
    *,
    n_points: int = DEFAULT_POINTS,
    eps: float | None = None,
    history: list | None = None,
) -> GridPair:
    """Iterate ``phi_map`` from the ball centre on [0, eps2] to a fixed point.

    ``eps`` overrides the certified step (contraction is then not guaranteed).
    Successive iterate distances are appended to ``history`` when given.
    """
    cc = contraction_constants(p, eta)
    if tol <= 0:
        raise ParamError("tol must be positive", field="tol")
    grid = uniform_grid(cc.eps2 if eps is None else eps, n_points)
    pair = GridPair(grid, np.full_like(grid, p.mu), np.zeros_like(grid))
    for _ in range(max_iter):
        nxt = phi_map(p, pair)
        dist = nxt.distance(pair)
        if history is not None:
            history.append(dist)
        pair = nxt
        if dist <= tol:
            return pair
    raise NoConvergence(f"Picard iteration did not reach tol={tol:g} in {max_iter} iterations")


def random_pair(rng: np.random.Generator, p: Params, eta: float, grid: np.ndarray, knots: int = 9) -> GridPair:
    """Piecewise-linear pair with knot values uniform in the eta-ball."""
    xk = np.linspace(grid[0], grid[-1], knots)
    gk = rng.uniform(p.mu - eta, p.mu + eta, knots)
    hk = rng.uniform(-eta, eta, knots)
    g = np.clip(np.interp(grid, xk, gk), p.mu - eta, p.mu + eta)
    h = np.clip(np.interp(grid, xk, hk), -eta, eta)
    return GridPair(grid, g, h)


def pair_contraction_ratio(p: Params, a: GridPair, b: GridPair) -> float:
    """||Phi(a) - Phi(b)|| / ||a - b||, defined as 0 for coincident pairs."""
    d = a.distance(b)
    if d == 0.0:
        return 0.0
    return phi_map(p, a).distance(phi_map(p, b)) / d


def empirical_contraction_ratio(
    p: Params,
    cc: ContractionConstants,
    trials: int,
    seed: int,
    *,
    eps: float | None = None,
    n_points: int = DEFAULT_POINTS,
) -> float:
    """Largest observed ||Phi(a) - Phi(b)|| / ||a - b|| over seeded random pairs."""
    if trials < 1:
        raise ParamError("trials must be >= 1", field="trials")
    rng = np.random.default_rng(seed)
    grid = uniform_grid(cc.eps2 if eps is None else eps, n_points)
    worst = 0.0
    for _ in range(trials):
        a = random_pair(rng, p, cc.eta, grid)
        b = random_pair(rng, p, cc.eta, grid)
        worst = max(worst, pair_contraction_ratio(p, a, b))
    return worst
