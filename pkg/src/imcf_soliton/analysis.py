"""Measured verdicts on the qualitative shape of integrated profiles.

Each check returns a :class:`Check` whose ``margin`` is signed slack: positive
means the inequality holds with that much room.  Checks that only make sense
in the expanding regime are emitted with ``applicable=False`` elsewhere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import core
from .core import Params, Regime, State
from .errors import (
    CrossCheckFailure,
    MultipleInflections,
    NoInflection,
    PreconditionError,
    SolitonError,
)
from .integrator import (
    DEFAULT_Y_MAX,
    Profile,
    Termination,
    Tolerances,
    dense_eval_many,
    hybrid_start,
    integrate_profile,
)
from .picard import QUADRATURE_SLACK, contraction_constants, empirical_contraction_ratio

INITIAL_CURVATURE_RTOL = 1e-10
SOLITON_RESIDUAL_TOL = 1e-7
W_IDENTITY_RTOL = 1e-10
INFLECTION_RTOL = 1e-6
YFORM_MIN_SLOPE = 0.1
YFORM_POINTS = 8001
YFORM_RTOL = 1e-3
DEFAULT_GROWTH_MARGIN = 5.0
DEFAULT_TRIALS = 200


@dataclass
class Check:
    name: str
    passed: Optional[bool]
    margin: Optional[float]
    detail: str
    applicable: bool = True

    @classmethod
    def not_applicable(cls, name: str, detail: str) -> "Check":
        return cls(name, None, None, detail, applicable=False)

    @classmethod
    def from_margin(cls, name: str, margin: float, detail: str, strict: bool = False) -> "Check":
        ok = margin > 0 if strict else margin >= 0
        return cls(name, bool(ok), float(margin), detail)


@dataclass
class InvariantReport:
    params: Params
    regime: Regime
    y_max: float
    tolerances: Tolerances
    termination: Termination
    checks: list = field(default_factory=list)
    y1: Optional[float] = None
    a1_estimate: Optional[float] = None
    a1_ci: Optional[tuple] = None
    delta1_observed: Optional[float] = None
    seed: int = 0
    eta: Optional[float] = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.applicable)

    @property
    def n_applicable(self) -> int:
        return sum(c.applicable for c in self.checks)

    @property
    def n_passed(self) -> int:
        return sum(bool(c.passed) for c in self.checks if c.applicable)

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def _half(prof: Profile) -> Profile:
    return prof.half if prof.reflected else prof


def scan_points(prof: Profile, density: int = 4):
    """Samples plus ``density - 1`` dense-output points inside each step.

    Returns (y, r, rp, rpp) on y >= 0 in increasing order.  Sample r'' values
    are the stored ones; interior r'' comes from the right-hand side.
    """
    prof = _half(prof)
    if prof.n_steps == 0:
        return prof.y, prof.r, prof.rp, prof.rpp
    left, right = prof.y[:-1], prof.y[1:]
    t = np.arange(1, density) / density
    inner = (left[:, None] + (right - left)[:, None] * t[None, :]).ravel()
    r_in, rp_in = dense_eval_many(prof, inner)
    rpp_in = core.rhs(prof.params, State(inner, r_in, rp_in))
    m = len(left)
    y = np.empty(m * density + 1)
    r, rp, rpp = np.empty_like(y), np.empty_like(y), np.empty_like(y)
    for arr, samp, dense in ((y, prof.y, inner), (r, prof.r, r_in), (rp, prof.rp, rp_in), (rpp, prof.rpp, rpp_in)):
        arr[:-1].reshape(m, density)[:, 0] = samp[:-1]
        arr[:-1].reshape(m, density)[:, 1:] = dense.reshape(m, density - 1)
        arr[-1] = samp[-1]
    return y, r, rp, rpp


def _rpp_at(prof: Profile, y: float) -> float:
    r, rp = dense_eval_many(prof, np.array([y]))
    return float(core.rhs(prof.params, State(y, r[0], rp[0])))


def sign_changes(values: np.ndarray) -> np.ndarray:
    """Indices i where the sign flips between nonzero entries i and the next nonzero one."""
    nz = np.flatnonzero(values != 0)
    s = np.sign(values[nz])
    return nz[np.flatnonzero(s[1:] != s[:-1])]


def find_inflection(prof: Profile) -> float:
    """The unique zero of r'' on (0, y_end], located by bisection on dense output."""
    prof = _half(prof)
    y, _, _, rpp = scan_points(prof)
    keep = y > 0
    y, rpp = y[keep], rpp[keep]
    flips = sign_changes(rpp)
    if len(flips) == 0:
        raise NoInflection(f"r'' keeps one sign on (0, {prof.y_end:g}]")
    if len(flips) > 1:
        raise MultipleInflections(f"r'' changes sign {len(flips)} times, near y = {y[flips].tolist()}")
    i = flips[0]
    lo, hi = float(y[i]), float(y[i + 1])
    # skip exact zeros between the two nonzero brackets
    hi = float(y[i + 1 + np.flatnonzero(rpp[i + 1:] != 0)[0]])
    s_lo = np.sign(rpp[i])
    h_min = prof.events.h_min
    while hi - lo > h_min:
        mid = 0.5 * (lo + hi)
        v = _rpp_at(prof, mid)
        if v == 0:
            return mid
        if np.sign(v) == s_lo:
            lo = mid
        else:
            hi = mid
    y1 = 0.5 * (lo + hi)
    window = 10 * h_min
    before, after = rpp[y < y1 - window], rpp[y > y1 + window]
    if s_lo < 0 or np.any(before <= 0) or np.any(after >= 0):
        raise MultipleInflections(f"r'' is not positive-then-negative around y1 = {y1:.12g}")
    return y1


def estimate_slope(prof: Profile, y1: Optional[float] = None):
    """Point estimate and enclosure of lim r'(y).

    Past the inflection r' decreases and stays positive, so the limit lies in
    [0, r'(y_end)].  The point estimate is r'(y_end).
    """
    prof = _half(prof)
    if y1 is None:
        try:
            y1 = find_inflection(prof)
        except SolitonError as exc:
            raise PreconditionError(f"slope estimate needs an inflection point: {exc}") from exc
    est = float(prof.rp[-1])
    return est, (0.0, max(est, 0.0))


def check_growth(prof: Profile, margin: float = DEFAULT_GROWTH_MARGIN) -> Check:
    """Finite-horizon stand-in for r -> infinity: strict growth plus r(y_end) > (1 + margin) mu."""
    prof = _half(prof)
    name = "growth_proxy"
    regime = prof.params.regime
    if regime not in (Regime.EXPANDER, Regime.CRITICAL_CYLINDER):
        return Check.not_applicable(name, f"growth is only claimed for expanders ({regime.value})")
    mu = prof.params.mu
    monotone = bool(np.all(prof.r[:-1] < prof.r[-1]))
    m = float(prof.r[-1] - (1.0 + margin) * mu)
    detail = (f"finite-horizon proxy: r({prof.y_end:g}) = {prof.r[-1]:.6g} vs {(1 + margin):g} mu; "
              f"strictly increasing up to y_end: {monotone}. Unboundedness itself is not checkable from finite data.")
    passed = bool(monotone and m > 0)
    if regime is Regime.CRITICAL_CYLINDER:
        return Check(name, passed, m, "r stays bounded, as expected for the cylinder; " + detail, applicable=False)
    return Check(name, passed, m, detail)


def check_sign_dichotomy(prof: Profile) -> Check:
    prof = _half(prof)
    name = "slope_sign_dichotomy"
    regime = prof.params.regime
    if regime is Regime.EXPANDER:
        sign = 1.0
    elif regime is Regime.CONTRACTING:
        sign = -1.0
    else:
        return Check.not_applicable(name, f"no sign claim in regime {regime.value}")
    y, _, rp, _ = scan_points(prof)
    sel = y > 10 * prof.events.h_min
    if not sel.any():
        return Check.not_applicable(name, "no samples past the initial point")
    m = float(np.min(sign * rp[sel]))
    return Check.from_margin(
        name, m, f"expected sign {'+' if sign > 0 else '-'} of r' on (0, {prof.y_end:g}]", strict=True
    )


def check_structural_bounds(prof: Profile):
    """Positivity of w, the arctangent slope bound, and the two forms of w'.

    Returns ``(checks, delta1_observed)``.
    """
    prof = _half(prof)
    p = prof.params
    names = ("w_positive", "slope_tan_bound", "w_derivative_identity")
    if p.regime is not Regime.EXPANDER:
        return [Check.not_applicable(n, "expander-only bound") for n in names], None
    y, r, rp, _ = scan_points(prof)
    w = r - y * rp
    delta1 = float(np.min(w))
    checks = [Check.from_margin(names[0], delta1, "min of r - y r' over the profile", strict=True)]

    arg = (p.n - 1) * y / p.mu
    sel = (y > 0) & (arg < math.pi / 2)
    tan_margin = float(np.min(np.tan(arg[sel]) - rp[sel])) if sel.any() else math.inf
    checks.append(Check.from_margin(
        names[1], tan_margin, f"r'(y) <= tan((n-1) y / mu) on {int(sel.sum())} points with argument < pi/2"
    ))

    ys, rs, rps, rpps = prof.y, prof.r, prof.rp, prof.rpp
    ws = rs - ys * rps
    q = 1.0 + rps * rps
    a = -ys * rpps
    b = ys * q * (q / (p.lam * ws) - (p.n - 1) / rs)
    scale = np.abs(ys) * q * np.maximum(q / np.abs(p.lam * ws), (p.n - 1) / rs)
    rel = np.abs(a - b) / np.where(scale > 0, scale, 1.0)
    worst = float(np.max(rel))
    checks.append(Check.from_margin(
        names[2], W_IDENTITY_RTOL - worst, f"max relative gap {worst:.3e} between -y r'' and the w' identity"
    ))
    return checks, delta1


def check_case1_exclusion(prof: Profile) -> Check:
    """Wherever r' exceeds sqrt(2 (n-1) lam), r'' must already be negative."""
    prof = _half(prof)
    p = prof.params
    name = "steep_slope_concavity"
    if p.regime is not Regime.EXPANDER:
        return Check.not_applicable(name, "expander-only implication")
    threshold = math.sqrt(2 * (p.n - 1) * p.lam)
    _, _, rp, rpp = scan_points(prof)
    steep = rp > threshold
    if not steep.any():
        return Check(name, True, float(threshold - np.max(rp)),
                     f"vacuous: r' never exceeds sqrt(2(n-1)lam) = {threshold:.6g}")
    return Check.from_margin(name, float(np.min(-rpp[steep])),
                             f"r'' < 0 at {int(steep.sum())} points with r' > {threshold:.6g}", strict=True)


def yform_window_residual(
    prof: Profile,
    min_slope: float = YFORM_MIN_SLOPE,
    points: int = YFORM_POINTS,
    y1: Optional[float] = None,
):
    """Residual of the graph equation for y(r) after inverting the profile.

    The window is the stretch where r' >= ``min_slope``, cut to at most
    [y_a, y_a + 4 y1] so that it covers the curved part of the profile.  It is
    resampled uniformly in y; the inverse has y_r = 1/r' and y_rr is the
    three-point derivative of y_r over the resulting nonuniform r-grid, so
    r'' never enters.  Returns ``(max_relative_residual, (y_lo, y_hi))`` or
    ``None`` when r' never reaches ``min_slope``.
    """
    prof = _half(prof)
    y, _, rp, _ = scan_points(prof)
    idx = np.flatnonzero(rp >= min_slope)
    if len(idx) < 2:
        return None
    breaks = np.flatnonzero(np.diff(idx) > 1)
    stop = idx[breaks[0]] if len(breaks) else idx[-1]
    ya, yb = float(y[idx[0]]), float(y[stop])
    if y1 is None:
        y1 = find_inflection(prof)
    yb = min(yb, ya + 4.0 * y1)
    if yb <= ya:
        return None
    ys = np.linspace(ya, yb, points)
    rs, rps = dense_eval_many(prof, ys)
    with np.errstate(divide="ignore", invalid="ignore"):  # flat data is rejected below
        y_r = 1.0 / rps
        y_rr = _nonuniform_derivative(rs, y_r)
    inner = slice(1, -1)
    r_in, y_in, yr_in = rs[inner], ys[inner], y_r[inner]
    p = prof.params
    res = core.yform_residual(p, r_in, y_in, yr_in, y_rr)
    q = 1.0 + yr_in * yr_in
    scale = np.abs(y_rr) + (p.n - 1) / r_in * q * np.abs(yr_in) + q * q / np.abs(p.lam * (r_in * yr_in - y_in))
    return float(np.max(np.abs(res) / scale)), (ya, yb)


def _nonuniform_derivative(x: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Second-order three-point derivative of f(x) at interior nodes."""
    h0 = x[1:-1] - x[:-2]
    h1 = x[2:] - x[1:-1]
    return (
        -h1 / (h0 * (h0 + h1)) * f[:-2]
        + (h1 - h0) / (h0 * h1) * f[1:-1]
        + h0 / (h1 * (h0 + h1)) * f[2:]
    )


def full_report(
    p: Params,
    y_max: float = DEFAULT_Y_MAX,
    tol: Tolerances = Tolerances(),
    *,
    eta: Optional[float] = None,
    seed: int = 0,
    trials: int = DEFAULT_TRIALS,
    growth_margin: float = DEFAULT_GROWTH_MARGIN,
    refine: bool = True,
    profile: Optional[Profile] = None,
) -> InvariantReport:
    """Integrate and run every check; integration trouble becomes failed checks."""
    prof = _half(profile) if profile is not None else integrate_profile(p, y_max, tol)
    regime = p.regime
    rep = InvariantReport(
        params=p, regime=regime, y_max=y_max, tolerances=tol,
        termination=prof.termination, seed=seed, eta=eta,
    )
    add = rep.checks.append
    expander = regime is Regime.EXPANDER

    expected = p.initial_curvature
    err = abs(float(prof.rpp[0]) - expected)
    add(Check.from_margin("initial_curvature", INITIAL_CURVATURE_RTOL * abs(expected) - err,
                          f"r''(0) = {prof.rpp[0]!r} vs (n-1-1/lam)/mu = {expected!r}"))

    if expander:
        add(Check("reached_y_max", prof.termination is Termination.REACHED_Y_MAX,
                  float(prof.y_end - y_max), f"termination {prof.termination.value} at y = {prof.y_end:.12g}"))
        y, r, rp, _ = scan_points(prof)
        w = r - y * rp
        pos = y > 0
        m = min(float(np.min(r)), float(np.min(w)), float(np.min(rp[pos])) if pos.any() else math.inf)
        add(Check.from_margin("profile_structure", m, "min of r, r - y r', and r' (y > 0)", strict=True))
    else:
        add(Check.not_applicable("reached_y_max", f"termination {prof.termination.value} at y = {prof.y_end:.12g}"))
        add(Check.not_applicable("profile_structure", "expander-only structure"))

    add(check_sign_dichotomy(prof))
    structural, rep.delta1_observed = check_structural_bounds(prof)
    rep.checks.extend(structural)
    add(check_case1_exclusion(prof))

    dependents = ("inflection_third_derivative", "inflection_refinement", "slope_limit_bracket")
    if not expander:
        for name in ("single_inflection",) + dependents:
            add(Check.not_applicable(name, "expander-only shape claim"))
    else:
        try:
            rep.y1 = find_inflection(prof)
        except SolitonError as exc:
            add(Check("single_inflection", False, None, f"{type(exc).__name__}: {exc}"))
            for name in dependents:
                add(Check.not_applicable(name, "no inflection point located"))
        else:
            add(Check("single_inflection", True, None, f"unique sign change of r'' at y1 = {rep.y1:.12g}"))
            st, _ = _state_at(prof, rep.y1)
            rppp = float(core.third_derivative(p, st))
            add(Check.from_margin("inflection_third_derivative", -rppp, f"r'''(y1) = {rppp:.6g}", strict=True))
            if refine:
                add(_refinement_check(p, y_max, tol, rep.y1))
            else:
                add(Check.not_applicable("inflection_refinement", "refinement run disabled"))
            rep.a1_estimate, rep.a1_ci = estimate_slope(prof, rep.y1)
            lo, hi = rep.a1_ci
            ok = 0.0 <= lo <= rep.a1_estimate <= hi and math.isfinite(hi)
            add(Check("slope_limit_bracket", ok, float(hi - lo),
                      f"lim r' in [{lo:.6g}, {hi:.6g}]; positivity of the limit is not asserted"))
    add(check_growth(prof, growth_margin))

    res = core.soliton_residual_with_rpp(p, prof.state(), prof.rpp)
    worst = float(np.max(np.abs(res)))
    add(Check.from_margin("soliton_identity", SOLITON_RESIDUAL_TOL - worst,
                          f"max |lam H <X,-nu> - 1| = {worst:.3e}"))

    if expander:
        try:
            yf = yform_window_residual(prof, y1=rep.y1) if rep.y1 is not None else None
        except SolitonError as exc:
            yf = exc
        if isinstance(yf, SolitonError):
            add(Check("yform_equation", False, None, f"{type(yf).__name__}: {yf}"))
        elif yf is None:
            add(Check.not_applicable("yform_equation", f"r' never reaches {YFORM_MIN_SLOPE}; no invertible window"))
        else:
            worst, (ya, yb) = yf
            add(Check.from_margin("yform_equation", YFORM_RTOL - worst,
                                  f"max relative residual {worst:.3e} on inverted window y in [{ya:.6g}, {yb:.6g}]"))
    else:
        add(Check.not_applicable("yform_equation", "expander-only window"))

    add(_picard_agreement_check(p, tol, eta))
    add(_contraction_check(p, eta, seed, trials))
    return rep


def _state_at(prof: Profile, y: float):
    r, rp = dense_eval_many(prof, np.array([y]))
    st = State(float(y), float(r[0]), float(rp[0]))
    return st, float(core.rhs(prof.params, st))


def _refinement_check(p: Params, y_max: float, tol: Tolerances, y1: float) -> Check:
    tight = tol.tightened(10.0)
    try:
        y1_tight = find_inflection(integrate_profile(p, y_max, tight))
    except SolitonError as exc:
        return Check("inflection_refinement", False, None, f"tightened run failed: {exc}")
    rel = abs(y1 - y1_tight) / abs(y1_tight)
    return Check.from_margin("inflection_refinement", INFLECTION_RTOL - rel,
                             f"y1 = {y1:.12g} vs {y1_tight:.12g} at rtol {tight.rel:g} (relative gap {rel:.2e})")


def _picard_agreement_check(p: Params, tol: Tolerances, eta: Optional[float]) -> Check:
    try:
        seg = hybrid_start(p, tol, eta=eta)
    except CrossCheckFailure as exc:
        return Check("picard_rk_agreement", False, None, str(exc))
    return Check.from_margin("picard_rk_agreement", 1e-6 - seg.sup_difference,
                             f"sup-norm gap {seg.sup_difference:.3e} on [0, {seg.eps2:.6g}]")


def _contraction_check(p: Params, eta: Optional[float], seed: int, trials: int) -> Check:
    cc = contraction_constants(p, eta)
    ratio = empirical_contraction_ratio(p, cc, trials, seed)
    return Check.from_margin("contraction_ratio", 0.5 + QUADRATURE_SLACK - ratio,
                             f"max ratio {ratio:.6f} over {trials} seeded pairs at eps2 = {cc.eps2:.6g}")
