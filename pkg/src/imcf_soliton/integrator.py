"""Global profile construction by adaptive Dormand-Prince 5(4) integration.

The second-order profile equation is integrated as the first-order system
(r, r')' = (r', rhs) from (mu, 0) at y = 0.  Steps are controlled by the
embedded fourth-order error estimate; the free fourth-order continuous
extension backs :func:`dense_eval` and event location.  Integration stops at
``y_max`` or as soon as r or w = r - y r' would fall to its floor, the two
ways of leaving the region where local continuation is available.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import core
from .core import Params, State
from .errors import CrossCheckFailure, DomainError, ParamError, PreconditionError, RangeError
from .picard import contraction_constants, picard_solve

DEFAULT_Y_MAX = 200.0
CROSS_CHECK_TOL = 1e-6

# Dormand-Prince 5(4) tableau.
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
# fifth-order minus embedded fourth-order weights
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)
# continuous extension: u(t) = u0 + h * sum_j K_j * (P[j] . (t, t^2, t^3, t^4))
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

_PL = _P.tolist()

_SAFETY = 0.9
_FAC_MIN = 0.2
_FAC_MAX = 10.0


class Termination(str, enum.Enum):
    REACHED_Y_MAX = "ReachedYMax"
    EVENT_R_ZERO = "EventRZero"
    EVENT_W_ZERO = "EventWZero"
    STEP_UNDERFLOW = "StepUnderflow"


@dataclass(frozen=True)
class Tolerances:
    rel: float = 1e-10
    abs: float = 1e-12

    def __post_init__(self):
        if not (self.rel > 0 and self.abs > 0):
            raise ParamError("tolerances must be positive", field="rtol" if not self.rel > 0 else "atol")

    def tightened(self, factor: float = 10.0) -> "Tolerances":
        return Tolerances(self.rel / factor, self.abs / factor)


@dataclass(frozen=True)
class EventSpec:
    w_floor: float
    r_floor: float
    h_min: float

    def __post_init__(self):
        if not (self.w_floor > 0 and self.r_floor > 0 and self.h_min > 0):
            raise ParamError("event floors and h_min must be positive", field="events")

    @classmethod
    def default(cls, p: Params, y_max: float) -> "EventSpec":
        return cls(w_floor=1e-10 * p.mu, r_floor=1e-12 * p.mu, h_min=1e-12 * max(1.0, y_max))


@dataclass(frozen=True, eq=False)
class Profile:
    """Sampled solution with piecewise dense output.

    Sample ``i`` and ``i + 1`` bound step ``i``; the step was taken from
    ``step_y0[i]`` with length ``step_h[i]`` (the last step may be truncated
    at an event, so ``y[i + 1] <= step_y0[i] + step_h[i]``).  ``stages``
    holds the seven stage derivatives of each step, shape (steps, 7, 2).
    A reflected profile stores only its nonnegative half internally.
    """

    params: Params
    y: np.ndarray
    r: np.ndarray
    rp: np.ndarray
    rpp: np.ndarray
    termination: Termination
    tolerances: Tolerances
    events: EventSpec
    step_y0: np.ndarray = field(repr=False)
    step_h: np.ndarray = field(repr=False)
    stages: np.ndarray = field(repr=False)
    reflected: bool = False
    half: Optional["Profile"] = field(default=None, repr=False)
    rejected_steps: int = 0

    def __len__(self) -> int:
        return len(self.y)

    @property
    def w(self) -> np.ndarray:
        return self.r - self.y * self.rp

    @property
    def y_end(self) -> float:
        return float(self.y[-1])

    @property
    def y_start(self) -> float:
        return float(self.y[0])

    @property
    def n_steps(self) -> int:
        return len(self.step_h)

    def state(self) -> State:
        return State(self.y, self.r, self.rp)


def _make_rhs(p: Params, rhs_fn: Optional[Callable]) -> Callable[[float, float, float], float]:
    if rhs_fn is not None:
        return lambda y, r, rp: float(rhs_fn(p, State(y, r, rp)))
    n1, lam = p.n - 1, p.lam
    floor = core.DENOM_FLOOR

    def f(y, r, rp):
        w = r - y * rp
        if not r > 0.0:
            raise DomainError("radius left the domain r > 0")
        if not abs(lam * w) >= floor * (1.0 + abs(lam) * (abs(r) + abs(y * rp))):
            raise DomainError("denominator lam * (r - y r') vanished")
        q = 1.0 + rp * rp
        return q * (n1 / r - q / (lam * w))

    return f


def _step(f, y, r, rp, k1, h):
    """One Dormand-Prince step; returns (r1, rp1, err_r, err_rp, stages).

    Unrolled for speed: the state is two floats and most of the run time is
    interpreter overhead.
    """
    (a21,), (a31, a32), (a41, a42, a43), (a51, a52, a53, a54), \
        (a61, a62, a63, a64, a65), (a71, _, a73, a74, a75, a76) = _A[1:]
    q1 = rp
    r2, q2 = r + h * a21 * q1, rp + h * a21 * k1
    k2 = f(y + _C[1] * h, r2, q2)
    r3 = r + h * (a31 * q1 + a32 * q2)
    q3 = rp + h * (a31 * k1 + a32 * k2)
    k3 = f(y + _C[2] * h, r3, q3)
    r4 = r + h * (a41 * q1 + a42 * q2 + a43 * q3)
    q4 = rp + h * (a41 * k1 + a42 * k2 + a43 * k3)
    k4 = f(y + _C[3] * h, r4, q4)
    r5 = r + h * (a51 * q1 + a52 * q2 + a53 * q3 + a54 * q4)
    q5 = rp + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)
    k5 = f(y + _C[4] * h, r5, q5)
    r6 = r + h * (a61 * q1 + a62 * q2 + a63 * q3 + a64 * q4 + a65 * q5)
    q6 = rp + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)
    k6 = f(y + h, r6, q6)
    r1 = r + h * (a71 * q1 + a73 * q3 + a74 * q4 + a75 * q5 + a76 * q6)
    rp1 = rp + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6)
    k7 = f(y + h, r1, rp1)
    e1, _, e3, e4, e5, e6, e7 = _E
    er = h * (e1 * q1 + e3 * q3 + e4 * q4 + e5 * q5 + e6 * q6 + e7 * rp1)
    ep = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7)
    return r1, rp1, er, ep, ((q1, q2, q3, q4, q5, q6, rp1), (k1, k2, k3, k4, k5, k6, k7))


def _initial_step(f, r, rp, k1, y_span, tol: Tolerances) -> float:
    # Hairer-Norsett-Wanner starting step, order 5.
    sc0 = tol.abs + abs(r) * tol.rel
    sc1 = tol.abs + abs(rp) * tol.rel
    d0 = math.hypot(r / sc0, rp / sc1) / math.sqrt(2)
    d1 = math.hypot(rp / sc0, k1 / sc1) / math.sqrt(2)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, y_span)
    try:
        r1, rp1 = r + h0 * rp, rp + h0 * k1
        k2 = f(h0, r1, rp1)
        d2 = math.hypot((rp1 - rp) / sc0, (k2 - k1) / sc1) / math.sqrt(2) / h0
    except DomainError:
        return h0 * 1e-3
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, y_span)


def _interp(y0: float, h: float, r0: float, rp0: float, stages: np.ndarray, theta):
    theta = np.asarray(theta, dtype=float)
    powers = np.stack([theta, theta**2, theta**3, theta**4])
    Q = stages.T @ _P  # (2, 4)
    du = h * (Q @ powers)
    return r0 + du[0], rp0 + du[1]


def integrate_profile(
    p: Params,
    y_max: float = DEFAULT_Y_MAX,
    tol: Tolerances = Tolerances(),
    ev: Optional[EventSpec] = None,
    *,
    rhs_fn: Optional[Callable] = None,
) -> Profile:
    """Integrate from y = 0 to ``y_max`` or the first domain-exit event.

    ``rhs_fn(p, State) -> r''`` replaces the built-in right-hand side; it
    exists for fault injection.
    """
    if not (y_max > 0 and math.isfinite(y_max)):
        raise ParamError(f"y_max must be positive and finite, got {y_max}", field="y_max")
    if ev is None:
        ev = EventSpec.default(p, y_max)
    f = _make_rhs(p, rhs_fn)

    y, r, rp = 0.0, p.mu, 0.0
    k1 = f(y, r, rp)
    ys, rs, rps, rpps = [y], [r], [rp], [k1]
    y0s, hs, st = [], [], []
    rejected = 0
    termination = Termination.REACHED_Y_MAX

    h = _initial_step(f, r, rp, k1, y_max, tol)
    while y < y_max:
        last = y + h >= y_max - ev.h_min
        if last:
            h = y_max - y
        elif h < ev.h_min:
            termination = Termination.STEP_UNDERFLOW
            break
        try:
            r1, rp1, er, ep, stages = _step(f, y, r, rp, k1, h)
            sr = tol.abs + tol.rel * max(abs(r), abs(r1))
            sp = tol.abs + tol.rel * max(abs(rp), abs(rp1))
            err = math.sqrt(0.5 * ((er / sr) ** 2 + (ep / sp) ** 2))
        except DomainError:
            err = math.inf
        if not err <= 1.0:
            rejected += 1
            fac = 0.25 if not math.isfinite(err) else max(_FAC_MIN, _SAFETY * err ** -0.2)
            h *= min(1.0, fac)
            if h < ev.h_min:
                termination = Termination.STEP_UNDERFLOW
                break
            continue

        y_new = y_max if last else y + h
        hit = _first_event(y, h, r, rp, stages, r1, rp1, y_new, ev)
        K = stages
        if hit is not None:
            y_e, kind = hit
            if y_e > y:
                cr, cp = _dense_coeffs(h, *stages)
                t = (y_e - y) / h
                re, rpe = _poly(r, cr, t), _poly(rp, cp, t)
                try:
                    rppe = f(y_e, re, rpe)
                except DomainError:
                    rppe = None
                if rppe is not None:
                    ys.append(y_e); rs.append(re); rps.append(rpe); rpps.append(rppe)
                    y0s.append(y); hs.append(h); st.append(K)
            termination = kind
            break

        y0s.append(y); hs.append(h); st.append(K)
        y, r, rp = y_new, r1, rp1
        k1 = stages[1][6]  # first-same-as-last
        ys.append(y); rs.append(r); rps.append(rp); rpps.append(k1)
        fac = _FAC_MAX if err == 0 else min(_FAC_MAX, max(_FAC_MIN, _SAFETY * err ** -0.2))
        h *= fac

    return Profile(
        params=p,
        y=np.array(ys),
        r=np.array(rs),
        rp=np.array(rps),
        rpp=np.array(rpps),
        termination=termination,
        tolerances=tol,
        events=ev,
        step_y0=np.array(y0s),
        step_h=np.array(hs),
        stages=np.array(st).transpose(0, 2, 1).reshape(-1, 7, 2),
        rejected_steps=rejected,
    )


def _event_values(y, r, rp, ev: EventSpec):
    return r - ev.r_floor, (r - y * rp) - ev.w_floor


def _dense_coeffs(h, kr, kp):
    """Per-step polynomial coefficients of the continuous extension, pure Python."""
    cr = [h * sum(kr[j] * _PL[j][m] for j in range(7)) for m in range(4)]
    cp = [h * sum(kp[j] * _PL[j][m] for j in range(7)) for m in range(4)]
    return cr, cp


def _poly(c0, c, t):
    return c0 + t * (c[0] + t * (c[1] + t * (c[2] + t * c[3])))


def _first_event(y0, h, r0, rp0, stages, r1, rp1, y1, ev: EventSpec):
    """Earliest floor crossing inside the accepted step, or None.

    Probes the step end and three interior points of the dense output, then
    bisects the first bracketing sub-interval down to ``h_min``.  Returns the
    last abscissa at which both event functions are still positive, with the
    event kind.
    """
    cr, cp = _dense_coeffs(h, *stages)

    def g(yy):
        t = (yy - y0) / h
        rr, pp = _poly(r0, cr, t), _poly(rp0, cp, t)
        return _event_values(yy, rr, pp, ev)

    probes = [y0 + t * h for t in (0.25, 0.5, 0.75) if y0 + t * h < y1]
    lo = y0
    for yy in probes + [y1]:
        gr, gw = _event_values(yy, r1, rp1, ev) if yy == y1 else g(yy)
        if gr <= 0 or gw <= 0:
            hi = yy
            kind = Termination.EVENT_R_ZERO if gr <= 0 else Termination.EVENT_W_ZERO
            while hi - lo > ev.h_min:
                mid = 0.5 * (lo + hi)
                gr, gw = g(mid)
                if gr <= 0 or gw <= 0:
                    hi = mid
                    kind = Termination.EVENT_R_ZERO if gr <= 0 else Termination.EVENT_W_ZERO
                else:
                    lo = mid
            return lo, kind
        lo = yy
    return None


def dense_eval(prof: Profile, y: float) -> tuple[State, float]:
    """Interpolated (State, r'') at ``y`` from the continuous extension."""
    if prof.reflected:
        st, rpp = dense_eval(prof.half, abs(y))
        if y < 0:
            st = State(y, st.r, -st.rp)
        return st, rpp
    if not (prof.y[0] <= y <= prof.y[-1]):
        raise RangeError(f"y={y} outside profile span [{prof.y[0]}, {prof.y[-1]}]")
    i = int(np.searchsorted(prof.y, y, side="right")) - 1
    if i >= len(prof.y) - 1 or prof.y[i] == y:
        i = min(i, len(prof.y) - 1)
        return State(float(prof.y[i]), float(prof.r[i]), float(prof.rp[i])), float(prof.rpp[i])
    y0, h = prof.step_y0[i], prof.step_h[i]
    r, rp = _interp(y0, h, prof.r[i], prof.rp[i], prof.stages[i], (y - y0) / h)
    st = State(float(y), float(r), float(rp))
    return st, float(core.rhs(prof.params, st))


def dense_eval_many(prof: Profile, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised (r, r') at sorted abscissae ``ys`` on a nonreflected profile."""
    if prof.reflected:
        r, rp = dense_eval_many(prof.half, np.abs(ys))
        return r, np.where(np.asarray(ys) < 0, -rp, rp)
    ys = np.asarray(ys, dtype=float)
    if ys.size and (ys.min() < prof.y[0] or ys.max() > prof.y[-1]):
        raise RangeError("abscissae outside profile span")
    idx = np.clip(np.searchsorted(prof.y, ys, side="right") - 1, 0, max(prof.n_steps - 1, 0))
    if prof.n_steps == 0:
        return np.full_like(ys, prof.r[0]), np.full_like(ys, prof.rp[0])
    y0 = prof.step_y0[idx]
    h = prof.step_h[idx]
    t = (ys - y0) / h
    powers = np.stack([t, t**2, t**3, t**4], axis=-1)  # (m, 4)
    Q = np.einsum("mkc,kj->mcj", prof.stages[idx], _P)  # (m, 2, 4)
    du = h[:, None] * np.einsum("mcj,mj->mc", Q, powers)
    r = prof.r[idx] + du[:, 0]
    rp = prof.rp[idx] + du[:, 1]
    exact = np.isin(ys, prof.y)
    if exact.any():
        j = np.searchsorted(prof.y, ys[exact])
        r[exact] = prof.r[j]
        rp[exact] = prof.rp[j]
    return r, rp


def reflect_even(prof: Profile) -> Profile:
    """Extend to negative y by (y, r, r', r'') -> (-y, r, -r', r'')."""
    half = prof.half if prof.reflected else prof
    if half.y[0] != 0.0 or abs(half.rp[0]) > 1e-14 * max(1.0, abs(half.r[0])):
        raise PreconditionError("profile must start at y = 0 with r'(0) = 0")
    sl = slice(None, 0, -1)
    return Profile(
        params=half.params,
        y=np.concatenate([-half.y[sl], half.y]),
        r=np.concatenate([half.r[sl], half.r]),
        rp=np.concatenate([-half.rp[sl], half.rp]),
        rpp=np.concatenate([half.rpp[sl], half.rpp]),
        termination=half.termination,
        tolerances=half.tolerances,
        events=half.events,
        step_y0=half.step_y0,
        step_h=half.step_h,
        stages=half.stages,
        reflected=True,
        half=half,
        rejected_steps=half.rejected_steps,
    )


@dataclass(frozen=True, eq=False)
class StartSegment:
    """Local solution on [0, eps2] with the Picard/RK cross-check result."""

    y: np.ndarray
    r: np.ndarray
    rp: np.ndarray
    source: str
    sup_difference: float
    eps2: float


def hybrid_start(
    p: Params,
    tol: Tolerances = Tolerances(),
    *,
    eta: Optional[float] = None,
    authoritative: str = "rk",
    max_difference: float = CROSS_CHECK_TOL,
    rhs_fn: Optional[Callable] = None,
) -> StartSegment:
    """Build the initial segment two ways and insist they agree.

    The Picard fixed point on the certified interval [0, eps2] is compared in
    the pair sup norm against the Runge-Kutta start sampled on the same grid.
    """
    if authoritative not in ("rk", "picard"):
        raise ParamError("authoritative must be 'rk' or 'picard'", field="authoritative")
    cc = contraction_constants(p, eta)
    fixed = picard_solve(p, eta)
    rk = integrate_profile(p, cc.eps2, tol, rhs_fn=rhs_fn)
    if rk.termination is not Termination.REACHED_Y_MAX:
        raise CrossCheckFailure(f"RK start terminated early ({rk.termination.value})")
    r_rk, rp_rk = dense_eval_many(rk, np.minimum(fixed.grid, rk.y_end))
    diff = max(float(np.max(np.abs(r_rk - fixed.g))), float(np.max(np.abs(rp_rk - fixed.h))))
    if not diff <= max_difference:
        raise CrossCheckFailure(
            f"Picard and RK starts differ by {diff:.3e} > {max_difference:.1e} on [0, {cc.eps2:.6g}]"
        )
    if authoritative == "rk":
        return StartSegment(fixed.grid, r_rk, rp_rk, "rk", diff, cc.eps2)
    return StartSegment(fixed.grid, fixed.g, fixed.h, "picard", diff, cc.eps2)
