from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from imcf_soliton import (
    DomainError,
    ParamError,
    Params,
    Regime,
    State,
    classify_regime,
    derived_state,
    integrate_profile,
    mean_curvature,
    rhs,
    soliton_residual,
    structural_w,
    third_derivative,
    yform_residual,
)
from imcf_soliton.analysis import find_inflection
from imcf_soliton.core import soliton_residual_with_rpp
from imcf_soliton.integrator import dense_eval


def exact_rhs(n, lam, y, r, rp):
    """Exact rational evaluation of the profile equation."""
    n, lam, y, r, rp = (Fraction(v) for v in (n, lam, y, r, rp))
    q = 1 + rp * rp
    return q * ((n - 1) / r - q / (lam * (r - y * rp)))


def exact_residual(n, lam, y, r, rp, rpp):
    # lam H w / sqrt(q) - 1 has no square roots once expanded
    n, lam, y, r, rp, rpp = (Fraction(v) for v in (n, lam, y, r, rp, rpp))
    q = 1 + rp * rp
    w = r - y * rp
    return lam * w * ((n - 1) / (r * q) - rpp / (q * q)) - 1


lams = st.floats(0.05, 20.0)
ns = st.integers(2, 12)


class TestParams:
    @pytest.mark.parametrize("kw,field", [
        (dict(n=1, lam=1.0, mu=1.0), "n"),
        (dict(n=2.5, lam=1.0, mu=1.0), "n"),
        (dict(n=2, lam=0.0, mu=1.0), "lambda"),
        (dict(n=2, lam=1.0, mu=0.0), "mu"),
        (dict(n=2, lam=1.0, mu=-1.0), "mu"),
        (dict(n=2, lam=float("nan"), mu=1.0), "lambda"),
    ])
    def test_invalid(self, kw, field):
        with pytest.raises(ParamError) as exc:
            Params(**kw)
        assert exc.value.field == field

    def test_initial_curvature(self):
        assert Params(2, 2.0, 1.0).initial_curvature == 0.5


class TestRegime:
    @pytest.mark.parametrize("args,regime", [
        ((2, 2.0, 1.0), Regime.EXPANDER),
        ((3, 0.5, 1.0), Regime.CRITICAL_CYLINDER),
        ((2, 0.25, 1.0), Regime.CONTRACTING),
        ((2, -1.0, 1.0), Regime.NEGATIVE_LAMBDA),
        ((4, 1 / 3, 1.0), Regime.CRITICAL_CYLINDER),
        ((7, 1 / 6, 1.0), Regime.CRITICAL_CYLINDER),
    ])
    def test_examples(self, args, regime):
        assert classify_regime(Params(*args)) is regime

    @given(ns, st.floats(-10, 10).filter(lambda v: abs(v) > 1e-6), st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
    def test_independent_of_mu(self, n, lam, mu1, mu2):
        assert classify_regime(Params(n, lam, mu1)) is classify_regime(Params(n, lam, mu2))


class TestRhs:
    def test_initial_point(self):
        assert rhs(Params(2, 2.0, 1.0), State(0.0, 1.0, 0.0)) == 0.5

    @pytest.mark.parametrize("n,lam", [(2, 1.0), (3, 0.5), (5, 0.25), (9, 0.125)])
    @given(y=st.floats(-100, 100), mu=st.floats(1e-3, 1e3))
    def test_cylinder_is_equilibrium(self, n, lam, y, mu):
        assert rhs(Params(n, lam, mu), State(y, mu, 0.0)) == 0.0

    def test_against_exact_arithmetic(self):
        value = rhs(Params(2, 1.0, 1.0), State(1.0, 2.0, 0.5))
        assert exact_rhs(2, 1, 1, 2, Fraction(1, 2)) == Fraction(-5, 12)
        assert value == pytest.approx(-5 / 12, rel=1e-15)

    @given(ns, lams, st.floats(-5, 5), st.floats(0.1, 10), st.floats(-3, 3))
    def test_matches_exact_rational(self, n, lam, y, r, rp):
        if abs(r - y * rp) < 0.05 * r:
            return
        exact = float(exact_rhs(n, lam, y, r, rp))
        scale = (1 + rp * rp) * ((n - 1) / r + (1 + rp * rp) / abs(lam * (r - y * rp)))
        assert abs(rhs(Params(n, lam, 1.0), State(y, r, rp)) - exact) <= 1e-14 * scale

    @given(ns, lams, st.floats(0.01, 1e3))
    def test_initial_curvature_formula(self, n, lam, mu):
        p = Params(n, lam, mu)
        assert rhs(p, State(0.0, mu, 0.0)) == pytest.approx(p.initial_curvature, rel=1e-14, abs=1e-14 / mu)

    @pytest.mark.parametrize("s", [State(0.0, 0.0, 0.0), State(0.0, -1.0, 0.0), State(1.0, 1.0, 1.0)])
    def test_domain_error(self, s):
        with pytest.raises(DomainError):
            rhs(Params(2, 2.0, 1.0), s)

    def test_arrays(self):
        p = Params(3, 1.0, 1.0)
        y = np.array([0.0, 0.5, 1.0])
        out = rhs(p, State(y, np.array([1.0, 1.1, 1.3]), np.array([0.0, 0.2, 0.3])))
        for i in range(3):
            assert out[i] == rhs(p, State(y[i], [1.0, 1.1, 1.3][i], [0.0, 0.2, 0.3][i]))


class TestThirdDerivative:
    def test_zero_at_origin(self):
        assert third_derivative(Params(2, 2.0, 1.0), State(0.0, 1.0, 0.0)) == 0.0

    @given(ns, lams, st.floats(0.1, 5), st.floats(0.1, 10), st.floats(0.01, 3))
    def test_reduces_at_inflection(self, n, lam, y, r, rp):
        # choose lam so that r'' vanishes at this state, then compare with the short form
        w = r - y * rp
        if w <= 0.05 * r:
            return
        lam = (1 + rp * rp) * r / ((n - 1) * w)
        p = Params(n, lam, 1.0)
        s = State(y, r, rp)
        assert abs(rhs(p, s)) < 1e-12 * (n - 1) / r
        short = -(1 + rp * rp) * (n - 1) * rp / r**2
        assert third_derivative(p, s) == pytest.approx(short, rel=1e-8, abs=1e-10)

    def test_negative_at_located_inflection(self):
        p = Params(2, 2.0, 1.0)
        prof = integrate_profile(p, 50.0)
        y1 = find_inflection(prof)
        s, _ = dense_eval(prof, y1)
        assert third_derivative(p, s) < 0

    @pytest.mark.parametrize("y0", [0.7, 1.4, 3.0, 12.0])
    def test_matches_centered_difference(self, y0):
        # oracle: tight DOP853 flow from the state at y0, then centered differences of rhs
        p = Params(2, 2.0, 1.0)
        prof = integrate_profile(p, 20.0)
        s0, _ = dense_eval(prof, y0)

        def f(y, u):
            return [u[1], rhs(p, State(y, u[0], u[1]))]

        def rhs_at(y):
            sol = solve_ivp(f, [y0, y], [s0.r, s0.rp], method="DOP853", rtol=1e-13, atol=1e-15)
            return rhs(p, State(y, sol.y[0, -1], sol.y[1, -1]))

        exact = third_derivative(p, s0)
        errs = []
        for h in (0.04, 0.02, 0.01):
            fd = (rhs_at(y0 + h) - rhs_at(y0 - h)) / (2 * h)
            errs.append(abs(fd - exact))
        assert errs[2] < 1e-4 * max(1.0, abs(exact))
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)
        assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.1)


class TestStructuralW:
    def test_examples(self):
        assert structural_w(State(0.0, 2.5, 0.0)) == 2.5
        assert structural_w(State(3.0, 5.0, 1.0)) == 2.0

    def test_positive_on_expander(self):
        prof = integrate_profile(Params(2, 2.0, 1.0), 100.0)
        assert np.all(structural_w(prof.state()) > 0)


def sympy_mean_curvature_n2():
    """Mean curvature of (r(y) cos t, r(y) sin t, y) from the fundamental forms."""
    y, t = sp.symbols("y t", real=True)
    r, rp, rpp = sp.symbols("r rp rpp", real=True)
    R = sp.Function("R")(y)
    X = sp.Matrix([R * sp.cos(t), R * sp.sin(t), y])
    Xy, Xt = X.diff(y), X.diff(t)
    N = Xy.cross(Xt)
    N = N / sp.sqrt(N.dot(N))
    E, F, G = Xy.dot(Xy), Xy.dot(Xt), Xt.dot(Xt)
    L, M, Nn = X.diff(y, 2).dot(N), X.diff(y).diff(t).dot(N), X.diff(t, 2).dot(N)
    H = (E * Nn - 2 * F * M + G * L) / (E * G - F**2)
    sub = {R.diff(y, 2): rpp, R.diff(y): rp}
    H = H.subs(sub).subs(R, r)
    n_vec = N.subs(sub).subs(R, r)
    x_dot_n = (X.subs(sub).subs(R, r)).dot(n_vec)
    return sp.lambdify((y, t, r, rp, rpp), (sp.simplify(H), sp.simplify(x_dot_n)), "math")


class TestMeanCurvature:
    def test_cylinder(self):
        assert mean_curvature(Params(3, 0.5, 2.0), State(4.0, 2.0, 0.0)) == 1.0

    def test_initial_point(self):
        assert mean_curvature(Params(2, 2.0, 1.0), State(0.0, 1.0, 0.0)) == pytest.approx(0.5, rel=1e-15)

    def test_against_fundamental_forms(self):
        Hs = sympy_mean_curvature_n2()
        rng = np.random.default_rng(7)
        p = Params(2, 1.7, 1.0)
        for _ in range(25):
            y, r, rp = rng.uniform(-3, 3), rng.uniform(0.5, 4), rng.uniform(-2, 2)
            if r - y * rp < 0.1:
                continue
            rpp = rhs(p, State(y, r, rp))
            H_ref, xn = Hs(y, 0.3, r, rp, rpp)
            # the sympy normal is N = X_y x X_t; the interior one has <X, nu> = -(r - y r') / sqrt(1 + r'^2)
            sign = -1.0 if xn > 0 else 1.0
            assert abs(xn) == pytest.approx((r - y * rp) / np.sqrt(1 + rp * rp), rel=1e-12)
            assert sign * H_ref == pytest.approx(mean_curvature(p, State(y, r, rp)), rel=1e-10, abs=1e-12)

    def test_positive_on_profile(self):
        p = Params(3, 1.0, 1.0)
        prof = integrate_profile(p, 100.0)
        assert np.all(mean_curvature(p, prof.state()) > 0)


class TestSolitonResidual:
    @given(ns, lams, st.floats(-10, 10), st.floats(0.1, 10), st.floats(-3, 3))
    @settings(max_examples=300)
    def test_identity(self, n, lam, y, r, rp):
        w = r - y * rp
        if w < 0.05 * r:
            return
        p = Params(n, lam, 1.0)
        s = State(y, r, rp)
        q = 1 + rp * rp
        scale = 1.0 + lam * w * ((n - 1) / (r * q) + abs(rhs(p, s)) / q**2)
        assert abs(soliton_residual(p, s)) <= 1e-12 * scale

    def test_perturbed_state(self):
        p = Params(2, 2.0, 1.0)
        y, r, rp = 1.5, 1.8, 0.5
        rpp = rhs(p, State(y, r, rp))
        got = soliton_residual_with_rpp(p, State(y, r, 1.1 * rp), rpp)
        want = float(exact_residual(2, 2, y, r, 1.1 * rp, rpp))
        assert abs(want) > 1e-3
        assert got == pytest.approx(want, rel=1e-12)

    def test_cylinder(self):
        assert soliton_residual(Params(3, 0.5, 2.0), State(1.0, 2.0, 0.0)) == 0.0


class TestYForm:
    @given(ns, lams, st.floats(0, 10), st.floats(0.1, 10), st.floats(0.1, 3))
    def test_exact_inversion(self, n, lam, y, r, rp):
        w = r - y * rp
        if w < 0.05 * r:
            return
        p = Params(n, lam, 1.0)
        rpp = rhs(p, State(y, r, rp))
        y_r, y_rr = 1 / rp, -rpp / rp**3
        q = 1 + y_r * y_r
        scale = abs(y_rr) + (n - 1) / r * q * y_r + q * q / abs(lam * (r * y_r - y))
        assert abs(yform_residual(p, r, y, y_r, y_rr)) <= 1e-12 * scale

    def test_linear_in_second_derivative(self):
        p = Params(3, 1.2, 1.0)
        base = yform_residual(p, 1.3, 0.4, 2.0, -0.7)
        assert yform_residual(p, 1.3, 0.4, 2.0, 0.3) == pytest.approx(base + 1.0, rel=1e-14)

    def test_flat_profile_cannot_be_inverted(self):
        with pytest.raises(DomainError):
            yform_residual(Params(3, 0.5, 2.0), 2.0, 1.0, np.inf, 0.0)

    def test_vanishing_denominator(self):
        with pytest.raises(DomainError):
            yform_residual(Params(2, 2.0, 1.0), 1.0, 2.0, 2.0, 0.0)


def test_derived_state_consistent():
    p = Params(2, 2.0, 1.0)
    s = State(0.8, 1.2, 0.3)
    d = derived_state(p, s)
    assert d.rpp == rhs(p, s)
    assert d.rppp == third_derivative(p, s)
    assert d.w == structural_w(s)
    assert d.H == mean_curvature(p, s)
