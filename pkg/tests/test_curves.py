import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ckl.curves import curve_point, newton_curve, solve_psi, tube_membership
from ckl.errors import DomainError, SingularJacobianError
from ckl.phases import phase
from ckl.tubes import log_ratio_omega


def test_const_solution(const):
    cp = solve_psi(const, [0.1, 0], 0.2, [0.5, 0], 1e-12)
    np.testing.assert_allclose(cp.x, [-0.1, 0], atol=1e-15)
    assert cp.residual <= 1e-12


def test_star_solution(star):
    np.testing.assert_allclose(solve_psi(star, [0, 0], 0.3, [1, 0]).x, [0, -0.3], atol=1e-15)


def test_counterexample_solution(counter):
    y = np.array([0.6, 0.6])
    x = solve_psi(counter, log_ratio_omega(y), 0.2, y).x
    np.testing.assert_allclose(x, [0.88, np.log(0.88)], atol=1e-14)


def test_curve_points(const, star):
    np.testing.assert_allclose(curve_point(const, [1, 0], [0, 0], 0.1), [-0.2, 0, 0.1], atol=1e-15)
    np.testing.assert_allclose(curve_point(star, [0, 1], [0, 0], 0.5), [-0.5, -0.25, 0.5], atol=1e-15)
    np.testing.assert_allclose(curve_point(star, [0.2, 0.1], [0.3, -0.1], 0.0), [0.3, -0.1, 0.0])


def test_tube_membership(const):
    assert not tube_membership(const, [1, 0], [0, 0], 0.01, [-0.2 + 0.02, 0, 0.1])
    assert tube_membership(const, [1, 0], [0, 0], 1e-9, [-0.2, 0, 0.1])
    with pytest.raises(DomainError):
        tube_membership(const, [1, 0], [0, 0], 0.1, [0, 0, 0.9])


def test_counterexample_membership_on_surface(counter):
    y = np.array([0.55, 0.6])
    pt = curve_point(counter, y, log_ratio_omega(y), 0.3)
    assert abs(pt[1] - np.log(pt[0])) < 1e-12
    assert tube_membership(counter, y, log_ratio_omega(y), 1e-8, pt)


def test_singular_jacobian():
    # phi = x1 y1 + t y2 has d_xy phi singular
    terms = [{"exps": [1, 0, 0, 1, 0], "coef": 1.0}, {"exps": [0, 0, 1, 0, 1], "coef": 1.0}]
    ph = phase("Custom", 3, phi={"vars": 5, "terms": terms})
    with pytest.raises(SingularJacobianError):
        solve_psi(ph, [0.1, 0.1], 0.2, [0.1, 0.1])


def test_bad_tol(const):
    with pytest.raises(ValueError):
        solve_psi(const, [0, 0], 0.1, [0, 0], tol=0)


def _nonlinear_custom():
    # phi = <x,y> + x1^2 y1 / 4 + t y1 y2
    terms = [
        {"exps": [1, 0, 0, 1, 0], "coef": 1.0},
        {"exps": [0, 1, 0, 0, 1], "coef": 1.0},
        {"exps": [2, 0, 0, 1, 0], "coef": 0.25},
        {"exps": [0, 0, 1, 1, 1], "coef": 1.0},
    ]
    return phase("Custom", 3, phi={"vars": 5, "terms": terms})


@settings(max_examples=50, deadline=None)
@given(
    w=st.tuples(st.floats(-0.3, 0.3), st.floats(-0.3, 0.3)),
    t=st.floats(-0.45, 0.45),
    y=st.tuples(st.floats(-0.3, 0.3), st.floats(-0.3, 0.3)),
)
def test_newton_residual_below_tol(w, t, y):
    ph = _nonlinear_custom()
    cp = solve_psi(ph, w, t, y, 1e-11)
    assert cp.residual <= 1e-11
    assert np.linalg.norm(ph.grad_y(cp.x, t, np.array(y)) - np.array(w)) <= 1e-11


@settings(max_examples=50, deadline=None)
@given(
    kind=st.sampled_from(["ConstCoeff", "BourgainStar", "Counterexample"]),
    w=st.tuples(st.floats(-0.4, 0.4), st.floats(-0.4, 0.4)),
    t=st.floats(-0.45, 0.45),
    y=st.tuples(st.floats(-0.4, 0.4), st.floats(-0.4, 0.4)),
)
def test_closed_form_agrees_with_newton(kind, w, t, y):
    ph = phase(kind)
    exact = solve_psi(ph, w, t, y).x
    x, _ = newton_curve(ph, np.array(w), t, np.array(y), 1e-12)
    np.testing.assert_allclose(x, exact, atol=1e-11)
