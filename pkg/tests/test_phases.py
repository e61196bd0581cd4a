import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ckl.errors import ConfigError, DomainError, SingularityError
from ckl.phases import (
    PhaseSpec,
    curvature_det,
    eval_jet,
    exponent_table,
    gauss_map,
    phase,
    sample_domain,
    verify_nondegeneracy,
)

BUILTINS = ["ConstCoeff", "BourgainStar", "Counterexample"]


def tipoly():
    # psi = t y1 y2 + t^2 y1^3 / 3
    table = {"vars": 3, "terms": [{"exps": [1, 1, 1], "coef": 1.0}, {"exps": [2, 3, 0], "coef": 1 / 3}]}
    return phase("TranslationInvariantPoly", 3, psi=table)


def custom():
    # phi = <x, y> + t y1^2 + x1 t y2^2 / 4
    terms = [
        {"exps": [1, 0, 0, 1, 0], "coef": 1.0},
        {"exps": [0, 1, 0, 0, 1], "coef": 1.0},
        {"exps": [0, 0, 1, 2, 0], "coef": 1.0},
        {"exps": [1, 0, 1, 0, 2], "coef": 0.25},
    ]
    return phase("Custom", 3, phi={"vars": 5, "terms": terms})


def test_const_value():
    jet = eval_jet(phase("ConstCoeff"), [1, 0], 0.5, [1, 1])
    assert jet.value == 2.0


def test_counterexample_hess_yy():
    jet = eval_jet(phase("Counterexample"), [0, 0], 0.3, [0.6, 0.6])
    np.testing.assert_allclose(jet.hess_yy, np.diag([0.3, 0.3 / 0.82]), rtol=1e-14)
    assert np.linalg.det(jet.hess_yy) == pytest.approx(0.09 / 0.82, rel=1e-13)


@pytest.mark.parametrize("t", [-0.4, 0.0, 0.25])
def test_star_hess_yy(t):
    jet = eval_jet(phase("BourgainStar"), [0.1, -0.2], t, [0.3, 0.1])
    np.testing.assert_allclose(jet.hess_yy, [[0, t], [t, t * t]], atol=1e-15)
    assert np.linalg.det(jet.hess_yy) == pytest.approx(-t * t, abs=1e-15)


def test_gauss_map_examples(const):
    np.testing.assert_allclose(gauss_map(const, [0, 0], 0.1, [0, 0]), [0, 0, 1], atol=1e-15)
    g = gauss_map(const, [0, 0], 0.1, [0.5, 0])
    np.testing.assert_allclose(g, np.array([-1, 0, 1]) / math.sqrt(2), atol=1e-15)


def test_nondegeneracy_const(const):
    rep = verify_nondegeneracy(const, samples=256)
    assert rep.H1_ok and rep.H2_ok
    assert rep.min_det_hess_xy == pytest.approx(1.0)
    # the unnormalized form has det 4; with a unit normal it is 4 / (1 + 4|y|^2)
    assert curvature_det(const, np.zeros(2), 0.0, np.zeros(2)) == pytest.approx(4.0)
    _, _, y = sample_domain(const, 64)
    np.testing.assert_allclose(
        curvature_det(const, np.zeros_like(y), 0.0, y), 4 / (1 + 4 * np.sum(y * y, axis=1)), rtol=1e-12
    )


def test_nondegeneracy_star_and_counterexample(star, counter):
    assert verify_nondegeneracy(star, samples=256).H1_ok
    rep = verify_nondegeneracy(counter, samples=256)
    assert rep.H1_ok and rep.H2_ok


def test_exponent_table_n3():
    e = exponent_table(3)
    assert e.p_crit == 2 and e.q_crit == 4
    assert e.beta(2) == Fraction(1, 2) and e.s(2) == 4
    assert e.alpha_H(2) == Fraction(1, 2) and e.alpha_H(4) == 0
    assert e.alpha_LS(4) == Fraction(1, 2)
    assert e.d_crit == 2 and e.m_crit == 1
    assert e.beta(Fraction(3, 2)) == 1 and e.s(Fraction(3, 2)) == 6


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_branch_continuity(n):
    e = exponent_table(n)
    p, q = float(e.p_crit), float(e.q_crit)
    assert abs(e.beta(p - 1e-9) - e.beta(p + 1e-9)) < 1e-8
    assert abs(e.alpha_H(q - 1e-9) - e.alpha_H(q + 1e-9)) < 1e-8
    assert e.m_crit == n - e.d_crit


def test_exponent_table_rejects_small_n():
    with pytest.raises(ValueError):
        exponent_table(1)


def test_counterexample_singularity(counter):
    with pytest.raises(SingularityError):
        counter.psi_y(2.0, np.array([0.0, 0.6]))


def test_domain_errors(const):
    with pytest.raises(DomainError):
        eval_jet(const, [0, 0, 0], 0.1, [0, 0])
    with pytest.raises(DomainError):
        eval_jet(const, [np.nan, 0], 0.1, [0, 0])


def test_json_roundtrip():
    ph = tipoly()
    again = PhaseSpec.from_json(ph.to_json())
    y = np.array([0.2, -0.1])
    assert again.psi(0.3, y) == pytest.approx(ph.psi(0.3, y))
    with pytest.raises(ConfigError):
        PhaseSpec.from_json({"kind": "ConstCoeff", "bogus": 1})
    with pytest.raises(ConfigError):
        PhaseSpec.from_json({"kind": "Nope"})


def test_tipoly_requires_vanishing_at_zero():
    with pytest.raises(ConfigError):
        phase("TranslationInvariantPoly", 3, psi={"vars": 3, "terms": [{"exps": [0, 2, 0], "coef": 1.0}]})


def test_counterexample_closed_form_vs_series(counter):
    rng = np.random.default_rng(3)
    t = rng.uniform(-0.9, 0.9, 2000)
    y = rng.uniform(-1, 1, (2000, 2))
    keep = np.abs(t * y[:, 1]) <= 0.9
    t, y = t[keep], y[keep]
    closed = counter.psi(t, y)
    series = counter._impl.psi_series(t, y, 200)
    assert np.max(np.abs(closed - series)) < 1e-12
    # the small-t branch
    ts = np.array([1e-6, -5e-5, 9.9e-5])
    yy = np.array([[0.3, 0.6]] * 3)
    np.testing.assert_allclose(counter.psi(ts, yy), counter._impl.psi_series(ts, yy, 200), atol=1e-18)


def _fd_check(ph, x, t, y, h=1e-5):
    jet = eval_jet(ph, x, t, y)
    d = ph.dim_y
    fd_xy = np.empty((d, d))
    fd_yy = np.empty((d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        gy_p, gy_m = ph.grad_y(x, t, y + e), ph.grad_y(x, t, y - e)
        fd_yy[:, j] = (gy_p - gy_m) / (2 * h)
        gx_p, gx_m = ph.grad_y(x + e, t, y), ph.grad_y(x - e, t, y)
        fd_xy[j, :] = (gx_p - gx_m) / (2 * h)
        fd_g = (ph.value(x, t, y + e) - ph.value(x, t, y - e)) / (2 * h)
        assert abs(fd_g - jet.grad_y[j]) <= 1e-6 * max(1.0, abs(jet.grad_y[j]))
    scale = max(1.0, np.abs(jet.hess_yy).max())
    assert np.abs(fd_yy - jet.hess_yy).max() <= 1e-6 * scale
    assert np.abs(fd_xy - jet.hess_xy).max() <= 1e-6 * max(1.0, np.abs(jet.hess_xy).max())
    assert abs(np.linalg.norm(jet.gauss) - 1) < 1e-12


@pytest.mark.parametrize("make", [lambda: phase(k) for k in BUILTINS] + [tipoly, custom])
def test_jet_matches_finite_differences(make):
    ph = make()
    x, t, y = sample_domain(ph, 1000, seed=7)
    for i in range(1000):
        _fd_check(ph, x[i], t[i], y[i])


@settings(max_examples=60, deadline=None)
@given(
    kind=st.sampled_from(BUILTINS),
    x=st.tuples(st.floats(-0.35, 0.35), st.floats(-0.35, 0.35)),
    t=st.floats(-0.49, 0.49),
    y=st.tuples(st.floats(-0.35, 0.35), st.floats(-0.35, 0.35)),
)
def test_gauss_unit_and_oriented(kind, x, t, y):
    g = gauss_map(phase(kind), x, t, y)
    assert abs(np.linalg.norm(g) - 1) < 1e-12
    assert g[-1] >= 0


@settings(max_examples=60, deadline=None)
@given(
    kind=st.sampled_from(BUILTINS),
    x=st.tuples(st.floats(-0.35, 0.35), st.floats(-0.35, 0.35)),
    t=st.floats(-0.49, 0.49),
    y=st.tuples(st.floats(-0.35, 0.35), st.floats(-0.35, 0.35)),
)
def test_translation_invariant_structure(kind, x, t, y):
    ph = phase(kind)
    x, y = np.array(x), np.array(y)
    assert ph.value(x, t, y) - x @ y == pytest.approx(float(ph.psi(t, y)), abs=1e-14)
    assert float(ph.psi(0.0, y)) == 0.0
    if kind == "ConstCoeff":
        assert ph.value(x, t, y) == pytest.approx(x @ y + t * (y @ y), abs=1e-15)
