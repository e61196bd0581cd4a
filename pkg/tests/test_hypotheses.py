import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ckl.errors import ConfigError
from ckl.hypotheses import (
    FunctionFamily,
    band_verdict,
    bocher_check,
    check_hypothesis_I,
    check_hypothesis_II,
    check_weak_hypothesis_I,
    minor_family,
    minor_pairs,
    seeded_analytic_family,
    taylor_rank,
    wronskian,
)
from ckl.phases import phase


def fam(*funcs):
    return FunctionFamily.from_functions(funcs)


@pytest.mark.parametrize("t", [-0.3, 0.0, 0.7])
def test_wronskian_examples(t):
    assert wronskian(fam(lambda s: 1 + 0 * s, lambda s: s, lambda s: s**2), t) == pytest.approx(2.0, abs=1e-10)
    assert wronskian(fam(lambda s: s, lambda s: 2 * s), t) == pytest.approx(0.0, abs=1e-12)
    assert wronskian(fam(np.sin, np.cos), t) == pytest.approx(-1.0, abs=1e-12)


def test_taylor_rank_examples():
    assert taylor_rank(fam(lambda s: s, lambda s: s**2), 0.0, 2) == 2
    assert taylor_rank(fam(lambda s: s, lambda s: 2 * s), 0.0, 3) == 1
    mono = fam(lambda s: 1 + 0 * s, lambda s: s, lambda s: s**2, lambda s: s**3)
    assert taylor_rank(mono, 0.3, 5) == 4
    # exact coefficient matrix of the shifted monomials at s = 0.3
    exact = np.array([[1, 0.3, 0.09, 0.027], [0, 1, 0.6, 0.27], [0, 0, 1, 0.9], [0, 0, 0, 1], [0, 0, 0, 0], [0, 0, 0, 0]])
    np.testing.assert_allclose(mono.taylor(0.3, 5), exact, atol=1e-12)
    with pytest.raises(ValueError):
        taylor_rank(mono, 0.0, 2)


def test_derivatives_match_finite_differences():
    f = fam(np.exp, np.sin, lambda s: s**3)
    s, h = 0.2, 1e-5
    d1 = f.derivatives(s, 1)[1]
    fd = (f(np.array(s + h)) - f(np.array(s - h))) / (2 * h)
    np.testing.assert_allclose(d1, fd, rtol=1e-6)


def test_minor_pairs():
    assert minor_pairs((0, 1), (0, 1), include_full=False) == [((0,), (0,)), ((0,), (1,)), ((1,), (0,)), ((1,), (1,))]
    assert len(minor_pairs((0, 1), (0, 1), include_full=True)) == 5


def test_band_verdict():
    assert band_verdict(0.0) == "Holds"
    assert band_verdict(0.5) == "Inconclusive"
    assert band_verdict(0.995) == "Fails"


def test_hypothesis_I_const():
    rep = check_hypothesis_I(phase("ConstCoeff"), y_samples=500)
    assert rep.verdict == "Holds" and rep.exceptional_fraction == 0
    assert rep.details["rank_agreement"] == 1.0


def test_hypothesis_I_counterexample_witness():
    rep = check_hypothesis_I(phase("Counterexample"), y_samples=500)
    assert rep.verdict == "Fails"
    y2 = rep.details["witness_y"][1]
    np.testing.assert_allclose(rep.details["witness_mu"], [-1 / y2, 0, 0, 1 / y2], rtol=1e-8, atol=1e-10)


def test_hypothesis_I_star():
    rep = check_hypothesis_I(phase("BourgainStar"), y_samples=500)
    assert rep.verdict == "Fails"
    np.testing.assert_allclose(rep.details["witness_mu"], [0, 0, 0, -1], atol=1e-10)


def test_weak_hypothesis_I():
    assert check_weak_hypothesis_I(phase("Counterexample")).verdict == "Holds"
    assert check_weak_hypothesis_I(phase("ConstCoeff")).verdict == "Holds"
    star = check_weak_hypothesis_I(phase("BourgainStar"))
    assert star.verdict == "Fails"
    np.testing.assert_allclose(star.details["witness_mu"], [0, 0, 0, -1], atol=1e-10)


@pytest.mark.parametrize("kind", ["ConstCoeff", "BourgainStar"])
def test_hypothesis_II_holds(kind):
    rep = check_hypothesis_II(phase(kind), samples=300)
    assert rep.verdict == "Holds" and rep.rank == 2 and rep.rank_constant
    assert rep.details["rank_stable_under_doubling"]


def test_hypothesis_II_injected_constant():
    rep = check_hypothesis_II(phase("ConstCoeff"), samples=100, extra_functions=[lambda t: np.ones_like(t)])
    assert rep.details["part_a"] == "Fails"
    assert rep.verdict != "Holds"


def test_star_derivative_stack_rank_at_zero():
    # functions (-t^2, 0, t, t, t^2) at t = 0: derivative rows (0,0,0,0,0), (0,0,1,1,0), (-2,0,0,0,2)
    ph = phase("BourgainStar")
    f = minor_family(ph, np.array([0.1, 0.2]), minor_pairs((0, 1), (0, 1), True))
    # columns ordered [1|1], [1|2], [2|1], [2|2], [12|12]; rows are Taylor orders 0..2
    expected = [[0, 0, 0, 0, 0], [0, 1, 1, 0, 0], [0, 0, 0, 1, -1]]
    np.testing.assert_allclose(f.taylor(0.0, 2), expected, atol=1e-12)
    assert np.linalg.matrix_rank(f.taylor(0.0, 2), tol=1e-10) == 2


def test_hypothesis_errors():
    custom = phase("Custom", 3, phi={"vars": 5, "terms": [{"exps": [1, 0, 0, 1, 0], "coef": 1.0}, {"exps": [0, 1, 0, 0, 1], "coef": 1.0}]})
    with pytest.raises(ConfigError):
        check_hypothesis_I(custom)
    with pytest.raises(ConfigError):
        check_hypothesis_II(phase("ConstCoeff"), d=1)
    with pytest.raises(ConfigError):
        check_hypothesis_I(phase("ConstCoeff"), t_points=100)


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("dependent", [True, False])
def test_bocher_agreement(seed, dependent):
    chk = bocher_check(seeded_analytic_family(100 + seed, dependent))
    assert chk.agree
    assert chk.wronskian_zero == dependent


def test_bocher_on_polynomial_and_trig():
    dep = fam(lambda s: np.sin(s) ** 2, lambda s: np.cos(s) ** 2, lambda s: 1 + 0 * s)
    ind = fam(np.sin, np.cos, lambda s: s)
    assert bocher_check(dep).wronskian_zero and bocher_check(dep).rank_deficient
    assert not bocher_check(ind).wronskian_zero and not bocher_check(ind).rank_deficient


def _scaled(kind, c):
    ph = phase(kind)
    base = ph._impl

    class Wrap:
        translation_invariant = True

        def psi_yy(self, t, y):
            return c * base.psi_yy(t, y)

    ph._impl = Wrap()
    return ph


def _swapped(kind):
    ph = phase(kind)
    base = ph._impl

    class Wrap:
        translation_invariant = True

        def psi_yy(self, t, y):
            h = base.psi_yy(t, y[..., ::-1])
            return h[..., ::-1, ::-1]

    ph._impl = Wrap()
    return ph


@settings(max_examples=12, deadline=None)
@given(kind=st.sampled_from(["ConstCoeff", "BourgainStar", "Counterexample"]), c=st.sampled_from([-3.0, -0.5, 0.25, 7.0]))
def test_hypothesis_I_invariances(kind, c):
    ref = check_hypothesis_I(phase(kind), y_samples=200).verdict
    assert check_hypothesis_I(_scaled(kind, c), y_samples=200).verdict == ref
    assert check_hypothesis_I(_swapped(kind), y_samples=200).verdict == ref
