import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ckl.errors import ConfigError, NyquistError
from ckl.oscillatory import (
    AmplitudeSpec,
    SpatialLattice,
    YGrid,
    apply_extension,
    apply_propagator,
    bump,
    norm_scaling_experiment,
    parse_suite,
    quadrature_gate,
    suite_functions,
)
from ckl.phases import phase

LAM = 8.0


def one(y):
    return np.ones(np.shape(y)[:-1])


def sample_points(rng, count, lam=LAM, rho=0.5):
    return rng.uniform(-lam * rho, lam * rho, size=(count, 3))


def zero_phase():
    # phi = x1 * 0: a surrogate without oscillation (its curves are irrelevant here)
    return phase("Custom", 3, phi={"vars": 5, "terms": []})


def test_bump_profile():
    assert bump(0.0) == 1.0 and bump(1.0) == 0.0 and bump(1.5) == 0.0
    assert bump(0.5) == pytest.approx(0.75**4)


def test_amplitude_support_and_range(rng):
    amp = AmplitudeSpec(rho=0.5)
    x = rng.uniform(-1, 1, (1000, 2))
    y = rng.uniform(-1, 1, (1000, 2))
    t = rng.uniform(-1, 1, 1000)
    a = amp(x, t, y)
    assert np.all((0 <= a) & (a <= 1))
    outside = (np.linalg.norm(x, axis=1) >= 0.5) | (np.abs(t) >= 0.5) | (np.linalg.norm(y, axis=1) >= 0.5)
    assert np.all(a[outside] == 0)
    with pytest.raises(ConfigError):
        AmplitudeSpec("CapRestricted", 0.5, (0.4, 0.0), 0.2)
    with pytest.raises(ConfigError):
        AmplitudeSpec("Other")


def test_zero_input_gives_zero(const):
    pts = sample_points(np.random.default_rng(0), 50)
    assert np.all(apply_extension(const, None, LAM, lambda y: 0 * one(y), pts).values == 0)
    assert np.all(apply_propagator(const, None, LAM, lambda y: 0 * one(y), pts).values == 0)


def test_value_at_origin(const):
    # the phase vanishes at (0, 0); int (1 - |y|^2/rho^2)^4 over the disc is pi rho^2 / 5
    v = apply_extension(const, None, LAM, one, np.zeros((1, 3))).values[0]
    assert v == pytest.approx(math.pi * 0.25 / 5, abs=1e-8)


def test_no_oscillation_surrogate(rng):
    amp = AmplitudeSpec(rho=0.5)
    f = lambda y: np.cos(3 * y[..., 0]) + 1j * y[..., 1]  # noqa: E731
    pts = sample_points(rng, 20)
    got = apply_extension(zero_phase(), amp, 4.0, f, pts).values
    grid = YGrid.for_lambda(amp, 2, 4.0)
    ys = grid.points()
    direct = np.sum(amp.y_factor(ys) * f(ys) * grid.weights())
    expect = direct * amp.x_factor(pts[:, :2] / 4.0) * amp.t_factor(pts[:, 2] / 4.0)
    np.testing.assert_allclose(got, expect, atol=1e-10)


def test_propagator_matches_linear_phase_at_t0(const):
    linear = phase("Custom", 3, phi={"vars": 5, "terms": [{"exps": [1, 0, 0, 1, 0], "coef": 1.0}, {"exps": [0, 1, 0, 0, 1], "coef": 1.0}]})
    pts = sample_points(np.random.default_rng(4), 40)
    pts[:, 2] = 0.0
    fhat = lambda y: np.exp(-((y[..., 0] - 0.1) ** 2)) * (1 + 1j * y[..., 1])  # noqa: E731
    u = apply_propagator(const, None, LAM, fhat, pts).values
    s = apply_extension(linear, None, LAM, fhat, pts).values
    np.testing.assert_allclose(u, s, atol=1e-10)


def test_point_mass(star):
    amp = AmplitudeSpec(rho=0.5)
    grid = YGrid.for_lambda(amp, 2, LAM)
    fhat = np.zeros((len(grid.axis),) * 2, complex)
    i, j = len(grid.axis) // 2 + 3, len(grid.axis) // 2 - 5
    fhat[i, j] = 1.0
    pts = sample_points(np.random.default_rng(5), 60)
    vals = apply_propagator(star, amp, LAM, fhat, pts, grid).values
    y0 = np.array([grid.axis[i], grid.axis[j]])
    expect = amp.x_factor(pts[:, :2] / LAM) * amp.t_factor(pts[:, 2] / LAM) * amp.y_factor(y0) * grid.weights()[i, j]
    np.testing.assert_allclose(np.abs(vals), expect, rtol=1e-12, atol=1e-18)


def test_lattice_and_point_paths_agree(star):
    lat = SpatialLattice.default(AmplitudeSpec(rho=0.5), 3, LAM)
    f = lambda y: np.sin(5 * y[..., 0]) + 0.5j  # noqa: E731
    field = apply_extension(star, None, LAM, f, lat)
    pts = lat.points()
    idx = np.random.default_rng(1).integers(0, pts.reshape(-1, 3).shape[0], 200)
    direct = apply_extension(star, None, LAM, f, pts.reshape(-1, 3)[idx]).values
    np.testing.assert_allclose(field.values.reshape(-1)[idx], direct, atol=1e-12)


def test_nyquist_error(const):
    amp = AmplitudeSpec(rho=0.5)
    coarse = YGrid(np.linspace(-0.5, 0.5, 11), 2)
    with pytest.raises(NyquistError):
        apply_extension(const, amp, LAM, one, np.zeros((1, 3)), coarse)
    with pytest.raises(ConfigError):
        apply_extension(const, amp, 100.0, one, np.zeros((1, 3)))


@pytest.mark.parametrize("kind", ["ConstCoeff", "BourgainStar"])
@pytest.mark.parametrize("lam", [8.0, 16.0, 32.0])
def test_quadrature_gate(kind, lam):
    ph = phase(kind)
    pts = sample_points(np.random.default_rng(2), 64, lam)
    assert quadrature_gate(ph, None, lam, one, pts) < 1e-6


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), kind=st.sampled_from(["ConstCoeff", "BourgainStar", "Counterexample"]))
def test_linearity_and_pointwise_bound(seed, kind):
    ph = phase(kind)
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal(2)
    f = lambda y: np.cos(a * y[..., 0]) + 1j * np.sin(b * y[..., 1])  # noqa: E731
    g = lambda y: np.exp(a * y[..., 1]) - b * y[..., 0] ** 2  # noqa: E731
    pts = sample_points(rng, 30)
    sf = apply_extension(ph, None, LAM, f, pts)
    sg = apply_extension(ph, None, LAM, g, pts)
    sfg = apply_extension(ph, None, LAM, lambda y: f(y) + g(y), pts)
    np.testing.assert_allclose(sfg.values, sf.values + sg.values, atol=1e-12)
    amp = AmplitudeSpec(rho=0.5)
    grid = YGrid.for_lambda(amp, 2, LAM)
    l1 = np.sum(np.abs(f(grid.points())) * grid.weights())
    assert np.all(np.abs(sf.values) <= sf.meta["l1_af"] * (1 + 1e-12))
    assert sf.meta["l1_af"] <= amp.sup * l1 * (1 + 1e-12)


def test_suites():
    assert parse_suite(["ConstantOne", "RandomSigns(4)"]) == [("ConstantOne", 0), ("RandomSigns", 4)]
    with pytest.raises(ConfigError):
        parse_suite("Nope")
    amp = AmplitudeSpec(rho=0.5)
    caps = suite_functions("CapFunctions", 0, 16.0, amp, 2)
    assert len(caps) == 2
    assert caps[0][1](np.zeros((1, 2)))[0] == 1.0
    signs = suite_functions("RandomSigns", 3, 16.0, amp, 2)[0][1](np.random.default_rng(0).uniform(-0.5, 0.5, (100, 2)))
    assert set(np.unique(signs)) <= {-1.0, 1.0}


def test_norm_scaling_small(const):
    res = norm_scaling_experiment(const, 4, (8, 12, 16), ("ConstantOne",))
    assert res.ratios.shape == (3,) and np.all(res.ratios > 0)
    assert len(list(res.rows())) == 3
    ls = norm_scaling_experiment(const, 4, (8, 12, 16), ("ConstantOne",), mode="LocalSmoothing")
    assert np.all(np.isfinite(ls.ratios)) and np.all(ls.ratios > 0)
    for bad in ({"q": 7}, {"lambdas": (4, 8, 16)}, {"mode": "Other"}, {"input_norm": "L3"}):
        kw = {"q": 4, "lambdas": (8, 12, 16), "mode": "Hormander", "input_norm": "L2"} | bad
        with pytest.raises(ConfigError):
            norm_scaling_experiment(const, kw["q"], kw["lambdas"], ("ConstantOne",), mode=kw["mode"], input_norm=kw["input_norm"])
