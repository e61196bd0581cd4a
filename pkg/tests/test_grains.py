import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ckl.errors import ConfigError, DegenerateError
from ckl.grains import (
    Grain,
    circle_polynomials,
    family_grain_fractions,
    grain_membership,
    hyperplane_polynomial,
    log_surface_function,
    neighborhood_volume_fit,
    nonconcentration_count,
    proxy_inside,
    sphere_polynomial,
    tube_grain_fraction,
)
from ckl.phases import phase
from ckl.polynomials import Polynomial
from ckl.surfaces import hyperplane_distance
from ckl.tubes import Tube, build_family

BOX = (np.array([-0.7] * 3), np.array([0.7] * 3))


def sphere_grain(delta=0.05):
    return Grain([sphere_polynomial(3, 0.5)], delta, 1.0, np.zeros(3))


def test_sphere_membership():
    g = sphere_grain()
    assert grain_membership(g, [0.5, 0, 0])
    assert not grain_membership(g, [0, 0, 0])
    assert not grain_membership(g, [0.6, 0, 0])


def test_hyperplane_membership_exact():
    p = Polynomial(3, [[0, 0, 1]], [1.0])
    g = Grain([p], 0.05, 1.0, np.zeros(3))
    for z in (0.0, 0.0499, 0.05, 0.0501, -0.2):
        assert grain_membership(g, [0.1, 0.2, z]) == (abs(z) <= 0.05)


@settings(max_examples=100, deadline=None)
@given(
    normal=st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)).filter(lambda v: np.linalg.norm(v) > 0.1),
    offset=st.floats(-0.3, 0.3),
    pt=st.tuples(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5)),
    delta=st.floats(0.01, 0.3),
)
def test_hyperplane_proxy_matches_distance(normal, offset, pt, delta):
    p = hyperplane_polynomial(normal, offset)
    pt = np.array(pt)
    dist = float(hyperplane_distance(pt, np.asarray(normal) / np.linalg.norm(normal), offset / np.linalg.norm(normal)))
    v = np.asarray(normal) / np.linalg.norm(normal)
    assert bool(proxy_inside([p], pt, delta)) == (abs(pt @ v - offset / np.linalg.norm(normal)) <= delta)
    assert dist == pytest.approx(abs(pt @ v - offset / np.linalg.norm(normal)), abs=1e-12)


def test_json_polynomial_grain():
    table = {"vars": 3, "terms": [{"exps": [0, 0, 1], "coef": 2.0}]}
    g = Grain([table], 0.1, 0.5, np.zeros(3))
    assert g.codim == 1 and grain_membership(g, [0, 0, 0.04])


def test_grain_validation():
    with pytest.raises(ConfigError):
        Grain([], 0.1, 0.5, np.zeros(3))
    with pytest.raises(ConfigError):
        Grain([sphere_polynomial()], 0.6, 0.5, np.zeros(3))
    with pytest.raises(ConfigError):
        Grain([sphere_polynomial(2)], 0.1, 0.5, np.zeros(3))
    p = Polynomial(3, [[0, 0, 1]], [1.0])
    with pytest.raises(DegenerateError):
        Grain([p, Polynomial(3, [[0, 0, 1]], [2.0])], 0.1, 0.5, np.zeros(3))
    with pytest.raises(ConfigError):
        Grain(["x"], 0.1, 0.5, np.zeros(3))


def test_circle_is_transverse():
    g = Grain(circle_polynomials(), 0.05, 1.0, np.zeros(3))
    assert g.codim == 2 and g.min_gram > 0.5


def test_fraction_inside_zero_set(counter):
    fam = build_family(counter, 1 / 16, "Direction", "CounterexampleOmega")
    grain = Grain([log_surface_function()], 1 / 16, 1.0, np.array([1.1, 0.0, 0.0]))
    tube = Tube(tuple(fam.ys[0]), tuple(fam.omegas[0]), fam.delta)
    assert tube_grain_fraction(counter, tube, grain) >= 0.9


def test_fraction_far_and_transverse(const):
    far = Grain([hyperplane_polynomial([1, 0, 0], 0.0)], 0.05, 1.0, np.array([0.0, 3.0, 0.0]))
    assert tube_grain_fraction(const, Tube((0.0, 0.0), (0.0, 0.0), 0.05), far) == 0.0
    # the slab |t - 0.1| <= delta crosses a vertical tube in a t-interval of length 2 delta
    delta = 0.05
    slab = Grain([hyperplane_polynomial([0, 0, 1], 0.1)], delta, 1.0, np.zeros(3))
    frac = tube_grain_fraction(const, Tube((0.2, 0.1), (0.0, 0.0), delta), slab, t_samples=256)
    expected = 2 * delta / 1.0
    assert expected / 2 <= frac <= 2 * expected
    with pytest.raises(ConfigError):
        tube_grain_fraction(const, Tube((0.0, 0.0), (0.0, 0.0), delta), slab, t_samples=32)


@pytest.mark.parametrize("k", [4, 5])
def test_counterexample_total_concentration(counter, k):
    delta = 2.0**-k
    fam = build_family(counter, delta, "Direction", "CounterexampleOmega")
    grain = Grain([log_surface_function()], delta, 1.0, np.array([1.1, 0.0, 0.0]))
    assert nonconcentration_count(fam, grain, 0.5) == len(fam)
    assert nonconcentration_count(fam, grain, 1.5) == 0


def test_monotonicity(const):
    fam = build_family(const, 1 / 8)
    grain = Grain([hyperplane_polynomial([0.36, 0.48, 0.8], 0.05)], 1 / 8, 1.0, np.zeros(3))
    fr = family_grain_fractions(fam, grain)
    lams = [0.05, 0.1, 0.2, 0.4, 0.8]
    counts = [nonconcentration_count(fam, grain, lam) for lam in lams]
    assert counts == sorted(counts, reverse=True)
    assert counts[0] == int(np.sum(fr >= 0.05))
    wider = [nonconcentration_count(fam, grain.with_delta(d), 0.2) for d in (1 / 16, 1 / 8, 1 / 4)]
    assert wider == sorted(wider)


def test_wongkew_slopes_short():
    deltas = [2.0**-k for k in range(3, 6)]
    assert neighborhood_volume_fit([sphere_polynomial()], deltas, BOX).fit.slope == pytest.approx(1, abs=0.1)
    assert neighborhood_volume_fit(circle_polynomials(), deltas, BOX).fit.slope == pytest.approx(2, abs=0.15)
    assert neighborhood_volume_fit([], deltas, BOX).fit.slope == pytest.approx(0, abs=0.05)
