import numpy as np
import pytest

from nuhlab.hyperbolicity import (
    ConeField,
    accessibility_reach,
    approximate_leaf,
    bunching_check,
    su_quadrilateral,
    verify_cone_invariance,
)
from nuhlab.maps import DEFAULT_A, Identity, Linear, Product, hyperbolic_eigen, torus_distance

LAM, EU, ES = hyperbolic_eigen(DEFAULT_A)


def _frames(d=4):
    U = np.zeros((d, 1))
    S = np.zeros((d, 1))
    U[:2, 0], S[:2, 0] = EU, ES
    return U, S


def test_cone_field_rejects_overlap():
    U, _ = _frames()
    with pytest.raises(ValueError):
        ConeField(U, U)


def test_product_cones_have_matrix_margins():
    f = Product(Linear(DEFAULT_A), Identity(2))
    X = np.random.default_rng(0).random((50, 4))
    rep = verify_cone_invariance(f, ConeField(*_frames()), X)
    for r in rep.values():
        assert r.passed
        assert r.axis_expansion == pytest.approx(LAM, rel=1e-12)


def test_identity_fails_cone_check():
    X = np.random.default_rng(1).random((20, 4))
    rep = verify_cone_invariance(Identity(4), ConeField(*_frames()), X)
    assert not rep["unstable"].passed and not rep["stable"].passed


def test_adapted_cones_on_pipeline(pipe):
    X = pipe.region.sample(np.random.default_rng(2), 64, "M")
    U, S = pipe.hyperbolic_guesses
    rep = verify_cone_invariance(pipe.f, ConeField(U, S, 0.3, adapt=30), X, 12)
    assert all(r.passed for r in rep.values())


def test_bunching_positive_on_pipeline(pipe):
    X = pipe.region.sample(np.random.default_rng(3), 64, "M")
    U, S = pipe.hyperbolic_guesses
    assert bunching_check(pipe.f, X, U, S, n_steps=24).margin > 0.0


def test_leaf_of_linear_map_is_straight():
    f = Product(Linear(DEFAULT_A), Identity(2))
    x = np.array([0.3, 0.7, 0.1, 0.1])
    d = np.concatenate([EU, [0, 0]])
    L = approximate_leaf(f, x, "unstable", 0.05, d)
    assert L.is_graph
    off = L.points - L.points[L.index]
    resid = off - np.outer(off @ d, d)
    assert np.abs(resid).max() < 1e-12
    assert torus_distance(L.at(0.0), x) < 1e-14


def test_leaf_kind_checked():
    with pytest.raises(ValueError):
        approximate_leaf(Identity(4), np.zeros(4), "centre", 0.1, np.ones(4))


def test_product_holonomy_vanishes(pipe):
    x = np.array([0.3, 0.7, 0.1, 0.1])
    r = su_quadrilateral(pipe.F, x, (0.02, 0.02), EU, ES)
    assert r.magnitude == 0.0 and r.error == 0.0
    assert not r.significant


def test_pipeline_holonomy_scales_with_leg_product(pipe):
    # off the twist centre, where the displacement is not symmetric-cancelled
    x = np.array([0.3, 0.7, 0.07, 0.1])
    big = su_quadrilateral(pipe.f, x, (0.02, 0.02), EU, ES)
    small = su_quadrilateral(pipe.f, x, (0.01, 0.01), EU, ES)
    assert big.significant
    assert 3.0 < big.magnitude / small.magnitude < 5.5


def test_reach_raster_shape(pipe):
    R = accessibility_reach(pipe.F, (0.3, 0.7), 0.05, 0.15, 2, (0.02, 0.02), EU, ES)
    assert R.magnitude.shape == (2, 2)
    assert R.significant_fraction == 0.0
    assert not R.failed.any()
