import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nuhlab.maps import (
    CAT_MAP,
    DEFAULT_A,
    Identity,
    Linear,
    Product,
    Shear,
    Translation,
    Twist,
    compose,
    eval_map,
    fixed_points_of_linear,
    hyperbolic_eigen,
    iterate,
    jacobian,
    jacobian_fd_check,
    max_abs_det_error,
    power,
    torus_distance,
    wrap,
)
from nuhlab.profiles import PlaneWave, Radial, RadialProfile

points4 = arrays(np.float64, (16, 4), elements=st.floats(0, 1, exclude_max=True))


def sample_maps():
    prof = RadialProfile(0.0, 0.0, 0.1, 0.2)
    return [
        Linear(DEFAULT_A),
        Product(Linear(DEFAULT_A), Translation((0.3, 0.1))),
        Shear(4, 2, (Radial((0, 1), (0.5, 0.5), prof), PlaneWave((3,), (1,))), 0.3),
        Twist(4, (2, 3), (0.4, 0.6), prof, 1.3, (PlaneWave((0, 1), (1, 0)),)),
        compose(
            Twist(4, (2, 3), (0.4, 0.6), prof, 1.3, (PlaneWave((0, 1), (1, 0)),)),
            Product(Linear(DEFAULT_A), Identity(2)),
            Shear(4, 0, (Radial((2, 3), (0.4, 0.6), prof),), 0.05),
        ),
    ]


def test_wrap_keeps_unit_interval_bitwise():
    X = np.array([0.0, 0.25, 0.9999999999999999, -1e-18, 1.0, 2.5])
    Y = wrap(X)
    assert np.all((Y >= 0) & (Y < 1))
    assert Y[:3].tolist() == X[:3].tolist()


@given(points4)
def test_volume_preserved(X):
    for f in sample_maps():
        Y = X[:, : f.dim] if f.dim < 4 else X
        assert max_abs_det_error(f, Y) < 1e-10


@given(points4)
def test_inverse_round_trip(X):
    for f in sample_maps():
        Y = X[:, : f.dim] if f.dim < 4 else X
        back = eval_map(f.inverse(), eval_map(f, Y))
        assert torus_distance(back, Y).max() < 1e-10


def test_jacobians_match_finite_differences():
    X = np.random.default_rng(1).random((64, 4))
    for f in sample_maps():
        Y = X[:, : f.dim] if f.dim < 4 else X
        assert jacobian_fd_check(f, Y, 1e-6) < 1e-6


def test_shear_rejects_self_dependence():
    with pytest.raises(ValueError):
        Shear(4, 2, (PlaneWave((2,), (1,)),))


def test_twist_copies_must_not_overlap():
    with pytest.raises(ValueError, match="overlap"):
        Twist(2, (0, 1), (0.0, 0.5), RadialProfile(0, 0, 0.1, 0.2), 1.0, (), 3)


def test_gadgets_are_identity_off_support():
    prof = RadialProfile(0.0, 0.0, 0.05, 0.1)
    tw = Twist(4, (2, 3), (0.5, 0.5), prof, 2.0, (PlaneWave((0, 1), (1, 0)),))
    X = np.random.default_rng(2).random((1000, 4))
    far = np.linalg.norm(X[:, 2:] - 0.5, axis=1) >= 0.1
    assert np.array_equal(eval_map(tw, X[far]), X[far])


def test_linear_rejects_non_unimodular():
    with pytest.raises(ValueError):
        Linear(np.array([[2, 0], [0, 1]]))


def test_fixed_points_of_default_matrix():
    pts = fixed_points_of_linear(DEFAULT_A)
    assert len(pts) == abs(round(np.linalg.det(DEFAULT_A - np.eye(2))))
    assert any(np.allclose(p, [0.2, 0.4]) for p in pts)
    for p in pts:
        assert torus_distance(eval_map(Linear(DEFAULT_A), p), p) < 1e-12


def test_hyperbolic_eigen_default_matrix():
    lam, eu, es = hyperbolic_eigen(DEFAULT_A)
    assert abs(lam - (7 + 3 * np.sqrt(5)) / 2) < 1e-12
    assert np.allclose(DEFAULT_A @ eu, lam * eu)
    assert np.allclose(DEFAULT_A @ es, es / lam)


def test_iterate_and_power_agree():
    f = Linear(CAT_MAP)
    x = np.array([0.1, 0.3])
    orbit = iterate(f, x, 5)
    assert orbit.shape == (6, 2)
    assert np.array_equal(orbit[-1], power(f, x, 5))


def test_jacobian_of_composition_is_chain_rule():
    f, g = sample_maps()[2], sample_maps()[3]
    X = np.random.default_rng(3).random((10, 4))
    J = jacobian(compose(g, f), X)
    J2 = jacobian(g, eval_map(f, X)) @ jacobian(f, X)
    assert np.allclose(J, J2, atol=1e-12)
