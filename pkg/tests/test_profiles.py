import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from nuhlab.profiles import (
    Offset,
    Plateau,
    PlaneWave,
    Radial,
    RadialProfile,
    Ramp,
    min_image,
    plane_offset,
    smoothstep,
)

unit = st.floats(0.0, 1.0, allow_nan=False, exclude_max=True)


def _fd_grad(factor, X, h=1e-6):
    out = []
    for c in factor.coords:
        e = np.zeros(X.shape[1])
        e[c] = h
        p, _ = factor.evaluate(X + e)
        m, _ = factor.evaluate(X - e)
        out.append((p - m) / (2 * h))
    return np.stack(out, axis=1)


@given(st.floats(-3, 3, allow_nan=False))
def test_min_image_range(t):
    m = min_image(t)
    assert -0.5 <= m < 0.5
    assert abs((t - m) - round(t - m)) < 1e-12


def test_smoothstep_limits_are_exact():
    v, d = smoothstep(np.array([-1.0, 0.0, 1.0, 2.0]))
    assert v.tolist() == [0.0, 0.0, 1.0, 1.0]
    assert d.tolist() == [0.0, 0.0, 0.0, 0.0]


@given(st.floats(0.0, 0.45))
def test_radial_profile_exactly_zero_outside_support(r):
    p = RadialProfile(0.0, 0.0, 0.05, 0.1)
    v, _ = p(np.array([r]))
    if r >= 0.1:
        assert v[0] == 0.0
    if r <= 0.05:
        assert v[0] == 1.0


def test_profile_gradients_match_finite_differences():
    rng = np.random.default_rng(0)
    X = rng.random((200, 4))
    factors = [
        Radial((2, 3), (0.5, 0.5), RadialProfile(0.05, 0.1, 0.2, 0.3)),
        Radial((2, 3), (0.5, 0.5), RadialProfile(0.0, 0.0, 0.1, 0.3), invert=True),
        Plateau(1, 0.4, 0.1, 0.2, invert=True),
        PlaneWave((0, 1), (1, 2), 0.3),
        Offset(3, 0.5),
    ]
    for f in factors:
        _, g = f.evaluate(X)
        assert np.abs(g - _fd_grad(f, X)).max() < 1e-4


def test_ramp_winds_and_vanishes_off_its_arc():
    r = Ramp(0, 3, 0.3, 0.5)
    assert r.winding_degree == 3
    X = np.zeros((4, 2))
    X[:, 0] = [0.0, 0.1, 0.29, 0.81]
    v, _ = r.evaluate(X)
    assert np.all(v[:3] == 0.0)
    assert abs(v[3] - 3.0) < 1e-12 or v[3] == 0.0


@given(unit, unit, st.integers(1, 6))
def test_plane_offset_is_nearest_copy(a, b, copies):
    X = np.array([[a, b]])
    d = plane_offset(X, (0, 1), (0.1, 0.2), copies)
    assert np.all(np.abs(d[:, 0]) <= 0.5 / copies + 1e-12)
    assert np.all(np.abs(d[:, 1]) <= 0.5)
