import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nuhlab.anosov_katok import (
    Rearrangement,
    StageParams,
    default_ak_map,
    invariant_set,
    rotation_tube_set,
    transitivity_probe,
)
from nuhlab.maps import eval_map, max_abs_det_error, power, torus_distance

pts2 = st.lists(st.tuples(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True)),
                min_size=1, max_size=32).map(np.array)


@pytest.fixture(scope="module")
def ak():
    return default_ak_map(0.2)


def test_rearrangement_is_identity_near_square():
    r = Rearrangement(0.2)
    g = np.linspace(-0.015, 0.215, 40)
    X = np.stack(np.meshgrid(g, g), -1).reshape(-1, 2) % 1.0
    assert np.array_equal(eval_map(r.forward_map(), X), X)


@given(pts2)
def test_rearrangement_round_trip_and_area(X):
    r = Rearrangement(0.2)
    Y = eval_map(r.inverse_map(), eval_map(r.forward_map(), X))
    assert torus_distance(Y, X).max() < 1e-10
    assert max_abs_det_error(r.forward_map(), X) < 1e-10


def test_stage_params_validation():
    with pytest.raises(ValueError):
        StageParams(q=0)
    with pytest.raises(ValueError):
        StageParams(q=2, height=1.0)


def test_period_and_volume(ak):
    assert ak.period == 120
    assert ak.period_defect < 1e-9
    X = np.random.default_rng(0).random((2000, 2))
    assert max_abs_det_error(ak.T, X) < 1e-8


def test_stage_rotations_refine(ak):
    qs = [st.q for st in ak.stages]
    assert all(b % a == 0 for a, b in zip(qs, qs[1:]))
    assert all(row["within_budget"] for row in ak.closeness)


def test_k_measure_closed_form(ak):
    K = invariant_set(ak)
    assert K.measure == pytest.approx(0.8, abs=1e-15)
    X = np.random.default_rng(1).random((200000, 2))
    assert K.membership(X).mean() == pytest.approx(0.8, abs=5e-3)


@given(st.integers(0, 2**31))
def test_k_invariant_under_T(seed):
    ak = _AK
    K = invariant_set(ak)
    X = K.sample(np.random.default_rng(seed), 64)
    for _ in range(ak.period):
        X = ak.T._apply(X)
        assert K.membership(X, 1e-9).all()


def test_corrupted_set_is_not_invariant(ak):
    K = invariant_set(ak).corrupted(0.1)
    X = K.sample(np.random.default_rng(2), 2000)
    alive = np.ones(len(X), bool)
    for _ in range(ak.period):
        X = ak.T._apply(X)
        alive &= K.membership(X, 1e-9)
    assert alive.mean() < 1.0


def test_rotation_tube_measure():
    assert rotation_tube_set(0.2).measure == pytest.approx(0.8)


def test_transitivity_probe_bounds(ak):
    frac = transitivity_probe(ak.T, (0.5, 0.05), 2000, 0.1)
    assert 0.0 < frac <= 1.0
    with pytest.raises(ValueError):
        transitivity_probe(ak.T, (0.5, 0.5), 0, 0.1)


def test_periodic_orbit_closes(ak):
    X = np.random.default_rng(3).random((100, 2))
    assert torus_distance(power(ak.T, X, ak.period), X).max() < 1e-9


_AK = default_ak_map(0.2)
