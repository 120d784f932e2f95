import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nuhlab.lyapunov import (
    benettin_spectrum,
    central_exponents,
    center_log_jacobian,
    estimate_center_plane,
)
from nuhlab.maps import CAT_MAP, DEFAULT_A, Identity, Linear, Product, Translation

GOLD = np.log((3 + np.sqrt(5)) / 2)


def test_cat_map_oracle():
    est = benettin_spectrum(Linear(CAT_MAP), np.array([0.1, 0.2]), 10000)
    assert np.abs(est.exponents - [GOLD, -GOLD]).max() < 1e-3


def test_a_times_identity_zeros_exact():
    f = Product(Linear(DEFAULT_A), Identity(2))
    est = benettin_spectrum(f, np.random.default_rng(0).random((4, 4)), 1000)
    lam = np.log((7 + 3 * np.sqrt(5)) / 2)
    assert np.all(est.exponents[:, 1:3] == 0.0)
    assert np.abs(est.exponents[:, 0] - lam).max() < 1e-3


@given(st.integers(0, 2**31), st.integers(1, 5))
def test_zero_sum_for_volume_preserving(seed, renorm):
    X = np.random.default_rng(seed).random((4, 4))
    est = benettin_spectrum(_PIPE.f, X, 60, renorm)
    assert est.zero_sum_error.max() < 1e-6
    assert np.all(np.diff(est.exponents, axis=1) <= 0)


def test_checkpoints_recorded():
    est = benettin_spectrum(Linear(CAT_MAP), np.array([0.3, 0.1]), 100, checkpoints=(10, 50))
    assert set(est.history) == {10, 50}
    assert est.history[50].shape == (2,)


def test_bad_renorm_rejected():
    with pytest.raises(ValueError):
        benettin_spectrum(Linear(CAT_MAP), np.array([0.1, 0.1]), 3, renorm=5)


def test_central_exponents_of_product_vanish():
    f = Product(Linear(DEFAULT_A), Translation((0.1, 0.3)))
    c = central_exponents(f, np.random.default_rng(1).random((3, 4)), 200)
    assert np.all(c == 0.0)


def test_center_plane_of_product_is_centre_block(pipe):
    X = pipe.region.sample(np.random.default_rng(2), 50, "out-M")
    F = pipe.F
    U, S = pipe.hyperbolic_guesses
    est = estimate_center_plane(F, X, 20, 20, (2, 3), U, S)
    assert est.resolved.all()
    # frame spans the centre coordinates: no base component
    assert np.abs(est.frame[:, :2, :]).max() < 1e-10
    assert np.abs(center_log_jacobian(F, X, est.frame)).max() < 1e-12


def test_center_plane_invariance_residual_small(pipe):
    X = pipe.region.sample(np.random.default_rng(3), 40, "M")
    U, S = pipe.hyperbolic_guesses
    est = estimate_center_plane(pipe.f_local, X, 30, 30, (2, 3), U, S, residual=True)
    assert np.nanmax(est.residual[est.resolved]) < 1e-6


from nuhlab.perturbations import build_pipeline as _bp  # noqa: E402

_PIPE = _bp()
