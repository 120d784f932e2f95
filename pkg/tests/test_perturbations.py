import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nuhlab.maps import Identity, eval_map, max_abs_det_error, torus_distance
from nuhlab.perturbations import (
    AccessParams,
    ShearParams,
    SupportContractError,
    SupportRegion,
    build_pipeline,
    integrated_central_exponent,
    localization_ratio,
    region_for_variant,
    sw_shear,
)

WHERE = ["torus", "M", "A", "V", "M-A", "out-M", "torus-A"]


@pytest.mark.parametrize("where", WHERE)
def test_region_sampling_lands_in_region(where):
    R = SupportRegion()
    X = R.sample(np.random.default_rng(0), 500, where)
    assert X.shape == (500, 4)
    check = {
        "M": R.in_M(X), "A": R.in_A(X), "V": R.in_V(X),
        "M-A": R.in_M(X) & ~R.in_A(X), "out-M": ~R.in_M(X), "torus-A": ~R.in_A(X),
    }.get(where, np.ones(500, bool))
    assert check.all()


def test_region_volumes():
    R = SupportRegion(0.2)
    assert R.region_volume("M") == pytest.approx(0.04)
    assert R.region_volume("A") == pytest.approx(0.01)
    assert R.region_volume("M-A") + R.region_volume("A") == pytest.approx(R.volume_M)


@given(st.integers(0, 2**31), st.sampled_from(["out-M", "V"]))
def test_support_contracts_bit_exact(seed, where):
    pipe = _PIPE
    X = pipe.region.sample(np.random.default_rng(seed), 256, where)
    assert np.array_equal(eval_map(pipe.h, X), X)
    assert np.array_equal(eval_map(pipe.h_tilde, X), X)


@given(st.integers(0, 2**31))
def test_f_equals_product_off_perturbations(seed):
    pipe = _PIPE
    X = pipe.region.sample(np.random.default_rng(seed), 256, "out-M")
    Y = eval_map(pipe.F, X)
    keep = ~pipe.region.in_M(Y)
    assert np.array_equal(eval_map(pipe.f, X[keep]), Y[keep])


@given(st.integers(0, 2**31))
def test_perturbed_maps_preserve_volume(seed):
    pipe = _PIPE
    X = pipe.region.sample(np.random.default_rng(seed), 128, "M")
    for g in (pipe.h, pipe.h_tilde, pipe.f, pipe.f_local):
        assert max_abs_det_error(g, X) < 1e-8


def test_f_local_conjugate_to_f():
    pipe = _PIPE
    X = np.random.default_rng(4).random((500, 4))
    lhs = eval_map(pipe.f_local, eval_map(pipe.h_tilde.inverse(), X))
    rhs = eval_map(pipe.h_tilde.inverse(), eval_map(pipe.f, X))
    assert torus_distance(lhs, rhs).max() < 1e-10


def test_cutoff_meeting_saved_fibre_rejected():
    with pytest.raises(SupportContractError):
        sw_shear(SupportRegion(), ShearParams(v_inner=0.01, v_outer=0.05))


def test_centre_disk_leaving_square_rejected():
    with pytest.raises(SupportContractError):
        SupportRegion().check_center_disk(0.11)


def test_zero_amplitude_gadget_is_trivial():
    region = SupportRegion()
    g = sw_shear(region, ShearParams(amplitude=0.0, twist=0.0))
    X = np.random.default_rng(5).random((200, 4))
    assert np.array_equal(eval_map(g, X), X) or isinstance(g, Identity)


def test_unknown_variant_rejected():
    with pytest.raises(ValueError):
        region_for_variant(0.2, "t5")


def test_t6_pipeline_volume_and_support():
    pipe = build_pipeline(variant="t6")
    assert pipe.f.dim == 6
    X = pipe.region.sample(np.random.default_rng(6), 300, "out-M")
    assert np.array_equal(eval_map(pipe.h, X), X)
    assert max_abs_det_error(pipe.f, X) < 1e-8


def test_integral_requires_enough_samples():
    with pytest.raises(ValueError):
        integrated_central_exponent(_PIPE, _PIPE.f_local, np.random.default_rng(0), "M", 999)


def test_unperturbed_integral_is_zero():
    pipe = _PIPE.with_gadgets(Identity(4), Identity(4), Identity(4))
    est = integrated_central_exponent(pipe, pipe.f_local, np.random.default_rng(7), "M", 1000, n_plane=10)
    assert abs(est.integral) < 1e-12 and est.stderr < 1e-12


def test_sw_integral_negative_and_localized():
    pipe = _PIPE.with_gadgets(bm=Identity(4), dw=Identity(4))
    rng = np.random.default_rng(8)
    est = integrated_central_exponent(pipe, pipe.f_local, rng, "M", 4000)
    assert est.interval()[1] < 0.0
    r = localization_ratio(pipe, pipe.f_local, rng, 2000, 2000)
    assert r.passes(0.1)


def test_access_params_scale_c1_distance():
    small = build_pipeline(dw=AccessParams(amplitude=0.05))
    rng = np.random.default_rng(9)
    assert small.c1_distance(rng, 512) < _PIPE.c1_distance(np.random.default_rng(9), 512) + 1e-9


_PIPE = build_pipeline()
