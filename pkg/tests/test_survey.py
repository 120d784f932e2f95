import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nuhlab.anosov_katok import rotation_tube_set
from nuhlab.maps import DEFAULT_A, Identity, Linear, Product, Translation
from nuhlab.survey import (
    NEGATIVE,
    UNDECIDED,
    ZERO,
    SurveyRaster,
    avoidance_statistics,
    birkhoff_dispersion,
    classify_phase_space,
    density_audit,
    k_invariance_audit,
    label_cells,
    middle_pair,
    noise_floor,
    survey_points,
    wilson_interval,
)


@given(st.integers(0, 500), st.integers(1, 500))
def test_wilson_interval_contains_estimate(k, n):
    k = min(k, n)
    lo, hi = wilson_interval(k, n)
    assert 0.0 <= lo <= k / n <= hi <= 1.0


def test_survey_points_cover_centre_cells():
    X = survey_points(4, (2, 3), 8, 2)
    assert X.shape == (64, 4)
    cells = np.floor(X[:, 2:] * 8).astype(int)
    assert len({tuple(c) for c in cells}) == 64
    X6 = survey_points(6, (4, 5), 4, 2)
    assert not np.allclose(X6[:, 0:2], X6[:, 2:4])


@given(st.floats(1e-6, 1.0))
def test_labels_partition(thr):
    C = np.array([[-2 * thr, -2 * thr], [0.1 * thr, -0.1 * thr], [-2 * thr, 0.0], [thr, thr]])
    lab = label_cells(C, thr)
    assert lab.tolist() == [NEGATIVE, ZERO, UNDECIDED, UNDECIDED]


def test_middle_pair():
    E = np.array([[3.0, 1.0, -1.0, -3.0], [2.0, 0.5, -0.5, -2.0]])
    assert middle_pair(E).tolist() == [[1.0, -1.0], [0.5, -0.5]]


def test_product_map_survey_all_zero():
    F = Product(Linear(DEFAULT_A), Translation((0.1, 0.3)))
    assert noise_floor(F, survey_points(4, (2, 3), 4, 2), 50) == 0.0
    R = classify_phase_space(F, 50, 1e-6, n_center=4, n_base=2)
    assert R.fraction(ZERO) == 1.0
    with pytest.raises(ValueError):
        classify_phase_space(F, 50, 0.0, n_center=4, n_base=2)


def _raster(labels):
    n = labels.shape[0]
    z = np.zeros((n, n, 2))
    return SurveyRaster(n, 1, np.zeros((n * n, 4)), labels, z, z, 1.0, 1, 0)


def test_density_audit_blocks():
    lab = np.full((10, 10), ZERO)
    assert density_audit(_raster(lab), 0.5).pass_fraction == 0.0
    lab[0, 0] = lab[0, 9] = lab[9, 0] = lab[9, 9] = NEGATIVE
    rep = density_audit(_raster(lab), 0.5)
    assert rep.pass_fraction == 1.0 and rep.block == 5
    lab[9, 9] = ZERO
    rep = density_audit(_raster(lab), 0.5)
    assert rep.pass_fraction == 0.75 and rep.failures == [(0.75, 0.75)]


def test_k_audit_on_rotation():
    K = rotation_tube_set(0.2)
    T = Translation((np.sqrt(2) - 1, 0.0))
    rep = k_invariance_audit(T, K, 500, 200, np.random.default_rng(0))
    assert rep.fraction == 1.0
    bad = k_invariance_audit(Translation((0.0, 0.37)), K, 500, 20, np.random.default_rng(0))
    assert bad.fraction < 1.0


def test_avoidance_statistics_open_box():
    X = np.array([[0.5, 0.5], [0.1, 0.9], [0.25, 0.3]])
    rep = avoidance_statistics(Identity(2), X, 3, (0.2, 0.6))
    assert rep.fraction == pytest.approx(1 / 3)
    with pytest.raises(ValueError):
        avoidance_statistics(Identity(2), X, 0, (0.2, 0.6))
    edge = avoidance_statistics(Identity(2), np.array([[0.2, 0.4]]), 1, (0.2, 0.6))
    assert edge.fraction == 1.0


def test_birkhoff_dispersion_of_identity_positive():
    X = np.random.default_rng(1).random((20, 4))
    assert birkhoff_dispersion(Identity(4), X, 5) > 0.1
    assert np.isnan(birkhoff_dispersion(Identity(4), X[:1], 5))
