import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from diffnea import spatial


unit_axis = st.sampled_from([(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0),
                             (0.6, 0.8, 0.0), (0.0, -0.6, 0.8)])
angles = st.floats(min_value=-6.0, max_value=6.0, allow_nan=False)


def test_skew_matches_cross_product(rng):
    a, b = rng.normal(size=3), rng.normal(size=3)
    np.testing.assert_allclose(spatial.to_numpy(spatial.matvec(spatial.skew(list(a)), list(b))),
                               np.cross(a, b), atol=1e-14)


@given(axis=unit_axis, angle=angles)
@settings(max_examples=60, deadline=None)
def test_rot_axis_angle_matches_scipy(axis, angle):
    R = spatial.to_numpy(spatial.rot_axis_angle(list(axis), angle))
    expected = Rotation.from_rotvec(angle * np.asarray(axis)).as_matrix()
    np.testing.assert_allclose(R, expected, atol=1e-12)


def test_exp_so3_small_angle_branch():
    w = [1e-9, -2e-9, 3e-9]
    R = spatial.to_numpy(spatial.exp_so3(w))
    expected = Rotation.from_rotvec(w).as_matrix()
    np.testing.assert_allclose(R, expected, atol=1e-15)
    np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-15)


def test_exp_log_round_trip(rng):
    for _ in range(20):
        w = rng.normal(size=3)
        w *= rng.uniform(0, 3.0) / np.linalg.norm(w)
        R = spatial.exp_so3(list(w))
        np.testing.assert_allclose(spatial.log_so3(R), w, atol=1e-10)


def test_transform_compose_apply(rng):
    def rand_tf():
        R = Rotation.random(random_state=np.random.RandomState(rng.integers(1 << 31))).as_matrix()
        return spatial.SpatialTransform(R.tolist(), list(rng.normal(size=3)))

    a, b = rand_tf(), rand_tf()
    p = rng.normal(size=3)
    via_compose = a.compose(b).apply(list(p))
    direct = a.apply(b.apply(list(p)))
    np.testing.assert_allclose(via_compose, direct, atol=1e-12)


def test_transform_rejects_non_rotation():
    with pytest.raises(ValueError):
        spatial.SpatialTransform([[1.0, 0, 0], [0, 2.0, 0], [0, 0, 1.0]], [0, 0, 0])


def test_spatial_inertia_symmetric_positive_definite():
    I_C = [[0.02, 0.001, 0.0], [0.001, 0.03, 0.002], [0.0, 0.002, 0.04]]
    M = spatial.to_numpy(spatial.spatial_inertia(2.0, [0.1, -0.05, 0.2], I_C))
    assert M.shape == (6, 6)
    np.testing.assert_allclose(M, M.T, atol=1e-14)
    assert np.all(np.linalg.eigvalsh(M) > 0)


def test_spatial_inertia_rejects_zero_mass():
    with pytest.raises(ValueError):
        spatial.spatial_inertia(0.0, [0, 0, 0], spatial.eye3())


def test_matrix_helpers_agree_with_numpy(rng):
    A = rng.normal(size=(3, 3))
    B = rng.normal(size=(3, 3))
    v = rng.normal(size=3)
    np.testing.assert_allclose(spatial.to_numpy(spatial.matmul(A.tolist(), B.tolist())),
                               A @ B, atol=1e-13)
    np.testing.assert_allclose(spatial.matTvec(A.tolist(), list(v)), A.T @ v, atol=1e-13)
    np.testing.assert_allclose(spatial.to_numpy(spatial.transpose(A.tolist())), A.T)
