import numpy as np
import pytest

from splatreg import GaussianCloud, Sim3, transform_cloud
from splatreg.sh import sh_evaluate
from splatreg.sim3 import quat_from_axis_angle, quat_normalize

from conftest import random_cloud, random_rotation


def test_identity_transform_is_bit_identical():
    cloud = random_cloud(20, seed=1)
    out = transform_cloud(cloud, Sim3.identity())
    assert out is cloud


def test_uniform_scale_shifts_log_scale():
    cloud = random_cloud(5, seed=2, sh_degree=0)
    out = transform_cloud(cloud, Sim3(s=2.0))
    np.testing.assert_allclose(out.mu, 2.0 * cloud.mu, atol=1e-12)
    np.testing.assert_allclose(out.log_scale, cloud.log_scale + np.log(2.0), atol=1e-12)
    np.testing.assert_allclose(out.sh, cloud.sh, atol=1e-15)  # band 0 is invariant


def test_sh_rotation_equivariance_through_transform():
    rng = np.random.default_rng(3)
    cloud = random_cloud(1, seed=3)
    R = random_rotation(rng)
    T = Sim3.from_matrix(1.4, R, np.array([0.2, -0.1, 0.3]))
    out = transform_cloud(cloud, T)
    for _ in range(50):
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        lhs = sh_evaluate(out.sh[0], d)
        rhs = sh_evaluate(cloud.sh[0], R.T @ d)
        np.testing.assert_allclose(lhs, rhs, atol=1e-5)


def test_transform_composition_equivalence():
    rng = np.random.default_rng(4)
    cloud = random_cloud(30, seed=4)
    for _ in range(5):
        a = Sim3(float(np.exp(rng.normal(0, 0.3))), quat_normalize(rng.normal(size=4)),
                 rng.normal(size=3))
        b = Sim3(float(np.exp(rng.normal(0, 0.3))), quat_normalize(rng.normal(size=4)),
                 rng.normal(size=3))
        two_step = transform_cloud(transform_cloud(cloud, b), a)
        one_step = transform_cloud(cloud, a.compose(b))
        np.testing.assert_allclose(two_step.mu, one_step.mu, atol=1e-8)
        np.testing.assert_allclose(two_step.log_scale, one_step.log_scale, atol=1e-8)
        np.testing.assert_allclose(two_step.sh, one_step.sh, atol=1e-8)
        # quaternions agree up to sign; canonicalization makes them equal
        np.testing.assert_allclose(two_step.rot, one_step.rot, atol=1e-8)


def test_opacity_bitwise_identical():
    cloud = random_cloud(40, seed=5)
    T = Sim3(1.7, quat_from_axis_angle([1, 2, 3], 0.8), [1.0, 2.0, 3.0])
    out = transform_cloud(cloud, T)
    assert out.opacity_logit is cloud.opacity_logit  # shared immutable array


def test_inverse_transform_round_trip():
    cloud = random_cloud(25, seed=6)
    T = Sim3(0.6, quat_from_axis_angle([0, 1, 1], 1.1), [-0.5, 0.2, 0.9])
    back = transform_cloud(transform_cloud(cloud, T), T.inverse())
    np.testing.assert_allclose(back.mu, cloud.mu, atol=1e-10)
    np.testing.assert_allclose(back.log_scale, cloud.log_scale, atol=1e-10)
    np.testing.assert_allclose(back.sh, cloud.sh, atol=1e-8)


def test_covariance_push_forward():
    # dense-covariance view of the factored update
    cloud = random_cloud(10, seed=7)
    T = Sim3(1.9, quat_from_axis_angle([2, -1, 0], 0.5), [0.0, 0.0, 0.0])
    out = transform_cloud(cloud, T)
    R = T.rotation
    expected = (T.s ** 2) * np.einsum("ij,njk,lk->nil", R, cloud.covariances(), R)
    np.testing.assert_allclose(out.covariances(), expected, atol=1e-10)


def test_validation_rejects_bad_shapes_and_values():
    good = random_cloud(3, seed=8)
    with pytest.raises(ValueError, match="mu"):
        GaussianCloud(mu=np.zeros((3, 2)), rot=good.rot, log_scale=good.log_scale,
                      opacity_logit=good.opacity_logit, sh=good.sh)
    with pytest.raises(ValueError, match="sh"):
        GaussianCloud(mu=good.mu, rot=good.rot, log_scale=good.log_scale,
                      opacity_logit=good.opacity_logit, sh=good.sh[:, :, :9])
    with pytest.raises(ValueError, match="non-finite"):
        bad_mu = good.mu.copy()
        bad_mu[0, 0] = np.inf
        GaussianCloud(mu=bad_mu, rot=good.rot, log_scale=good.log_scale,
                      opacity_logit=good.opacity_logit, sh=good.sh)
    with pytest.raises(ValueError, match="unit norm"):
        bad_rot = good.rot.copy()
        bad_rot[0] = [2.0, 0, 0, 0]
        GaussianCloud(mu=good.mu, rot=bad_rot, log_scale=good.log_scale,
                      opacity_logit=good.opacity_logit, sh=good.sh)
    with pytest.raises(ValueError):
        GaussianCloud.empty(sh_degree=4)


def test_degree_above_three_unsupported():
    with pytest.raises(ValueError):
        GaussianCloud(mu=np.zeros((1, 3)), rot=[[1, 0, 0, 0]],
                      log_scale=np.zeros((1, 3)), opacity_logit=np.zeros(1),
                      sh=np.zeros((1, 3, 25)), sh_degree=4)


def test_ordering_and_indexing():
    cloud = random_cloud(6, seed=9)
    g = cloud[2]
    np.testing.assert_array_equal(g.mu, cloud.mu[2])
    assert g.sh_degree == cloud.sh_degree
    assert len(cloud) == 6


def test_sh_degree_padding():
    cloud = random_cloud(4, seed=10, sh_degree=1)
    padded = cloud.with_sh_degree(3)
    assert padded.sh.shape == (4, 3, 16)
    np.testing.assert_array_equal(padded.sh[:, :, :4], cloud.sh)
    assert np.all(padded.sh[:, :, 4:] == 0)
    with pytest.raises(ValueError):
        padded.with_sh_degree(1)
