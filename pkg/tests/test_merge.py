import numpy as np
import pytest

from splatreg import (
    FusionEdge,
    FusionPlan,
    GaussianCloud,
    Sim3,
    fuse_many,
    make_ring_views,
    make_scene,
    merge,
    psnr,
    random_sim3,
    render,
    split_scene,
)
from splatreg.sim3 import quat_from_axis_angle

from conftest import random_cloud


def test_merge_with_empty():
    g = random_cloud(10, seed=1)
    t = Sim3(1.3, quat_from_axis_angle([1, 0, 0], 0.4), [1, 2, 3])
    out = merge(g, GaussianCloud.empty(), t)
    assert len(out) == 10
    np.testing.assert_array_equal(out.mu, g.mu)
    out2 = merge(GaussianCloud.empty(), g, Sim3.identity())
    assert len(out2) == 10
    np.testing.assert_array_equal(out2.mu, g.mu)


def test_merge_ordering_contract():
    g1 = random_cloud(7, seed=2)
    g2 = random_cloud(5, seed=3)
    t = Sim3(0.8, quat_from_axis_angle([0, 1, 0], 0.7), [0.5, 0, -1])
    out = merge(g1, g2, t)
    assert len(out) == 12
    np.testing.assert_array_equal(out.mu[:7], g1.mu)
    np.testing.assert_array_equal(out.sh[:7], g1.sh)
    np.testing.assert_allclose(out.mu[7:], t.apply(g2.mu), atol=1e-12)


def test_merge_conserves_opacity_mass():
    g1 = random_cloud(20, seed=4)
    g2 = random_cloud(30, seed=5)
    t = Sim3(2.0, quat_from_axis_angle([1, 1, 1], 1.0), [3, -2, 1])
    out = merge(g1, g2, t)
    total = g1.opacity().sum() + g2.opacity().sum()
    assert out.opacity().sum() == pytest.approx(total, rel=1e-12)


def test_merge_never_mutates_inputs():
    g1 = random_cloud(5, seed=6)
    g2 = random_cloud(5, seed=7)
    mu1 = g1.mu.copy()
    mu2 = g2.mu.copy()
    merge(g1, g2, Sim3(1.5, quat_from_axis_angle([0, 0, 1], 0.2), [1, 0, 0]))
    np.testing.assert_array_equal(g1.mu, mu1)
    np.testing.assert_array_equal(g2.mu, mu2)


def test_merge_pads_sh_degree():
    g1 = random_cloud(4, seed=8, sh_degree=3)
    g2 = random_cloud(3, seed=9, sh_degree=1)
    out = merge(g1, g2, Sim3.identity())
    assert out.sh_degree == 3
    assert out.sh.shape == (7, 3, 16)
    assert np.all(out.sh[4:, :, 4:] == 0.0)


def test_fuse_single_cloud():
    g = random_cloud(6, seed=10)
    out = fuse_many([g], FusionPlan(root=0, edges=()))
    assert len(out) == 6
    np.testing.assert_array_equal(out.mu, g.mu)


def test_fuse_identity_transforms_concatenates():
    clouds = [random_cloud(4, seed=11 + i) for i in range(3)]
    plan = FusionPlan(root=0, edges=(
        FusionEdge(1, 0, Sim3.identity()),
        FusionEdge(2, 0, Sim3.identity()),
    ))
    out = fuse_many(clouds, plan)
    assert len(out) == 12
    np.testing.assert_array_equal(out.mu[:4], clouds[0].mu)
    np.testing.assert_array_equal(out.mu[4:8], clouds[1].mu)


def test_fuse_chained_tree():
    clouds = [random_cloud(5, seed=20 + i) for i in range(3)]
    t10 = Sim3(1.2, quat_from_axis_angle([0, 1, 0], 0.3), [1, 0, 0])
    t21 = Sim3(0.9, quat_from_axis_angle([1, 0, 0], -0.2), [0, 1, 0])
    plan = FusionPlan(root=0, edges=(FusionEdge(1, 0, t10), FusionEdge(2, 1, t21)))
    out = fuse_many(clouds, plan)
    np.testing.assert_allclose(out.mu[10:], t10.compose(t21).apply(clouds[2].mu), atol=1e-10)


def test_fuse_disconnected_plan_errors():
    clouds = [random_cloud(3, seed=30 + i) for i in range(3)]
    plan = FusionPlan(root=0, edges=(FusionEdge(1, 0, Sim3.identity()),))
    with pytest.raises(ValueError, match="not connected"):
        fuse_many(clouds, plan)


def test_fuse_cycle_errors():
    clouds = [random_cloud(3, seed=40 + i) for i in range(2)]
    plan = FusionPlan(root=0, edges=(
        FusionEdge(1, 1, Sim3.identity()),
    ))
    with pytest.raises(ValueError, match="cycle"):
        fuse_many(clouds, plan)


def test_merged_split_matches_full_scene_render():
    # full-scene render is the oracle: merging a ground-truth split back
    # together must reproduce it closely at a held-out pose
    scene = make_scene(1500, extent=1.0, seed=50)
    t_true = random_sim3(25.0, 0.3 * scene.scene_diameter(), 1.8, seed=51)
    g1, g2, truth = split_scene(scene, 0.3, t_true, seed=52)
    fused = merge(g1, g2, t_true)
    view = make_ring_views(count=3, width=128, height=128, elevation=0.4)[1]
    full = render(scene, view).rgb
    got = render(fused, view).rgb
    assert psnr(full, got) > 30.0
