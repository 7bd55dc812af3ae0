import json

import numpy as np
import pytest

from splatreg import load_ply, make_ring_views, make_scene, save_ply, save_views
from splatreg.cli import main
from splatreg.reports import write_transform_report
from splatreg.synth import make_synthetic_bundle, random_sim3, split_scene
from splatreg.interchange import EmbeddingSet, write_bundle, write_embeddings


def run(*args) -> int:
    return main([str(a) for a in args])


def test_synth_scene_deterministic(tmp_path):
    a = tmp_path / "a.ply"
    b = tmp_path / "b.ply"
    assert run("synth", "--mode", "scene", "--count", "200", "--seed", "7", "--out", a) == 0
    assert run("synth", "--mode", "scene", "--count", "200", "--seed", "7", "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()


def test_transform_round_trip(tmp_path):
    cloud_path = tmp_path / "g2.ply"
    save_ply(make_scene(50, seed=1), cloud_path)
    t = random_sim3(15.0, 0.4, 1.5, seed=2)
    report = tmp_path / "t.json"
    write_transform_report(t, report)
    fwd = tmp_path / "g2t.ply"
    back = tmp_path / "g2back.ply"
    assert run("transform", "--in", cloud_path, "--sim3", report, "--out", fwd) == 0
    assert run("transform", "--in", fwd, "--sim3", report, "--inverse", "--out", back) == 0
    orig = load_ply(cloud_path)
    rt = load_ply(back)
    # intermediate float32 storage bounds the round trip near its resolution
    np.testing.assert_allclose(rt.mu, orig.mu, atol=5e-6)
    np.testing.assert_allclose(rt.log_scale, orig.log_scale, atol=5e-6)


def test_render_writes_pngs(tmp_path):
    cloud_path = tmp_path / "scene.ply"
    save_ply(make_scene(150, seed=3), cloud_path)
    views_path = tmp_path / "views.json"
    save_views(make_ring_views(count=2, width=48, height=48), views_path)
    out_dir = tmp_path / "renders"
    assert run("render", "--cloud", cloud_path, "--cams", views_path,
               "--out", out_dir, "--save-depth") == 0
    assert (out_dir / "v000.png").exists()
    assert (out_dir / "v001.png").exists()
    assert (out_dir / "v000_depth.f32").stat().st_size == 48 * 48 * 4


def test_match_command(tmp_path, capsys):
    rng = np.random.default_rng(4)
    shared = rng.normal(size=8).astype(np.float32)
    e1 = EmbeddingSet(vectors=np.stack([shared, rng.normal(size=8).astype(np.float32)]),
                      view_ids=["x0", "x1"])
    e2 = EmbeddingSet(vectors=np.stack([rng.normal(size=8).astype(np.float32), shared]),
                      view_ids=["y0", "y1"])
    write_embeddings(e1, tmp_path / "e1")
    write_embeddings(e2, tmp_path / "e2")
    assert run("match", "--emb1", tmp_path / "e1", "--emb2", tmp_path / "e2",
               "--out", tmp_path / "m.json") == 0
    out = capsys.readouterr().out.strip().split("\t")
    assert out[0] == "x0" and out[1] == "y1"
    assert json.loads((tmp_path / "m.json").read_text())["view_id_1"] == "x0"


def test_unknown_flag_exits_2():
    with pytest.raises(SystemExit) as e:
        main(["synth", "--bogus-flag"])
    assert e.value.code == 2


def test_missing_file_exits_2(tmp_path):
    assert run("render", "--cloud", tmp_path / "missing.ply",
               "--cams", tmp_path / "missing.json", "--out", tmp_path / "o") == 2


def test_stage_failure_exits_1(tmp_path):
    # malformed transform report -> runtime failure, not usage error
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    cloud_path = tmp_path / "c.ply"
    save_ply(make_scene(10, seed=5), cloud_path)
    assert run("transform", "--in", cloud_path, "--sim3", bad,
               "--out", tmp_path / "o.ply") == 1


def test_pipeline_end_to_end(tmp_path, capsys):
    scene = make_scene(400, extent=1.0, seed=6)
    t_true = random_sim3(10.0, 0.2 * scene.scene_diameter(), 1.3, seed=7)
    g1, g2, truth = split_scene(scene, 0.5, t_true, seed=8)
    view1 = make_ring_views(count=1, width=64, height=64)[0]
    bundle, view2 = make_synthetic_bundle(g1, g2, truth, view1, seed=9)

    save_ply(g1, tmp_path / "g1.ply")
    save_ply(g2, tmp_path / "g2.ply")
    write_bundle(bundle, tmp_path / "bundle")
    save_views([view1], tmp_path / "cams1.json")
    save_views([view2.with_pose(view2.q, view2.t, view_id="w000")], tmp_path / "cams2.json")
    rng = np.random.default_rng(10)
    shared = rng.normal(size=12).astype(np.float32)
    write_embeddings(EmbeddingSet(vectors=shared[None], view_ids=[view1.view_id]),
                     tmp_path / "e1")
    write_embeddings(EmbeddingSet(vectors=shared[None], view_ids=["w000"]),
                     tmp_path / "e2")

    code = run("pipeline", "--g1", tmp_path / "g1.ply", "--g2", tmp_path / "g2.ply",
               "--bundle", tmp_path / "bundle", "--emb1", tmp_path / "e1",
               "--emb2", tmp_path / "e2", "--cams1", tmp_path / "cams1.json",
               "--cams2", tmp_path / "cams2.json", "--out", tmp_path / "fused.ply",
               "--report", tmp_path / "report.json", "--loss-out", tmp_path / "loss.tsv",
               "--metrics-out", tmp_path / "metrics.tsv",
               "--max-iters", "10", "--pool-views", "2", "--seed", "1")
    assert code == 0
    fused = load_ply(tmp_path / "fused.ply")
    assert len(fused) == len(g1) + len(g2)
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["kind"] == "sim3_transform"
    assert abs(report["extra"]["scale_ratio"] - t_true.s) < 1e-4
    loss_lines = (tmp_path / "loss.tsv").read_text().strip().splitlines()
    assert loss_lines[0] == "iter\tloss"
    assert len(loss_lines) == 11
    metrics_lines = (tmp_path / "metrics.tsv").read_text().strip().splitlines()
    assert metrics_lines[0] == "name\tpsnr_db\tssim"


def test_eval_images(tmp_path, capsys):
    from PIL import Image

    rng = np.random.default_rng(11)
    a = (rng.uniform(size=(32, 32, 3)) * 255).astype(np.uint8)
    Image.fromarray(a).save(tmp_path / "a.png")
    Image.fromarray(a).save(tmp_path / "b.png")
    assert run("eval", "--img-a", tmp_path / "a.png", "--img-b", tmp_path / "b.png") == 0
    line = capsys.readouterr().out.strip()
    assert line.split("\t")[1] == "99.0000"
