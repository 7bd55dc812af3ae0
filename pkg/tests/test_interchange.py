import json

import numpy as np
import pytest

from splatreg import (
    EmbeddingSet,
    FoundationBundle,
    SchemaError,
    Sim3,
    read_bundle,
    read_embeddings,
    write_bundle,
    write_embeddings,
)
from splatreg.sim3 import quat_from_axis_angle


def _bundle(h=12, w=10, seed=0):
    rng = np.random.default_rng(seed)
    pose = Sim3(1.0, quat_from_axis_angle([0, 1, 0], 0.3), [0.1, 0.0, -0.2])
    return FoundationBundle(
        pose_2_to_1=pose,
        depth_fm_1=rng.uniform(0.5, 3.0, (h, w)).astype(np.float32),
        depth_fm_2=rng.uniform(0.5, 3.0, (h, w)).astype(np.float32),
        conf_1=rng.uniform(0.0, 1.0, (h, w)).astype(np.float32),
        conf_2=rng.uniform(0.0, 1.0, (h, w)).astype(np.float32),
    )


def test_bundle_round_trip(tmp_path):
    b = _bundle()
    write_bundle(b, tmp_path / "bundle")
    back = read_bundle(tmp_path / "bundle")
    np.testing.assert_array_equal(back.depth_fm_1, b.depth_fm_1)
    np.testing.assert_array_equal(back.depth_fm_2, b.depth_fm_2)
    np.testing.assert_array_equal(back.conf_1, b.conf_1)
    np.testing.assert_array_equal(back.conf_2, b.conf_2)
    np.testing.assert_allclose(back.pose_2_to_1.parameters(),
                               b.pose_2_to_1.parameters(), atol=1e-15)


def test_repeated_writes_byte_identical(tmp_path):
    b = _bundle()
    write_bundle(b, tmp_path / "a")
    write_bundle(b, tmp_path / "b")
    for name in ("meta.json", "depth_fm_1.f32", "conf_2.f32"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_dimension_mismatch_rejected(tmp_path):
    rng = np.random.default_rng(1)
    with pytest.raises(SchemaError, match="shape"):
        FoundationBundle(
            pose_2_to_1=Sim3.identity(),
            depth_fm_1=rng.uniform(1, 2, (20, 20)).astype(np.float32),
            depth_fm_2=rng.uniform(1, 2, (20, 20)).astype(np.float32),
            conf_1=np.ones((10, 10), dtype=np.float32),
            conf_2=np.ones((20, 20), dtype=np.float32),
        )
    # on-disk mismatch: truncate a buffer
    b = _bundle()
    write_bundle(b, tmp_path / "bundle")
    buf = tmp_path / "bundle" / "conf_1.f32"
    buf.write_bytes(buf.read_bytes()[:-8])
    with pytest.raises(SchemaError, match="dimension mismatch"):
        read_bundle(tmp_path / "bundle")


def test_confidence_validation():
    b = _bundle()
    with pytest.raises(SchemaError, match="negative"):
        FoundationBundle(pose_2_to_1=b.pose_2_to_1, depth_fm_1=b.depth_fm_1,
                         depth_fm_2=b.depth_fm_2,
                         conf_1=-np.ones_like(b.conf_1), conf_2=b.conf_2)
    with pytest.raises(SchemaError, match="no positive"):
        FoundationBundle(pose_2_to_1=b.pose_2_to_1, depth_fm_1=b.depth_fm_1,
                         depth_fm_2=b.depth_fm_2,
                         conf_1=np.zeros_like(b.conf_1), conf_2=b.conf_2)


def test_unknown_schema_version(tmp_path):
    write_bundle(_bundle(), tmp_path / "bundle")
    meta_path = tmp_path / "bundle" / "meta.json"
    meta = json.loads(meta_path.read_text())
    meta["schema_version"] = 99
    meta_path.write_text(json.dumps(meta))
    with pytest.raises(SchemaError, match="schema version"):
        read_bundle(tmp_path / "bundle")


def test_missing_field(tmp_path):
    write_bundle(_bundle(), tmp_path / "bundle")
    meta_path = tmp_path / "bundle" / "meta.json"
    meta = json.loads(meta_path.read_text())
    del meta["pose_2_to_1"]
    meta_path.write_text(json.dumps(meta))
    with pytest.raises(SchemaError, match="pose_2_to_1"):
        read_bundle(tmp_path / "bundle")


def test_embeddings_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    e = EmbeddingSet(vectors=rng.normal(size=(5, 768)).astype(np.float32),
                     view_ids=[f"v{i}" for i in range(5)])
    write_embeddings(e, tmp_path / "emb")
    back = read_embeddings(tmp_path / "emb")
    np.testing.assert_array_equal(back.vectors, e.vectors)
    assert back.view_ids == e.view_ids


def test_embeddings_validation():
    with pytest.raises(SchemaError, match="zero-norm"):
        EmbeddingSet(vectors=np.zeros((2, 4), dtype=np.float32), view_ids=["a", "b"])
    with pytest.raises(SchemaError):
        EmbeddingSet(vectors=np.ones((2, 4), dtype=np.float32), view_ids=["a"])
    with pytest.raises(SchemaError):
        EmbeddingSet(vectors=np.ones((0, 4), dtype=np.float32), view_ids=[])
