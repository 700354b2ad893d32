import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from iclens import (
    AttentionRecord,
    ConsistencyError,
    DataError,
    IclensError,
    LoadError,
    Tensor,
    load_run,
)
from iclens._util import write_json


@pytest.fixture
def run_dir(fixtures_dir, tmp_path) -> Path:
    dst = tmp_path / "run"
    shutil.copytree(fixtures_dir / "run_small", dst)
    return dst


def edit_manifest(run_dir, mutate):
    path = run_dir / "manifest.json"
    manifest = json.loads(path.read_text())
    mutate(manifest)
    path.write_text(json.dumps(manifest))


def test_committed_fixture_loads_with_expected_shape(fixtures_dir):
    bundle = load_run(fixtures_dir / "run_small" / "manifest.json")
    assert bundle.sample_ids() == ["s0"]
    assert bundle.warnings == ()
    sample = bundle.samples["s0"]
    assert sample.attention["with_query_image"].tensor.shape == (2, 1, 6, 6)
    assert sample.attention["without_query_image"].tensor.shape == (2, 1, 6, 6)
    assert len(sample.segmentation) == 6
    assert sample.generated_caption == "a brown dog on grass."
    assert bundle.model.n_layers == 2


def test_zero_sample_manifest_is_empty_bundle(tmp_path):
    write_json(
        tmp_path / "manifest.json",
        {
            "version": 1,
            "model": {"n_layers": 2, "n_heads": 1, "head_dim": 8, "kv_bytes_per_element": 2},
            "samples": [],
            "files": {},
        },
    )
    bundle = load_run(tmp_path / "manifest.json")
    assert bundle.samples == {}
    assert bundle.warnings == ()


def test_load_is_deterministic(run_dir):
    a = load_run(run_dir / "manifest.json")
    b = load_run(run_dir / "manifest.json")
    assert a.sample_ids() == b.sample_ids()
    ra = a.samples["s0"].attention["with_query_image"]
    rb = b.samples["s0"].attention["with_query_image"]
    assert ra.tensor == rb.tensor
    assert a.samples["s0"].segmentation == b.samples["s0"].segmentation


def test_seq_len_mismatch_names_sample(run_dir):
    seg = json.loads((run_dir / "s0.seg.json").read_text())
    seg = seg[:3] + [
        {"index": 3, "role": "query", "ice_index": None},
        {"index": 4, "role": "query", "ice_index": None},
    ]
    for i, rec in enumerate(seg):
        rec["index"] = i
    (run_dir / "s0.seg.json").write_text(json.dumps(seg))
    with pytest.raises(ConsistencyError, match="s0"):
        load_run(run_dir / "manifest.json")


def test_missing_file_names_it(run_dir):
    (run_dir / "s0.with.iclt").unlink()
    with pytest.raises(LoadError, match="s0.with.iclt"):
        load_run(run_dir / "manifest.json")


def test_unknown_fields_ignored_quietly(run_dir):
    edit_manifest(run_dir, lambda m: m.update({"experiment": {"notes": "ok"}}))
    bundle = load_run(run_dir / "manifest.json")
    assert bundle.warnings == ()


def test_newer_version_warns(run_dir):
    edit_manifest(run_dir, lambda m: m.update({"version": 9}))
    bundle = load_run(run_dir / "manifest.json")
    assert any("version" in w for w in bundle.warnings)


def test_shot_count_mismatch_warns(run_dir):
    def mutate(m):
        m["model"]["generation"]["shot_count"] = 7

    edit_manifest(run_dir, mutate)
    bundle = load_run(run_dir / "manifest.json")
    assert any("shot_count" in w for w in bundle.warnings)


def test_dtype_declaration_mismatch_warns(run_dir):
    def mutate(m):
        m["model"]["attention_dtype"] = "f16"

    edit_manifest(run_dir, mutate)
    bundle = load_run(run_dir / "manifest.json")
    assert any("dtype" in w for w in bundle.warnings)


CORRUPTIONS = []


def corruption(fn):
    CORRUPTIONS.append(fn)
    return fn


@corruption
def corrupt_magic(run_dir):
    raw = bytearray((run_dir / "s0.with.iclt").read_bytes())
    raw[:4] = b"XXXX"
    (run_dir / "s0.with.iclt").write_bytes(bytes(raw))


@corruption
def corrupt_truncate_tensor(run_dir):
    raw = (run_dir / "s0.with.iclt").read_bytes()
    (run_dir / "s0.with.iclt").write_bytes(raw[:-7])


@corruption
def corrupt_dtype_code(run_dir):
    raw = bytearray((run_dir / "s0.with.iclt").read_bytes())
    raw[5] = 9
    (run_dir / "s0.with.iclt").write_bytes(bytes(raw))


@corruption
def corrupt_manifest_json(run_dir):
    (run_dir / "manifest.json").write_text("{not json")


@corruption
def corrupt_missing_seg(run_dir):
    (run_dir / "s0.seg.json").unlink()


@corruption
def corrupt_bad_role(run_dir):
    seg = json.loads((run_dir / "s0.seg.json").read_text())
    seg[0]["role"] = "alien"
    (run_dir / "s0.seg.json").write_text(json.dumps(seg))


@corruption
def corrupt_duplicate_sample(run_dir):
    manifest = json.loads((run_dir / "manifest.json").read_text())
    manifest["samples"].append(manifest["samples"][0])
    (run_dir / "manifest.json").write_text(json.dumps(manifest))


@corruption
def corrupt_row_sums(run_dir):
    from iclens.tensor_io import read_tensor_file, write_tensor_file

    t = read_tensor_file(run_dir / "s0.with.iclt")
    vals = t.values.copy()
    vals[0, 0, 3, 0] += 0.25
    write_tensor_file(Tensor("f32", vals), run_dir / "s0.with.iclt")


@corruption
def corrupt_non_causal(run_dir):
    from iclens.tensor_io import read_tensor_file, write_tensor_file

    t = read_tensor_file(run_dir / "s0.with.iclt")
    vals = t.values.copy()
    vals[0, 0, 0, 5] = 0.5
    write_tensor_file(Tensor("f32", vals), run_dir / "s0.with.iclt")


@corruption
def corrupt_variant_tag(run_dir):
    manifest = json.loads((run_dir / "manifest.json").read_text())
    att = manifest["samples"][0]["attention"]
    att["sideways"] = att.pop("with_query_image")
    (run_dir / "manifest.json").write_text(json.dumps(manifest))


@pytest.mark.parametrize("corrupt", CORRUPTIONS, ids=lambda f: f.__name__)
def test_rejection_is_total(run_dir, corrupt):
    corrupt(run_dir)
    with pytest.raises(IclensError):
        load_run(run_dir / "manifest.json")


def test_negative_attention_rejected():
    vals = np.zeros((1, 1, 2, 2), dtype=np.float32)
    vals[0, 0, 0, 0] = 1.0
    vals[0, 0, 1, 0] = 1.5
    vals[0, 0, 1, 1] = -0.5
    with pytest.raises(DataError, match="negative"):
        AttentionRecord(Tensor("f32", vals), "s", "with_query_image")


def test_row_sum_tolerance_absorbs_f16_rounding():
    rng = np.random.Generator(np.random.PCG64(0))
    n = 24
    mat = np.tril(rng.random((1, 1, n, n)))
    mat /= mat.sum(axis=3, keepdims=True)
    quantized = mat.astype(np.float16).astype(np.float32)
    rec = AttentionRecord(Tensor("f16", quantized), "s", "with_query_image")
    assert rec.seq_len == n
