import json
from pathlib import Path

import numpy as np
import pytest


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    """One visible pass/fail line per acceptance criterion."""
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" and item.fspath.basename == "test_acceptance.py":
        tw = item.config.pluginmanager.get_plugin("terminalreporter")
        if tw is not None:
            status = "PASS" if report.passed else "FAIL"
            tw.write_line(f"ACCEPTANCE {status}: {item.name}")

from iclens import (
    CaptionDataset,
    EmbeddingTable,
    SynthSpec,
    canonical_segmentation,
    gen_attention,
    load_caption_dataset,
    load_chair_lexicon,
)

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def caption_ds() -> CaptionDataset:
    return load_caption_dataset(FIXTURES / "captions_small.json")


@pytest.fixture(scope="session")
def lexicon():
    return load_chair_lexicon(FIXTURES / "lexicon_small.json")


@pytest.fixture(scope="session")
def embedding_table(caption_ds) -> EmbeddingTable:
    ids = sorted(caption_ds.images)
    rng = np.random.Generator(np.random.PCG64(7))
    mat = rng.normal(size=(len(ids), 8)).astype(np.float32)
    mat /= np.linalg.norm(mat, axis=1, keepdims=True)
    return EmbeddingTable(ids=tuple(ids), matrix=mat, normalized=True)


@pytest.fixture
def uniform_record():
    seg = canonical_segmentation(4, context_per_ice=1)
    return gen_attention(SynthSpec(seg=seg, n_layers=2, n_heads=2)), seg


def record_from_matrix(matrix, n_layers=1, n_heads=1, variant="with_query_image", sample_id="t"):
    """Broadcast one [seq, seq] attention matrix to a full record."""
    from iclens import AttentionRecord, Tensor

    mat = np.asarray(matrix, dtype=np.float32)
    tensor = np.broadcast_to(mat, (n_layers, n_heads) + mat.shape).copy()
    return AttentionRecord(tensor=Tensor("f32", tensor), sample_id=sample_id, variant=variant)


def stack_layers(*records):
    """Concatenate single-variant records along the layer axis."""
    from iclens import AttentionRecord, Tensor

    tensors = [r.tensor.values for r in records]
    stacked = np.concatenate(tensors, axis=0)
    first = records[0]
    return AttentionRecord(
        tensor=Tensor("f32", stacked), sample_id=first.sample_id, variant=first.variant
    )


