"""Run-directory interchange: manifest, attention records, cross-validation.

A run directory holds ``manifest.json`` plus the tensor / segmentation
files it references. Top-level manifest fields are fixed (``version``,
``model``, ``samples``, ``files``); unknown fields are ignored so newer
writers stay loadable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConsistencyError, DataError, LoadError
from .segmentation import TokenSegmentation, load_segmentation
from .tensor_io import Tensor, read_tensor_file
from ._util import load_json

MANIFEST_VERSION = 1

ROW_SUM_TOL = 1e-3  # absorbs f16 export rounding of softmax rows

VARIANTS = ("with_query_image", "without_query_image")


@dataclass(frozen=True)
class ModelCfg:
    """Host-model geometry needed for cache accounting."""

    n_layers: int
    n_heads: int
    head_dim: int
    kv_bytes_per_element: int

    def __post_init__(self):
        for name in ("n_layers", "n_heads", "head_dim", "kv_bytes_per_element"):
            v = getattr(self, name)
            if not isinstance(v, int) or v <= 0:
                raise DataError(f"model config field {name} must be a positive integer")


@dataclass(frozen=True)
class AttentionRecord:
    """Post-softmax attention for one sample and one input variant.

    ``tensor.values`` has shape [n_layers][n_heads][seq][seq]; entry
    [l, h, j, i] is the weight query row j puts on key i. Rows are
    validated row-stochastic within tolerance and exactly zero above
    the causal diagonal.
    """

    tensor: Tensor
    sample_id: str
    variant: str

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise DataError(
                f"sample {self.sample_id}: variant must be one of {VARIANTS}, got {self.variant!r}"
            )
        vals = self.tensor.values
        if vals.ndim != 4:
            raise DataError(
                f"sample {self.sample_id}: attention tensor must be rank 4, got shape {vals.shape}"
            )
        if vals.shape[2] != vals.shape[3]:
            raise DataError(
                f"sample {self.sample_id}: attention matrix is not square: {vals.shape}"
            )
        upper = np.triu(np.ones((vals.shape[2], vals.shape[3]), dtype=bool), k=1)
        if np.any(vals[:, :, upper] != 0.0):
            raise DataError(f"sample {self.sample_id}: nonzero attention above the causal diagonal")
        if np.any(vals < 0.0):
            raise DataError(f"sample {self.sample_id}: negative attention weight")
        sums = vals.sum(axis=3, dtype=np.float64)
        if np.any(np.abs(sums - 1.0) > ROW_SUM_TOL):
            worst = float(np.max(np.abs(sums - 1.0)))
            raise DataError(
                f"sample {self.sample_id}: attention rows deviate from 1 by up to {worst:.2e}"
            )

    @property
    def layer_count(self) -> int:
        return self.tensor.shape[0]

    @property
    def head_count(self) -> int:
        return self.tensor.shape[1]

    @property
    def seq_len(self) -> int:
        return self.tensor.shape[2]


@dataclass(frozen=True)
class Sample:
    sample_id: str
    segmentation: TokenSegmentation
    attention: dict[str, AttentionRecord]
    generated_caption: str | None = None
    query_image_id: str | None = None


@dataclass(frozen=True)
class RunBundle:
    """Immutable, fully validated contents of one run directory."""

    model: ModelCfg
    model_name: str | None
    generation: dict
    samples: dict[str, Sample]
    embeddings: dict[str, "EmbeddingTable"] = field(default_factory=dict)
    warnings: tuple[str, ...] = ()

    def sample_ids(self) -> list[str]:
        return list(self.samples)


def _require(mapping: dict, key: str, what: str):
    if key not in mapping:
        raise DataError(f"{what} is missing required field {key!r}")
    return mapping[key]


def load_run(manifest_path) -> RunBundle:
    """Load and cross-validate a run directory from its manifest.

    Every invariant is checked eagerly; a malformed run never yields a
    partially loaded bundle. Non-fatal irregularities are collected on
    ``bundle.warnings``.
    """
    manifest_path = Path(manifest_path)
    manifest = load_json(manifest_path, "manifest")
    root = manifest_path.parent
    warnings: list[str] = []

    if not isinstance(manifest, dict):
        raise DataError("manifest must be a JSON object")
    version = _require(manifest, "version", "manifest")
    if not isinstance(version, int):
        raise DataError("manifest version must be an integer")
    if version > MANIFEST_VERSION:
        warnings.append(f"manifest version {version} is newer than supported {MANIFEST_VERSION}")

    model_obj = _require(manifest, "model", "manifest")
    if not isinstance(model_obj, dict):
        raise DataError("manifest model must be an object")
    model = ModelCfg(
        n_layers=_require(model_obj, "n_layers", "manifest model"),
        n_heads=_require(model_obj, "n_heads", "manifest model"),
        head_dim=_require(model_obj, "head_dim", "manifest model"),
        kv_bytes_per_element=_require(model_obj, "kv_bytes_per_element", "manifest model"),
    )
    declared_dtype = model_obj.get("attention_dtype")
    generation = model_obj.get("generation", {})
    if not isinstance(generation, dict):
        raise DataError("manifest model.generation must be an object")

    samples_obj = _require(manifest, "samples", "manifest")
    if not isinstance(samples_obj, list):
        raise DataError("manifest samples must be an array")

    samples: dict[str, Sample] = {}
    for entry in samples_obj:
        if not isinstance(entry, dict):
            raise DataError("manifest sample entries must be objects")
        sample_id = str(_require(entry, "sample_id", "sample entry"))
        if sample_id in samples:
            raise ConsistencyError(f"duplicate sample_id {sample_id!r}")
        seg_rel = _require(entry, "segmentation", f"sample {sample_id}")
        seg = load_segmentation(root / seg_rel)

        att_obj = _require(entry, "attention", f"sample {sample_id}")
        if not isinstance(att_obj, dict) or not att_obj:
            raise DataError(f"sample {sample_id}: attention must map variant -> tensor file")
        records: dict[str, AttentionRecord] = {}
        for variant, rel in att_obj.items():
            path = root / rel
            if not path.is_file():
                raise LoadError(f"missing file: {path}")
            tensor = read_tensor_file(path)
            rec = AttentionRecord(tensor=tensor, sample_id=sample_id, variant=variant)
            if rec.seq_len != len(seg):
                raise ConsistencyError(
                    f"sample {sample_id}: attention seq_len {rec.seq_len} "
                    f"!= segmentation token count {len(seg)}"
                )
            if declared_dtype and tensor.dtype != declared_dtype:
                warnings.append(
                    f"sample {sample_id}: tensor dtype {tensor.dtype} "
                    f"differs from declared {declared_dtype}"
                )
            records[variant] = rec
        if "seq_len" in entry and entry["seq_len"] != len(seg):
            raise ConsistencyError(
                f"sample {sample_id}: declared seq_len {entry['seq_len']} "
                f"!= segmentation token count {len(seg)}"
            )
        shot = generation.get("shot_count")
        if shot is not None and seg.n_ices != shot:
            warnings.append(
                f"sample {sample_id}: segmentation has {seg.n_ices} ICEs, "
                f"manifest declares shot_count {shot}"
            )
        samples[sample_id] = Sample(
            sample_id=sample_id,
            segmentation=seg,
            attention=records,
            generated_caption=entry.get("generated_caption"),
            query_image_id=entry.get("query_image_id"),
        )

    files_obj = manifest.get("files", {})
    if not isinstance(files_obj, dict):
        raise DataError("manifest files must be an object")
    embeddings = {}
    emb_entries = files_obj.get("embeddings", {})
    if not isinstance(emb_entries, dict):
        raise DataError("manifest files.embeddings must be an object")
    from .retrieval import load_embedding_table

    for name, spec in emb_entries.items():
        if not isinstance(spec, dict):
            raise DataError(f"embedding entry {name!r} must be an object")
        embeddings[name] = load_embedding_table(
            root / _require(spec, "tensor", f"embedding {name}"),
            root / _require(spec, "ids", f"embedding {name}"),
        )

    return RunBundle(
        model=model,
        model_name=model_obj.get("name"),
        generation=generation,
        samples=samples,
        embeddings=embeddings,
        warnings=tuple(warnings),
    )
