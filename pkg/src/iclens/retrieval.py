"""Demonstration-image retrieval: random sampling and similarity ranking."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DomainError
from .tensor_io import Tensor, read_tensor_file
from ._util import load_json

NORM_TOL = 1e-5


@dataclass(frozen=True)
class EmbeddingTable:
    """Ordered image ids with one embedding row per id."""

    ids: tuple[str, ...]
    matrix: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=np.float32)
        if mat.ndim != 2:
            raise DataError(f"embedding matrix must be 2-D, got shape {mat.shape}")
        if len(self.ids) != mat.shape[0]:
            raise DataError(f"{len(self.ids)} ids vs {mat.shape[0]} embedding rows")
        if len(set(self.ids)) != len(self.ids):
            raise DataError("embedding ids are not unique")
        if self.normalized:
            norms = np.linalg.norm(mat.astype(np.float64), axis=1)
            if np.any(np.abs(norms - 1.0) > NORM_TOL):
                raise DataError("normalized flag set but some rows are not unit length")
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "_index", {img: i for i, img in enumerate(self.ids)})

    def row(self, image_id: str) -> np.ndarray:
        idx = getattr(self, "_index").get(image_id)
        if idx is None:
            raise DataError(f"unknown image id {image_id!r}")
        return self.matrix[idx]


def load_embedding_table(tensor_path, ids_path) -> EmbeddingTable:
    """Read the matrix tensor plus its sidecar ``{"ids": [...], "normalized": bool}``."""
    tensor = read_tensor_file(tensor_path)
    sidecar = load_json(ids_path, "embedding id sidecar")
    if not isinstance(sidecar, dict) or "ids" not in sidecar:
        raise DataError(f"embedding sidecar {ids_path} needs an 'ids' array")
    return EmbeddingTable(
        ids=tuple(str(i) for i in sidecar["ids"]),
        matrix=tensor.values,
        normalized=bool(sidecar.get("normalized", False)),
    )


def save_embedding_table(table: EmbeddingTable, tensor_path, ids_path) -> None:
    from .tensor_io import write_tensor_file
    from ._util import write_json

    write_tensor_file(Tensor("f32", table.matrix), tensor_path)
    write_json(ids_path, {"ids": list(table.ids), "normalized": table.normalized})


@dataclass(frozen=True)
class RetrievalResult:
    query_id: str
    method: str  # "rs" | "siir"
    items: tuple[tuple[str, float], ...]

    def __post_init__(self):
        if any(image_id == self.query_id for image_id, _ in self.items):
            raise DataError("query id appears among retrieved items")
        if self.method == "siir":
            scores = [s for _, s in self.items]
            if any(a < b for a, b in zip(scores, scores[1:])):
                raise DataError("similarity scores must be non-increasing")

    def ids(self) -> list[str]:
        return [image_id for image_id, _ in self.items]


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DomainError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise DomainError("cosine similarity undefined for a zero vector")
    return float(a @ b) / (na * nb)


def siir_retrieve(query_id: str, table: EmbeddingTable, k: int) -> RetrievalResult:
    """Top-k corpus images by cosine similarity to the query embedding.

    The query never retrieves itself; ties break by ascending id so runs
    reproduce across implementations.
    """
    if query_id not in table.ids:
        raise DataError(f"unknown query id {query_id!r}")
    if k < 1 or k > len(table.ids) - 1:
        raise DomainError(f"k={k} outside [1, {len(table.ids) - 1}]")
    query = table.row(query_id)
    scored = [
        (image_id, cosine_similarity(query, table.row(image_id)))
        for image_id in table.ids
        if image_id != query_id
    ]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return RetrievalResult(query_id=query_id, method="siir", items=tuple(scored[:k]))


def rs_sample(
    table_ids,
    k: int,
    seed: int,
    exclude: str | None = None,
) -> RetrievalResult:
    """k ids drawn uniformly without replacement, excluding the query.

    Deterministic: candidates are the non-excluded ids in ascending
    order, and the draw is the first k entries of a PCG64(seed)
    permutation (NumPy ``Generator.permutation``).
    """
    candidates = sorted(str(i) for i in table_ids if i != exclude)
    if k < 1 or k > len(candidates):
        raise DomainError(f"k={k} outside [1, {len(candidates)}]")
    rng = np.random.Generator(np.random.PCG64(seed))
    order = rng.permutation(len(candidates))
    chosen = [candidates[i] for i in order[:k]]
    return RetrievalResult(
        query_id="" if exclude is None else exclude,
        method="rs",
        items=tuple((image_id, 0.0) for image_id in chosen),
    )
