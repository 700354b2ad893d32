"""Attention-ratio metrics over single-sample attention records.

All three ratios are built from means of the head-averaged weight
A_l(i, j) over pair sets (i = key token, j = query-row token):

* anchor/context ratio: mean over anchors->query pairs divided by mean
  over context->query pairs;
* intra/extra ratio: per demonstration k, mean over pairs inside k's
  context tokens divided by mean over pairs from other demonstrations'
  context into k, averaged over the demonstrations with a defined ratio;
* visual/caption ratio: difference of the query-self means between the
  with-image and without-image passes, divided by the context->query
  mean of the with-image pass.

Pairs that the causal mask forbids (i > j) are excluded from every set
rather than counted as zeros. A zero or empty denominator yields the
in-band sentinel ``math.inf``; profile aggregation excludes sentinels
from means and reports them separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bundle import AttentionRecord
from .errors import DomainError
from .segmentation import TokenSegmentation

SENTINEL = math.inf


def _layer_matrix(rec: AttentionRecord, layer: int) -> np.ndarray:
    if not 0 <= layer < rec.layer_count:
        raise DomainError(f"layer {layer} out of range [0, {rec.layer_count})")
    return rec.tensor.values[layer].mean(axis=0, dtype=np.float64)


def attention_flow(rec: AttentionRecord, layer: int, key: int, query: int) -> float:
    """Head-averaged weight that query row ``query`` puts on ``key``."""
    n = rec.seq_len
    if not (0 <= key < n and 0 <= query < n):
        raise DomainError(f"token index out of range for seq_len {n}")
    if key > query:
        raise DomainError(f"non-causal pair: key {key} > query {query}")
    return float(rec.tensor.values[layer, :, query, key].mean(dtype=np.float64))


def _pair_mean(mat: np.ndarray, keys, queries) -> float:
    """Mean of mat[j, i] over causal pairs (i in keys, j in queries).

    Returns the sentinel when no causal pair exists or the mass is zero.
    """
    keys = np.asarray(keys, dtype=np.intp)
    queries = np.asarray(queries, dtype=np.intp)
    if keys.size == 0 or queries.size == 0:
        return SENTINEL
    kk, qq = np.meshgrid(keys, queries)
    causal = kk <= qq
    count = int(causal.sum())
    if count == 0:
        return SENTINEL
    total = float(mat[qq[causal], kk[causal]].sum(dtype=np.float64))
    return total / count


def _check_sets(seg: TokenSegmentation):
    if not seg.anchor_set:
        raise DomainError("segmentation has no anchor tokens")
    if not seg.context_set:
        raise DomainError("segmentation has no context tokens")


def acar(rec: AttentionRecord, seg: TokenSegmentation, layer: int) -> float:
    """Anchor-to-context attention ratio at the query tokens for one layer."""
    _check_has_seg(rec, seg)
    _check_sets(seg)
    mat = _layer_matrix(rec, layer)
    num = _pair_mean(mat, seg.anchor_set, seg.query_set)
    den = _pair_mean(mat, seg.context_set, seg.query_set)
    if den == SENTINEL or den == 0.0:
        return SENTINEL
    return num / den


def iear_components(rec: AttentionRecord, seg: TokenSegmentation, layer: int) -> list[float]:
    """Per-demonstration intra/extra ratios; sentinel entries where the
    cross-demonstration mean is zero or has no causal pairs."""
    _check_has_seg(rec, seg)
    if seg.n_ices < 2:
        raise DomainError("intra/extra ratio needs at least 2 ICEs")
    mat = _layer_matrix(rec, layer)
    context = set(seg.context_set)
    out: list[float] = []
    for k in range(seg.n_ices):
        inside = seg.ice_context_tokens(k)
        outside = sorted(context.difference(inside))
        num = _pair_mean(mat, inside, inside)
        den = _pair_mean(mat, outside, inside)
        if num == SENTINEL or den == SENTINEL or den == 0.0:
            out.append(SENTINEL)
        else:
            out.append(num / den)
    return out


def iear(rec: AttentionRecord, seg: TokenSegmentation, layer: int) -> float:
    """Mean of the finite per-demonstration ratios; sentinel if none is finite.

    Under a causal mask the first demonstration never sees earlier
    context, so its component is always the sentinel and is excluded.
    """
    parts = iear_components(rec, seg, layer)
    finite = [p for p in parts if p != SENTINEL]
    if not finite:
        return SENTINEL
    return sum(finite) / len(finite)


def vcar(
    rec_with: AttentionRecord,
    rec_without: AttentionRecord,
    seg: TokenSegmentation,
    layer: int,
) -> float:
    """Visual-reliance ratio from paired with/without-query-image passes.

    May be negative; the raw difference of query-self attention keeps its
    sign. The denominator uses the with-image record.
    """
    if rec_with.variant != "with_query_image" or rec_without.variant != "without_query_image":
        raise DomainError(
            f"variant mismatch: got {rec_with.variant!r} / {rec_without.variant!r}"
        )
    if rec_with.seq_len != rec_without.seq_len:
        raise DomainError("paired records differ in seq_len")
    if rec_with.layer_count != rec_without.layer_count:
        raise DomainError("paired records differ in layer count")
    _check_has_seg(rec_with, seg)
    _check_sets(seg)
    mat_w = _layer_matrix(rec_with, layer)
    mat_wo = _layer_matrix(rec_without, layer)
    q = seg.query_set
    qq_with = _pair_mean(mat_w, q, q)
    qq_without = _pair_mean(mat_wo, q, q)
    den = _pair_mean(mat_w, seg.context_set, q)
    if SENTINEL in (qq_with, qq_without, den) or den == 0.0:
        return SENTINEL
    return (qq_with - qq_without) / den


def _check_has_seg(rec: AttentionRecord, seg: TokenSegmentation):
    if rec.seq_len != len(seg):
        raise DomainError(
            f"record seq_len {rec.seq_len} != segmentation length {len(seg)}"
        )


@dataclass(frozen=True)
class LayerProfile:
    """Per-layer metric values with sentinel layers tracked separately."""

    metric: str
    values: tuple[float, ...]
    sentinel_layers: tuple[int, ...]

    @property
    def mean(self) -> float:
        finite = [v for v in self.values if v != SENTINEL]
        return sum(finite) / len(finite)


def layer_profile(
    rec: AttentionRecord,
    seg: TokenSegmentation,
    metric: str,
    rec_without: AttentionRecord | None = None,
) -> LayerProfile:
    """Evaluate one metric on every layer of a record.

    ``metric`` is ``acar``, ``iear`` or ``vcar``; the latter requires the
    paired without-image record.
    """
    values: list[float] = []
    for layer in range(rec.layer_count):
        if metric == "acar":
            values.append(acar(rec, seg, layer))
        elif metric == "iear":
            values.append(iear(rec, seg, layer))
        elif metric == "vcar":
            if rec_without is None:
                raise DomainError("vcar profile needs the without-image record")
            values.append(vcar(rec, rec_without, seg, layer))
        else:
            raise DomainError(f"unknown metric {metric!r}")
    sentinels = tuple(i for i, v in enumerate(values) if v == SENTINEL)
    if len(sentinels) == len(values):
        raise DomainError(f"{metric} profile is sentinel on every layer")
    return LayerProfile(metric=metric, values=tuple(values), sentinel_layers=sentinels)
