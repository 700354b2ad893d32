"""Synthetic attention with controllable structure, plus naive oracles.

The generator plants the two qualitative patterns seen in real dumps:
bright anchor columns (strength ``anchor``) and within-demonstration
attention windows (strength ``window``). The oracles recompute every
metric by explicit pair enumeration with no algebraic shortcuts; they
ship in the package, not only in tests, so any production number can be
audited against them.
"""

from __future__ import annotations

import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass

import numpy as np

from .bundle import AttentionRecord
from .errors import DataError, DomainError
from .segmentation import TokenSegmentation
from .tensor_io import Tensor

SENTINEL = math.inf


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a synthetic attention record.

    Per query row j, the unnormalized weight of a visible key i is
    1 + anchor*[i is an anchor] + window*[i shares j's ICE] + noise*u,
    with u drawn uniformly from [0, 1) by PCG64 seeded with ``seed``.
    Rows are then normalized.
    """

    seg: TokenSegmentation
    n_layers: int = 1
    n_heads: int = 1
    anchor: float = 0.0
    window: float = 0.0
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_layers < 1 or self.n_heads < 1:
            raise DataError("need at least one layer and one head")
        if self.anchor < 0 or self.window < 0 or self.noise < 0:
            raise DataError("strength parameters must be non-negative")


def gen_attention(
    spec: SynthSpec,
    variant: str = "with_query_image",
    sample_id: str = "synth",
) -> AttentionRecord:
    """Deterministically realize ``spec`` as a causal, row-stochastic record."""
    seg = spec.seg
    n = len(seg)
    anchors = np.zeros(n, dtype=bool)
    anchors[list(seg.anchor_set)] = True
    ice = np.array([-1 if v is None else v for v in seg.ice_indices])

    base = np.ones((n, n), dtype=np.float64)
    base += spec.anchor * anchors[np.newaxis, :]
    same_ice = (ice[:, np.newaxis] == ice[np.newaxis, :]) & (ice[np.newaxis, :] >= 0)
    base += spec.window * same_ice

    weights = np.broadcast_to(base, (spec.n_layers, spec.n_heads, n, n)).copy()
    if spec.noise > 0:
        rng = np.random.Generator(np.random.PCG64(spec.seed))
        weights += spec.noise * rng.random(weights.shape)

    causal = np.tril(np.ones((n, n), dtype=bool))
    weights *= causal
    weights /= weights.sum(axis=3, keepdims=True)
    return AttentionRecord(
        tensor=Tensor("f32", weights), sample_id=sample_id, variant=variant
    )


# --- brute-force attention oracles -----------------------------------------


def _flow(rec: AttentionRecord, layer: int, i: int, j: int) -> float:
    total = 0.0
    for h in range(rec.head_count):
        total += float(rec.tensor.values[layer, h, j, i])
    return total / rec.head_count


def _mean_over_pairs(rec: AttentionRecord, layer: int, keys, queries) -> float:
    total = 0.0
    count = 0
    for j in queries:
        for i in keys:
            if i <= j:
                total += _flow(rec, layer, i, j)
                count += 1
    if count == 0:
        return SENTINEL
    return total / count


def oracle_metric(
    rec: AttentionRecord,
    seg: TokenSegmentation,
    which: str,
    layer: int,
    rec_without: AttentionRecord | None = None,
) -> float:
    """Reference value of one attention metric on one layer."""
    if which == "acar":
        return oracle_acar(rec, seg, layer)
    if which == "iear":
        return oracle_iear(rec, seg, layer)
    if which == "vcar":
        if rec_without is None:
            raise DomainError("vcar oracle needs the without-image record")
        return oracle_vcar(rec, rec_without, seg, layer)
    raise DomainError(f"unknown metric {which!r}")


def oracle_acar(rec: AttentionRecord, seg: TokenSegmentation, layer: int) -> float:
    if not seg.anchor_set or not seg.context_set:
        raise DomainError("segmentation lacks anchors or context")
    num = _mean_over_pairs(rec, layer, seg.anchor_set, seg.query_set)
    den = _mean_over_pairs(rec, layer, seg.context_set, seg.query_set)
    if den == SENTINEL or den == 0.0:
        return SENTINEL
    return num / den


def oracle_iear(rec: AttentionRecord, seg: TokenSegmentation, layer: int) -> float:
    if seg.n_ices < 2:
        raise DomainError("intra/extra ratio needs at least 2 ICEs")
    ratios = []
    for k in range(seg.n_ices):
        inside = seg.ice_context_tokens(k)
        outside = [i for i in seg.context_set if i not in inside]
        num = _mean_over_pairs(rec, layer, inside, inside)
        den = _mean_over_pairs(rec, layer, outside, inside)
        if num == SENTINEL or den == SENTINEL or den == 0.0:
            ratios.append(SENTINEL)
        else:
            ratios.append(num / den)
    finite = [r for r in ratios if r != SENTINEL]
    if not finite:
        return SENTINEL
    return sum(finite) / len(finite)


def oracle_vcar(
    rec_with: AttentionRecord,
    rec_without: AttentionRecord,
    seg: TokenSegmentation,
    layer: int,
) -> float:
    q = seg.query_set
    qq_w = _mean_over_pairs(rec_with, layer, q, q)
    qq_wo = _mean_over_pairs(rec_without, layer, q, q)
    den = _mean_over_pairs(rec_with, layer, seg.context_set, q)
    if SENTINEL in (qq_w, qq_wo, den) or den == 0.0:
        return SENTINEL
    return (qq_w - qq_wo) / den


# --- independent caption-consensus oracle -----------------------------------


def _oracle_tokens(text: str) -> list[str]:
    return re.findall(r"[^\W_]+", text.lower(), re.UNICODE)


def _oracle_ngrams(tokens: list[str]) -> dict[int, Counter]:
    grams: dict[int, Counter] = {}
    for n in range(1, 5):
        grams[n] = Counter(
            tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)
        )
    return grams


def oracle_cider(
    candidate: str,
    refs: list[str],
    df: dict[tuple, int] | None = None,
    n_docs: int | None = None,
) -> float:
    """Direct transcription of the consensus metric (clipped variant,
    sigma = 6, x10). When ``df`` is omitted, each reference caption is
    its own document.
    """
    if not refs:
        raise DomainError("need at least one reference caption")
    ref_tokens = [_oracle_tokens(r) for r in refs]
    if df is None:
        n_docs = len(refs)
        df = defaultdict(int)
        for toks in ref_tokens:
            grams = _oracle_ngrams(toks)
            seen = set()
            for n in range(1, 5):
                seen.update(grams[n].keys())
            for g in seen:
                df[g] += 1
    if n_docs is None:
        raise DomainError("df requires an explicit document count")

    log_n = math.log(float(n_docs))

    def tfidf(tokens):
        grams = _oracle_ngrams(tokens)
        vec = {n: {} for n in range(1, 5)}
        norm = {n: 0.0 for n in range(1, 5)}
        for n in range(1, 5):
            for g, c in grams[n].items():
                w = float(c) * (log_n - math.log(max(1.0, float(df.get(g, 0)))))
                vec[n][g] = w
                norm[n] += w * w
        for n in range(1, 5):
            norm[n] = math.sqrt(norm[n])
        return vec, norm, len(tokens)

    cand_tokens = _oracle_tokens(candidate)
    if not cand_tokens:
        return 0.0
    vec_c, norm_c, len_c = tfidf(cand_tokens)

    per_n = [0.0, 0.0, 0.0, 0.0]
    for toks in ref_tokens:
        vec_r, norm_r, len_r = tfidf(toks)
        delta = float(len_c - len_r)
        penalty = math.exp(-(delta**2) / (2.0 * 6.0**2))
        for n in range(1, 5):
            dot = 0.0
            for g, wc in vec_c[n].items():
                dot += min(wc, vec_r[n].get(g, 0.0)) * vec_r[n].get(g, 0.0)
            if norm_c[n] != 0.0 and norm_r[n] != 0.0:
                dot /= norm_c[n] * norm_r[n]
            per_n[n - 1] += dot * penalty
    mean_n = sum(per_n) / 4.0
    return 10.0 * mean_n / len(refs)
