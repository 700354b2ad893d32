"""Attention-mask plans, token-prune plans, and KV-cache accounting.

The cache formula counts decoder self-attention layers only:

    bytes = 2 (K and V) * bytes_per_element * n_heads * head_dim
            * sum over layers of the effective sequence length.

Gated cross-attention caches of the host model are excluded; estimates
are prompt-only, independent of how many tokens get generated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bundle import ModelCfg
from .errors import DomainError
from .segmentation import TokenSegmentation

__all__ = [
    "ModelCfg",
    "MaskPlan",
    "PrunePlan",
    "anchor_mask",
    "context_mask",
    "prune_plan",
    "kv_estimate",
]


def _causal(seq_len: int) -> np.ndarray:
    return np.tril(np.ones((seq_len, seq_len), dtype=bool))


@dataclass(frozen=True)
class MaskPlan:
    """Layer-ranged attention restriction as boolean allow-matrices.

    ``restricted`` is the [seq][seq] allow-matrix applied on layers in
    [layer_start, layer_end]; every other layer keeps the plain causal
    mask. Row j, column i says whether query row j may attend key i.
    """

    kind: str
    layer_start: int
    layer_end: int
    n_layers: int
    restricted: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.restricted, dtype=bool)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise DomainError(f"mask matrix must be square, got {mat.shape}")
        if np.any(mat & ~_causal(mat.shape[0])):
            raise DomainError("mask allows a non-causal pair")
        object.__setattr__(self, "restricted", mat)

    @property
    def seq_len(self) -> int:
        return self.restricted.shape[0]

    def matrix_for_layer(self, layer: int) -> np.ndarray:
        if not 0 <= layer < self.n_layers:
            raise DomainError(f"layer {layer} out of range [0, {self.n_layers})")
        if self.layer_start <= layer <= self.layer_end:
            return self.restricted.copy()
        return _causal(self.seq_len)

    def allowed(self, layer: int, query: int, key: int) -> bool:
        return bool(self.matrix_for_layer(layer)[query, key])


def _check_range(layer_start: int, layer_end: int, n_layers: int):
    if n_layers < 1:
        raise DomainError("model needs at least one layer")
    if not (0 <= layer_start <= layer_end < n_layers):
        raise DomainError(
            f"layer range [{layer_start}, {layer_end}] invalid for {n_layers} layers"
        )


def anchor_mask(
    seg: TokenSegmentation, layer_start: int, layer_end: int, n_layers: int
) -> MaskPlan:
    """Within the range, rows may attend only anchor and query keys."""
    _check_range(layer_start, layer_end, n_layers)
    n = len(seg)
    kept = np.zeros(n, dtype=bool)
    kept[list(seg.anchor_set)] = True
    kept[list(seg.query_set)] = True
    restricted = _causal(n) & kept[np.newaxis, :]
    return MaskPlan("anchor_centric", layer_start, layer_end, n_layers, restricted)


def context_mask(
    seg: TokenSegmentation, layer_start: int, layer_end: int, n_layers: int
) -> MaskPlan:
    """Within the range, each demonstration's rows stay inside their own
    demonstration; anchor and query keys remain visible to everyone.
    Rows outside any demonstration keep the plain causal mask."""
    _check_range(layer_start, layer_end, n_layers)
    n = len(seg)
    ice = np.array([-1 if v is None else v for v in seg.ice_indices])
    open_keys = np.zeros(n, dtype=bool)
    open_keys[list(seg.anchor_set)] = True
    open_keys[list(seg.query_set)] = True
    same_ice = ice[:, np.newaxis] == ice[np.newaxis, :]
    ice_rows = ice >= 0
    allowed = np.where(
        ice_rows[:, np.newaxis], same_ice | open_keys[np.newaxis, :], True
    )
    restricted = _causal(n) & allowed
    return MaskPlan("context_centric", layer_start, layer_end, n_layers, restricted)


@dataclass(frozen=True)
class PrunePlan:
    """Token retention schedule: keep anchors and query tokens from the
    prune layer on, optionally restoring everything at the prediction
    layer."""

    prune_layer: int
    prediction_layer: int
    recover: bool
    kept_indices: tuple[int, ...]
    full_len: int
    n_layers: int

    @property
    def effective_lengths(self) -> tuple[int, ...]:
        kept = len(self.kept_indices)
        out = []
        for layer in range(self.n_layers):
            if layer < self.prune_layer:
                out.append(self.full_len)
            elif layer < self.prediction_layer or not self.recover:
                out.append(kept)
            else:
                out.append(self.full_len)
        return tuple(out)


def prune_plan(
    seg: TokenSegmentation,
    prune_layer: int,
    recover: bool,
    prediction_layer: int,
    n_layers: int,
) -> PrunePlan:
    """Plan that drops non-anchor demonstration tokens at ``prune_layer``.

    ``prune_layer == n_layers`` yields the identity plan (nothing
    pruned); otherwise the prediction layer must lie strictly after the
    prune layer and at most at ``n_layers``.
    """
    if n_layers < 1:
        raise DomainError("model needs at least one layer")
    if not 0 <= prune_layer <= n_layers:
        raise DomainError(f"prune layer {prune_layer} outside [0, {n_layers}]")
    if prune_layer == n_layers:
        prediction_layer = n_layers
    elif not prune_layer < prediction_layer <= n_layers:
        raise DomainError(
            f"prediction layer {prediction_layer} must lie in ({prune_layer}, {n_layers}]"
        )
    kept = sorted(set(seg.anchor_set) | set(seg.query_set))
    return PrunePlan(
        prune_layer=prune_layer,
        prediction_layer=prediction_layer,
        recover=recover,
        kept_indices=tuple(kept),
        full_len=len(seg),
        n_layers=n_layers,
    )


def kv_estimate(
    cfg: ModelCfg, plan: PrunePlan | None, full_len: int
) -> tuple[int, float]:
    """Prompt KV-cache bytes under a plan, plus the savings fraction
    against the unpruned baseline."""
    if full_len < 1:
        raise DomainError("sequence length must be positive")
    per_token = 2 * cfg.kv_bytes_per_element * cfg.n_heads * cfg.head_dim
    baseline = per_token * cfg.n_layers * full_len
    if plan is None:
        return baseline, 0.0
    if plan.n_layers != cfg.n_layers:
        raise DomainError(
            f"plan built for {plan.n_layers} layers, model has {cfg.n_layers}"
        )
    if plan.full_len != full_len:
        raise DomainError(
            f"plan built for length {plan.full_len}, estimate asked for {full_len}"
        )
    total = per_token * sum(plan.effective_lengths)
    return total, 1.0 - total / baseline
