"""Caption scoring: consensus n-gram metric, copy detection, hallucination
rates, and embedding-based image-text agreement.

The consensus metric is the clipped, length-penalized variant that the
captioning literature reports (sigma = 6, counts clipped to the
reference, idf = log(N / max(1, df)), mean over n = 1..4, x10). The
unclipped, unpenalized variant is available via ``variant="plain"``.
"""

from __future__ import annotations

import math
import re
import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .captions import CaptionDataset
from .errors import DataError, DomainError

MAX_N = 4
SIGMA = 6.0
CLIPSCORE_WEIGHT = 2.5

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class NGramProfile:
    """Token n-gram multisets for n = 1..4 plus the unigram length."""

    counts: tuple[dict[tuple, int], ...]
    length: int

    @classmethod
    def of(cls, text: str) -> "NGramProfile":
        tokens = tokenize(text)
        counts = []
        for n in range(1, MAX_N + 1):
            counts.append(
                dict(Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)))
            )
        return cls(counts=tuple(counts), length=len(tokens))

    def all_ngrams(self) -> set[tuple]:
        out: set[tuple] = set()
        for c in self.counts:
            out.update(c.keys())
        return out


def build_document_frequency(reference_sets: list[list[str]]) -> tuple[dict[tuple, int], int]:
    """Document frequencies over a corpus where one image's reference
    captions form one document. Returns (df, number of documents)."""
    df: dict[tuple, int] = {}
    for refs in reference_sets:
        seen: set[tuple] = set()
        for ref in refs:
            seen |= NGramProfile.of(ref).all_ngrams()
        for g in seen:
            df[g] = df.get(g, 0) + 1
    return df, len(reference_sets)


def _tfidf(profile: NGramProfile, df: dict[tuple, int], log_n: float):
    vecs = []
    norms = []
    for n in range(MAX_N):
        vec = {}
        sq = 0.0
        for g, c in profile.counts[n].items():
            w = float(c) * (log_n - math.log(max(1.0, float(df.get(g, 0)))))
            vec[g] = w
            sq += w * w
        vecs.append(vec)
        norms.append(math.sqrt(sq))
    return vecs, norms


def cider(
    candidate: str,
    refs: list[str],
    df: dict[tuple, int],
    n_docs: int,
    variant: str = "clipped",
) -> float:
    """Consensus score of ``candidate`` against reference captions.

    ``df``/``n_docs`` describe the reference corpus the idf weights come
    from (see :func:`build_document_frequency`). An empty candidate
    scores 0 with a warning rather than raising.
    """
    if not refs:
        raise DomainError("need at least one reference caption")
    if n_docs < 1:
        raise DomainError("document count must be positive")
    if variant not in ("clipped", "plain"):
        raise DomainError(f"unknown variant {variant!r}")

    cand = NGramProfile.of(candidate)
    if cand.length == 0:
        warnings.warn("candidate caption is empty after tokenization; scoring 0")
        return 0.0
    log_n = math.log(float(n_docs))
    vec_c, norm_c = _tfidf(cand, df, log_n)

    per_n = [0.0] * MAX_N
    for ref in refs:
        prof_r = NGramProfile.of(ref)
        vec_r, norm_r = _tfidf(prof_r, df, log_n)
        if variant == "clipped":
            delta = float(cand.length - prof_r.length)
            penalty = math.exp(-(delta**2) / (2.0 * SIGMA**2))
        else:
            penalty = 1.0
        for n in range(MAX_N):
            dot = 0.0
            for g, wc in vec_c[n].items():
                wr = vec_r[n].get(g, 0.0)
                dot += (min(wc, wr) if variant == "clipped" else wc) * wr
            if norm_c[n] != 0.0 and norm_r[n] != 0.0:
                dot /= norm_c[n] * norm_r[n]
            per_n[n] += dot * penalty
    return 10.0 * (sum(per_n) / MAX_N) / len(refs)


def shortcut_cider(generated: str, ice_captions: list[str]) -> float:
    """Copy-detection score of a generated caption against its own
    demonstration captions; only the first four count, and they also
    form the df corpus (one caption = one document)."""
    if not ice_captions:
        raise DomainError("need at least one demonstration caption")
    refs = list(ice_captions[:4])
    df, n_docs = build_document_frequency([[r] for r in refs])
    return cider(generated, refs, df, n_docs)


# --- hallucinated-object rates ----------------------------------------------


@dataclass(frozen=True)
class ChairLexicon:
    """Object vocabulary plus surface-form synonyms.

    Category names match themselves; synonym surfaces map to a category.
    Multi-word surfaces match as contiguous token runs, longest first.
    """

    categories: frozenset[str]
    synonyms: dict[str, str] = field(default_factory=dict)
    _surface_tokens: tuple = field(init=False, repr=False)

    def __post_init__(self):
        surfaces: dict[tuple, str] = {}
        for cat in self.categories:
            toks = tuple(tokenize(cat))
            if not toks:
                raise DataError(f"category {cat!r} tokenizes to nothing")
            surfaces[toks] = cat
        for surface, cat in self.synonyms.items():
            if cat not in self.categories:
                raise DataError(f"synonym {surface!r} maps to unknown category {cat!r}")
            toks = tuple(tokenize(surface))
            if not toks:
                raise DataError(f"synonym {surface!r} tokenizes to nothing")
            if toks in surfaces and surfaces[toks] != cat:
                raise DataError(f"surface {surface!r} maps to two categories")
            surfaces[toks] = cat
        object.__setattr__(
            self,
            "_surface_tokens",
            tuple(sorted(surfaces.items(), key=lambda kv: -len(kv[0]))),
        )

    def find_mentions(self, caption: str) -> list[str]:
        """Categories mentioned in the caption, one per matched occurrence.

        The token stream is scanned left to right with longest-match
        precedence; matched tokens are consumed so overlapping surfaces
        do not double-count.
        """
        tokens = tokenize(caption)
        mentions: list[str] = []
        pos = 0
        while pos < len(tokens):
            for surface, cat in self._surface_tokens:
                if tuple(tokens[pos : pos + len(surface)]) == surface:
                    mentions.append(cat)
                    pos += len(surface)
                    break
            else:
                pos += 1
        return mentions


@dataclass(frozen=True)
class ChairRow:
    sample_id: str
    mentions: int
    hallucinated: int

    @property
    def flagged(self) -> bool:
        return self.hallucinated > 0


@dataclass(frozen=True)
class ChairResult:
    instance_rate: float
    sentence_rate: float
    rows: tuple[ChairRow, ...]


def chair(
    captions: list[tuple[str, str]],
    ds: CaptionDataset,
    lex: ChairLexicon,
) -> ChairResult:
    """Hallucination rates over (image_id, caption) pairs.

    A mention is hallucinated when its category is absent from the
    image's ground-truth object set. The instance rate divides
    hallucinated mentions by all mentions (0 when there are none); the
    sentence rate is the fraction of captions with any hallucination.
    """
    rows: list[ChairRow] = []
    total_mentions = 0
    total_hallucinated = 0
    flagged = 0
    for image_id, caption in captions:
        gt = ds.gt_objects(image_id)
        mentions = lex.find_mentions(caption)
        bad = sum(1 for cat in mentions if cat not in gt)
        rows.append(ChairRow(sample_id=image_id, mentions=len(mentions), hallucinated=bad))
        total_mentions += len(mentions)
        total_hallucinated += bad
        if bad:
            flagged += 1
    instance = total_hallucinated / total_mentions if total_mentions else 0.0
    sentence = flagged / len(captions) if captions else 0.0
    return ChairResult(instance_rate=instance, sentence_rate=sentence, rows=tuple(rows))


def load_chair_lexicon(path) -> ChairLexicon:
    from ._util import load_json

    obj = load_json(path, "object lexicon")
    if not isinstance(obj, dict) or "categories" not in obj:
        raise DataError(f"lexicon {path} needs a 'categories' array")
    return ChairLexicon(
        categories=frozenset(str(c) for c in obj["categories"]),
        synonyms={str(k): str(v) for k, v in (obj.get("synonyms") or {}).items()},
    )


# --- embedding agreement ------------------------------------------------------


def clipscore(image_emb, text_emb) -> float:
    """Scaled, clamped cosine similarity between image and caption embeddings."""
    a = np.asarray(image_emb, dtype=np.float64)
    b = np.asarray(text_emb, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DomainError(f"embedding shape mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise DomainError("zero-norm embedding")
    cos = float(a @ b) / (na * nb)
    return CLIPSCORE_WEIGHT * max(cos, 0.0)
