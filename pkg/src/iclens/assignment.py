"""Caption assignment strategies and demonstration-sequence rendering."""

from __future__ import annotations

from dataclasses import dataclass

from .captions import (
    MGC_SOURCES,
    MHL_ANCHOR_TIERS,
    CaptionDataset,
    CaptionSource,
)
from .errors import DataError
from .segmentation import Role, TokenSegmentation
from .text_metrics import build_document_frequency, cider


def assign_fhl(image_id: str, ds: CaptionDataset) -> str:
    """First human-annotated caption, verbatim."""
    return ds.human_captions(image_id)[0]


def assign_mgc(image_id: str, tier: CaptionSource, ds: CaptionDataset) -> str:
    """Stored machine caption for the given tier, verbatim."""
    if tier not in MGC_SOURCES:
        raise DataError(f"{tier.value} is not a machine-caption tier")
    return ds.machine_caption(image_id, tier)


def assign_mhl(
    image_id: str,
    anchor_tier: CaptionSource,
    ds: CaptionDataset,
    mode: str = "maximize",
) -> str:
    """Human caption most (or least) similar to the anchor machine caption.

    Similarity is the sentence-level consensus score of the machine
    caption against each human caption, with document frequencies built
    from the image's own human-caption set. Ties go to the lowest
    caption index.
    """
    if mode not in ("maximize", "minimize"):
        raise DataError(f"unknown selection mode {mode!r}")
    humans = ds.human_captions(image_id)
    machine = ds.machine_caption(image_id, anchor_tier)
    df, n_docs = build_document_frequency([[h] for h in humans])
    scores = [cider(machine, [h], df, n_docs) for h in humans]
    if mode == "maximize":
        best = max(range(len(humans)), key=lambda i: (scores[i], -i))
    else:
        best = min(range(len(humans)), key=lambda i: (scores[i], i))
    return humans[best]


def assign_caption(image_id: str, source: CaptionSource, ds: CaptionDataset) -> str:
    """Dispatch one source tag to its assignment strategy."""
    if source is CaptionSource.FHL:
        return assign_fhl(image_id, ds)
    if source in MGC_SOURCES:
        return assign_mgc(image_id, source, ds)
    anchor = MHL_ANCHOR_TIERS[source]
    mode = "minimize" if source is CaptionSource.INV_MHL_TF else "maximize"
    return assign_mhl(image_id, anchor, ds, mode=mode)


@dataclass(frozen=True)
class PromptTemplate:
    """Marker strings for rendering a demonstration sequence.

    ``cue`` is the generation prefix after the query image marker, given
    as its token pieces (at least two; the last two are the query set).
    """

    bos: str = "<BOS>"
    image: str = "<image>"
    delimiter: str = "<endofchunk>"
    cue: tuple[str, ...] = ("Output", ":")

    def __post_init__(self):
        for name in ("bos", "image", "delimiter"):
            if not getattr(self, name):
                raise DataError(f"template field {name} must be non-empty")
        if len(self.cue) < 2 or any(not piece for piece in self.cue):
            raise DataError("template cue needs at least two non-empty pieces")

    @property
    def cue_text(self) -> str:
        return "".join(self.cue)


@dataclass(frozen=True)
class LayoutItem:
    """One abstract token of the rendered prompt."""

    role: Role
    ice_index: int | None
    text: str


@dataclass(frozen=True)
class DemoSequence:
    """Ordered demonstrations plus the query image."""

    ices: tuple[tuple[str, str, CaptionSource], ...]  # (image_id, caption, source)
    query_image_id: str
    prompt: str
    layout: tuple[LayoutItem, ...]

    @property
    def shot_count(self) -> int:
        return len(self.ices)

    def segmentation(self) -> TokenSegmentation:
        return TokenSegmentation(
            tuple(item.role for item in self.layout),
            tuple(item.ice_index for item in self.layout),
        )


def normalize_caption(caption: str) -> str:
    """Strip outer whitespace and guarantee exactly one terminal period."""
    text = caption.strip()
    text = text.rstrip(".").rstrip()
    if not text:
        raise DataError("caption is empty after normalization")
    return text + "."


def build_sequence(
    ices: list[tuple[str, str, CaptionSource]],
    query_image_id: str,
    template: PromptTemplate | None = None,
) -> DemoSequence:
    """Assemble the rendered prompt and its abstract role layout.

    Each demonstration renders as image marker + caption (ending in one
    period) + delimiter; the query renders as image marker + cue. The
    layout lists one item per abstract token so an exporter can map
    roles onto a real tokenizer.
    """
    template = template or PromptTemplate()
    if not ices:
        raise DataError("demonstration list is empty")
    if any(image_id == query_image_id for image_id, _, _ in ices):
        raise DataError(f"query image {query_image_id!r} appears among the demonstrations")

    parts: list[str] = [template.bos]
    layout: list[LayoutItem] = [LayoutItem(Role.BOS, None, template.bos)]
    normalized: list[tuple[str, str, CaptionSource]] = []
    for k, (image_id, caption, source) in enumerate(ices):
        text = normalize_caption(caption)
        normalized.append((image_id, text, source))
        words = text[:-1].split()
        if not words:
            raise DataError(f"demonstration {k} has an empty caption")
        parts += [template.image, text, template.delimiter]
        layout.append(LayoutItem(Role.IMAGE_MARK, k, template.image))
        layout += [LayoutItem(Role.CONTEXT_TEXT, k, w) for w in words]
        layout.append(LayoutItem(Role.PERIOD, k, "."))
        layout.append(LayoutItem(Role.DELIM, k, template.delimiter))
    parts += [template.image, template.cue_text]
    layout.append(LayoutItem(Role.IMAGE_MARK, None, template.image))
    layout += [LayoutItem(Role.QUERY, None, piece) for piece in template.cue]

    return DemoSequence(
        ices=tuple(normalized),
        query_image_id=query_image_id,
        prompt="".join(parts),
        layout=tuple(layout),
    )
