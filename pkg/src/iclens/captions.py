"""Caption datasets: human annotations, machine captions by tier, objects."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .errors import DataError
from ._util import load_json


class CaptionSource(str, enum.Enum):
    """Where a demonstration caption comes from."""

    FHL = "fhl"
    MGC_TF_60 = "mgc_tf_60"
    MGC_TF_80 = "mgc_tf_80"
    MGC_TF_135 = "mgc_tf_135"
    MGC_LMM_0 = "mgc_lmm_0"
    MGC_LMM_32 = "mgc_lmm_32"
    MHL_TF = "mhl_tf"
    MHL_LMM = "mhl_lmm"
    INV_MHL_TF = "inv_mhl_tf"


MGC_SOURCES = frozenset(
    {
        CaptionSource.MGC_TF_60,
        CaptionSource.MGC_TF_80,
        CaptionSource.MGC_TF_135,
        CaptionSource.MGC_LMM_0,
        CaptionSource.MGC_LMM_32,
    }
)

# machine tier each guided-selection strategy anchors on
MHL_ANCHOR_TIERS = {
    CaptionSource.MHL_TF: CaptionSource.MGC_TF_135,
    CaptionSource.MHL_LMM: CaptionSource.MGC_LMM_32,
    CaptionSource.INV_MHL_TF: CaptionSource.MGC_TF_135,
}


@dataclass(frozen=True)
class ImageEntry:
    image_id: str
    human_captions: tuple[str, ...]
    machine_captions: dict[CaptionSource, str] = field(default_factory=dict)
    gt_objects: frozenset[str] | None = None


@dataclass(frozen=True)
class CaptionDataset:
    images: dict[str, ImageEntry]

    def __contains__(self, image_id: str) -> bool:
        return image_id in self.images

    def entry(self, image_id: str) -> ImageEntry:
        if image_id not in self.images:
            raise DataError(f"unknown image id {image_id!r}")
        return self.images[image_id]

    def human_captions(self, image_id: str) -> tuple[str, ...]:
        caps = self.entry(image_id).human_captions
        if not caps:
            raise DataError(f"image {image_id!r} has no human captions")
        return caps

    def machine_caption(self, image_id: str, tier: CaptionSource) -> str:
        entry = self.entry(image_id)
        if tier not in entry.machine_captions:
            raise DataError(f"image {image_id!r} has no machine caption for tier {tier.value}")
        return entry.machine_captions[tier]

    def gt_objects(self, image_id: str) -> frozenset[str]:
        objs = self.entry(image_id).gt_objects
        if objs is None:
            raise DataError(f"image {image_id!r} has no ground-truth object set")
        return objs


def load_caption_dataset(path) -> CaptionDataset:
    """Load ``{"images": [{id, human_captions, machine_captions, gt_objects}]}``."""
    obj = load_json(path, "caption dataset")
    if not isinstance(obj, dict) or not isinstance(obj.get("images"), list):
        raise DataError(f"caption dataset {path} must hold an 'images' array")
    images: dict[str, ImageEntry] = {}
    for rec in obj["images"]:
        if not isinstance(rec, dict) or "id" not in rec:
            raise DataError("caption dataset entries need an 'id' field")
        image_id = str(rec["id"])
        if image_id in images:
            raise DataError(f"duplicate image id {image_id!r}")
        humans = tuple(str(c) for c in rec.get("human_captions", []))
        machines: dict[CaptionSource, str] = {}
        for tier, text in (rec.get("machine_captions") or {}).items():
            try:
                source = CaptionSource(tier)
            except ValueError:
                raise DataError(f"image {image_id!r}: unknown caption tier {tier!r}")
            if source not in MGC_SOURCES:
                raise DataError(f"image {image_id!r}: tier {tier!r} is not a machine tier")
            machines[source] = str(text)
        gt = rec.get("gt_objects")
        images[image_id] = ImageEntry(
            image_id=image_id,
            human_captions=humans,
            machine_captions=machines,
            gt_objects=None if gt is None else frozenset(str(o) for o in gt),
        )
    return CaptionDataset(images=images)
