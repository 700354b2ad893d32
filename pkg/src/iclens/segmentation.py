"""Per-token role labels and the derived anchor / context / query sets."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import DataError
from ._util import load_json, write_json


class Role(str, enum.Enum):
    BOS = "bos"
    IMAGE_MARK = "image_mark"
    CONTEXT_TEXT = "context_text"
    PERIOD = "period"
    DELIM = "delim"
    QUERY = "query"


ANCHOR_ROLES = frozenset({Role.BOS, Role.IMAGE_MARK, Role.PERIOD, Role.DELIM})

# roles that must carry an ice_index when inside a demonstration
_ICE_ONLY_ROLES = frozenset({Role.CONTEXT_TEXT, Role.PERIOD, Role.DELIM})


@dataclass(frozen=True)
class TokenSegmentation:
    """Role and demonstration membership for every position of a sequence.

    Derived sets follow the usual reading: anchors are BOS, image markers,
    terminal periods and delimiters; the query set is exactly the last two
    positions; context is every demonstration token that is not an anchor.
    """

    roles: tuple[Role, ...]
    ice_indices: tuple[int | None, ...]

    def __post_init__(self):
        n = len(self.roles)
        if n != len(self.ice_indices):
            raise DataError("roles and ice_indices length mismatch")
        if n < 2:
            raise DataError("segmentation needs at least two tokens")
        if self.roles[-1] is not Role.QUERY or self.roles[-2] is not Role.QUERY:
            raise DataError("the last two tokens must carry the query role")
        for i, (role, ice) in enumerate(zip(self.roles, self.ice_indices)):
            if role in (Role.BOS, Role.QUERY) and ice is not None:
                raise DataError(f"token {i}: role {role.value} cannot belong to an ICE")
            if role in _ICE_ONLY_ROLES and ice is None:
                raise DataError(f"token {i}: role {role.value} requires an ice_index")
            if ice is not None and ice < 0:
                raise DataError(f"token {i}: negative ice_index")
        # ICE index ranges must be contiguous and in order
        by_ice: dict[int, list[int]] = {}
        for i, ice in enumerate(self.ice_indices):
            if ice is not None:
                by_ice.setdefault(ice, []).append(i)
        if by_ice and sorted(by_ice) != list(range(len(by_ice))):
            raise DataError(f"ICE indices must be 0..{len(by_ice) - 1}, got {sorted(by_ice)}")
        prev_end = -1
        for k in sorted(by_ice):
            pos = by_ice[k]
            if pos[-1] - pos[0] + 1 != len(pos):
                raise DataError(f"ICE {k} occupies non-contiguous positions")
            if pos[0] <= prev_end:
                raise DataError(f"ICE {k} overlaps or precedes ICE {k - 1}")
            prev_end = pos[-1]

    def __len__(self) -> int:
        return len(self.roles)

    @property
    def n_ices(self) -> int:
        return len({i for i in self.ice_indices if i is not None})

    @property
    def anchor_set(self) -> tuple[int, ...]:
        return tuple(i for i, r in enumerate(self.roles) if r in ANCHOR_ROLES)

    @property
    def query_set(self) -> tuple[int, ...]:
        return (len(self.roles) - 2, len(self.roles) - 1)

    @property
    def context_set(self) -> tuple[int, ...]:
        return tuple(
            i
            for i, (r, ice) in enumerate(zip(self.roles, self.ice_indices))
            if ice is not None and r not in ANCHOR_ROLES
        )

    def ice_tokens(self, k: int) -> tuple[int, ...]:
        """All positions of ICE ``k``, anchors included."""
        return tuple(i for i, ice in enumerate(self.ice_indices) if ice == k)

    def ice_context_tokens(self, k: int) -> tuple[int, ...]:
        """Context positions of ICE ``k`` (anchors excluded)."""
        return tuple(
            i
            for i, (r, ice) in enumerate(zip(self.roles, self.ice_indices))
            if ice == k and r not in ANCHOR_ROLES
        )

    def to_records(self) -> list[dict]:
        return [
            {"index": i, "role": r.value, "ice_index": ice}
            for i, (r, ice) in enumerate(zip(self.roles, self.ice_indices))
        ]

    @classmethod
    def from_records(cls, records: list[dict]) -> "TokenSegmentation":
        roles: list[Role] = []
        ices: list[int | None] = []
        for pos, rec in enumerate(records):
            if not isinstance(rec, dict):
                raise DataError(f"segmentation record {pos} is not an object")
            if rec.get("index") != pos:
                raise DataError(f"segmentation record {pos} has index {rec.get('index')}")
            try:
                roles.append(Role(rec["role"]))
            except (KeyError, ValueError):
                raise DataError(f"segmentation record {pos}: unknown role {rec.get('role')!r}")
            ices.append(rec.get("ice_index"))
        return cls(tuple(roles), tuple(ices))


def load_segmentation(path) -> TokenSegmentation:
    records = load_json(path, "segmentation file")
    if not isinstance(records, list):
        raise DataError(f"segmentation file {path} must hold a JSON array")
    return TokenSegmentation.from_records(records)


def save_segmentation(seg: TokenSegmentation, path) -> None:
    write_json(path, seg.to_records())


def canonical_segmentation(
    n_ices: int, context_per_ice: int = 1, cue_len: int = 2
) -> TokenSegmentation:
    """Standard layout: BOS, then per ICE [image, context.., period, delim],
    then the query image marker and ``cue_len`` query tokens."""
    if n_ices < 1 or context_per_ice < 1 or cue_len < 2:
        raise DataError("canonical segmentation needs n_ices>=1, context>=1, cue>=2")
    roles: list[Role] = [Role.BOS]
    ices: list[int | None] = [None]
    for k in range(n_ices):
        roles += [Role.IMAGE_MARK] + [Role.CONTEXT_TEXT] * context_per_ice
        roles += [Role.PERIOD, Role.DELIM]
        ices += [k] * (context_per_ice + 3)
    roles += [Role.IMAGE_MARK] + [Role.QUERY] * cue_len
    ices += [None] * (cue_len + 1)
    return TokenSegmentation(tuple(roles), tuple(ices))
