"""Multi-scale patch geometry and patch-set matching.

Level ``l`` contributes an l x l grid of square-fraction patches of side
2/(l+1) with stride 1/(l+1), so the grid spans the image edge to edge;
even levels add one more patch of the same size at the image center.
Coordinates are fractions of the image width and height.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DataValidationError
from .features import FeatureSet
from .retrieval import RankedList, map_queries

CENTER = "C"
PATCH_ID_SEP = "#"


@dataclass(frozen=True)
class PatchSpec:
    level: int
    row: int | None   # None for the extra center patch
    col: int | None
    x: float
    y: float
    w: float
    h: float

    @property
    def is_center(self) -> bool:
        return self.row is None

    def to_tsv(self) -> str:
        row = CENTER if self.is_center else str(self.row)
        col = CENTER if self.is_center else str(self.col)
        coords = "\t".join(f"{v:.9g}" for v in (self.x, self.y, self.w, self.h))
        return f"{self.level}\t{row}\t{col}\t{coords}"


@dataclass(frozen=True)
class PatchPlan:
    levels: int
    patches: tuple

    def __len__(self):
        return len(self.patches)

    def to_tsv(self) -> str:
        return "".join(p.to_tsv() + "\n" for p in self.patches)


def _check_levels(h):
    if int(h) != h or h < 1:
        raise DataValidationError(f"number of levels must be a positive integer, got {h}")


def patch_count(h: int) -> int:
    _check_levels(h)
    return sum(l * l + (l % 2 == 0) for l in range(1, h + 1))


def patch_plan(h: int) -> PatchPlan:
    """Patches in level-major, row-major order, center patch last within its level."""
    _check_levels(h)
    patches = []
    for l in range(1, h + 1):
        side = 2.0 / (l + 1)
        for r in range(l):
            for c in range(l):
                patches.append(PatchSpec(l, r, c, c / (l + 1), r / (l + 1), side, side))
        if l % 2 == 0:
            offset = 0.5 - side / 2
            patches.append(PatchSpec(l, None, None, offset, offset, side, side))
    return PatchPlan(h, tuple(patches))


@dataclass(frozen=True)
class PatchFeatureSet:
    """Per-patch descriptors of one image, one row per patch of its plan."""

    image_id: str
    features: np.ndarray

    def __post_init__(self):
        feats = np.array(self.features, dtype=np.float64, ndmin=2)
        if feats.ndim != 2 or feats.shape[0] == 0:
            raise DataValidationError(f"image {self.image_id!r} has no patch features")
        feats.setflags(write=False)
        object.__setattr__(self, "features", feats)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def __len__(self):
        return self.features.shape[0]


def patch_id(image_id: str, index: int) -> str:
    return f"{image_id}{PATCH_ID_SEP}{index}"


def group_patches(features: FeatureSet, levels: int | None = None) -> list:
    """Split a feature set keyed ``<image-id>#<patch-index>`` into PatchFeatureSets.

    Images keep the order of their first patch in the file. Patch indices
    of each image must be exactly 0..P-1; with ``levels`` given, P must
    equal ``patch_count(levels)``.
    """
    groups: dict = {}
    for pos, item_id in enumerate(features.ids):
        image_id, sep, index = item_id.rpartition(PATCH_ID_SEP)
        if not sep or not image_id or not index.isdigit():
            raise DataValidationError(
                f"patch id {item_id!r} is not of the form <image-id>#<index>", record=pos + 1)
        groups.setdefault(image_id, {})[int(index)] = pos
    expected = patch_count(levels) if levels is not None else None
    out = []
    for image_id, by_index in groups.items():
        n = len(by_index)
        if sorted(by_index) != list(range(n)):
            raise DataValidationError(f"image {image_id!r} has non-contiguous patch indices")
        if expected is not None and n != expected:
            raise DataValidationError(
                f"image {image_id!r} has {n} patches, a {levels}-level plan has {expected}")
        rows = [by_index[i] for i in range(n)]
        out.append(PatchFeatureSet(image_id, features.matrix[rows]))
    return out


def flatten_patches(sets: Iterable[PatchFeatureSet]) -> FeatureSet:
    ids, rows = [], []
    for ps in sets:
        for i, row in enumerate(ps.features):
            ids.append(patch_id(ps.image_id, i))
            rows.append(row)
    return FeatureSet(ids, np.array(rows))


def spatial_distance(q: PatchFeatureSet, r: PatchFeatureSet) -> float:
    """Mean over query patches of the distance to the closest reference patch.

    Not symmetric: roles of query and reference are fixed.
    """
    if q.dim != r.dim:
        raise DataValidationError(f"dimension mismatch: query {q.dim}, reference {r.dim}")
    diff = q.features[:, None, :] - r.features[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    return float(np.mean(np.min(dist, axis=1)))


def spatial_rank(q: PatchFeatureSet, refs: Sequence[PatchFeatureSet],
                 exclude: Iterable[str] | None = None) -> RankedList:
    exclude = set(exclude) if exclude else set()
    refs = [r for r in refs if r.image_id not in exclude]
    if not refs:
        raise DataValidationError("empty reference collection")
    scores = [spatial_distance(q, r) for r in refs]
    return RankedList.from_scores(q.image_id, [r.image_id for r in refs], scores)


def spatial_rank_all(queries: Sequence[PatchFeatureSet], refs: Sequence[PatchFeatureSet],
                     exclude_self: bool = False, workers: int = 1) -> list:
    ids = [r.image_id for r in refs]
    if len(set(ids)) != len(ids):
        raise DataValidationError("duplicate reference image ids")

    def one(q):
        return spatial_rank(q, refs, {q.image_id} if exclude_self else None)

    return map_queries(one, list(queries), workers)
