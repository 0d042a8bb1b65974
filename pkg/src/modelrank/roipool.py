"""Bbox-aligned feature construction from per-image spatial feature maps.

A detection FeatureSet is built by average-pooling each ground-truth box
region out of its image's C x H x W feature map, one row per box. Map
bundles live on disk as one raw float32 tensor per image plus a JSON
manifest; annotations are line-delimited text:

    image_id class_id cx cy w h
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .store import ChecksumError, FeatureSet, StoreFormatError, fnv1a_64

MAPS_MANIFEST_FILE = "maps_manifest.json"
MAPS_FORMAT_VERSION = 1

_IMAGE_ID_RE = re.compile(r"^[A-Za-z0-9._-]+$")


@dataclass(frozen=True)
class SpatialFeatureMap:
    """One image's C x H x W feature tensor plus its pixel dimensions."""

    tensor: np.ndarray
    image_id: str
    image_height: int
    image_width: int

    def __post_init__(self):
        tensor = np.ascontiguousarray(np.asarray(self.tensor), dtype=np.float32)
        if tensor.ndim != 3:
            raise ValueError(
                f"feature map for '{self.image_id}' must be 3-D (C, H, W), "
                f"found shape {tensor.shape}")
        if min(tensor.shape) < 1:
            raise ValueError(
                f"feature map for '{self.image_id}' has an empty dimension: "
                f"{tensor.shape}")
        if not np.isfinite(tensor).all():
            raise ValueError(
                f"feature map for '{self.image_id}' contains NaN/Inf")
        if self.image_height < 1 or self.image_width < 1:
            raise ValueError(
                f"image dimensions for '{self.image_id}' must be positive")
        tensor.flags.writeable = False
        object.__setattr__(self, "tensor", tensor)

    @property
    def channels(self) -> int:
        return int(self.tensor.shape[0])


@dataclass(frozen=True)
class BoxAnnotation:
    """One ground-truth box: image id, class id, normalized (cx, cy, w, h)."""

    image_id: str
    class_id: int
    box: tuple[float, float, float, float]

    def __post_init__(self):
        cx, cy, w, h = (float(v) for v in self.box)
        if self.class_id < 0:
            raise ValueError(f"class_id must be non-negative, found {self.class_id}")
        if not (0.0 <= cx <= 1.0 and 0.0 <= cy <= 1.0):
            raise ValueError(f"box center ({cx}, {cy}) outside [0, 1]")
        if not (0.0 < w <= 1.0 and 0.0 < h <= 1.0):
            raise ValueError(f"box size ({w}, {h}) outside (0, 1]")
        object.__setattr__(self, "box", (cx, cy, w, h))

    def clamped_box(self) -> tuple[float, float, float, float]:
        """The effective (cx, cy, w, h) after clamping corners to the image."""
        cx, cy, w, h = self.box
        x0 = min(max(cx - w / 2.0, 0.0), 1.0)
        x1 = min(max(cx + w / 2.0, 0.0), 1.0)
        y0 = min(max(cy - h / 2.0, 0.0), 1.0)
        y1 = min(max(cy + h / 2.0, 0.0), 1.0)
        return ((x0 + x1) / 2.0, (y0 + y1) / 2.0, x1 - x0, y1 - y0)


def _cell_span(lo: float, hi: float, n_cells: int) -> tuple[int, int]:
    # A cell belongs to the pooled region iff its center lies inside the
    # scaled interval; a box thinner than one cell falls back to the single
    # cell containing the box center.
    first = max(math.ceil(lo - 0.5), 0)
    last = min(math.floor(hi - 0.5), n_cells - 1)
    if first > last:
        center = min(max(math.floor((lo + hi) / 2.0), 0), n_cells - 1)
        return center, center
    return first, last


def pool_box(fmap: SpatialFeatureMap, box) -> np.ndarray:
    """Channel-wise mean of the map region covered by a normalized box."""
    cx, cy, w, h = (float(v) for v in box)
    if not (0.0 <= cx <= 1.0 and 0.0 <= cy <= 1.0 and 0.0 < w <= 1.0
            and 0.0 < h <= 1.0):
        raise ValueError(f"box ({cx}, {cy}, {w}, {h}) violates invariants")
    _, height, width = fmap.tensor.shape
    x0 = min(max(cx - w / 2.0, 0.0), 1.0) * width
    x1 = min(max(cx + w / 2.0, 0.0), 1.0) * width
    y0 = min(max(cy - h / 2.0, 0.0), 1.0) * height
    y1 = min(max(cy + h / 2.0, 0.0), 1.0) * height
    c0, c1 = _cell_span(x0, x1, width)
    r0, r1 = _cell_span(y0, y1, height)
    region = fmap.tensor[:, r0:r1 + 1, c0:c1 + 1].astype(np.float64)
    return region.mean(axis=(1, 2))


def construct_detection_features(maps, annotations, model_id: str,
                                 dataset_id: str) -> FeatureSet:
    """Pool every annotated box into one feature row.

    Rows are ordered by (image_id lexicographic, annotation order within
    image), so the output is independent of the iteration order of either
    input collection.
    """
    maps_by_id: dict[str, SpatialFeatureMap] = {}
    for fmap in maps:
        if fmap.image_id in maps_by_id:
            raise ValueError(f"duplicate feature map for image '{fmap.image_id}'")
        maps_by_id[fmap.image_id] = fmap

    channel_counts = {fmap.channels for fmap in maps_by_id.values()}
    if len(channel_counts) > 1:
        raise ValueError(
            f"inconsistent channel count across maps: {sorted(channel_counts)}")

    grouped: dict[str, list[BoxAnnotation]] = {}
    for ann in annotations:
        if ann.image_id not in maps_by_id:
            raise ValueError(
                f"annotation references missing image '{ann.image_id}'")
        grouped.setdefault(ann.image_id, []).append(ann)
    if not grouped:
        raise ValueError("no samples: annotation collection is empty")

    rows: list[np.ndarray] = []
    labels: list[int] = []
    boxes: list[tuple[float, float, float, float]] = []
    for image_id in sorted(grouped):
        fmap = maps_by_id[image_id]
        for ann in grouped[image_id]:
            rows.append(pool_box(fmap, ann.box))
            labels.append(int(ann.class_id))
            boxes.append(ann.clamped_box())

    return FeatureSet(
        features=np.asarray(rows, dtype=np.float32),
        labels=np.asarray(labels, dtype=np.int32),
        class_count=max(labels) + 1,
        model_id=model_id,
        dataset_id=dataset_id,
        boxes=np.asarray(boxes, dtype=np.float32),
    )


def read_annotations(path) -> list[BoxAnnotation]:
    """Parse `image_id class_id cx cy w h` lines; blank lines are skipped."""
    annotations: list[BoxAnnotation] = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 6:
            raise ValueError(
                f"annotation line {lineno}: expected 6 fields, found {len(fields)}")
        try:
            ann = BoxAnnotation(
                image_id=fields[0],
                class_id=int(fields[1]),
                box=tuple(float(v) for v in fields[2:6]),
            )
        except ValueError as exc:
            raise ValueError(f"annotation line {lineno}: {exc}") from exc
        annotations.append(ann)
    return annotations


def write_annotations(annotations, path) -> None:
    lines = [
        " ".join([ann.image_id, str(int(ann.class_id))]
                 + [repr(float(v)) for v in ann.box])
        for ann in annotations
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""),
                          encoding="utf-8")


def _map_file_name(image_id: str) -> str:
    if not _IMAGE_ID_RE.match(image_id):
        raise ValueError(
            f"image_id '{image_id}' not usable as a file name "
            f"(allowed: letters, digits, '.', '_', '-')")
    return f"feat_{image_id}.f32"


def write_spatial_maps(maps, directory, model_id: str = "",
                       dataset_id: str = "") -> dict:
    """Write one raw float32 tensor per image plus the maps manifest."""
    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)

    by_id: dict[str, SpatialFeatureMap] = {}
    for fmap in maps:
        if fmap.image_id in by_id:
            raise ValueError(f"duplicate feature map for image '{fmap.image_id}'")
        by_id[fmap.image_id] = fmap

    entries = []
    checksums = {}
    for image_id in sorted(by_id):
        fmap = by_id[image_id]
        name = _map_file_name(image_id)
        data = np.ascontiguousarray(fmap.tensor, dtype="<f4").tobytes(order="C")
        (path / name).write_bytes(data)
        checksums[name] = fnv1a_64(data)
        entries.append({
            "image_id": image_id,
            "file": name,
            "shape": list(fmap.tensor.shape),
            "image_height": int(fmap.image_height),
            "image_width": int(fmap.image_width),
        })
    doc = {
        "format_version": MAPS_FORMAT_VERSION,
        "model_id": model_id,
        "dataset_id": dataset_id,
        "maps": entries,
        "checksums": checksums,
    }
    (path / MAPS_MANIFEST_FILE).write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return doc


def read_spatial_maps(directory) -> list[SpatialFeatureMap]:
    """Load every map in a bundle, checksum-verified, ordered by image_id."""
    path = Path(directory)
    manifest_path = path / MAPS_MANIFEST_FILE
    if not manifest_path.is_file():
        raise StoreFormatError(f"maps manifest missing: {manifest_path}")
    try:
        doc = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise StoreFormatError(f"maps manifest is not valid JSON: {exc}") from exc
    version = doc.get("format_version")
    if version != MAPS_FORMAT_VERSION:
        raise StoreFormatError(
            f"unknown maps format_version {version} "
            f"(supported: {MAPS_FORMAT_VERSION})")

    maps: list[SpatialFeatureMap] = []
    checksums = doc.get("checksums", {})
    for entry in doc.get("maps", []):
        try:
            image_id = str(entry["image_id"])
            name = str(entry["file"])
            shape = tuple(int(d) for d in entry["shape"])
            image_height = int(entry["image_height"])
            image_width = int(entry["image_width"])
        except (KeyError, TypeError, ValueError) as exc:
            raise StoreFormatError(f"maps manifest entry malformed: {exc}") from exc
        if len(shape) != 3:
            raise StoreFormatError(
                f"map '{image_id}' shape must have 3 dims, found {shape}")
        file_path = path / name
        if not file_path.is_file():
            raise StoreFormatError(f"missing file: {file_path}")
        data = file_path.read_bytes()
        n_expected = int(np.prod(shape, dtype=np.int64)) * 4
        if len(data) != n_expected:
            raise StoreFormatError(
                f"byte-length mismatch for {name}: expected {n_expected}, "
                f"found {len(data)}")
        recorded = checksums.get(name)
        actual = fnv1a_64(data)
        if recorded != actual:
            raise ChecksumError(
                f"checksum mismatch for {name}: manifest {recorded}, "
                f"file {actual}")
        tensor = np.frombuffer(data, dtype="<f4").reshape(shape)
        maps.append(SpatialFeatureMap(tensor=tensor, image_id=image_id,
                                      image_height=image_height,
                                      image_width=image_width))
    return maps
