"""Writers for the feature-store and spatial-map bundle formats.

Deliberately self-contained: featdump only promises to emit the on-disk
formats, so the scoring side can verify conformance against bytes rather
than against shared code.

Store directory:

    manifest.json   format_version, model_id, dataset_id, k, h, c,
                    has_boxes, files[{name, dtype, shape}],
                    checksums{name -> 16-hex FNV-1a 64 of raw bytes}
    features.f32    K*h float32, little-endian, row-major
    labels.i32      K int32, little-endian

Map bundle directory:

    maps_manifest.json   format_version, model_id, dataset_id,
                         maps[{image_id, file, shape, image_height,
                         image_width}], checksums
    feat_<image_id>.f32  C*H*W float32 per image
    annotations.txt      "image_id class_id cx cy w h" lines
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
MAPS_FORMAT_VERSION = 1

MANIFEST_FILE = "manifest.json"
FEATURES_FILE = "features.f32"
LABELS_FILE = "labels.i32"
MAPS_MANIFEST_FILE = "maps_manifest.json"
ANNOTATIONS_FILE = "annotations.txt"

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a_64(data: bytes) -> str:
    """FNV-1a 64-bit hash of raw bytes as a 16-digit hex string."""
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return f"{h:016x}"


def _dump_json(doc: dict, path: Path) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def write_store(features: np.ndarray, labels: np.ndarray, class_count: int,
                model_id: str, dataset_id: str, directory) -> Path:
    """Write a classification feature store; returns the directory path."""
    feats = np.ascontiguousarray(features, dtype="<f4")
    labs = np.ascontiguousarray(labels, dtype="<i4")
    if feats.ndim != 2:
        raise ValueError(f"features must be 2-D, found shape {feats.shape}")
    k, h = feats.shape
    if labs.shape != (k,):
        raise ValueError(f"labels must be a length-{k} vector, "
                         f"found shape {labs.shape}")

    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)
    payloads = [
        (FEATURES_FILE, "<f4", [k, h], feats.tobytes(order="C")),
        (LABELS_FILE, "<i4", [k], labs.tobytes(order="C")),
    ]
    for name, _, _, data in payloads:
        (path / name).write_bytes(data)
    _dump_json({
        "format_version": FORMAT_VERSION,
        "model_id": model_id,
        "dataset_id": dataset_id,
        "k": k,
        "h": h,
        "c": int(class_count),
        "has_boxes": False,
        "files": [{"name": name, "dtype": dtype, "shape": shape}
                  for name, dtype, shape, _ in payloads],
        "checksums": {name: fnv1a_64(data) for name, _, _, data in payloads},
    }, path / MANIFEST_FILE)
    return path


def write_map_bundle(maps, model_id: str, dataset_id: str, directory) -> Path:
    """Write per-image (image_id, CxHxW float32, height, width) map files."""
    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)

    entries = []
    checksums = {}
    for image_id, tensor, height, width in sorted(maps, key=lambda m: m[0]):
        arr = np.ascontiguousarray(tensor, dtype="<f4")
        if arr.ndim != 3:
            raise ValueError(f"map for '{image_id}' must be 3-D (C, H, W), "
                             f"found shape {arr.shape}")
        name = f"feat_{image_id}.f32"
        data = arr.tobytes(order="C")
        (path / name).write_bytes(data)
        checksums[name] = fnv1a_64(data)
        entries.append({
            "image_id": image_id,
            "file": name,
            "shape": list(arr.shape),
            "image_height": int(height),
            "image_width": int(width),
        })
    _dump_json({
        "format_version": MAPS_FORMAT_VERSION,
        "model_id": model_id,
        "dataset_id": dataset_id,
        "maps": entries,
        "checksums": checksums,
    }, path / MAPS_MANIFEST_FILE)
    return path


def write_annotation_lines(annotations, path) -> None:
    """Write `image_id class_id cx cy w h` lines (repr floats, one per box)."""
    lines = [
        " ".join([ann.image_id, str(int(ann.class_id))]
                 + [repr(float(v)) for v in ann.box])
        for ann in annotations
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""),
                          encoding="utf-8")
