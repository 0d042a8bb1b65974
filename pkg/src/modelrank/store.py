"""Portable on-disk feature-set store.

Directory layout:

    manifest.json   UTF-8 JSON; fields: format_version, model_id, dataset_id,
                    k, h, c, has_boxes, files[{name, dtype, shape}],
                    checksums{name -> 16-hex-digit FNV-1a 64 of raw bytes}
    features.f32    K*h float32, little-endian, row-major, no header
    labels.i32      K int32, little-endian
    boxes.f32       K*4 float32, optional (normalized cx, cy, w, h)

Tensors are stored in 32-bit precision (network activations are natively
float32); all score arithmetic upcasts to float64 after load.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1

MANIFEST_FILE = "manifest.json"
FEATURES_FILE = "features.f32"
LABELS_FILE = "labels.i32"
BOXES_FILE = "boxes.f32"

FLOAT_DTYPE = "<f4"
INT_DTYPE = "<i4"

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


class FeatureStoreError(Exception):
    """Base class for feature-store failures."""


class InvalidFeatureSetError(FeatureStoreError):
    """A FeatureSet violated its invariants; carries the validation report."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = list(violations)


class StoreFormatError(FeatureStoreError):
    """Manifest or tensor files are missing, malformed, or inconsistent."""


class ChecksumError(StoreFormatError):
    """Tensor bytes do not hash to the checksum recorded in the manifest."""


def fnv1a_64(data: bytes) -> str:
    """FNV-1a 64-bit hash of raw bytes as a 16-digit hex string."""
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return f"{h:016x}"


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.ascontiguousarray(np.asarray(values), dtype=dtype)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class FeatureSet:
    """K x h feature matrix with labels and optional bbox targets.

    One FeatureSet holds everything a score needs for one (model, dataset)
    pair. Arrays are coerced to the storage dtypes (float32 / int32) and
    frozen, so instances are safe to share across threads. Semantic
    invariants (finiteness, label ranges, box ranges, K >= 2) are checked
    by validate_feature_set, not by the constructor, so that invalid sets
    can be constructed and reported on.
    """

    features: np.ndarray
    labels: np.ndarray
    class_count: int
    model_id: str
    dataset_id: str
    boxes: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "features", _frozen_array(self.features, np.float32))
        object.__setattr__(self, "labels", _frozen_array(self.labels, np.int32))
        if self.boxes is not None:
            object.__setattr__(self, "boxes", _frozen_array(self.boxes, np.float32))

    @property
    def k(self) -> int:
        return int(self.features.shape[0]) if self.features.ndim >= 1 else 0

    @property
    def h(self) -> int:
        return int(self.features.shape[1]) if self.features.ndim == 2 else 0

    @property
    def has_boxes(self) -> bool:
        return self.boxes is not None


@dataclass(frozen=True)
class TensorSpec:
    name: str
    dtype: str
    shape: tuple[int, ...]


@dataclass(frozen=True)
class Manifest:
    format_version: int
    model_id: str
    dataset_id: str
    k: int
    h: int
    c: int
    has_boxes: bool
    files: tuple[TensorSpec, ...]
    checksums: dict[str, str] = field(default_factory=dict)

    def to_json(self) -> str:
        doc = {
            "format_version": self.format_version,
            "model_id": self.model_id,
            "dataset_id": self.dataset_id,
            "k": self.k,
            "h": self.h,
            "c": self.c,
            "has_boxes": self.has_boxes,
            "files": [
                {"name": t.name, "dtype": t.dtype, "shape": list(t.shape)}
                for t in self.files
            ],
            "checksums": dict(sorted(self.checksums.items())),
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Manifest":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise StoreFormatError(f"manifest is not valid JSON: {exc}") from exc
        required = ("format_version", "model_id", "dataset_id", "k", "h", "c",
                    "has_boxes", "files", "checksums")
        missing = [key for key in required if key not in doc]
        if missing:
            raise StoreFormatError(f"manifest missing fields: {', '.join(missing)}")
        try:
            files = tuple(
                TensorSpec(name=str(f["name"]), dtype=str(f["dtype"]),
                           shape=tuple(int(d) for d in f["shape"]))
                for f in doc["files"]
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise StoreFormatError(f"manifest files entry malformed: {exc}") from exc
        return cls(
            format_version=int(doc["format_version"]),
            model_id=str(doc["model_id"]),
            dataset_id=str(doc["dataset_id"]),
            k=int(doc["k"]),
            h=int(doc["h"]),
            c=int(doc["c"]),
            has_boxes=bool(doc["has_boxes"]),
            files=files,
            checksums={str(k): str(v) for k, v in dict(doc["checksums"]).items()},
        )


def validate_feature_set(fs: FeatureSet, require_boxes: bool = False,
                         require_classes: bool = False) -> list[str]:
    """Return the list of invariant violations (empty iff the set is valid).

    require_boxes demands bbox targets; require_classes additionally demands
    C >= 2 with every class index populated (needed by classification scoring).
    """
    violations: list[str] = []
    feats = fs.features
    if feats.ndim != 2:
        violations.append(f"features must be 2-D, found {feats.ndim}-D")
        return violations

    k, h = feats.shape
    if k < 2:
        violations.append(f"K={k}: at least 2 samples required")
    if h < 1:
        violations.append(f"h={h}: at least 1 feature dimension required")
    if feats.size and not np.isfinite(feats).all():
        bad = int(np.argwhere(~np.isfinite(feats))[0][0])
        violations.append(f"features contain NaN/Inf (first at row {bad})")

    labels = fs.labels
    c = fs.class_count
    if labels.ndim != 1 or labels.shape[0] != k:
        violations.append(
            f"labels must be a length-{k} vector, found shape {labels.shape}")
    else:
        if c < 1:
            violations.append(f"class_count={c}: must be >= 1")
        else:
            out = np.where((labels < 0) | (labels >= c))[0]
            if out.size:
                row = int(out[0])
                violations.append(
                    f"label {int(labels[row])} at row {row} outside [0, {c})")
            elif require_classes:
                if c < 2:
                    violations.append(
                        f"class_count={c}: classification scoring needs C >= 2")
                counts = np.bincount(labels, minlength=c)
                empty = np.where(counts == 0)[0]
                if empty.size:
                    violations.append(f"class {int(empty[0])} has no samples")

    if fs.boxes is None:
        if require_boxes:
            violations.append("boxes required but absent")
    else:
        boxes = fs.boxes
        if boxes.ndim != 2 or boxes.shape != (k, 4):
            violations.append(
                f"boxes must have shape ({k}, 4), found {boxes.shape}")
        else:
            if not np.isfinite(boxes).all():
                bad = int(np.argwhere(~np.isfinite(boxes))[0][0])
                violations.append(f"boxes contain NaN/Inf (first at row {bad})")
            else:
                out = np.where((boxes < 0.0) | (boxes > 1.0))[0]
                if out.size:
                    violations.append(
                        f"box entry at row {int(out[0])} outside [0, 1]")
    return violations


def _tensor_bytes(arr: np.ndarray, dtype: str) -> bytes:
    return np.ascontiguousarray(arr, dtype=np.dtype(dtype)).tobytes(order="C")


def write_feature_set(fs: FeatureSet, directory) -> Manifest:
    """Write a valid FeatureSet to directory; rejects invalid sets untouched."""
    violations = validate_feature_set(fs)
    if violations:
        raise InvalidFeatureSetError(violations)

    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)

    payloads: list[tuple[TensorSpec, bytes]] = [
        (TensorSpec(FEATURES_FILE, FLOAT_DTYPE, (fs.k, fs.h)),
         _tensor_bytes(fs.features, FLOAT_DTYPE)),
        (TensorSpec(LABELS_FILE, INT_DTYPE, (fs.k,)),
         _tensor_bytes(fs.labels, INT_DTYPE)),
    ]
    if fs.boxes is not None:
        payloads.append((TensorSpec(BOXES_FILE, FLOAT_DTYPE, (fs.k, 4)),
                         _tensor_bytes(fs.boxes, FLOAT_DTYPE)))

    manifest = Manifest(
        format_version=FORMAT_VERSION,
        model_id=fs.model_id,
        dataset_id=fs.dataset_id,
        k=fs.k,
        h=fs.h,
        c=int(fs.class_count),
        has_boxes=fs.boxes is not None,
        files=tuple(spec for spec, _ in payloads),
        checksums={spec.name: fnv1a_64(data) for spec, data in payloads},
    )
    for spec, data in payloads:
        (path / spec.name).write_bytes(data)
    (path / MANIFEST_FILE).write_text(manifest.to_json(), encoding="utf-8")
    return manifest


_EXPECTED_SHAPES = {
    FEATURES_FILE: lambda m: (m.k, m.h),
    LABELS_FILE: lambda m: (m.k,),
    BOXES_FILE: lambda m: (m.k, 4),
}
_EXPECTED_DTYPES = {
    FEATURES_FILE: FLOAT_DTYPE,
    LABELS_FILE: INT_DTYPE,
    BOXES_FILE: FLOAT_DTYPE,
}


def read_feature_set(directory) -> FeatureSet:
    """Load a FeatureSet bit-identical to the one written."""
    path = Path(directory)
    manifest_path = path / MANIFEST_FILE
    if not manifest_path.is_file():
        raise StoreFormatError(f"manifest missing: {manifest_path}")
    manifest = Manifest.from_json(manifest_path.read_text(encoding="utf-8"))
    if manifest.format_version != FORMAT_VERSION:
        raise StoreFormatError(
            f"unknown format_version {manifest.format_version} "
            f"(supported: {FORMAT_VERSION})")

    names = [spec.name for spec in manifest.files]
    expected = [FEATURES_FILE, LABELS_FILE] + ([BOXES_FILE] if manifest.has_boxes else [])
    if sorted(names) != sorted(expected):
        raise StoreFormatError(
            f"manifest files {names} do not match expected {expected}")

    arrays: dict[str, np.ndarray] = {}
    for spec in manifest.files:
        shape = _EXPECTED_SHAPES[spec.name](manifest)
        if tuple(spec.shape) != shape:
            raise StoreFormatError(
                f"shape mismatch for {spec.name}: manifest declares "
                f"{spec.shape}, header fields imply {shape}")
        if spec.dtype != _EXPECTED_DTYPES[spec.name]:
            raise StoreFormatError(
                f"dtype mismatch for {spec.name}: {spec.dtype}")
        file_path = path / spec.name
        if not file_path.is_file():
            raise StoreFormatError(f"missing file: {file_path}")
        data = file_path.read_bytes()
        n_expected = int(np.prod(shape, dtype=np.int64)) * 4
        if len(data) != n_expected:
            raise StoreFormatError(
                f"byte-length mismatch for {spec.name}: expected "
                f"{n_expected}, found {len(data)}")
        recorded = manifest.checksums.get(spec.name)
        actual = fnv1a_64(data)
        if recorded != actual:
            raise ChecksumError(
                f"checksum mismatch for {spec.name}: manifest {recorded}, "
                f"file {actual}")
        arrays[spec.name] = np.frombuffer(data, dtype=spec.dtype).reshape(shape)

    return FeatureSet(
        features=arrays[FEATURES_FILE],
        labels=arrays[LABELS_FILE],
        class_count=manifest.c,
        model_id=manifest.model_id,
        dataset_id=manifest.dataset_id,
        boxes=arrays.get(BOXES_FILE),
    )
