"""Dataset scanning, deterministic preprocessing, annotation ingestion.

Classification roots are image folders (one subdirectory per class);
detection roots hold `images/` plus `annotations.txt` in the line format
`image_id class_id cx cy w h` with normalized center/size boxes. All
preprocessing is evaluation-mode only: resize and normalize, never
augment, so extraction is deterministic given the files on disk.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp")
INPUT_SIZE = 224

# standard ImageNet evaluation statistics
CHANNEL_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
CHANNEL_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)

# must stay usable as a map file name on the scoring side
_IMAGE_ID_RE = re.compile(r"^[A-Za-z0-9._-]+$")


class DataError(Exception):
    """Dataset root or annotation file is missing, empty, or malformed."""


@dataclass(frozen=True)
class Annotation:
    """One normalized ground-truth box, already clamped to the image."""

    image_id: str
    class_id: int
    box: tuple[float, float, float, float]


def load_image(path) -> tuple[np.ndarray, int, int]:
    """Preprocessed (3, S, S) float32 tensor plus original pixel size."""
    with Image.open(path) as img:
        width, height = img.size
        rgb = img.convert("RGB").resize((INPUT_SIZE, INPUT_SIZE),
                                        Image.BILINEAR)
    arr = np.asarray(rgb, dtype=np.float32) / 255.0
    arr = (arr - CHANNEL_MEAN) / CHANNEL_STD
    return arr.transpose(2, 0, 1), height, width


def _image_files(directory: Path) -> list[Path]:
    return sorted(p for p in directory.iterdir()
                  if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS)


def scan_classification_root(root) -> tuple[list[tuple[Path, int]], list[str]]:
    """(image path, class id) pairs plus sorted class names.

    Class ids follow the sorted subdirectory order, matching the usual
    image-folder convention.
    """
    path = Path(root)
    if not path.is_dir():
        raise DataError(f"dataset root is not a directory: {path}")
    class_dirs = sorted(p for p in path.iterdir() if p.is_dir())
    if not class_dirs:
        raise DataError(f"no class directories under {path}")

    samples: list[tuple[Path, int]] = []
    names: list[str] = []
    for class_id, class_dir in enumerate(class_dirs):
        files = _image_files(class_dir)
        if not files:
            raise DataError(f"class directory '{class_dir.name}' has no images")
        names.append(class_dir.name)
        samples.extend((f, class_id) for f in files)
    return samples, names


def scan_detection_images(root) -> dict[str, Path]:
    """Map image stems to files under <root>/images, stems must be unique."""
    images_dir = Path(root) / "images"
    if not images_dir.is_dir():
        raise DataError(f"missing images directory: {images_dir}")
    files = _image_files(images_dir)
    if not files:
        raise DataError(f"no images under {images_dir}")

    by_stem: dict[str, Path] = {}
    for f in files:
        if not _IMAGE_ID_RE.match(f.stem):
            raise DataError(
                f"image_id '{f.stem}' not usable as a file name "
                f"(allowed: letters, digits, '.', '_', '-')")
        if f.stem in by_stem:
            raise DataError(f"duplicate image stem '{f.stem}'")
        by_stem[f.stem] = f
    return by_stem


def _clamp_box(cx: float, cy: float, w: float, h: float):
    """Clamp corners to [0, 1] and re-derive center/size."""
    x0, x1 = cx - w / 2.0, cx + w / 2.0
    y0, y1 = cy - h / 2.0, cy + h / 2.0
    if 0.0 <= x0 and x1 <= 1.0 and 0.0 <= y0 and y1 <= 1.0:
        # corner round trips drift in the last bit, so a box already
        # inside the image passes through untouched
        return cx, cy, w, h
    x0, x1 = min(max(x0, 0.0), 1.0), min(max(x1, 0.0), 1.0)
    y0, y1 = min(max(y0, 0.0), 1.0), min(max(y1, 0.0), 1.0)
    return (x0 + x1) / 2.0, (y0 + y1) / 2.0, x1 - x0, y1 - y0


def read_detection_annotations(path) -> tuple[list[Annotation], list[str]]:
    """Parse annotation lines, clamping stray boxes; returns clamp log."""
    file_path = Path(path)
    if not file_path.is_file():
        raise DataError(f"missing annotations file: {file_path}")

    annotations: list[Annotation] = []
    clamp_log: list[str] = []
    for lineno, line in enumerate(
            file_path.read_text(encoding="utf-8").splitlines(), start=1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 6:
            raise DataError(f"annotation line {lineno}: expected 6 fields, "
                            f"found {len(fields)}")
        image_id = fields[0]
        try:
            class_id = int(fields[1])
            cx, cy, w, h = (float(v) for v in fields[2:6])
        except ValueError as exc:
            raise DataError(f"annotation line {lineno}: {exc}") from exc
        if class_id < 0:
            raise DataError(f"annotation line {lineno}: class_id must be "
                            f"non-negative, found {class_id}")
        if not all(np.isfinite([cx, cy, w, h])):
            raise DataError(f"annotation line {lineno}: non-finite box entry")
        if w <= 0.0 or h <= 0.0:
            raise DataError(f"annotation line {lineno}: box size "
                            f"({w}, {h}) must be positive")

        clamped = _clamp_box(cx, cy, w, h)
        if clamped[2] <= 0.0 or clamped[3] <= 0.0:
            raise DataError(f"annotation line {lineno}: box for image "
                            f"'{image_id}' lies outside the image")
        if clamped != (cx, cy, w, h):
            clamp_log.append(
                f"clamped box on annotation line {lineno} for image "
                f"'{image_id}'")
        annotations.append(Annotation(image_id=image_id, class_id=class_id,
                                      box=clamped))
    return annotations, clamp_log
