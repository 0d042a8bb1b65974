"""Extraction jobs: run a backbone over a dataset, write scoring inputs.

Classification emits one feature-store directory (one pooled row per
image). Detection emits per-image spatial maps plus the normalized
annotation file; box pooling itself lives on the scoring side so its
math is tested once.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .datasets import (DataError, load_image, read_detection_annotations,
                       scan_classification_root, scan_detection_images)
from .models import FeatureTap, TapError, load_model, model_id_for
from .writer import (ANNOTATIONS_FILE, write_annotation_lines,
                     write_map_bundle, write_store)

TASKS = ("classification", "detection")


@dataclass(frozen=True)
class ExtractionJob:
    """One extraction request, as parsed from the command line."""

    model: str
    data: str
    task: str
    layer: str | None = None
    batch_size: int = 16
    out: str = "store"

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {', '.join(TASKS)}, "
                             f"found '{self.task}'")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, "
                             f"found {self.batch_size}")


def _batches(items, size):
    for start in range(0, len(items), size):
        yield items[start:start + size]


def _pooled_rows(activation: torch.Tensor) -> np.ndarray:
    if activation.ndim == 4:
        activation = activation.mean(dim=(2, 3))
    if activation.ndim != 2:
        raise TapError(f"tap produced a {activation.ndim}-D tensor; expected "
                       f"2-D features or 4-D maps")
    return activation.to(torch.float32).cpu().numpy()


def extract_classification(job: ExtractionJob,
                           module: torch.nn.Module | None = None) -> Path:
    """Write a feature store for an image-folder dataset; returns its path.

    module overrides loading job.model (tests inject toy networks).
    """
    samples, class_names = scan_classification_root(job.data)
    if module is None:
        module = load_model(job.model)

    rows: list[np.ndarray] = []
    labels: list[int] = []
    with FeatureTap(module, job.layer) as tap:
        for batch in _batches(samples, job.batch_size):
            arrays = [load_image(path)[0] for path, _ in batch]
            stacked = torch.from_numpy(np.stack(arrays))
            rows.append(_pooled_rows(tap(stacked)))
            labels.extend(label for _, label in batch)

    features = np.concatenate(rows, axis=0)
    if len(class_names) < 2:
        print("warning: single-class dataset; classification scoring "
              "needs C >= 2", file=sys.stderr)

    path = write_store(features, np.asarray(labels, dtype=np.int32),
                       class_count=len(class_names),
                       model_id=model_id_for(job.model),
                       dataset_id=Path(job.data).name,
                       directory=job.out)
    print(f"wrote {path}: K={features.shape[0]} h={features.shape[1]} "
          f"c={len(class_names)}")
    return path


def extract_detection(job: ExtractionJob,
                      module: torch.nn.Module | None = None) -> Path:
    """Write a map bundle plus normalized annotations; returns its path."""
    images = scan_detection_images(job.data)
    annotations, clamp_log = read_detection_annotations(
        Path(job.data) / ANNOTATIONS_FILE)
    for message in clamp_log:
        print(message, file=sys.stderr)
    for ann in annotations:
        if ann.image_id not in images:
            raise DataError(
                f"annotation references missing image '{ann.image_id}'")

    if module is None:
        module = load_model(job.model)

    # every image gets a map, annotated or not; stems sorted for
    # deterministic file order
    stems = sorted(images)
    maps: list[tuple[str, np.ndarray, int, int]] = []
    with FeatureTap(module, job.layer) as tap:
        for batch in _batches(stems, job.batch_size):
            loaded = [load_image(images[stem]) for stem in batch]
            stacked = torch.from_numpy(np.stack([arr for arr, _, _ in loaded]))
            activation = tap(stacked)
            if activation.ndim != 4:
                raise TapError(f"detection maps must be spatial; tap "
                               f"produced a {activation.ndim}-D tensor")
            tensors = activation.to(torch.float32).cpu().numpy()
            maps.extend(
                (stem, tensors[i], height, width)
                for i, (stem, (_, height, width)) in enumerate(zip(batch,
                                                                   loaded)))

    path = write_map_bundle(maps, model_id=model_id_for(job.model),
                            dataset_id=Path(job.data).name, directory=job.out)
    write_annotation_lines(annotations, path / ANNOTATIONS_FILE)
    print(f"wrote {path}: {len(maps)} maps, {len(annotations)} boxes")
    return path


def run_job(job: ExtractionJob, module: torch.nn.Module | None = None) -> Path:
    if job.task == "classification":
        return extract_classification(job, module)
    return extract_detection(job, module)
