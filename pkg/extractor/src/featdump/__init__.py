"""featdump: dump vision-backbone features into scoring-ready stores."""

from .datasets import (Annotation, DataError, load_image,
                       read_detection_annotations, scan_classification_root,
                       scan_detection_images)
from .extract import (ExtractionJob, extract_classification,
                      extract_detection, run_job)
from .models import (FeatureTap, ModelError, TapError, load_model,
                     model_id_for, tap_points)
from .writer import (fnv1a_64, write_annotation_lines, write_map_bundle,
                     write_store)

__all__ = [
    "Annotation",
    "DataError",
    "ExtractionJob",
    "FeatureTap",
    "ModelError",
    "TapError",
    "extract_classification",
    "extract_detection",
    "fnv1a_64",
    "load_image",
    "load_model",
    "model_id_for",
    "read_detection_annotations",
    "run_job",
    "scan_classification_root",
    "scan_detection_images",
    "tap_points",
    "write_annotation_lines",
    "write_map_bundle",
    "write_store",
]
