"""Transferability scoring and ranking for pre-trained models.

Given per-model feature matrices extracted on a target dataset, this package
computes label-free energy, LDA classification, and truncated-SVD regression
transferability scores (plus a LogME evidence baseline), fuses them into a
model ranking, and evaluates rankings against ground-truth fine-tuning
accuracy with Kendall tau statistics and Pr(top-k).
"""

from .energy import EnergyResult, energy_score, free_energy, softmax_energy_identity
from .fusion import (Ranking, ScoreReport, fuse_and_rank,
                     normalize_across_models, rank_scores)
from .lda import (ClassificationResult, LdaModel, ScatterStats,
                  classification_score, lda_fit, scatter_matrices)
from .logme import (EvidenceResult, evidence_maximize,
                    logme_classification_score, logme_regression_score)
from .metrics import (BenchmarkTable, RankingEvaluation, evaluate_benchmark,
                      kendall_tau, pr_topk, weighted_kendall_tau)
from .roipool import (BoxAnnotation, SpatialFeatureMap,
                      construct_detection_features, pool_box,
                      read_annotations, read_spatial_maps, write_annotations,
                      write_spatial_maps)
from .store import (ChecksumError, FeatureSet, FeatureStoreError,
                    InvalidFeatureSetError, Manifest, StoreFormatError,
                    TensorSpec, read_feature_set, validate_feature_set,
                    write_feature_set)
from .svdreg import (SvdRegressionResult, regression_score,
                     truncated_reconstruction)

__version__ = "0.1.0"

__all__ = [
    "BenchmarkTable",
    "BoxAnnotation",
    "ChecksumError",
    "ClassificationResult",
    "EnergyResult",
    "EvidenceResult",
    "FeatureSet",
    "FeatureStoreError",
    "InvalidFeatureSetError",
    "LdaModel",
    "Manifest",
    "Ranking",
    "RankingEvaluation",
    "ScatterStats",
    "ScoreReport",
    "SpatialFeatureMap",
    "StoreFormatError",
    "SvdRegressionResult",
    "TensorSpec",
    "classification_score",
    "construct_detection_features",
    "energy_score",
    "evaluate_benchmark",
    "evidence_maximize",
    "free_energy",
    "fuse_and_rank",
    "kendall_tau",
    "lda_fit",
    "logme_classification_score",
    "logme_regression_score",
    "normalize_across_models",
    "pool_box",
    "pr_topk",
    "rank_scores",
    "read_annotations",
    "read_feature_set",
    "read_spatial_maps",
    "regression_score",
    "scatter_matrices",
    "softmax_energy_identity",
    "truncated_reconstruction",
    "validate_feature_set",
    "weighted_kendall_tau",
    "write_annotations",
    "write_feature_set",
    "write_spatial_maps",
]
