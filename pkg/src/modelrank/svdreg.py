"""Regression transferability via truncated-SVD reconstruction of bbox targets.

The feature matrix is decomposed once; targets are projected onto the kept
left singular subspace (top 80 percent of singular values by count) and the
score is the negated mean squared reconstruction error. An optional 7:3
holdout mode fits the truncated least-squares map on a fixed-seed split and
measures the error on held-out rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._util import ordered_mean
from .store import FeatureSet

KEEP_FRACTION = 0.8
SINGULAR_FLOOR = 1e-12   # relative to the largest singular value
HOLDOUT_SEED = 0
TRAIN_FRACTION = 0.7


@dataclass(frozen=True)
class SvdRegressionResult:
    score: float
    per_column_mse: np.ndarray
    kept_rank: int
    holdout: bool


def _kept_rank(k: int, h: int) -> int:
    return int(math.ceil(KEEP_FRACTION * min(k, h)))


def _keep_mask(singular_values: np.ndarray, rank: int) -> np.ndarray:
    keep = np.zeros(singular_values.shape, dtype=bool)
    keep[:rank] = True
    if singular_values.size:
        # numerically-zero directions cannot be inverted and drop out
        keep &= singular_values > singular_values[0] * SINGULAR_FLOOR
    return keep


def _as_finite_2d(name: str, values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, found shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contain non-finite entries")
    return arr


def truncated_reconstruction(features, targets) -> tuple[np.ndarray, int]:
    """Project targets onto the kept left singular subspace of features.

    Returns (b_hat, kept_rank) with b_hat = U_r U_r^T b, which equals the
    truncated pseudo-inverse route f f_trunc^+ b.
    """
    feats = _as_finite_2d("features", features)
    target = _as_finite_2d("targets", targets)
    if feats.shape[0] < 2:
        raise ValueError(f"K={feats.shape[0]}: at least 2 samples required")
    if target.shape[0] != feats.shape[0]:
        raise ValueError(
            f"targets have {target.shape[0]} rows, features {feats.shape[0]}")

    left, singular, _ = np.linalg.svd(feats, full_matrices=False)
    rank = _kept_rank(*feats.shape)
    kept = left[:, _keep_mask(singular, rank)]
    return kept @ (kept.T @ target), rank


def regression_score(fs: FeatureSet, holdout: bool = False) -> SvdRegressionResult:
    """Negated mean squared error of truncated reconstruction of the boxes."""
    if fs.boxes is None:
        raise ValueError("boxes absent: regression score requires bbox targets")
    feats = np.asarray(fs.features, dtype=np.float64)
    targets = np.asarray(fs.boxes, dtype=np.float64)

    if not holdout:
        approx, rank = truncated_reconstruction(feats, targets)
        residual = targets - approx
        eval_rows = residual
    else:
        k = feats.shape[0]
        rng = np.random.default_rng(HOLDOUT_SEED)
        order = rng.permutation(k)
        n_train = math.ceil(TRAIN_FRACTION * k)
        test_idx = order[n_train:]
        if test_idx.size < 2:
            raise ValueError(
                f"holdout test split has {test_idx.size} samples: need at least 2")
        train_feats = feats[order[:n_train]]
        train_targets = targets[order[:n_train]]
        left, singular, right_t = np.linalg.svd(train_feats, full_matrices=False)
        rank = _kept_rank(n_train, feats.shape[1])
        keep = _keep_mask(singular, rank)
        # truncated least-squares map: W = V_r diag(1/s_r) U_r^T b_train
        weights = right_t[keep].T @ ((left[:, keep].T @ train_targets)
                                     / singular[keep][:, None])
        residual = targets[test_idx] - feats[test_idx] @ weights
        eval_rows = residual

    per_column = np.asarray(
        [ordered_mean(eval_rows[:, j] ** 2) for j in range(eval_rows.shape[1])])
    return SvdRegressionResult(
        score=-ordered_mean(per_column),
        per_column_mse=per_column,
        kept_rank=rank,
        holdout=holdout,
    )
