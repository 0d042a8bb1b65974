"""Classification transferability via linear discriminant analysis.

Pipeline: class scatter matrices -> regularized generalized eigenproblem
(solved by Cholesky whitening of the within-scatter) -> projection onto the
top discriminant directions -> unit-covariance Gaussian Bayes posterior of
the true class, averaged over samples.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._util import ordered_mean
from .store import FeatureSet

EPSILON_SCALE = 1e-4
EPSILON_FLOOR = 1e-10


class ScatterStats(NamedTuple):
    between: np.ndarray       # (h, h) weighted class-mean scatter
    within: np.ndarray        # (h, h) deviations from class means
    grand_mean: np.ndarray    # (h,)
    class_means: np.ndarray   # (C, h)
    class_counts: np.ndarray  # (C,)


@dataclass(frozen=True)
class LdaModel:
    projection: np.ndarray             # (h, r), columns by descending eigenvalue
    class_means_projected: np.ndarray  # (C, r)
    class_priors: np.ndarray           # (C,)
    epsilon: float
    eigenvalues: np.ndarray            # (r,) descending, clamped at 0


@dataclass(frozen=True)
class ClassificationResult:
    per_sample_posterior: np.ndarray   # (K,) posterior of the true class
    score: float


def _features_and_labels(fs: FeatureSet) -> tuple[np.ndarray, np.ndarray]:
    feats = np.asarray(fs.features, dtype=np.float64)
    labels = np.asarray(fs.labels, dtype=np.int64)
    if feats.ndim != 2 or feats.shape[0] < 2:
        raise ValueError(f"features must be 2-D with K >= 2, found {feats.shape}")
    if labels.ndim != 1 or labels.shape[0] != feats.shape[0]:
        raise ValueError(f"labels shape {labels.shape} does not match K={feats.shape[0]}")
    return feats, labels


def scatter_matrices(fs: FeatureSet) -> ScatterStats:
    """Between- and within-class scatter.

    Between: sum_c K_c (mu_c - mu)(mu_c - mu)^T. Within: deviations taken
    from the class mean mu_c (the standard LDA definition), not the grand
    mean.
    """
    feats, labels = _features_and_labels(fs)
    c = int(fs.class_count)
    if c < 1:
        raise ValueError(f"class_count={c}: must be >= 1")
    if labels.min() < 0 or labels.max() >= c:
        raise ValueError(
            f"labels outside [0, {c}): found {int(labels.min())}..{int(labels.max())}")

    k, h = feats.shape
    counts = np.bincount(labels, minlength=c)
    empty = np.where(counts == 0)[0]
    if empty.size:
        raise ValueError(f"class {int(empty[0])} has no samples")

    grand_mean = feats.mean(axis=0)
    class_means = np.empty((c, h), dtype=np.float64)
    between = np.zeros((h, h), dtype=np.float64)
    within = np.zeros((h, h), dtype=np.float64)
    for cls in range(c):
        members = feats[labels == cls]
        mu_c = members.mean(axis=0)
        class_means[cls] = mu_c
        gap = mu_c - grand_mean
        between += counts[cls] * np.outer(gap, gap)
        centered = members - mu_c
        within += centered.T @ centered
    between = 0.5 * (between + between.T)
    within = 0.5 * (within + within.T)
    return ScatterStats(between, within, grand_mean, class_means, counts)


def lda_fit(fs: FeatureSet) -> LdaModel:
    """Solve between @ v = lambda (within + eps I) @ v; keep min(C-1, h) directions."""
    stats = scatter_matrices(fs)
    h = stats.between.shape[0]
    c = int(fs.class_count)
    k = int(stats.class_counts.sum())

    epsilon = max(EPSILON_SCALE * float(np.trace(stats.within)) / h, EPSILON_FLOOR)
    regularized = stats.within + epsilon * np.eye(h)
    try:
        chol = np.linalg.cholesky(regularized)
    except np.linalg.LinAlgError as exc:
        raise ValueError(
            f"cholesky failed on regularized within-scatter "
            f"(epsilon={epsilon:g}): {exc}") from exc

    # whiten: M = L^-1 between L^-T is symmetric with the generalized spectrum
    half = np.linalg.solve(chol, stats.between)
    whitened = np.linalg.solve(chol, half.T).T
    whitened = 0.5 * (whitened + whitened.T)
    eigenvalues, eigenvectors = np.linalg.eigh(whitened)

    r = min(c - 1, h)
    if r < 1:
        raise ValueError(f"C={c}: need at least 2 classes to fit a projection")
    top = slice(h - r, h)
    eigenvalues = np.maximum(eigenvalues[top][::-1], 0.0)
    # back-transform whitened eigenvectors to the original coordinates; the
    # sqrt(K) rescale turns scatter-whitening into covariance-whitening so
    # the projected within-class covariance is the identity the posterior
    # model assumes
    projection = np.linalg.solve(chol.T, eigenvectors[:, top][:, ::-1])
    projection = projection * np.sqrt(k)

    return LdaModel(
        projection=projection,
        class_means_projected=stats.class_means @ projection,
        class_priors=stats.class_counts / k,
        epsilon=epsilon,
        eigenvalues=eigenvalues,
    )


def classification_score(fs: FeatureSet, model: LdaModel) -> ClassificationResult:
    """Mean posterior probability of the true class under N(U^T mu_c, I)."""
    feats, labels = _features_and_labels(fs)
    if feats.shape[1] != model.projection.shape[0]:
        raise ValueError(
            f"feature dimension {feats.shape[1]} does not match fitted "
            f"projection ({model.projection.shape[0]})")
    c = model.class_means_projected.shape[0]
    if int(fs.class_count) != c:
        raise ValueError(
            f"class_count {fs.class_count} does not match fitted model ({c})")
    if labels.min() < 0 or labels.max() >= c:
        raise ValueError(
            f"labels outside [0, {c}): found {int(labels.min())}..{int(labels.max())}")

    projected = feats @ model.projection                      # (K, r)
    means = model.class_means_projected                      # (C, r)
    discriminant = (projected @ means.T
                    - 0.5 * (means * means).sum(axis=1)
                    + np.log(model.class_priors))            # (K, C)
    shifted = discriminant - discriminant.max(axis=1, keepdims=True)
    posterior = np.exp(shifted)
    posterior /= posterior.sum(axis=1, keepdims=True)

    per_sample = posterior[np.arange(feats.shape[0]), labels]
    return ClassificationResult(per_sample_posterior=per_sample,
                                score=ordered_mean(per_sample))
