"""Bayesian linear-model evidence baseline (LogME).

For one target column y the model is y = F w + noise with w ~ N(0, 1/alpha)
and noise precision gamma. The log evidence

    L = (K/2) log gamma + (h/2) log alpha - (K/2) log 2pi
        - (gamma/2) ||F m - y||^2 - (alpha/2) m^T m - (1/2) log det A,
    A = alpha I + gamma F^T F,   m = gamma A^-1 F^T y

is maximized by alternating fixed-point updates of (alpha, gamma). The
eigendecomposition of F^T F is computed once and shared across iterations
and target columns, so each update costs O(h).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._util import ordered_mean
from .store import FeatureSet

MAX_ITERATIONS = 200
REL_TOL = 1e-6
_TINY = 1e-300


@dataclass(frozen=True)
class EvidenceResult:
    evidence: float
    alpha: float
    gamma: float
    iterations: int
    converged: bool


def _spectrum(feats: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    gram = feats.T @ feats
    sigma, basis = np.linalg.eigh(0.5 * (gram + gram.T))
    return np.maximum(sigma, 0.0), basis


def _evidence_terms(sigma, proj, yy, alpha, gamma):
    denom = alpha + gamma * sigma
    scaled = gamma * proj / denom                      # basis coefficients of m
    m_sq = float((scaled * scaled).sum())
    residual_sq = (yy
                   - 2.0 * gamma * float((proj * proj / denom).sum())
                   + gamma * gamma * float((sigma * proj * proj / (denom * denom)).sum()))
    residual_sq = max(residual_sq, 0.0)
    effective_dim = float((gamma * sigma / denom).sum())
    log_det = float(np.log(denom).sum())
    return m_sq, residual_sq, effective_dim, log_det


def _log_evidence(k, h, sigma, proj, yy, alpha, gamma):
    m_sq, residual_sq, _, log_det = _evidence_terms(sigma, proj, yy, alpha, gamma)
    return (0.5 * k * math.log(gamma) + 0.5 * h * math.log(alpha)
            - 0.5 * k * math.log(2.0 * math.pi)
            - 0.5 * gamma * residual_sq - 0.5 * alpha * m_sq - 0.5 * log_det)


def _maximize_column(k, h, sigma, proj, yy) -> EvidenceResult:
    alpha = 1.0
    gamma = 1.0
    evidence = _log_evidence(k, h, sigma, proj, yy, alpha, gamma)
    iterations = 0
    converged = False
    for _ in range(MAX_ITERATIONS):
        m_sq, residual_sq, effective_dim, _ = _evidence_terms(
            sigma, proj, yy, alpha, gamma)
        if m_sq <= _TINY or residual_sq <= _TINY:
            converged = True   # degenerate fixed point, nothing to update
            break
        alpha_new = effective_dim / m_sq
        gamma_new = (k - effective_dim) / residual_sq
        if (not math.isfinite(alpha_new) or not math.isfinite(gamma_new)
                or alpha_new <= 0.0 or gamma_new <= 0.0):
            break              # keep the last valid parameters
        alpha, gamma = alpha_new, gamma_new
        iterations += 1
        updated = _log_evidence(k, h, sigma, proj, yy, alpha, gamma)
        delta = abs(updated - evidence)
        evidence = updated
        if delta <= REL_TOL * max(1.0, abs(evidence)):
            converged = True
            break
    if not math.isfinite(evidence):
        raise ValueError("non-finite evidence: degenerate features or targets")
    return EvidenceResult(evidence=evidence, alpha=alpha, gamma=gamma,
                          iterations=iterations, converged=converged)


def evidence_maximize(features, target) -> EvidenceResult:
    """Fixed-point evidence maximization for one target column."""
    feats = np.asarray(features, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64).ravel()
    if feats.ndim != 2 or feats.shape[0] < 2:
        raise ValueError(f"features must be 2-D with K >= 2, found {feats.shape}")
    if y.shape[0] != feats.shape[0]:
        raise ValueError(f"target length {y.shape[0]} does not match K={feats.shape[0]}")
    if not (np.isfinite(feats).all() and np.isfinite(y).all()):
        raise ValueError("non-finite entries in features or target")

    sigma, basis = _spectrum(feats)
    proj = basis.T @ (feats.T @ y)
    return _maximize_column(feats.shape[0], feats.shape[1], sigma, proj,
                            float(y @ y))


def _per_sample_scores(feats: np.ndarray, targets: np.ndarray) -> list[float]:
    k, h = feats.shape
    sigma, basis = _spectrum(feats)
    scores = []
    for j in range(targets.shape[1]):
        y = targets[:, j]
        proj = basis.T @ (feats.T @ y)
        result = _maximize_column(k, h, sigma, proj, float(y @ y))
        scores.append(result.evidence / k)
    return scores


def logme_regression_score(fs: FeatureSet) -> float:
    """Mean per-sample evidence over the four bbox target columns."""
    if fs.boxes is None:
        raise ValueError("boxes absent: LogME regression requires bbox targets")
    feats = np.asarray(fs.features, dtype=np.float64)
    targets = np.asarray(fs.boxes, dtype=np.float64)
    return ordered_mean(_per_sample_scores(feats, targets))


def logme_classification_score(fs: FeatureSet) -> float:
    """One-hot encodes labels and averages per-sample evidence over columns."""
    feats = np.asarray(fs.features, dtype=np.float64)
    labels = np.asarray(fs.labels, dtype=np.int64)
    c = int(fs.class_count)
    if c < 1:
        raise ValueError(f"class_count={c}: must be >= 1")
    if labels.min() < 0 or labels.max() >= c:
        raise ValueError(
            f"labels outside [0, {c}): found {int(labels.min())}..{int(labels.max())}")
    one_hot = (labels[:, None] == np.arange(c)[None, :]).astype(np.float64)
    return ordered_mean(_per_sample_scores(feats, one_hot))
