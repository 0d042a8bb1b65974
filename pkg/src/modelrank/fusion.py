"""Cross-model score normalization, fusion, and ranking.

Each enabled score is min-max normalized across the M candidate models so
that different score scales fuse on equal footing; the fused transferability
value is the plain sum of normalized scores. Ranking is descending by fused
value with a lexicographic model-id tie-break.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np


@dataclass(frozen=True)
class ScoreReport:
    model_id: str
    raw_scores: dict[str, float]
    normalized_scores: dict[str, float]
    fused: float


@dataclass(frozen=True)
class Ranking:
    entries: tuple[tuple[str, float], ...]      # (model_id, fused), descending
    tie_breaks: tuple[tuple[str, ...], ...]     # groups that shared a fused value

    def ordered_ids(self) -> list[str]:
        return [model_id for model_id, _ in self.entries]


def normalize_across_models(raw) -> np.ndarray:
    """Min-max normalize to [0, 1]; a degenerate column maps to all zeros."""
    arr = np.asarray(raw, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError("cannot normalize an empty score column")
    if not np.isfinite(arr).all():
        raise ValueError("non-finite score values")
    lo = arr.min()
    hi = arr.max()
    if hi == lo:
        return np.zeros_like(arr)
    return (arr - lo) / (hi - lo)


def rank_scores(fused: Mapping[str, float]) -> Ranking:
    """Order models by descending fused value, ties broken by model_id."""
    if not fused:
        raise ValueError("cannot rank an empty model set")
    order = sorted(fused, key=lambda model_id: (-fused[model_id], model_id))
    entries = tuple((model_id, float(fused[model_id])) for model_id in order)

    groups: list[tuple[str, ...]] = []
    start = 0
    for i in range(1, len(order) + 1):
        if i == len(order) or fused[order[i]] != fused[order[start]]:
            if i - start > 1:
                groups.append(tuple(order[start:i]))
            start = i
    return Ranking(entries=entries, tie_breaks=tuple(groups))


def fuse_and_rank(per_model_scores: Mapping[str, Mapping[str, float]],
                  enabled_scores: Iterable[str]) -> tuple[list[ScoreReport], Ranking]:
    """Normalize each enabled score across models and sum into fused values.

    Returns the per-model reports in rank order plus the Ranking itself.
    """
    names = sorted(set(enabled_scores))
    if not names:
        raise ValueError("no scores enabled")
    model_ids = sorted(per_model_scores)
    if not model_ids:
        raise ValueError("no models to rank")
    for model_id in model_ids:
        for name in names:
            if name not in per_model_scores[model_id]:
                raise ValueError(f"model '{model_id}' missing score '{name}'")

    normalized: dict[str, np.ndarray] = {
        name: normalize_across_models(
            [float(per_model_scores[model_id][name]) for model_id in model_ids])
        for name in names
    }
    fused: dict[str, float] = {}
    for idx, model_id in enumerate(model_ids):
        total = 0.0
        for name in names:
            total += float(normalized[name][idx])
        fused[model_id] = total

    ranking = rank_scores(fused)
    position = {model_id: i for i, model_id in enumerate(model_ids)}
    reports = [
        ScoreReport(
            model_id=model_id,
            raw_scores={name: float(per_model_scores[model_id][name])
                        for name in names},
            normalized_scores={name: float(normalized[name][position[model_id]])
                               for name in names},
            fused=fused[model_id],
        )
        for model_id in ranking.ordered_ids()
    ]
    return reports, ranking
