"""Rank-quality metrics against ground-truth benchmark tables.

Kendall tau counts concordant minus discordant sign pairs over the fixed
M(M-1)/2 denominator (ties contribute zero). The weighted variant gives pair
(i, j) the weight 1/(r_i+1) + 1/(r_j+1) from the ground-truth ranks, so
mistakes near the top cost more; ground-truth-tied pairs carry no rank
information and are excluded from the normalization. Pr(top-k) is the
fraction of datasets whose true best model appears in the predicted top k.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ._util import ordered_mean
from .fusion import Ranking


@dataclass(frozen=True)
class BenchmarkTable:
    model_ids: tuple[str, ...]
    dataset_ids: tuple[str, ...]
    accuracy: np.ndarray              # (M, D) float64

    def __post_init__(self):
        acc = np.ascontiguousarray(np.asarray(self.accuracy, dtype=np.float64))
        object.__setattr__(self, "model_ids", tuple(self.model_ids))
        object.__setattr__(self, "dataset_ids", tuple(self.dataset_ids))
        m, d = len(self.model_ids), len(self.dataset_ids)
        if m < 2:
            raise ValueError(f"benchmark table needs at least 2 models, found {m}")
        if len(set(self.model_ids)) != m:
            raise ValueError("duplicate model_id in benchmark table")
        if len(set(self.dataset_ids)) != d:
            raise ValueError("duplicate dataset_id in benchmark table")
        if acc.shape != (m, d):
            raise ValueError(
                f"accuracy shape {acc.shape} does not match {m} models x {d} datasets")
        if not np.isfinite(acc).all():
            raise ValueError("benchmark table has missing or non-finite entries")
        acc.flags.writeable = False
        object.__setattr__(self, "accuracy", acc)

    @classmethod
    def from_csv(cls, path) -> "BenchmarkTable":
        """Parse `model_id,<dataset>,...` header plus one row per model."""
        with Path(path).open(newline="", encoding="utf-8") as fh:
            rows = [row for row in csv.reader(fh) if row]
        if not rows:
            raise ValueError(f"empty benchmark table: {path}")
        header = rows[0]
        if header[0] != "model_id" or len(header) < 2:
            raise ValueError(
                f"benchmark header must be 'model_id,<dataset_id>...', "
                f"found {header[:3]}")
        dataset_ids = tuple(header[1:])
        model_ids = []
        values = []
        for lineno, row in enumerate(rows[1:], start=2):
            if len(row) != len(header):
                raise ValueError(
                    f"row {lineno}: expected {len(header)} cells, found {len(row)}")
            model_ids.append(row[0])
            try:
                values.append([float(cell) for cell in row[1:]])
            except ValueError as exc:
                raise ValueError(f"row {lineno}: {exc}") from exc
        return cls(model_ids=tuple(model_ids), dataset_ids=dataset_ids,
                   accuracy=np.asarray(values, dtype=np.float64))

    def column(self, dataset_id: str) -> np.ndarray:
        if dataset_id not in self.dataset_ids:
            raise ValueError(f"unknown dataset '{dataset_id}'")
        return self.accuracy[:, self.dataset_ids.index(dataset_id)]

    def restrict(self, dataset_ids: Sequence[str]) -> "BenchmarkTable":
        """Sub-table over the given datasets, kept in this table's order."""
        wanted = set(dataset_ids)
        unknown = wanted - set(self.dataset_ids)
        if unknown:
            raise ValueError(f"unknown dataset '{sorted(unknown)[0]}'")
        keep = [i for i, ds in enumerate(self.dataset_ids) if ds in wanted]
        return BenchmarkTable(
            model_ids=self.model_ids,
            dataset_ids=tuple(self.dataset_ids[i] for i in keep),
            accuracy=self.accuracy[:, keep],
        )


@dataclass(frozen=True)
class RankingEvaluation:
    dataset_ids: tuple[str, ...]
    per_dataset_tau: tuple[float, ...]
    per_dataset_tau_weighted: tuple[float, ...]
    pr_top: dict[int, float]
    tau_average: float
    tau_weighted_average: float


def _paired(gt, pred) -> tuple[np.ndarray, np.ndarray]:
    g = np.asarray(gt, dtype=np.float64).ravel()
    p = np.asarray(pred, dtype=np.float64).ravel()
    if g.shape[0] != p.shape[0]:
        raise ValueError(f"length mismatch: gt {g.shape[0]}, pred {p.shape[0]}")
    if g.shape[0] < 2:
        raise ValueError("need at least 2 items to correlate")
    if not (np.isfinite(g).all() and np.isfinite(p).all()):
        raise ValueError("non-finite values in rank inputs")
    return g, p


def _sign(a: float, b: float) -> int:
    if a > b:
        return 1
    if a < b:
        return -1
    return 0


def kendall_tau(gt, pred) -> float:
    """Tau-a: signed pair agreement over the full M(M-1)/2 denominator."""
    g, p = _paired(gt, pred)
    m = g.shape[0]
    total = 0
    for i in range(m - 1):
        for j in range(i + 1, m):
            total += _sign(g[i], g[j]) * _sign(p[i], p[j])
    return total / (m * (m - 1) // 2)


def _hyperbolic_weights(gt: np.ndarray) -> np.ndarray:
    """Per-item weight 1/(rank+1) by descending gt; ties share the mean."""
    m = gt.shape[0]
    order = np.argsort(-gt, kind="stable")
    weights = np.empty(m, dtype=np.float64)
    start = 0
    while start < m:
        stop = start
        while stop < m and gt[order[stop]] == gt[order[start]]:
            stop += 1
        shared = sum(1.0 / (pos + 1) for pos in range(start, stop)) / (stop - start)
        for pos in range(start, stop):
            weights[order[pos]] = shared
        start = stop
    return weights


def weighted_kendall_tau(gt, pred) -> float:
    """Hyperbolic additive pair weights from ground-truth ranks.

    Pairs tied in the ground truth carry no ordering information and are
    excluded from both sums; an all-tied ground truth yields 0.
    """
    g, p = _paired(gt, pred)
    item_weight = _hyperbolic_weights(g)
    m = g.shape[0]
    numerator = 0.0
    denominator = 0.0
    for i in range(m - 1):
        for j in range(i + 1, m):
            gt_sign = _sign(g[i], g[j])
            if gt_sign == 0:
                continue
            weight = item_weight[i] + item_weight[j]
            denominator += weight
            numerator += weight * (gt_sign * _sign(p[i], p[j]))
    if denominator == 0.0:
        return 0.0
    return float(numerator / denominator)


def pr_topk(table: BenchmarkTable,
            predicted_rankings: Mapping[str, Sequence[str]], k: int) -> float:
    """Fraction of datasets whose gt-best model is in the predicted top k."""
    m = len(table.model_ids)
    if not 1 <= k <= m:
        raise ValueError(f"k={k} outside [1, {m}]")
    model_set = set(table.model_ids)
    hits = 0
    for idx, dataset_id in enumerate(table.dataset_ids):
        if dataset_id not in predicted_rankings:
            raise ValueError(f"no ranking for dataset '{dataset_id}'")
        ranking = list(predicted_rankings[dataset_id])
        if set(ranking) != model_set or len(ranking) != m:
            raise ValueError(
                f"ranking for '{dataset_id}' does not cover the model set")
        column = table.accuracy[:, idx]
        best = column.max()
        best_ids = {table.model_ids[i] for i in np.where(column == best)[0]}
        if best_ids.intersection(ranking[:k]):
            hits += 1
    return hits / len(table.dataset_ids)


def evaluate_benchmark(table: BenchmarkTable,
                       rankings: Mapping[str, Ranking],
                       ks: Sequence[int] = (1, 2, 3)) -> RankingEvaluation:
    """Per-dataset tau and weighted tau plus Pr(top-k) and their averages."""
    model_set = set(table.model_ids)
    fused_by_dataset: dict[str, dict[str, float]] = {}
    for dataset_id in table.dataset_ids:
        if dataset_id not in rankings:
            raise ValueError(f"no ranking for dataset '{dataset_id}'")
        entries = dict(rankings[dataset_id].entries)
        missing = model_set - entries.keys()
        if missing:
            raise ValueError(
                f"ranking for '{dataset_id}' missing model '{sorted(missing)[0]}'")
        extra = entries.keys() - model_set
        if extra:
            raise ValueError(
                f"ranking for '{dataset_id}' has unknown model '{sorted(extra)[0]}'")
        fused_by_dataset[dataset_id] = entries

    taus: list[float] = []
    weighted: list[float] = []
    ordered_lists: dict[str, list[str]] = {}
    for idx, dataset_id in enumerate(table.dataset_ids):
        gt = table.accuracy[:, idx]
        pred = np.asarray(
            [fused_by_dataset[dataset_id][mid] for mid in table.model_ids])
        taus.append(kendall_tau(gt, pred))
        weighted.append(weighted_kendall_tau(gt, pred))
        ordered_lists[dataset_id] = rankings[dataset_id].ordered_ids()

    pr_top = {int(k): pr_topk(table, ordered_lists, int(k)) for k in ks}
    return RankingEvaluation(
        dataset_ids=table.dataset_ids,
        per_dataset_tau=tuple(taus),
        per_dataset_tau_weighted=tuple(weighted),
        pr_top=pr_top,
        tau_average=ordered_mean(taus),
        tau_weighted_average=ordered_mean(weighted),
    )
