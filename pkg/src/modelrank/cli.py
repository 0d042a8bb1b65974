"""Command-line front end: rank feature stores, evaluate rankings, inspect stores.

Exit codes: 0 success, 2 input/validation error, 3 configuration error.
Reports are deterministic: identical inputs produce byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .energy import energy_score
from .fusion import Ranking, fuse_and_rank, rank_scores
from .lda import classification_score, lda_fit
from .logme import logme_classification_score, logme_regression_score
from .metrics import BenchmarkTable, evaluate_benchmark
from .store import (FeatureSet, FeatureStoreError, read_feature_set,
                    validate_feature_set)
from .svdreg import regression_score

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CONFIG = 3

SCORE_NAMES = ("cls", "energy", "lmr", "logme", "reg")
CLASSIFICATION_FORBIDDEN = frozenset({"reg", "lmr"})
BOX_SCORES = frozenset({"reg", "lmr"})
DEFAULT_SCORES = {
    "classification": ("energy", "cls"),
    "detection": ("energy", "cls", "reg"),
}


class _ConfigError(Exception):
    """Invalid flag combination; maps to exit code 3."""


def _fail(message: str) -> None:
    print(f"error: {message}", file=sys.stderr)


def _parse_score_list(raw: str | None, task: str) -> list[str]:
    if raw is None:
        return sorted(DEFAULT_SCORES[task])
    names = [token.strip() for token in raw.split(",") if token.strip()]
    if not names:
        raise _ConfigError("empty --scores list")
    unknown = [name for name in names if name not in SCORE_NAMES]
    if unknown:
        raise _ConfigError(
            f"unknown score '{unknown[0]}' (choose from {', '.join(SCORE_NAMES)})")
    return sorted(set(names))


def _compute_scores(fs: FeatureSet, names: list[str], holdout: bool) -> dict[str, float]:
    values: dict[str, float] = {}
    for name in names:
        if name == "energy":
            values[name] = energy_score(fs).score
        elif name == "cls":
            values[name] = classification_score(fs, lda_fit(fs)).score
        elif name == "reg":
            values[name] = regression_score(fs, holdout=holdout).score
        elif name == "logme":
            values[name] = logme_classification_score(fs)
        elif name == "lmr":
            values[name] = logme_regression_score(fs)
    return values


def _rank_report_text(task: str, names: list[str], holdout: bool,
                      reports) -> str:
    header = ["rank", "model_id", "fused"]
    for name in names:
        header += [f"raw:{name}", f"norm:{name}"]
    lines = [
        "# modelrank ranking report",
        f"# task: {task}",
        f"# scores: {','.join(names)}",
        f"# holdout: {str(holdout).lower()}",
        "\t".join(header),
    ]
    for position, report in enumerate(reports, start=1):
        row = [str(position), report.model_id, repr(report.fused)]
        for name in names:
            row += [repr(report.raw_scores[name]),
                    repr(report.normalized_scores[name])]
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"


def _rank_report_json(task: str, names: list[str], holdout: bool,
                      reports) -> str:
    doc = {
        "task": task,
        "scores": names,
        "holdout": holdout,
        "records": [
            {
                "rank": position,
                "model_id": report.model_id,
                "fused": report.fused,
                "raw": report.raw_scores,
                "normalized": report.normalized_scores,
            }
            for position, report in enumerate(reports, start=1)
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def cmd_rank(args) -> int:
    try:
        names = _parse_score_list(args.scores, args.task)
        if args.task == "classification":
            banned = CLASSIFICATION_FORBIDDEN.intersection(names)
            if banned:
                raise _ConfigError(
                    f"score '{sorted(banned)[0]}' is not available for "
                    f"task=classification")
    except _ConfigError as exc:
        _fail(str(exc))
        return EXIT_CONFIG

    needs_boxes = bool(BOX_SCORES.intersection(names))
    needs_classes = "cls" in names

    sets: list[FeatureSet] = []
    seen: dict[str, str] = {}
    for directory in args.features:
        try:
            fs = read_feature_set(directory)
        except FeatureStoreError as exc:
            _fail(f"{directory}: {exc}")
            return EXIT_INPUT
        violations = validate_feature_set(fs, require_boxes=False,
                                          require_classes=needs_classes)
        if violations:
            _fail(f"{directory}: {violations[0]}")
            return EXIT_INPUT
        if needs_boxes and not fs.has_boxes:
            _fail(f"{directory}: score requiring boxes enabled but store "
                  f"has none")
            return EXIT_CONFIG
        if fs.model_id in seen:
            _fail(f"{directory}: duplicate model_id '{fs.model_id}' "
                  f"(also in {seen[fs.model_id]})")
            return EXIT_INPUT
        seen[fs.model_id] = str(directory)
        sets.append(fs)

    def score_one(fs: FeatureSet) -> dict[str, float]:
        try:
            return _compute_scores(fs, names, args.holdout)
        except ValueError as exc:
            raise ValueError(f"{seen[fs.model_id]}: {exc}") from exc

    try:
        with ThreadPoolExecutor(max_workers=min(4, len(sets))) as pool:
            score_maps = list(pool.map(score_one, sets))
    except ValueError as exc:
        _fail(str(exc))
        return EXIT_INPUT

    per_model = {fs.model_id: scores for fs, scores in zip(sets, score_maps)}
    reports, ranking = fuse_and_rank(per_model, names)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(_rank_report_text(args.task, names, args.holdout, reports),
                   encoding="utf-8")
    Path(str(out) + ".json").write_text(
        _rank_report_json(args.task, names, args.holdout, reports),
        encoding="utf-8")
    for position, (model_id, fused) in enumerate(ranking.entries, start=1):
        print(f"{position}\t{model_id}\t{fused!r}")
    return EXIT_OK


def _load_report_fused(path) -> dict[str, float]:
    """Read model_id -> fused from a rank report (text or JSON variant)."""
    text = Path(path).read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("{"):
        doc = json.loads(stripped)
        records = doc.get("records")
        if not isinstance(records, list):
            raise ValueError(f"report {path} has no records")
        return {str(rec["model_id"]): float(rec["fused"]) for rec in records}
    fused: dict[str, float] = {}
    for line in text.splitlines():
        if not line or line.startswith("#"):
            continue
        cells = line.split("\t")
        if cells[0] == "rank":
            continue
        if len(cells) < 3:
            raise ValueError(f"report {path}: malformed line '{line}'")
        fused[cells[1]] = float(cells[2])
    if not fused:
        raise ValueError(f"report {path} holds no model records")
    return fused


def _eval_text(evaluation) -> str:
    lines = [
        "# modelrank evaluation",
        f"# k: {','.join(str(k) for k in sorted(evaluation.pr_top))}",
        "dataset\ttau\ttau_weighted",
    ]
    for dataset_id, tau, tau_w in zip(evaluation.dataset_ids,
                                      evaluation.per_dataset_tau,
                                      evaluation.per_dataset_tau_weighted):
        lines.append(f"{dataset_id}\t{tau!r}\t{tau_w!r}")
    lines.append(f"average\t{evaluation.tau_average!r}"
                 f"\t{evaluation.tau_weighted_average!r}")
    for k in sorted(evaluation.pr_top):
        lines.append(f"pr_top\t{k}\t{evaluation.pr_top[k]!r}")
    return "\n".join(lines) + "\n"


def _eval_json(evaluation) -> str:
    doc = {
        "datasets": {
            dataset_id: {"tau": tau, "tau_weighted": tau_w}
            for dataset_id, tau, tau_w in zip(evaluation.dataset_ids,
                                              evaluation.per_dataset_tau,
                                              evaluation.per_dataset_tau_weighted)
        },
        "averages": {
            "tau": evaluation.tau_average,
            "tau_weighted": evaluation.tau_weighted_average,
        },
        "pr_top": {str(k): v for k, v in sorted(evaluation.pr_top.items())},
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def cmd_eval(args) -> int:
    try:
        table = BenchmarkTable.from_csv(args.gt)
    except (OSError, ValueError) as exc:
        _fail(f"{args.gt}: {exc}")
        return EXIT_INPUT

    rankings: dict[str, Ranking] = {}
    for token in args.report:
        dataset_id, sep, path = token.partition("=")
        if not sep or not dataset_id or not path:
            _fail(f"--report expects dataset_id=path, found '{token}'")
            return EXIT_INPUT
        if dataset_id not in table.dataset_ids:
            _fail(f"unknown dataset '{dataset_id}'")
            return EXIT_INPUT
        try:
            fused = _load_report_fused(path)
        except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
            _fail(f"{path}: {exc}")
            return EXIT_INPUT
        rankings[dataset_id] = rank_scores(fused)

    if not rankings:
        _fail("no --report entries given")
        return EXIT_INPUT

    try:
        ks = sorted({int(token) for token in args.k.split(",") if token.strip()})
        if not ks:
            raise ValueError("empty --k list")
    except ValueError as exc:
        _fail(f"--k: {exc}")
        return EXIT_INPUT

    try:
        sub_table = table.restrict(list(rankings))
        evaluation = evaluate_benchmark(sub_table, rankings, ks)
    except ValueError as exc:
        _fail(str(exc))
        return EXIT_INPUT

    text = _eval_text(evaluation)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")
        Path(str(out) + ".json").write_text(_eval_json(evaluation),
                                            encoding="utf-8")
    else:
        print(text, end="")
    return EXIT_OK


def cmd_inspect(args) -> int:
    try:
        fs = read_feature_set(args.feature_dir)
    except FeatureStoreError as exc:
        _fail(str(exc))
        return EXIT_INPUT

    violations = validate_feature_set(fs)
    counts = Counter(int(v) for v in fs.labels)
    count_text = " ".join(f"{cls}={counts[cls]}" for cls in sorted(counts))
    print(f"model_id: {fs.model_id}")
    print(f"dataset_id: {fs.dataset_id}")
    print(f"k: {fs.k}")
    print(f"h: {fs.h}")
    print(f"c: {fs.class_count}")
    print(f"has_boxes: {str(fs.has_boxes).lower()}")
    print(f"class_counts: {count_text}")
    print(f"status: {'valid' if not violations else 'invalid'}")
    for violation in violations:
        print(f"violation: {violation}")
    return EXIT_OK if not violations else EXIT_INPUT


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modelrank",
        description="Rank pre-trained models by transferability scores "
                    "computed on extracted features.")
    sub = parser.add_subparsers(dest="command", required=True)

    rank = sub.add_parser("rank", help="score feature stores and rank models")
    rank.add_argument("--task", required=True,
                      choices=("classification", "detection"))
    rank.add_argument("--scores", default=None,
                      help="comma list from: " + ",".join(SCORE_NAMES))
    rank.add_argument("--features", action="extend", nargs="+", required=True,
                      metavar="DIR", help="feature-store directory, repeatable")
    rank.add_argument("--holdout", action="store_true",
                      help="7:3 holdout variant of the regression score")
    rank.add_argument("--out", required=True,
                      help="report path (JSON variant written alongside)")
    rank.set_defaults(func=cmd_rank)

    ev = sub.add_parser("eval", help="evaluate rankings against ground truth")
    ev.add_argument("--gt", required=True, help="benchmark table CSV")
    ev.add_argument("--report", action="extend", nargs="+", required=True,
                    metavar="DATASET=PATH", help="rank report per dataset")
    ev.add_argument("--k", default="1,2,3", help="comma list of top-k values")
    ev.add_argument("--out", default=None,
                    help="write the document here instead of stdout")
    ev.set_defaults(func=cmd_eval)

    inspect = sub.add_parser("inspect", help="summarize a feature store")
    inspect.add_argument("feature_dir")
    inspect.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
