"""featdump command line: one extraction job per invocation."""

from __future__ import annotations

import argparse
import sys

from .datasets import DataError
from .extract import TASKS, ExtractionJob, run_job
from .models import ModelError, TapError

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CONFIG = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="featdump",
        description="Run a pre-trained vision backbone over a dataset and "
                    "write feature stores for transferability scoring.")
    parser.add_argument("--model", required=True,
                        help="TorchScript checkpoint path or torchvision:<name>")
    parser.add_argument("--data", required=True, help="dataset root directory")
    parser.add_argument("--task", required=True, choices=TASKS)
    parser.add_argument("--layer", default=None,
                        help="named submodule to tap (default: pre-head)")
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--out", required=True, help="output directory")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        job = ExtractionJob(model=args.model, data=args.data, task=args.task,
                            layer=args.layer, batch_size=args.batch_size,
                            out=args.out)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        run_job(job)
    except TapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ModelError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
