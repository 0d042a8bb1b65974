"""Small shared numeric helpers."""

from __future__ import annotations

from typing import Iterable

import numpy as np


def ordered_mean(values: Iterable[float]) -> float:
    """Mean with strictly sequential, index-ordered accumulation.

    Reductions over samples must be bit-reproducible across runs and
    independent of any internal blocking, so the sum is a plain
    left-to-right loop rather than a vectorized reduce.
    """
    total = 0.0
    count = 0
    for v in np.asarray(values, dtype=np.float64).ravel():
        total += float(v)
        count += 1
    if count == 0:
        raise ValueError("mean of an empty sequence")
    return total / count
