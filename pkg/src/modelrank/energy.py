"""Label-free energy transferability score.

The free energy of a feature row is -logsumexp(row); a model whose features
put target samples at low energy (high logsumexp mass) transfers better, so
the score is the negated mean energy over samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._util import ordered_mean
from .store import FeatureSet


@dataclass(frozen=True)
class EnergyResult:
    per_sample_energy: np.ndarray
    score: float


def _row_free_energies(rows: np.ndarray) -> np.ndarray:
    # max-shifted logsumexp keeps exp() in range for entries up to ~1e308;
    # the shifted matrix is the only full-size temporary (f32 rows widen
    # exactly, so subtracting in f64 matches converting first) and exp()
    # reuses it in place
    shift = rows.max(axis=1).astype(np.float64, copy=False)
    work = np.subtract(rows, shift[:, None], dtype=np.float64)
    np.exp(work, out=work)
    spread = np.log(work.sum(axis=1))
    return -(shift + spread)


def free_energy(row) -> float:
    """-logsumexp of one feature row, computed with a max shift."""
    arr = np.asarray(row, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError("free energy of an empty row")
    if not np.isfinite(arr).all():
        raise ValueError("non-finite entries in feature row")
    return float(_row_free_energies(arr[None, :])[0])


def energy_score(fs: FeatureSet) -> EnergyResult:
    """Mean negated free energy over all K samples; labels and boxes unused."""
    feats = np.asarray(fs.features)
    if feats.ndim != 2 or feats.shape[0] == 0 or feats.shape[1] == 0:
        raise ValueError(f"features must be a non-empty 2-D matrix, "
                         f"found shape {feats.shape}")
    if not np.isfinite(feats).all():
        raise ValueError("non-finite entries in features")
    energies = _row_free_energies(feats)
    return EnergyResult(per_sample_energy=energies,
                        score=-ordered_mean(energies))


def softmax_energy_identity(logits) -> tuple[float, float]:
    """Two routes to log(max softmax): direct, and max + free energy.

    Diagnostic used by the test suite: the left side evaluates the softmax
    explicitly and takes log of its largest probability; the right side is
    max(logits) plus the (max-shifted) free energy. The two agree to said
    64-bit rounding for well-scaled inputs.
    """
    z = np.asarray(logits, dtype=np.float64).ravel()
    if z.size == 0:
        raise ValueError("identity of an empty logit vector")
    if not np.isfinite(z).all():
        raise ValueError("non-finite logit entries")
    exps = np.exp(z)
    lhs = float(np.log(exps.max() / exps.sum()))
    rhs = float(z.max() + _row_free_energies(z[None, :])[0])
    return lhs, rhs
