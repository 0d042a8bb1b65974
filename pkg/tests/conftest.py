"""Shared test helpers."""

from importlib import resources
from pathlib import Path

import numpy as np
import pytest

from modelrank import FeatureSet


def fixture_path(name: str) -> Path:
    return Path(str(resources.files("modelrank") / "fixtures" / name))


def make_feature_set(rng, k=12, h=6, c=3, with_boxes=False, separation=1.0,
                     model_id="m0", dataset_id="d0") -> FeatureSet:
    """Random Gaussian-blob FeatureSet; every class is guaranteed a sample."""
    assert k >= c
    labels = rng.integers(0, c, size=k)
    labels[:c] = np.arange(c)
    means = separation * rng.standard_normal((c, h))
    feats = means[labels] + rng.standard_normal((k, h))
    boxes = rng.uniform(0.0, 1.0, size=(k, 4)) if with_boxes else None
    return FeatureSet(features=feats, labels=labels, class_count=c,
                      model_id=model_id, dataset_id=dataset_id, boxes=boxes)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
