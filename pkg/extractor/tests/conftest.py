import numpy as np
import pytest
import torch
from PIL import Image

from toynets import ToyBackbone

CLASS_NAMES = ("bird", "cat", "dog", "fish")
IMAGES_PER_CLASS = 5


def _write_image(path, rng, base):
    arr = np.clip(base + rng.integers(0, 60, size=(32, 32, 3)),
                  0, 255).astype(np.uint8)
    Image.fromarray(arr).save(path)


@pytest.fixture
def image_writer():
    return _write_image


@pytest.fixture(scope="session")
def classification_root(tmp_path_factory):
    """20 images, 4 classes, deterministic pixel content."""
    root = tmp_path_factory.mktemp("toyset")
    rng = np.random.default_rng(0)
    for class_id, name in enumerate(CLASS_NAMES):
        class_dir = root / name
        class_dir.mkdir()
        for i in range(IMAGES_PER_CLASS):
            _write_image(class_dir / f"img{i:02d}.png", rng, 50 * class_id)
    return root


@pytest.fixture(scope="session")
def single_class_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("oneclass")
    rng = np.random.default_rng(1)
    class_dir = root / "only"
    class_dir.mkdir()
    for i in range(3):
        _write_image(class_dir / f"img{i}.png", rng, 100)
    return root


@pytest.fixture(scope="session")
def detection_root(tmp_path_factory):
    """3 images, 5 boxes; img2 deliberately has no boxes."""
    root = tmp_path_factory.mktemp("toydet")
    images = root / "images"
    images.mkdir()
    rng = np.random.default_rng(2)
    for i in range(3):
        _write_image(images / f"img{i}.png", rng, 60 + 40 * i)
    (root / "annotations.txt").write_text(
        "img0 0 0.3 0.3 0.2 0.2\n"
        "img0 1 0.7 0.6 0.25 0.3\n"
        "img1 0 0.5 0.5 0.4 0.4\n"
        "img1 2 0.2 0.8 0.15 0.2\n"
        "img1 1 0.8 0.2 0.2 0.15\n")
    return root


@pytest.fixture(scope="session")
def scripted_backbone(tmp_path_factory):
    """TorchScript checkpoint with fixed weights; forward yields 4-D maps."""
    torch.manual_seed(7)
    module = ToyBackbone().eval()
    path = tmp_path_factory.mktemp("ckpt") / "backbone.pt"
    torch.jit.save(torch.jit.script(module), str(path))
    return path
