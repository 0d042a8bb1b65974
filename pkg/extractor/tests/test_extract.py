"""Extraction pipeline behavior with injected toy networks."""

import json

import numpy as np
import pytest
import torch

from featdump import (DataError, ExtractionJob, TapError,
                      extract_classification, extract_detection, tap_points)
from toynets import ToyBackbone, ToyClassifier, ToyVectorNet


def job_for(root, out, task="classification", **kwargs):
    return ExtractionJob(model="injected", data=str(root), task=task,
                         out=str(out), **kwargs)


class TestJobValidation:
    def test_unknown_task(self):
        with pytest.raises(ValueError, match="task must be one of"):
            ExtractionJob(model="m", data="d", task="segmentation")

    def test_bad_batch_size(self):
        with pytest.raises(ValueError, match="batch_size"):
            ExtractionJob(model="m", data="d", task="detection", batch_size=0)


class TestClassification:
    def test_prehead_default_tap(self, classification_root, tmp_path):
        torch.manual_seed(0)
        module = ToyClassifier(channels=16, classes=4).eval()
        path = extract_classification(
            job_for(classification_root, tmp_path / "store"), module)

        manifest = json.loads((path / "manifest.json").read_text())
        assert manifest["k"] == 20
        assert manifest["h"] == 16          # pre-head width, not class count
        assert manifest["c"] == 4
        labels = np.frombuffer((path / "labels.i32").read_bytes(),
                               dtype="<i4")
        # image-folder convention: labels follow sorted class dirs
        assert labels.tolist() == sum(([c] * 5 for c in range(4)), [])

    def test_named_layer_tap_pools_maps(self, classification_root, tmp_path):
        torch.manual_seed(0)
        module = ToyClassifier(channels=16).eval()
        path = extract_classification(
            job_for(classification_root, tmp_path / "store",
                    layer="backbone.stem"), module)
        manifest = json.loads((path / "manifest.json").read_text())
        assert manifest["h"] == 8           # stem output channels

    def test_vector_output_net(self, classification_root, tmp_path):
        torch.manual_seed(0)
        module = ToyVectorNet(dim=12).eval()
        path = extract_classification(
            job_for(classification_root, tmp_path / "store"), module)
        manifest = json.loads((path / "manifest.json").read_text())
        assert manifest["h"] == 12

    def test_unknown_layer_lists_tap_points(self, classification_root,
                                            tmp_path):
        module = ToyClassifier().eval()
        with pytest.raises(TapError, match="unknown layer 'nope'") as info:
            extract_classification(
                job_for(classification_root, tmp_path / "s", layer="nope"),
                module)
        message = str(info.value)
        for name in ("backbone.stem", "fc", "pool"):
            assert name in message
        assert sorted(tap_points(module)) == tap_points(module)

    def test_single_class_flagged(self, single_class_root, tmp_path, capsys):
        module = ToyClassifier().eval()
        path = extract_classification(
            job_for(single_class_root, tmp_path / "store"), module)
        err = capsys.readouterr().err
        assert "single-class dataset" in err
        assert "C >= 2" in err
        manifest = json.loads((path / "manifest.json").read_text())
        assert manifest["c"] == 1
        assert manifest["k"] == 3

    def test_empty_root_rejected(self, tmp_path):
        (tmp_path / "empty").mkdir()
        with pytest.raises(DataError, match="no class directories"):
            extract_classification(
                job_for(tmp_path / "empty", tmp_path / "s"),
                ToyClassifier().eval())

    def test_imageless_class_rejected(self, tmp_path):
        root = tmp_path / "data"
        (root / "hollow").mkdir(parents=True)
        with pytest.raises(DataError, match="'hollow' has no images"):
            extract_classification(job_for(root, tmp_path / "s"),
                                   ToyClassifier().eval())

    def test_batch_size_does_not_change_bytes(self, classification_root,
                                              tmp_path):
        torch.manual_seed(0)
        module = ToyClassifier().eval()
        a = extract_classification(
            job_for(classification_root, tmp_path / "a", batch_size=16),
            module)
        b = extract_classification(
            job_for(classification_root, tmp_path / "b", batch_size=3),
            module)
        assert ((a / "features.f32").read_bytes()
                == (b / "features.f32").read_bytes())
        assert ((a / "manifest.json").read_bytes()
                == (b / "manifest.json").read_bytes())


class TestDetection:
    def test_bundle_layout(self, detection_root, tmp_path):
        torch.manual_seed(0)
        path = extract_detection(
            job_for(detection_root, tmp_path / "bundle", task="detection"),
            ToyBackbone().eval())

        manifest = json.loads((path / "maps_manifest.json").read_text())
        # every image mapped, the box-less img2 included
        assert [m["image_id"] for m in manifest["maps"]] == ["img0", "img1",
                                                             "img2"]
        assert (path / "feat_img2.f32").is_file()
        lines = (path / "annotations.txt").read_text().strip().splitlines()
        assert len(lines) == 5
        for entry in manifest["maps"]:
            assert entry["image_height"] == 32
            assert entry["image_width"] == 32

    def test_out_of_bounds_box_clamped_and_logged(self, tmp_path, capsys,
                                                  image_writer):
        root = tmp_path / "det"
        (root / "images").mkdir(parents=True)
        image_writer(root / "images" / "wide.png", np.random.default_rng(5),
                     80)
        (root / "annotations.txt").write_text(
            "wide 0 0.9 0.5 0.4 0.3\nwide 1 0.3 0.3 0.2 0.2\n")

        path = extract_detection(job_for(root, tmp_path / "out",
                                         task="detection"),
                                 ToyBackbone().eval())
        err = capsys.readouterr().err
        assert "clamped box on annotation line 1" in err
        # the in-bounds box is neither logged nor perturbed
        assert "line 2" not in err
        lines = (path / "annotations.txt").read_text().strip().splitlines()
        cx, cy, w, h = (float(v) for v in lines[0].split()[2:6])
        assert cx + w / 2.0 <= 1.0 + 1e-12
        assert (cx, cy, w, h) != (0.9, 0.5, 0.4, 0.3)
        assert tuple(float(v) for v in lines[1].split()[2:6]) == (
            0.3, 0.3, 0.2, 0.2)

    def test_fully_outside_box_rejected(self, tmp_path, image_writer):
        root = tmp_path / "det"
        (root / "images").mkdir(parents=True)
        image_writer(root / "images" / "a.png", np.random.default_rng(6), 80)
        (root / "annotations.txt").write_text("a 0 1.9 0.5 0.2 0.2\n")
        with pytest.raises(DataError, match="lies outside the image"):
            extract_detection(job_for(root, tmp_path / "out",
                                      task="detection"),
                              ToyBackbone().eval())

    def test_missing_image_rejected(self, tmp_path, image_writer):
        root = tmp_path / "det"
        (root / "images").mkdir(parents=True)
        image_writer(root / "images" / "a.png", np.random.default_rng(7), 80)
        (root / "annotations.txt").write_text("ghost 0 0.5 0.5 0.2 0.2\n")
        with pytest.raises(DataError,
                           match="annotation references missing image 'ghost'"):
            extract_detection(job_for(root, tmp_path / "out",
                                      task="detection"),
                              ToyBackbone().eval())

    def test_vector_net_rejected_for_maps(self, detection_root, tmp_path):
        with pytest.raises(TapError, match="must be spatial"):
            extract_detection(job_for(detection_root, tmp_path / "out",
                                      task="detection"),
                              ToyVectorNet().eval())

    def test_malformed_annotation_line(self, tmp_path, image_writer):
        root = tmp_path / "det"
        (root / "images").mkdir(parents=True)
        image_writer(root / "images" / "a.png", np.random.default_rng(8), 80)
        (root / "annotations.txt").write_text("a 0 0.5 0.5\n")
        with pytest.raises(DataError, match="expected 6 fields, found 4"):
            extract_detection(job_for(root, tmp_path / "out",
                                      task="detection"),
                              ToyBackbone().eval())
