import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import make_feature_set

from modelrank.cli import main
from modelrank.store import fnv1a_64, write_feature_set


def build_store(directory, rng, model_id, *, separation=1.0, with_boxes=True,
                c=3, k=24, h=6):
    fs = make_feature_set(rng, k=k, h=h, c=c, with_boxes=with_boxes,
                          separation=separation, model_id=model_id,
                          dataset_id="toy")
    write_feature_set(fs, directory)
    return directory


def three_detection_stores(tmp_path, rng):
    dirs = []
    for model_id, separation in (("ma", 0.2), ("mb", 1.0), ("mc", 3.0)):
        dirs.append(str(build_store(tmp_path / model_id, rng, model_id,
                                    separation=separation)))
    return dirs


def corrupt_feature_bytes(directory):
    target = directory / "features.f32"
    raw = bytearray(target.read_bytes())
    raw[0] ^= 0xFF
    target.write_bytes(bytes(raw))


class TestRank:
    def test_detection_end_to_end(self, tmp_path, rng, capsys):
        dirs = three_detection_stores(tmp_path, rng)
        out = tmp_path / "report.txt"
        code = main(["rank", "--task", "detection",
                     "--features", *dirs, "--out", str(out)])
        assert code == 0

        text = out.read_text()
        lines = text.splitlines()
        assert lines[0] == "# modelrank ranking report"
        assert lines[1] == "# task: detection"
        assert lines[2] == "# scores: cls,energy,reg"
        assert lines[3] == "# holdout: false"
        assert lines[4].split("\t") == [
            "rank", "model_id", "fused",
            "raw:cls", "norm:cls", "raw:energy", "norm:energy",
            "raw:reg", "norm:reg"]
        rows = [line.split("\t") for line in lines[5:]]
        assert [row[0] for row in rows] == ["1", "2", "3"]
        assert {row[1] for row in rows} == {"ma", "mb", "mc"}
        fused = [float(row[2]) for row in rows]
        assert fused == sorted(fused, reverse=True)
        assert all(0.0 <= f <= 3.0 for f in fused)

        doc = json.loads((tmp_path / "report.txt.json").read_text())
        assert doc["task"] == "detection"
        assert doc["scores"] == ["cls", "energy", "reg"]
        assert [rec["rank"] for rec in doc["records"]] == [1, 2, 3]
        assert [rec["model_id"] for rec in doc["records"]] == [r[1] for r in rows]

        ranked_lines = capsys.readouterr().out.splitlines()
        assert len(ranked_lines) == 3
        assert ranked_lines[0].split("\t")[0] == "1"

    def test_rerun_byte_identical(self, tmp_path, rng):
        dirs = three_detection_stores(tmp_path, rng)
        out1 = tmp_path / "r1.txt"
        out2 = tmp_path / "r2.txt"
        assert main(["rank", "--task", "detection",
                     "--features", *dirs, "--out", str(out1)]) == 0
        assert main(["rank", "--task", "detection",
                     "--features", *dirs, "--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()
        assert (tmp_path / "r1.txt.json").read_bytes() == \
            (tmp_path / "r2.txt.json").read_bytes()

    def test_explicit_scores_match_default(self, tmp_path, rng):
        dirs = three_detection_stores(tmp_path, rng)
        out_default = tmp_path / "default.txt"
        out_explicit = tmp_path / "explicit.txt"
        assert main(["rank", "--task", "detection",
                     "--features", *dirs, "--out", str(out_default)]) == 0
        assert main(["rank", "--task", "detection",
                     "--scores", "reg,energy,cls",
                     "--features", *dirs, "--out", str(out_explicit)]) == 0
        assert out_default.read_bytes() == out_explicit.read_bytes()

    def test_classification_defaults(self, tmp_path, rng, capsys):
        dirs = [str(build_store(tmp_path / mid, rng, mid, with_boxes=False))
                for mid in ("ma", "mb")]
        out = tmp_path / "cls.txt"
        code = main(["rank", "--task", "classification",
                     "--features", *dirs, "--out", str(out)])
        assert code == 0
        assert "# scores: cls,energy" in out.read_text()
        capsys.readouterr()

    def test_logme_score_available(self, tmp_path, rng, capsys):
        dirs = [str(build_store(tmp_path / mid, rng, mid, with_boxes=False))
                for mid in ("ma", "mb")]
        out = tmp_path / "lm.txt"
        code = main(["rank", "--task", "classification", "--scores", "logme",
                     "--features", *dirs, "--out", str(out)])
        assert code == 0
        assert "# scores: logme" in out.read_text()
        capsys.readouterr()

    def test_regression_score_forbidden_for_classification(self, tmp_path, rng,
                                                           capsys):
        dirs = [str(build_store(tmp_path / mid, rng, mid)) for mid in ("ma", "mb")]
        code = main(["rank", "--task", "classification", "--scores", "reg",
                     "--features", *dirs, "--out", str(tmp_path / "r.txt")])
        assert code == 3
        assert "not available for task=classification" in capsys.readouterr().err

    def test_unknown_score_rejected(self, tmp_path, rng, capsys):
        dirs = [str(build_store(tmp_path / mid, rng, mid)) for mid in ("ma", "mb")]
        code = main(["rank", "--task", "detection", "--scores", "bogus",
                     "--features", *dirs, "--out", str(tmp_path / "r.txt")])
        assert code == 3
        assert "unknown score 'bogus'" in capsys.readouterr().err

    def test_empty_score_list_rejected(self, tmp_path, rng, capsys):
        code = main(["rank", "--task", "detection", "--scores", ",",
                     "--features", str(tmp_path), "--out", str(tmp_path / "r")])
        assert code == 3
        assert "empty --scores" in capsys.readouterr().err

    def test_box_score_on_boxless_store(self, tmp_path, rng, capsys):
        dirs = [str(build_store(tmp_path / mid, rng, mid, with_boxes=False))
                for mid in ("ma", "mb")]
        code = main(["rank", "--task", "detection",
                     "--features", *dirs, "--out", str(tmp_path / "r.txt")])
        assert code == 3
        assert "requiring boxes" in capsys.readouterr().err

    def test_corrupted_store_named_in_error(self, tmp_path, rng, capsys):
        dirs = three_detection_stores(tmp_path, rng)
        corrupt_feature_bytes(tmp_path / "mb")
        code = main(["rank", "--task", "detection",
                     "--features", *dirs, "--out", str(tmp_path / "r.txt")])
        assert code == 2
        err = capsys.readouterr().err
        assert "checksum mismatch" in err
        assert "mb" in err

    def test_duplicate_model_id_rejected(self, tmp_path, rng, capsys):
        first = str(build_store(tmp_path / "one", rng, "dup"))
        second = str(build_store(tmp_path / "two", rng, "dup"))
        code = main(["rank", "--task", "detection",
                     "--features", first, second,
                     "--out", str(tmp_path / "r.txt")])
        assert code == 2
        assert "duplicate model_id 'dup'" in capsys.readouterr().err

    def test_single_class_store_rejected_for_cls(self, tmp_path, rng, capsys):
        dirs = [str(build_store(tmp_path / mid, rng, mid, c=1))
                for mid in ("ma", "mb")]
        code = main(["rank", "--task", "detection",
                     "--features", *dirs, "--out", str(tmp_path / "r.txt")])
        assert code == 2
        assert "C >= 2" in capsys.readouterr().err


class TestInspect:
    def test_valid_store(self, tmp_path, rng, capsys):
        build_store(tmp_path / "ma", rng, "ma", k=24, h=6, c=3)
        code = main(["inspect", str(tmp_path / "ma")])
        assert code == 0
        out = capsys.readouterr().out
        assert "model_id: ma" in out
        assert "dataset_id: toy" in out
        assert "k: 24" in out
        assert "h: 6" in out
        assert "c: 3" in out
        assert "has_boxes: true" in out
        assert "class_counts: " in out
        assert "status: valid" in out

    def test_checksum_mismatch(self, tmp_path, rng, capsys):
        build_store(tmp_path / "ma", rng, "ma")
        corrupt_feature_bytes(tmp_path / "ma")
        code = main(["inspect", str(tmp_path / "ma")])
        assert code == 2
        assert "checksum mismatch" in capsys.readouterr().err

    def test_missing_manifest(self, tmp_path, capsys):
        code = main(["inspect", str(tmp_path)])
        assert code == 2
        assert "manifest missing" in capsys.readouterr().err

    def test_out_of_range_label_flagged(self, tmp_path, rng, capsys):
        # forge a store that reads cleanly but violates the label range
        directory = tmp_path / "ma"
        build_store(directory, rng, "ma", c=3)
        labels_path = directory / "labels.i32"
        labels = np.frombuffer(labels_path.read_bytes(), dtype="<i4").copy()
        labels[0] = 3
        raw = labels.tobytes()
        labels_path.write_bytes(raw)
        manifest_path = directory / "manifest.json"
        doc = json.loads(manifest_path.read_text())
        doc["checksums"]["labels.i32"] = fnv1a_64(raw)
        manifest_path.write_text(json.dumps(doc))

        code = main(["inspect", str(directory)])
        assert code == 2
        out = capsys.readouterr().out
        assert "status: invalid" in out
        assert "violation: label 3 at row 0 outside [0, 3)" in out


def write_json_report(path, fused):
    records = [{"model_id": mid, "fused": value, "rank": i + 1,
                "raw": {}, "normalized": {}}
               for i, (mid, value) in enumerate(fused.items())]
    path.write_text(json.dumps({"task": "detection", "scores": [],
                                "holdout": False, "records": records}))
    return str(path)


def write_text_report(path, fused):
    lines = ["# modelrank ranking report", "rank\tmodel_id\tfused"]
    for i, (mid, value) in enumerate(fused.items(), start=1):
        lines.append(f"{i}\t{mid}\t{value!r}")
    path.write_text("\n".join(lines) + "\n")
    return str(path)


@pytest.fixture
def gt_csv(tmp_path):
    path = tmp_path / "gt.csv"
    path.write_text("model_id,dsA,dsB\n"
                    "m0,0.10,0.90\n"
                    "m1,0.20,0.80\n"
                    "m2,0.30,0.70\n")
    return path


class TestEval:
    def test_oracle_reports_score_perfectly(self, tmp_path, gt_csv, capsys):
        report_a = write_json_report(tmp_path / "a.json",
                                     {"m0": 0.10, "m1": 0.20, "m2": 0.30})
        report_b = write_text_report(tmp_path / "b.txt",
                                     {"m0": 0.90, "m1": 0.80, "m2": 0.70})
        code = main(["eval", "--gt", str(gt_csv),
                     "--report", f"dsA={report_a}", f"dsB={report_b}"])
        assert code == 0
        out = capsys.readouterr().out
        lines = out.splitlines()
        assert lines[0] == "# modelrank evaluation"
        assert lines[1] == "# k: 1,2,3"
        assert lines[2] == "dataset\ttau\ttau_weighted"
        assert "dsA\t1.0\t1.0" in lines
        assert "dsB\t1.0\t1.0" in lines
        assert "average\t1.0\t1.0" in lines
        assert "pr_top\t1\t1.0" in lines
        assert "pr_top\t3\t1.0" in lines

    def test_reversed_reports_score_antiperfectly(self, tmp_path, gt_csv, capsys):
        report_a = write_json_report(tmp_path / "a.json",
                                     {"m0": -0.10, "m1": -0.20, "m2": -0.30})
        report_b = write_json_report(tmp_path / "b.json",
                                     {"m0": -0.90, "m1": -0.80, "m2": -0.70})
        code = main(["eval", "--gt", str(gt_csv), "--k", "1",
                     "--report", f"dsA={report_a}", f"dsB={report_b}"])
        assert code == 0
        out = capsys.readouterr().out
        assert "average\t-1.0\t-1.0" in out
        assert "pr_top\t1\t0.0" in out

    def test_single_dataset_restricts_table(self, tmp_path, gt_csv, capsys):
        report_a = write_json_report(tmp_path / "a.json",
                                     {"m0": 0.10, "m1": 0.20, "m2": 0.30})
        code = main(["eval", "--gt", str(gt_csv),
                     "--report", f"dsA={report_a}"])
        assert code == 0
        out = capsys.readouterr().out
        assert "dsA\t" in out
        assert "dsB" not in out

    def test_out_writes_text_and_json(self, tmp_path, gt_csv, capsys):
        report_a = write_json_report(tmp_path / "a.json",
                                     {"m0": 0.10, "m1": 0.20, "m2": 0.30})
        out_path = tmp_path / "eval.txt"
        code = main(["eval", "--gt", str(gt_csv),
                     "--report", f"dsA={report_a}", "--out", str(out_path)])
        assert code == 0
        assert capsys.readouterr().out == ""
        assert "# modelrank evaluation" in out_path.read_text()
        doc = json.loads((tmp_path / "eval.txt.json").read_text())
        assert doc["averages"] == {"tau": 1.0, "tau_weighted": 1.0}
        assert doc["datasets"]["dsA"]["tau"] == 1.0
        assert doc["pr_top"] == {"1": 1.0, "2": 1.0, "3": 1.0}

    def test_missing_gt_file(self, tmp_path, capsys):
        code = main(["eval", "--gt", str(tmp_path / "nope.csv"),
                     "--report", "dsA=whatever"])
        assert code == 2
        assert "nope.csv" in capsys.readouterr().err

    def test_malformed_report_token(self, tmp_path, gt_csv, capsys):
        code = main(["eval", "--gt", str(gt_csv), "--report", "dsAonly"])
        assert code == 2
        assert "expects dataset_id=path" in capsys.readouterr().err

    def test_unknown_dataset_token(self, tmp_path, gt_csv, capsys):
        code = main(["eval", "--gt", str(gt_csv), "--report", "dsZ=x.json"])
        assert code == 2
        assert "unknown dataset 'dsZ'" in capsys.readouterr().err

    def test_missing_report_file(self, tmp_path, gt_csv, capsys):
        code = main(["eval", "--gt", str(gt_csv),
                     "--report", f"dsA={tmp_path / 'absent.json'}"])
        assert code == 2
        assert "absent.json" in capsys.readouterr().err

    def test_report_missing_model_named(self, tmp_path, gt_csv, capsys):
        report_a = write_json_report(tmp_path / "a.json",
                                     {"m0": 0.10, "m2": 0.30})
        code = main(["eval", "--gt", str(gt_csv),
                     "--report", f"dsA={report_a}"])
        assert code == 2
        assert "missing model 'm1'" in capsys.readouterr().err

    def test_bad_k_values(self, tmp_path, gt_csv, capsys):
        report_a = write_json_report(tmp_path / "a.json",
                                     {"m0": 0.10, "m1": 0.20, "m2": 0.30})
        code = main(["eval", "--gt", str(gt_csv), "--k", "1,x",
                     "--report", f"dsA={report_a}"])
        assert code == 2
        assert "--k" in capsys.readouterr().err

        code = main(["eval", "--gt", str(gt_csv), "--k", "9",
                     "--report", f"dsA={report_a}"])
        assert code == 2
        assert "outside" in capsys.readouterr().err


class TestEntryPoint:
    def test_module_invocation(self, tmp_path, rng):
        build_store(tmp_path / "ma", rng, "ma")
        proc = subprocess.run(
            [sys.executable, "-m", "modelrank", "inspect", str(tmp_path / "ma")],
            capture_output=True, text=True)
        assert proc.returncode == 0
        assert "status: valid" in proc.stdout
