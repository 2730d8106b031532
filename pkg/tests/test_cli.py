import csv
import json

import numpy as np
import pytest

from credit_mlp.cli import build_parser, cmd_compare_external, main, read_scores
from credit_mlp.errors import DataError


@pytest.fixture(scope="module")
def panel_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("panel")
    assert main(["generate", "--companies", "80", "--seed", "2", "--out-dir", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def trained(panel_dir, tmp_path_factory):
    run = tmp_path_factory.mktemp("run")
    argv = ["train", "--features", str(panel_dir / "features.csv"), "--labels", str(panel_dir / "labels.csv"),
            "--epochs", "20", "--width", "6", "--out-dir", str(run)]
    assert main(argv) == 0
    return run


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestGenerate:
    def test_files_and_counts(self, panel_dir):
        assert len(rows(panel_dir / "labels.csv")) == 80 * 7
        assert len(rows(panel_dir / "features.csv")) == 80 * 7
        assert (panel_dir / "manifest.csv").exists()

    def test_zero_companies_writes_headers_only(self, tmp_path):
        assert main(["generate", "--companies", "0", "--out-dir", str(tmp_path)]) == 0
        assert len((tmp_path / "features.csv").read_text().splitlines()) == 1
        assert (tmp_path / "labels.csv").read_text().splitlines() == ["company_id,fiscal_year,rating"]

    def test_synth_config_file(self, tmp_path):
        cfg = tmp_path / "synth.yaml"
        cfg.write_text("companies: 4\nincomplete_companies: 0\nyears: 3\nfeature_dim: 43\n")
        assert main(["generate", "--synth-config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 0
        assert len(rows(tmp_path / "o" / "labels.csv")) == 12

    def test_same_seed_same_bytes(self, tmp_path):
        for name in ("a", "b"):
            main(["generate", "--companies", "5", "--seed", "3", "--out-dir", str(tmp_path / name)])
        assert (tmp_path / "a" / "features.csv").read_bytes() == (tmp_path / "b" / "features.csv").read_bytes()


class TestTrainScore:
    def test_artifacts(self, trained):
        for name in ("model.json", "history.csv", "report.json", "report_confusion.csv", "report_confusion.svg",
                     "test_predictions.csv", "test_features.csv"):
            assert (trained / name).exists(), name
        report = json.loads((trained / "report.json").read_text())
        assert report["head"] == "classification" and 0 <= report["accuracy"] <= 1

    def test_score_matches_training_predictions(self, trained, tmp_path):
        out = tmp_path / "scores.csv"
        assert main(["score", "--model", str(trained / "model.json"), "--features", str(trained / "test_features.csv"), "--output", str(out)]) == 0
        scored = rows(out)
        expected = rows(trained / "test_predictions.csv")
        assert [r["class_index"] for r in scored] == [r["class_index"] for r in expected]
        assert (tmp_path / "scores.summary.json").exists()

    def test_ingest_check(self, panel_dir, capsys):
        assert main(["ingest-check", "--features", str(panel_dir / "features.csv"), "--labels", str(panel_dir / "labels.csv")]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["samples"] == 7 * summary["companies"] and summary["features"] == 43

    def test_score_wrong_feature_count(self, trained, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("company_id,fiscal_year,f00\nX,2020,1.0\n")
        assert main(["score", "--model", str(trained / "model.json"), "--features", str(bad)]) == 2

    def test_tampered_model_is_data_error(self, trained, tmp_path):
        tampered = tmp_path / "m.json"
        tampered.write_text((trained / "model.json").read_text().replace('"head": "classification"', '"head": "regression"'))
        assert main(["score", "--model", str(tampered), "--features", str(trained / "test_features.csv")]) == 2


class TestTrend:
    def write_scores(self, path, series):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["company_id", "fiscal_year", "score"])
            for cid, pts in series.items():
                for year, s in pts:
                    w.writerow([cid, year, s])

    def test_positive_slope(self, tmp_path):
        self.write_scores(tmp_path / "s.csv", {"a": [(2016, 1.0), (2017, 2.0)], "b": [(2016, 0.0), (2017, 0.0), (2018, 3.0)]})
        assert main(["trend", "--scores", str(tmp_path / "s.csv"), "--out-dir", str(tmp_path / "t")]) == 0
        result = json.loads((tmp_path / "t" / "trend.json").read_text())
        assert result["mean_slope"] == pytest.approx((1.0 + 1.5) / 2)
        assert (tmp_path / "t" / "trend.svg").exists()

    def test_single_year_companies_only(self, tmp_path):
        self.write_scores(tmp_path / "s.csv", {"a": [(2016, 1.0)]})
        assert main(["trend", "--scores", str(tmp_path / "s.csv"), "--out-dir", str(tmp_path / "t")]) == 2


class TestCompareExternal:
    def setup_files(self, tmp_path, model, external, column="score"):
        with open(tmp_path / "m.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["company_id", "score"])
            w.writerows([[f"c{i}", s] for i, s in enumerate(model)])
        with open(tmp_path / "e.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["company_id", column])
            w.writerows([[f"c{i}", s] for i, s in enumerate(external)])

    def test_higher_is_better_expects_negative(self, tmp_path):
        self.setup_files(tmp_path, [0, 1, 2, 3, 4], [90, 80, 60, 65, 10])
        result = cmd_compare_external(str(tmp_path / "m.csv"), str(tmp_path / "e.csv"), str(tmp_path / "o"), higher_is_better=True)
        assert result["expected_sign"] == "negative"
        assert result["pearson"] < 0 and result["spearman_matches_expected"] is True
        assert (tmp_path / "o" / "compare.svg").exists()

    def test_riskier_scale_expects_positive(self, tmp_path):
        self.setup_files(tmp_path, [0, 1, 2, 3], [1, 2, 4, 3], column="risk")
        assert main(["compare-external", "--scores", str(tmp_path / "m.csv"), "--external", str(tmp_path / "e.csv"),
                     "--column", "risk", "--out-dir", str(tmp_path / "o")]) == 0
        result = json.loads((tmp_path / "o" / "correlation.json").read_text())
        assert result["spearman"] == pytest.approx(0.8) and result["pearson_matches_expected"] is True

    def test_constant_scores_reported_not_crash(self, tmp_path):
        self.setup_files(tmp_path, [2, 2, 2, 2], [1, 2, 3, 4])
        result = cmd_compare_external(str(tmp_path / "m.csv"), str(tmp_path / "e.csv"), str(tmp_path / "o"), higher_is_better=False)
        assert result["pearson"] is None and result["note"]

    def test_too_few_joined(self, tmp_path):
        self.setup_files(tmp_path, [0, 1], [1, 2])
        assert main(["compare-external", "--scores", str(tmp_path / "m.csv"), "--external", str(tmp_path / "e.csv"), "--out-dir", str(tmp_path)]) == 2


class TestExitCodes:
    def test_usage_error_is_one(self):
        with pytest.raises(SystemExit) as info:
            main(["train", "--epochs", "many"])
        assert info.value.code == 1

    def test_unknown_command(self):
        with pytest.raises(SystemExit) as info:
            main(["fly"])
        assert info.value.code == 1

    def test_missing_config_is_one(self, tmp_path):
        assert main(["train", "--config", str(tmp_path / "none.yaml")]) == 1

    def test_missing_paths_is_one(self, tmp_path):
        assert main(["train", "--out-dir", str(tmp_path)]) == 1

    def test_zero_epochs_is_one(self, panel_dir, tmp_path):
        assert main(["train", "--features", str(panel_dir / "features.csv"), "--labels", str(panel_dir / "labels.csv"),
                     "--epochs", "0", "--out-dir", str(tmp_path)]) == 1

    def test_unknown_grade_is_two(self, panel_dir, tmp_path, capsys):
        labels = tmp_path / "labels.csv"
        labels.write_text((panel_dir / "labels.csv").read_text().replace("A+", "Q9", 1))
        code = main(["ingest-check", "--features", str(panel_dir / "features.csv"), "--labels", str(labels)])
        assert code == 2 and "Q9" in capsys.readouterr().err

    def test_divergence_is_three(self, panel_dir, tmp_path):
        cfg = tmp_path / "run.yaml"
        cfg.write_text("train: {epochs: 30, optimizer: {kind: gd, learning_rate: 1.0e+30}}\nmodel: {head: regression}\n")
        code = main(["train", "--config", str(cfg), "--features", str(panel_dir / "features.csv"),
                     "--labels", str(panel_dir / "labels.csv"), "--out-dir", str(tmp_path / "o")])
        assert code == 3
        assert (tmp_path / "o" / "history.csv").exists()


def test_sweep_command(panel_dir, tmp_path):
    argv = ["sweep", "--features", str(panel_dir / "features.csv"), "--labels", str(panel_dir / "labels.csv"),
            "--widths", "2,3", "--epochs", "5", "--out-dir", str(tmp_path)]
    assert main(argv) == 0
    assert [r["width"] for r in rows(tmp_path / "sweep.csv")] == ["2", "3"]
    assert (tmp_path / "sweep.svg").exists()


def test_read_scores_rejects_missing_columns(tmp_path):
    (tmp_path / "s.csv").write_text("id,value\na,1\n")
    with pytest.raises(DataError):
        read_scores(tmp_path / "s.csv")


def test_parser_lists_every_command():
    text = build_parser().format_help()
    for cmd in ("generate", "ingest-check", "train", "sweep", "score", "trend", "compare-external"):
        assert cmd in text
