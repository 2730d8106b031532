"""Command-line entry point: ``credit-mlp <command> [options]``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numeric failure (divergence).
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from credit_mlp import plots
from credit_mlp.config import RunConfig, load_run_config, with_overrides
from credit_mlp.errors import ConfigError, CreditMLPError, DataError
from credit_mlp.evaluate import correlation, eval_report, predict, score_range, trend_slope
from credit_mlp.ingest import (
    FeatureManifest,
    filter_complete,
    join_labels,
    load_financials,
    records_to_dataset,
    write_financials,
)
from credit_mlp.model import CreditModel, load_model, save_model
from credit_mlp.neural_net import MLPConfig
from credit_mlp.preprocess import prepare
from credit_mlp.synth import generate
from credit_mlp.trainer import DivergenceError, sweep, train, write_sweep_csv

logger = logging.getLogger("credit_mlp")

SCORE_COLUMNS = ("company_id", "fiscal_year", "score", "class_index", "grade")


class StageError(CreditMLPError):
    """An error re-raised with the pipeline stage that produced it."""

    def __init__(self, stage: str, cause: CreditMLPError):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.exit_code = cause.exit_code


@contextlib.contextmanager
def stage(name: str):
    try:
        yield
    except StageError:
        raise
    except CreditMLPError as exc:
        raise StageError(name, exc) from exc


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.paths.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from None
    return out


def load_labeled_dataset(cfg: RunConfig):
    manifest = cfg.manifest()
    if not cfg.paths.features:
        raise ConfigError("paths.features is required")
    if not cfg.paths.labels:
        raise ConfigError("paths.labels is required")
    with stage("load"):
        records = load_financials(cfg.paths.features, manifest)
    with stage("labels"):
        records = join_labels(records, cfg.paths.labels, cfg.scale)
    with stage("filter"):
        dataset = filter_complete(records, cfg.period, manifest, cfg.scale)
        if len(dataset) == 0:
            raise DataError(f"no company is complete over {cfg.period[0]}-{cfg.period[1]}")
    return dataset


def cmd_generate(cfg: RunConfig) -> dict:
    out = _out_dir(cfg)
    with stage("generate"):
        panel = generate(cfg.synth)
    with stage("write"):
        features, labels = panel.write(out)
        panel.manifest.write(out / "manifest.csv")
    summary = {
        "companies": cfg.synth.companies,
        "records": len(panel.records),
        "incomplete_companies": cfg.synth.incomplete_companies,
        "period": list(cfg.synth.period),
        "features": str(features),
        "labels": str(labels),
    }
    print(json.dumps(summary, sort_keys=True))
    return summary


def cmd_ingest_check(cfg: RunConfig) -> dict:
    dataset = load_labeled_dataset(cfg)
    counts = np.bincount(dataset.y, minlength=dataset.class_map.n_classes)
    summary = {
        "companies": len(dataset.companies),
        "samples": len(dataset),
        "features": len(dataset.manifest),
        "period": list(cfg.period),
        "class_counts": {g: int(c) for g, c in zip(dataset.class_map.grades, counts)},
    }
    print(json.dumps(summary, sort_keys=True))
    return summary


def _mlp_config(cfg: RunConfig, dataset) -> MLPConfig:
    m = cfg.model
    return MLPConfig(
        input_dim=len(dataset.manifest),
        hidden_layers=m.hidden_layers,
        hidden_width=m.hidden_width,
        head=m.head,
        n_classes=dataset.class_map.n_classes,
        activation=m.activation,
    )


def _prepare(cfg: RunConfig, dataset):
    p = cfg.preprocess
    with stage("preprocess"):
        return prepare(
            dataset,
            train_fraction=p.train_fraction,
            split_seed=p.split_seed,
            smote_k=p.smote_k,
            smote_seed=p.smote_seed,
            normalization=p.normalization,
            by_company=p.by_company,
            balance=p.smote,
        )


def _write_report(out: Path, stem: str, report, class_map) -> None:
    summary = report.summary()
    summary["classes"] = list(class_map.grades)
    _write_json(out / f"{stem}.json", summary)
    with open(out / f"{stem}_confusion.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["true\\predicted", *class_map.grades])
        for grade, row in zip(class_map.grades, report.confusion):
            w.writerow([grade, *row.tolist()])
    plots.confusion_plot(report.confusion, class_map.grades, f"{report.head} (n={report.n})", out / f"{stem}_confusion.svg")


def cmd_train(cfg: RunConfig) -> dict:
    out = _out_dir(cfg)
    dataset = load_labeled_dataset(cfg)
    prep = _prepare(cfg, dataset)
    mlp = _mlp_config(cfg, dataset)
    with stage("train"):
        try:
            params, history = train(prep.balanced, mlp, cfg.train, prep.test)
        except DivergenceError as exc:
            exc.history.write_csv(out / "history.csv")
            raise
    model = CreditModel(params, dataset.class_map, prep.stats, dataset.manifest)
    with stage("evaluate"):
        report = eval_report(model, prep.test)
        train_report = eval_report(model, prep.train)
    with stage("write"):
        model_path = Path(cfg.paths.model) if cfg.paths.model else out / "model.json"
        save_model(model, model_path)
        history.write_csv(out / "history.csv")
        _write_report(out, "report", report, dataset.class_map)
        _write_json(out / "report_train.json", train_report.summary())
        write_financials(out / "test_features.csv", prep.split.test.records(), dataset.manifest)
        _write_predictions(out / "test_predictions.csv", prep.test, report, dataset.class_map)
    summary = {"model": str(model_path), **report.summary()}
    print(json.dumps({k: summary[k] for k in ("model", "head", "n", "accuracy", "rms", "mean_notch_distance")}, sort_keys=True))
    return summary


def _write_predictions(path: Path, data, report, class_map) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*SCORE_COLUMNS, "true_class_index"])
        for cid, year, s, c, t in zip(data.company_ids, data.years, report.scores, report.predictions, report.targets):
            w.writerow([cid, int(year), repr(float(s)), int(c), class_map.index_to_grade(int(c)), int(t)])


def cmd_sweep(cfg: RunConfig, widths) -> list:
    widths = list(widths)
    if not widths:
        raise ConfigError("sweep needs at least one width")
    out = _out_dir(cfg)
    dataset = load_labeled_dataset(cfg)
    prep = _prepare(cfg, dataset)
    template = _mlp_config(cfg, dataset)
    with stage("sweep"):
        rows = sweep(widths, prep.balanced, prep.test, template, cfg.train)
    with stage("write"):
        write_sweep_csv(rows, out / "sweep.csv")
        ws = [r.width for r in rows]
        plots.sweep_plot(
            ws,
            {"classification": [r.classification_accuracy for r in rows], "regression": [r.regression_accuracy for r in rows]},
            {"classification": [r.classification_rms for r in rows], "regression": [r.regression_rms for r in rows]},
            out / "sweep.svg",
        )
    for r in rows:
        print(json.dumps(asdict(r), sort_keys=True))
    return rows


def cmd_score(model_path: str, features_path: str, out_path: str | None) -> dict:
    with stage("model"):
        model = load_model(model_path)
    manifest = model.manifest or FeatureManifest.generic(model.config.input_dim)
    with stage("load"):
        try:
            records = load_financials(features_path, manifest)
        except DataError as exc:
            raise DataError(f"model expects F={len(manifest)} features named by its manifest; {exc}") from None
        cohort = records_to_dataset(records, manifest)
    with stage("score"):
        if len(cohort) == 0:
            raise DataError("feature file has no rows to score")
        classes, scores = predict(model, model.normalize(cohort.X))
        diag = score_range(scores)
    out_path = Path(out_path) if out_path else Path(features_path).with_name("scores.csv")
    with stage("write"):
        with open(out_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SCORE_COLUMNS)
            for cid, year, s, c in zip(cohort.company_ids, cohort.years, scores, classes):
                w.writerow([cid, int(year), repr(float(s)), int(c), model.class_map.index_to_grade(int(c))])
        summary = {"rows": len(cohort), "head": model.head, "score_range": asdict(diag), "scores": str(out_path)}
        _write_json(out_path.with_suffix(".summary.json"), summary)
    print(json.dumps(summary, sort_keys=True))
    return summary


def read_scores(path: str | Path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"scores file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"company_id", "score"} <= set(reader.fieldnames):
            raise DataError(f"{path}: needs company_id and score columns")
        rows = []
        for row in reader:
            try:
                row["score"] = float(row["score"])
                if row.get("fiscal_year") not in (None, ""):
                    row["fiscal_year"] = int(row["fiscal_year"])
            except ValueError:
                raise DataError(f"{path}: row {reader.line_num} is malformed") from None
            rows.append(row)
    return rows


def cmd_trend(scores_path: str, out_dir: str) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with stage("load"):
        rows = read_scores(scores_path)
        if any("fiscal_year" not in r or r["fiscal_year"] in (None, "") for r in rows):
            raise DataError(f"{scores_path}: trend needs a fiscal_year column")
    series: dict[str, list[tuple[int, float]]] = {}
    for r in rows:
        series.setdefault(r["company_id"], []).append((r["fiscal_year"], r["score"]))
    with stage("trend"):
        result = trend_slope(series)
        if not result.companies:
            raise DataError("no company has scores for two or more years")
    with stage("write"):
        with open(out / "trend.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["company_id", "slope", "intercept", "n_years"])
            for cid, t in result.companies.items():
                w.writerow([cid, repr(t.slope), repr(t.intercept), len(t.years)])
        with open(out / "trend_yearly.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["fiscal_year", "mean_score"])
            for year, mean in result.yearly_mean.items():
                w.writerow([year, repr(mean)])
        plots.trend_plot({c: series[c] for c in result.companies}, result.yearly_mean, out / "trend.svg")
        summary = {
            "companies": len(result.companies),
            "mean_slope": result.mean_slope,
            "yearly_mean_slope": result.yearly_mean_slope,
            "excluded": result.excluded,
            "positive_slopes": sum(t.slope > 0 for t in result.companies.values()),
        }
        _write_json(out / "trend.json", summary)
    print(json.dumps(summary, sort_keys=True))
    return summary


def cmd_compare_external(
    scores_path: str, external_path: str, out_dir: str, higher_is_better: bool, column: str = "score"
) -> dict:
    """Correlate model scores with an external risk score joined on company (and year if both have one)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with stage("load"):
        model_rows = read_scores(scores_path)
        ext_path = Path(external_path)
        if not ext_path.exists():
            raise DataError(f"external scores file not found: {ext_path}")
        with open(ext_path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"company_id", column} <= set(reader.fieldnames):
                raise DataError(f"{ext_path}: needs company_id and {column} columns")
            use_year = "fiscal_year" in reader.fieldnames and all("fiscal_year" in r for r in model_rows)
            external = {}
            for row in reader:
                key = (row["company_id"], int(row["fiscal_year"])) if use_year else row["company_id"]
                try:
                    external[key] = float(row[column])
                except ValueError:
                    raise DataError(f"{ext_path}: row {reader.line_num} has a non-numeric {column}") from None
    pairs = []
    for r in model_rows:
        key = (r["company_id"], r["fiscal_year"]) if use_year else r["company_id"]
        if key in external:
            pairs.append((r["company_id"], r["score"], external[key]))
    with stage("correlate"):
        if len(pairs) < 3:
            raise DataError(f"only {len(pairs)} companies joined; correlation needs at least 3")
        result = correlation([p[1] for p in pairs], [p[2] for p in pairs])
    expected = "negative" if higher_is_better else "positive"

    def matches(value):
        if value is None or value == 0:
            return None
        return (value < 0) == higher_is_better

    with stage("write"):
        with open(out / "compare.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["company_id", "model_score", f"external_{column}"])
            for cid, s, e in pairs:
                w.writerow([cid, repr(s), repr(e)])
        plots.scatter_plot([p[1] for p in pairs], [p[2] for p in pairs], f"external {column}", out / "compare.svg")
        summary = {
            "n": result.n,
            "pearson": result.pearson,
            "spearman": result.spearman,
            "note": result.note,
            "convention": "model score is higher-is-riskier; external is "
            + ("higher-is-better" if higher_is_better else "higher-is-riskier"),
            "expected_sign": expected,
            "pearson_matches_expected": matches(result.pearson),
            "spearman_matches_expected": matches(result.spearman),
            "model_score_range": asdict(score_range([p[1] for p in pairs])),
        }
        _write_json(out / "correlation.json", summary)
    print(json.dumps(summary, sort_keys=True))
    return summary


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _widths(text: str) -> list[int]:
    try:
        widths = [int(w) for w in text.split(",") if w.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"widths must be comma-separated integers, got {text!r}") from None
    if not widths or any(w < 1 for w in widths):
        raise argparse.ArgumentTypeError("need at least one positive width")
    return widths


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--seed", type=int, help="sets every seed (split, SMOTE, init, generator)")
    common.add_argument("--out-dir")
    common.add_argument("--head", choices=["classification", "regression"])
    common.add_argument("--width", type=int, help="nodes per hidden layer")
    common.add_argument("--epochs", type=int)
    common.add_argument("--features", help="feature file (overrides paths.features)")
    common.add_argument("--labels", help="label file (overrides paths.labels)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="credit-mlp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", parents=[common], help="write a synthetic feature/label panel")
    g.add_argument("--companies", type=int)
    g.add_argument("--synth-config", help="YAML mapping of generator settings")

    sub.add_parser("ingest-check", parents=[common], help="load, join and filter; print sample counts")
    t = sub.add_parser("train", parents=[common], help="split, normalize, SMOTE, train, evaluate")
    t.add_argument("--model", help="model output path (default <out-dir>/model.json)")

    s = sub.add_parser("sweep", parents=[common], help="train both heads over several widths")
    s.add_argument("--widths", type=_widths, help="comma-separated, e.g. 10,25,50,100,200")

    sc = sub.add_parser("score", parents=[common], help="score a cohort with a saved model")
    sc.add_argument("--model", required=True)
    sc.add_argument("--output", help="scores CSV (default scores.csv beside the feature file)")

    tr = sub.add_parser("trend", parents=[common], help="per-company score slopes over years")
    tr.add_argument("--scores", required=True)

    ce = sub.add_parser("compare-external", parents=[common], help="correlate model scores with an external score")
    ce.add_argument("--scores", required=True)
    ce.add_argument("--external", required=True)
    ce.add_argument("--column", default="score", help="external score column")
    ce.add_argument("--higher-is-better", action="store_true", help="external score falls as risk rises")
    return parser


def run(argv: list[str] | None = None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    cfg = load_run_config(args.config)
    cfg = with_overrides(cfg, seed=args.seed, out_dir=args.out_dir, head=args.head, width=args.width, epochs=args.epochs)
    if args.features or args.labels:
        cfg = replace(cfg, paths=replace(cfg.paths, features=args.features or cfg.paths.features, labels=args.labels or cfg.paths.labels))

    if args.command == "generate":
        synth = cfg.synth
        if args.synth_config:
            from credit_mlp.config import from_dict
            import yaml

            path = Path(args.synth_config)
            if not path.exists():
                raise ConfigError(f"synth config not found: {path}")
            synth = from_dict({"synth": yaml.safe_load(path.read_text(encoding="utf-8")) or {}}).synth
            if args.seed is not None:
                synth = replace(synth, seed=args.seed)
        if args.companies is not None:
            if args.companies < 0:
                raise ConfigError("--companies must be >= 0")
            # keep the default incomplete share (70 of 306)
            share = synth.incomplete_companies / synth.companies if synth.companies else 0.0
            synth = replace(synth, companies=args.companies, incomplete_companies=int(share * args.companies + 0.5))
        return cmd_generate(replace(cfg, synth=synth))
    if args.command == "ingest-check":
        return cmd_ingest_check(cfg)
    if args.command == "train":
        if args.model:
            cfg = replace(cfg, paths=replace(cfg.paths, model=args.model))
        return cmd_train(cfg)
    if args.command == "sweep":
        return cmd_sweep(cfg, args.widths if args.widths is not None else cfg.sweep_widths)
    if args.command == "score":
        if not cfg.paths.features:
            raise ConfigError("score needs --features")
        return cmd_score(args.model, cfg.paths.features, args.output)
    if args.command == "trend":
        return cmd_trend(args.scores, cfg.paths.out_dir)
    if args.command == "compare-external":
        return cmd_compare_external(args.scores, args.external, cfg.paths.out_dir, args.higher_is_better, args.column)
    raise ConfigError(f"unknown command {args.command}")


def main(argv: list[str] | None = None) -> int:
    try:
        run(argv)
    except CreditMLPError as exc:
        print(f"credit-mlp: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
