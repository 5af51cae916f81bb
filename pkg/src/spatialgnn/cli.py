"""Command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 invalid input data
or unreadable files, 3 numerical failure during training.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import datagen, pipeline, plots, serialize, smoothlab
from .config import ConfigError, RunConfig
from .errors import NumericalError, ValidationError

log = logging.getLogger("spatialgnn")

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="")


def _run_config(args) -> RunConfig:
    return RunConfig.load(args.config, seed=args.seed, out=args.out)


def _out_dir(args, run: RunConfig) -> Path:
    return Path(args.out if args.out is not None else run.out)


def _points_csv(header, points) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for a, b in points:
        w.writerow([f"{a:.17g}", f"{b:.17g}"])
    return buf.getvalue()


def _read_trace(path: Path):
    rows = list(csv.DictReader(io.StringIO(path.read_text(encoding="utf-8"))))
    return [int(r["epoch"]) for r in rows], [float(r["loss"]) for r in rows]


# --- commands ----------------------------------------------------------------


def cmd_generate(args) -> int:
    run = _run_config(args)
    out = _out_dir(args, run)
    ds = datagen.generate(run.gen_config())
    _write(out / "dataset.csv", datagen.to_csv(ds))
    _write(out / "dataset.meta.json", json.dumps(ds.meta, indent=2, sort_keys=True) + "\n")
    log.info("wrote %d samples to %s", ds.n, out / "dataset.csv")
    return EXIT_OK


def cmd_train(args) -> int:
    run = _run_config(args)
    out = _out_dir(args, run)
    ds = datagen.load(args.dataset, n_classes=run.c)
    tm, trace = pipeline.train_model(args.model, ds, run)
    _write(out / f"model_{args.model}.json", serialize.model_to_json(tm))
    _write(out / f"trace_{args.model}.csv", trace.to_csv())
    log.info("trained %s for %d epochs (best epoch %d)", args.model, len(trace), trace.best_epoch)
    return EXIT_OK


def write_evaluation(out: Path, report, kind: str, trace_path: Path | None = None, prefix: str = "") -> None:
    """Report JSON, per-class curve CSVs and SVG charts for one model."""
    _write(out / f"{prefix}report.json", report.to_json())
    roc_series, pr_series = [], []
    for k, pc in enumerate(report.per_class):
        if not pc.roc_points:
            continue
        _write(out / f"{prefix}roc_class{k}.csv", _points_csv(["fpr", "tpr"], pc.roc_points))
        _write(out / f"{prefix}pr_class{k}.csv", _points_csv(["recall", "precision"], pc.pr_points))
        roc_series.append((f"class {k} ({pc.auc_roc:.3f})", *zip(*pc.roc_points)))
        pr_series.append((f"class {k} ({pc.auc_pr:.3f})", *zip(*pc.pr_points)))
    title = pipeline.MODEL_TITLES.get(kind, kind)
    _write(out / f"{prefix}roc.svg", plots.line_chart(
        roc_series, f"{title}: ROC (one-vs-rest)", "false positive rate", "true positive rate",
        xlim=(0, 1), ylim=(0, 1), diagonal=True))
    _write(out / f"{prefix}pr.svg", plots.line_chart(
        pr_series, f"{title}: precision-recall", "recall", "precision", xlim=(0, 1), ylim=(0, 1)))
    _write(out / f"{prefix}confusion.svg", plots.confusion_grid(report.confusion, f"{title}: confusion matrix"))
    if trace_path is not None and trace_path.exists():
        epochs, losses = _read_trace(trace_path)
        _write(out / f"{prefix}loss.svg", plots.line_chart(
            [("train loss", epochs, losses)], f"{title}: training loss", "epoch", "cross-entropy"))


def cmd_evaluate(args) -> int:
    model_path = Path(args.model_file)
    try:
        tm = serialize.model_from_json(model_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ValidationError(f"cannot read model: {exc}") from None
    ds = datagen.load(args.dataset, n_classes=tm.n_classes)
    report = pipeline.evaluate_model(tm, ds, args.split)
    out = Path(args.out) if args.out else model_path.parent
    trace = Path(args.trace) if args.trace else model_path.with_name(f"trace_{tm.kind}.csv")
    write_evaluation(out, report, tm.kind, trace)
    log.info("accuracy %.4f on %s split", report.accuracy, args.split)
    return EXIT_OK


def cmd_benchmark(args) -> int:
    run = _run_config(args)
    out = _out_dir(args, run)
    ds, rows = pipeline.benchmark(run)
    _write(out / "dataset.csv", datagen.to_csv(ds))
    doc = pipeline.benchmark_document(run, rows)
    _write(out / "benchmark.json", json.dumps(doc, indent=2) + "\n")
    table = pipeline.benchmark_table(rows)
    _write(out / "benchmark.txt", table)
    for r in rows:
        _write(out / f"trace_{r.kind}.csv", r.trace.to_csv())
        write_evaluation(out, r.report, r.kind, out / f"trace_{r.kind}.csv", prefix=f"{r.kind}_")
    # wall-clock is not reproducible, so it lives outside the primary outputs
    _write(out / "timings.json", json.dumps({r.kind: round(r.seconds, 3) for r in rows}, indent=2) + "\n")
    print(table, end="")
    return EXIT_OK


def run_smoothlab(run: RunConfig):
    grid = run.smooth_grid_config()
    bws = run.smooth_bandwidths()
    pairs, summary = smoothlab.run_experiment(
        run.smooth_trials, grid, run.smooth_noise_std, bws, run.seed,
        n_classes=run.smooth_classes, bumps=run.smooth_bumps,
    )
    if run.smooth_noise_std > 0:
        var_bw = bws[min(1, len(bws) - 1)]
        var_h, var_hw = smoothlab.variance_check(
            grid, run.smooth_noise_std, var_bw, run.smooth_redraws, run.seed,
            n_classes=run.smooth_classes, bumps=run.smooth_bumps,
        )
        summary["variance_check"] = {
            "bandwidth": var_bw,
            "redraws": run.smooth_redraws,
            "fraction_reduced": float(np.mean(var_hw <= var_h)),
            "max_ratio": float(np.max(var_hw / var_h)),
        }
    else:
        summary["variance_check"] = None
        summary["note"] = "noise_std is 0: the pointwise estimate is exact and smoothing cannot lower its error"
    return pairs, summary


def cmd_smoothlab(args) -> int:
    run = _run_config(args)
    out = _out_dir(args, run)
    pairs, summary = run_smoothlab(run)
    _write(out / "smoothlab_trials.csv", smoothlab.pairs_to_csv(pairs))
    _write(out / "smoothlab_summary.json", smoothlab.summary_to_json(summary))
    print(f"win rate {summary['win_rate']:.3f} over {summary['trials']} trials")
    return EXIT_OK


# --- parser ----------------------------------------------------------------


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="spatialgnn", description="Geographically weighted graph learning toolkit.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="flat JSON configuration file")
        sp.add_argument("--seed", type=_seed, help="global seed (overrides the config)")
        sp.add_argument("--out", help="output directory (overrides the config)")

    sp = sub.add_parser("generate", help="write a synthetic dataset CSV")
    common(sp)
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("train", help="train one model on a dataset CSV")
    sp.add_argument("dataset")
    sp.add_argument("--model", choices=pipeline.MODEL_KINDS, default="geoggnn")
    common(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("evaluate", help="score a saved model on a dataset split")
    sp.add_argument("model_file")
    sp.add_argument("dataset")
    sp.add_argument("--split", choices=datagen.SPLITS, default="test")
    sp.add_argument("--trace", help="trace CSV for the loss chart (default: sibling trace file)")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("benchmark", help="train and compare all three models")
    common(sp)
    sp.set_defaults(func=cmd_benchmark)

    sp = sub.add_parser("smoothlab", help="Monte-Carlo kernel smoothing experiment")
    common(sp)
    sp.set_defaults(func=cmd_smoothlab)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
