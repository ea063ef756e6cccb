"""Command-line interface: describe, preprocess, train, evaluate, benchmark,
gradcheck.

Exit codes: 0 success, 1 verification or numeric failure, 2 usage error,
3 data or parse error. All randomness flows from --seed; benchmark
sub-runs derive their seeds as seed + spec index. Commands that write
files also write a run manifest recording resolved configuration, input
checksums, and output paths.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import dataset as ds
from .errors import (
    ConfigError,
    DataFormatError,
    ModelFileError,
    NotFittedError,
    NumericError,
)
from .metrics import evaluate_all
from .models import (
    SPEC_IDS,
    EvaluationResult,
    default_config,
    evaluate_model,
    train_model,
)
from .netcore.gradcheck import grad_check
from .netcore.layers import BatchNorm, Dense, Dropout, Recurrent
from .netcore.network import NetworkSpec, init_params
from .persistence import load_model, save_model
from .preprocess import (
    PreprocessPipeline,
    correlation_matrix,
    make_windows,
    pipeline_to_config,
)
from .training import TrainConfig, history_to_csv

DATA_DIR_ENV = "RULKIT_DATA_DIR"
TRAIN_FILE = "train_FD001.txt"
TEST_FILE = "test_FD001.txt"
RUL_FILE = "RUL_FD001.txt"

MODEL_LABELS = {
    "lr": "Linear Regression",
    "lstm128": "LSTM",
    "blstm128": "BLSTM",
    "blstm_dropout": "BLSTM + Dropout",
    "blstm_dropout_bn": "BLSTM + Dropout + Normalization",
}


def data_dir() -> Path:
    return Path(os.environ.get(DATA_DIR_ENV, "data"))


def resolve_input(explicit: str | None, default_name: str) -> Path:
    path = Path(explicit) if explicit else data_dir() / default_name
    if not path.exists():
        raise DataFormatError(
            f"input file not found: {path} (set --paths or {DATA_DIR_ENV})"
        )
    return path


def file_sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def utc_now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def write_manifest(
    out_dir: Path,
    command: str,
    config: dict,
    inputs: dict[str, Path],
    outputs: list[Path],
    seed,
    started: str,
) -> Path:
    manifest = {
        "command": command,
        "config": config,
        "inputs": {
            name: {"path": str(p), "sha256": file_sha256(p)} for name, p in inputs.items()
        },
        "outputs": [str(p) for p in outputs],
        "seed": seed,
        "started": started,
        "finished": utc_now(),
    }
    path = out_dir / "run_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def load_labeled_train(path: Path) -> ds.EngineSeriesSet:
    return ds.attach_linear_rul(ds.load_series(path))


def format_metrics(metrics: dict[str, float], n: int) -> str:
    lines = [f"{'metric':<8}{'value':>14}"]
    for key in ("rmse", "mse", "mae", "r2"):
        lines.append(f"{key:<8}{metrics[key]:>14.4f}")
    lines.append(f"{'n':<8}{n:>14d}")
    return "\n".join(lines)


def predictions_csv(result: EvaluationResult) -> str:
    lines = ["unit_id,predicted_rul,actual_rul,residual"]
    residual = result.residual
    for i in range(result.n):
        lines.append(
            f"{int(result.unit_id[i])},{float(result.y_pred[i])!r},"
            f"{float(result.y_true[i])!r},{float(residual[i])!r}"
        )
    return "\n".join(lines) + "\n"


def cmd_describe(args) -> int:
    path = resolve_input(args.train, TRAIN_FILE)
    series = ds.load_series(path)
    summary = ds.summarize(series)
    if args.json:
        doc = {
            "n_units": summary.n_units,
            "n_rows": summary.n_rows,
            "cycles": {
                "min": summary.cycles_min,
                "max": summary.cycles_max,
                "mean": summary.cycles_mean,
            },
            "columns": [
                {
                    "name": name,
                    "mean": float(summary.mean[i]),
                    "std": float(summary.std[i]),
                    "n_unique": int(summary.n_unique[i]),
                }
                for i, name in enumerate(summary.column_names)
            ],
        }
        print(json.dumps(doc, indent=2))
    else:
        print(f"units: {summary.n_units}")
        print(f"rows: {summary.n_rows}")
        print(
            f"cycles: min {summary.cycles_min}  max {summary.cycles_max}  "
            f"mean {summary.cycles_mean:.2f}"
        )
        print(f"{'column':<14}{'mean':>14}{'std':>14}{'unique':>8}")
        for i, name in enumerate(summary.column_names):
            print(
                f"{name:<14}{summary.mean[i]:>14.4f}{summary.std[i]:>14.4f}"
                f"{int(summary.n_unique[i]):>8d}"
            )
    if args.csv_dir:
        out = Path(args.csv_dir)
        out.mkdir(parents=True, exist_ok=True)
        means = ["column,mean"]
        means += [
            f"{name},{float(summary.mean[i])!r}"
            for i, name in enumerate(summary.column_names)
        ]
        (out / "feature_means.csv").write_text("\n".join(means) + "\n")
        cycles = ["unit_id,n_cycles"]
        lengths = series.unit_lengths
        cycles += [
            f"{int(series.unit_ids[i])},{int(lengths[i])}" for i in range(series.n_units)
        ]
        (out / "unit_cycles.csv").write_text("\n".join(cycles) + "\n")
    return 0


def cmd_preprocess(args) -> int:
    started = utc_now()
    train_path = resolve_input(args.train, TRAIN_FILE)
    series = load_labeled_train(train_path)
    pipe = PreprocessPipeline(mask_mode=args.mask_mode).fit(series)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    outputs = []

    pipeline_path = out / "pipeline.json"
    pipeline_path.write_text(json.dumps(pipeline_to_config(pipe), indent=2, sort_keys=True) + "\n")
    outputs.append(pipeline_path)

    masked = pipe.mask_.apply(series)
    corr = correlation_matrix(masked)
    names = pipe.mask_.kept
    corr_lines = ["feature," + ",".join(names)]
    for i, name in enumerate(names):
        corr_lines.append(name + "," + ",".join(repr(float(v)) for v in corr[i]))
    corr_path = out / "correlation.csv"
    corr_path.write_text("\n".join(corr_lines) + "\n")
    outputs.append(corr_path)

    summary = ds.summarize(series)
    report = [f"{'column':<14}{'status':<9}{'mean':>14}{'std':>14}{'unique':>8}  reasons"]
    for i, name in enumerate(summary.column_names):
        if name in pipe.mask_.dropped:
            status = "dropped"
            reasons = ";".join(pipe.mask_.dropped[name])
        else:
            status = "kept"
            reasons = ""
        report.append(
            f"{name:<14}{status:<9}{summary.mean[i]:>14.4f}{summary.std[i]:>14.4f}"
            f"{int(summary.n_unique[i]):>8d}  {reasons}"
        )
    report_path = out / "prune_report.txt"
    report_path.write_text("\n".join(report) + "\n")
    outputs.append(report_path)

    if args.export_windows:
        windows = make_windows(
            pipe.transform(series), series, window=args.window, stride=args.stride
        )
        bin_path = out / "windows.bin"
        bin_path.write_bytes(np.ascontiguousarray(windows.X, dtype="<f8").tobytes())
        sidecar = {
            "n_windows": windows.n_windows,
            "window": windows.window_length,
            "n_features": windows.n_features,
            "dtype": "<f8",
            "order": "C",
        }
        sidecar_path = out / "windows.json"
        sidecar_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
        outputs.extend([bin_path, sidecar_path])

    config = {
        "mask_mode": args.mask_mode,
        "window": args.window,
        "stride": args.stride,
        "export_windows": bool(args.export_windows),
    }
    write_manifest(
        out, "preprocess", config, {"train": train_path}, outputs, None, started
    )
    print(f"kept {pipe.mask_.n_features} features: {', '.join(names)}")
    print(f"wrote {', '.join(str(p) for p in outputs)}")
    return 0


def build_train_config(args) -> TrainConfig:
    overrides = {}
    if args.window is not None:
        overrides["window"] = args.window
    for name, value in (
        ("stride", args.stride),
        ("batch_size", args.batch_size),
        ("max_epochs", args.epochs),
        ("alpha", args.lr),
        ("plateau_factor", args.plateau_factor),
        ("plateau_patience", args.plateau_patience),
        ("min_alpha", args.min_lr),
        ("early_stop_patience", args.early_stop_patience),
        ("validation_fraction", args.val_fraction),
        ("mask_mode", args.mask_mode),
        ("seed", args.seed),
    ):
        if value is not None:
            overrides[name] = value
    return default_config(args.spec, **overrides)


def cmd_train(args) -> int:
    started = utc_now()
    config = build_train_config(args)
    train_path = resolve_input(args.train, TRAIN_FILE)
    series = load_labeled_train(train_path)
    trained = train_model(config, series)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model_path = out / "model.json"
    save_model(trained, model_path)
    history_path = out / "history.csv"
    history_path.write_text(history_to_csv(trained.history))
    outputs = [model_path, model_path.with_suffix(".bin"), history_path]
    write_manifest(
        out, "train", config.to_dict(), {"train": train_path}, outputs, config.seed, started
    )
    best = trained.history.best_epoch
    print(
        f"trained {config.spec_id}: {trained.history.n_epochs} epochs, "
        f"best epoch {best} (val_loss {trained.history.val_loss[best]:.4f})"
    )
    print(f"wrote {model_path}")
    return 0


def cmd_evaluate(args) -> int:
    started = utc_now()
    model_path = Path(args.model)
    trained = load_model(model_path)
    test_path = resolve_input(args.test, TEST_FILE)
    rul_path = resolve_input(args.rul, RUL_FILE)
    test_series = ds.load_series(test_path)
    true_ruls = ds.load_rul(rul_path)
    result = evaluate_model(trained, test_series, true_ruls)
    if args.json:
        print(json.dumps({"n": result.n, **result.metrics}, indent=2, sort_keys=True))
    else:
        print(format_metrics(result.metrics, result.n))
    outputs = []
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        pred_path = out / "predictions.csv"
        pred_path.write_text(predictions_csv(result))
        outputs.append(pred_path)
        write_manifest(
            out,
            "evaluate",
            {"model": str(model_path)},
            {"model": model_path, "test": test_path, "rul": rul_path},
            outputs,
            None,
            started,
        )
    return 0


def cmd_benchmark(args) -> int:
    started = utc_now()
    train_path = resolve_input(args.train, TRAIN_FILE)
    test_path = resolve_input(args.test, TEST_FILE)
    rul_path = resolve_input(args.rul, RUL_FILE)
    series = load_labeled_train(train_path)
    test_series = ds.load_series(test_path)
    true_ruls = ds.load_rul(rul_path)
    seeds = [int(s) for s in args.seeds.split(",") if s.strip() != ""]
    if not seeds:
        raise ConfigError("--seeds must list at least one integer")
    spec_ids = args.specs.split(",") if args.specs else list(SPEC_IDS)

    rows = []
    for spec_index, spec_id in enumerate(spec_ids):
        for seed in seeds:
            overrides = {"seed": seed + spec_index}
            if args.epochs is not None:
                overrides["max_epochs"] = args.epochs
            if spec_id == "blstm_dropout_bn":
                overrides["max_epochs"] = args.bn_epochs
            if args.batch_size is not None:
                overrides["batch_size"] = args.batch_size
            if args.window is not None and spec_id != "lr":
                overrides["window"] = args.window
            config = default_config(spec_id, **overrides)
            try:
                trained = train_model(config, series)
                result = evaluate_model(trained, test_series, true_ruls)
            except Exception as exc:
                raise type(exc)(
                    f"benchmark run failed for spec {spec_id!r}, seed {seed}: {exc}"
                ) from exc
            rows.append((spec_id, seed, result.metrics))

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    per_seed = ["spec_id,seed,rmse,mse,mae,r2"]
    for spec_id, seed, m in rows:
        per_seed.append(
            f"{spec_id},{seed},{m['rmse']!r},{m['mse']!r},{m['mae']!r},{m['r2']!r}"
        )
    per_seed_path = out / "benchmark_runs.csv"
    per_seed_path.write_text("\n".join(per_seed) + "\n")

    width = max(len(label) for label in MODEL_LABELS.values()) + 2
    header = f"{'Model':<{width}}{'RMSE':>10}{'MSE':>12}{'MAE':>10}{'R2':>8}"
    print(header)
    table_lines = [header]
    for spec_id in spec_ids:
        metrics = [m for sid, _, m in rows if sid == spec_id]
        med = {k: float(np.median([m[k] for m in metrics])) for k in ("rmse", "mse", "mae", "r2")}
        line = (
            f"{MODEL_LABELS.get(spec_id, spec_id):<{width}}"
            f"{med['rmse']:>10.2f}{med['mse']:>12.2f}{med['mae']:>10.2f}{med['r2']:>8.2f}"
        )
        print(line)
        table_lines.append(line)
    table_path = out / "benchmark_table.txt"
    table_path.write_text("\n".join(table_lines) + "\n")

    write_manifest(
        out,
        "benchmark",
        {
            "seeds": seeds,
            "specs": spec_ids,
            "epochs": args.epochs,
            "bn_epochs": args.bn_epochs,
            "batch_size": args.batch_size,
            "window": args.window,
        },
        {"train": train_path, "test": test_path, "rul": rul_path},
        [per_seed_path, table_path],
        seeds,
        started,
    )
    return 0


GRADCHECK_FIXTURES = (
    ("lstm", (Recurrent(4), Dense(1)), 1e-4),
    ("blstm", (Recurrent(3, bidirectional=True), Dense(1)), 1e-4),
    (
        "blstm_dropout",
        (
            Recurrent(4, bidirectional=True),
            Dropout(0.2),
            Recurrent(3, bidirectional=True),
            Dropout(0.2),
            Dense(1),
        ),
        1e-4,
    ),
    (
        "blstm_dropout_bn",
        (
            Recurrent(5, bidirectional=True),
            Dropout(0.4),
            BatchNorm(),
            Recurrent(4, bidirectional=True),
            Dropout(0.4),
            BatchNorm(),
            Recurrent(3, bidirectional=True),
            Dropout(0.4),
            Dense(3),
            Dense(1),
        ),
        1e-3,
    ),
)


def cmd_gradcheck(args) -> int:
    rng = np.random.default_rng(args.seed)
    x = rng.normal(size=(3, 5, 2))
    y = rng.normal(size=3)
    failed = False
    print(f"{'fixture':<18}{'max rel err':>14}{'threshold':>12}  result")
    for name, layers, threshold in GRADCHECK_FIXTURES:
        spec = NetworkSpec(layers=layers, n_features=2)
        model = init_params(spec, seed=args.seed)
        report = grad_check(spec, model, x, y, eps=args.eps, dropout_seed=args.seed)
        ok = report.passed(threshold)
        failed = failed or not ok
        print(
            f"{name:<18}{report.max_rel_error:>14.3e}{threshold:>12.0e}  "
            f"{'PASS' if ok else 'FAIL'}"
        )
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rulkit",
        description="Remaining-useful-life prediction engine for CMAPSS FD001",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("describe", help="summarize a CMAPSS training file")
    p.add_argument("--train", help=f"series file (default: $"
                   f"{DATA_DIR_ENV}/{TRAIN_FILE})")
    p.add_argument("--json", action="store_true", help="print summary as JSON")
    p.add_argument("--csv-dir", help="write feature_means.csv and unit_cycles.csv here")
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("preprocess", help="fit and export the preprocessing pipeline")
    p.add_argument("--train")
    p.add_argument("--mask-mode", default="both", choices=("canonical", "eq1", "both"))
    p.add_argument("--window", type=int, default=30)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--export-windows", action="store_true",
                   help="also export windowed tensors as binary + JSON sidecar")
    p.add_argument("--out-dir", default="preprocess_out")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train one registered model configuration")
    p.add_argument("--spec", required=True, choices=SPEC_IDS)
    p.add_argument("--train")
    p.add_argument("--window", type=int)
    p.add_argument("--stride", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--plateau-factor", type=float)
    p.add_argument("--plateau-patience", type=int)
    p.add_argument("--min-lr", type=float)
    p.add_argument("--early-stop-patience", type=int)
    p.add_argument("--val-fraction", type=float)
    p.add_argument("--mask-mode", choices=("canonical", "eq1", "both"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="train_out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a saved model on the test set")
    p.add_argument("--model", required=True, help="model manifest (.json) path")
    p.add_argument("--test")
    p.add_argument("--rul")
    p.add_argument("--json", action="store_true")
    p.add_argument("--out-dir", help="write predictions.csv and run manifest here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("benchmark", help="train and evaluate every registered model")
    p.add_argument("--train")
    p.add_argument("--test")
    p.add_argument("--rul")
    p.add_argument("--seeds", default="0", help="comma-separated seeds, e.g. 1,2,3")
    p.add_argument("--specs", help="comma-separated subset of spec ids (default: all)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--bn-epochs", type=int, default=15,
                   help="epoch cap for the 512-unit stack")
    p.add_argument("--batch-size", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--out-dir", default="benchmark_out")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("gradcheck", help="verify analytic gradients on small fixtures")
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, NotFittedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataFormatError, ModelFileError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
