"""Command-line front end: train, eval, predict, inspect.

Configuration comes from an optional JSON config file plus flag overrides;
every run echoes the fully resolved configuration into its report. All
machine-readable output is deterministic given the same inputs and seed;
wall-clock timings go to stderr only.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import ingest, metrics, multiclass
from .model import CdfConfig, CdfModel, Dataset, model_from_json, model_to_json
from .report import fmt_float
from .svm import GridCell, KernelSpec, cross_validate

DEFAULTS = {
    "format": None,
    "images": None,
    "labels": None,
    "data": None,
    "sgml_dir": None,
    "split": None,
    "classes": None,
    "max_per_class": None,
    "dim": None,
    "min_df": 3,
    "topics": 10,
    "b": 1.0,
    "b_prime": 1.0,
    "selection_mode": "ratio",
    "feature_mode": "dual_kl",
    "smoothing_eps": 1e-9,
    "kernel": "polynomial",
    "degree": 2,
    "gamma": None,
    "coef0": 1.0,
    "c": 10.0,
    "tol": 1e-3,
    "max_passes": 10,
    "folds": 0,
    "grid_c": "0.1,1,10,100",
    "grid_b": "0.5,1.0,1.5,2.0",
    "grid_b_prime": "0.5,1.0,1.5,2.0",
    "seed": 0,
    "jobs": 1,
    "model": None,
    "out": None,
    "dump_masks": False,
    "verbose": 0,
}

CONFIG_ECHO_KEYS = [
    "format", "split", "classes", "max_per_class", "dim", "min_df", "topics",
    "b", "b_prime", "selection_mode", "feature_mode", "smoothing_eps",
    "kernel", "degree", "gamma", "coef0", "c", "tol", "max_passes",
    "folds", "grid_c", "grid_b", "grid_b_prime", "seed", "jobs",
]


class CliError(Exception):
    """User-facing command error; message printed to stderr, exit nonzero."""


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cdfeat",
        description="Class-dependent feature pipeline: train, evaluate, predict, inspect.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("train", "fit a model on a training dataset"),
        ("eval", "evaluate a model on a labeled dataset"),
        ("predict", "print per-sample predictions"),
        ("inspect", "report per-pair feature selection details"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--format", choices=["idx", "sparse", "reuters"])
        p.add_argument("--images", help="IDX image file (idx format)")
        p.add_argument("--labels", help="IDX label file (idx format)")
        p.add_argument("--data", help="sparse-vector text file (sparse format)")
        p.add_argument("--sgml-dir", dest="sgml_dir", help="directory of reut2-*.sgm files")
        p.add_argument("--split", choices=["train", "test"],
                       help="corpus split to load (reuters format)")
        p.add_argument("--classes", help="comma-separated raw labels to keep (idx format)")
        p.add_argument("--max-per-class", dest="max_per_class", type=int,
                       help="cap samples per class after loading")
        p.add_argument("--dim", type=int, help="vector length for sparse data")
        p.add_argument("--min-df", dest="min_df", type=int,
                       help="vocabulary document-frequency threshold")
        p.add_argument("--topics", type=int, help="number of top topics kept as classes")
        p.add_argument("--b", type=float)
        p.add_argument("--b-prime", dest="b_prime", type=float)
        p.add_argument("--selection-mode", dest="selection_mode",
                       choices=["ratio", "literal"])
        p.add_argument("--feature-mode", dest="feature_mode",
                       choices=["dual_kl", "scalar_kl", "elementwise_kl"])
        p.add_argument("--smoothing-eps", dest="smoothing_eps", type=float)
        p.add_argument("--kernel", choices=["linear", "polynomial", "rbf"])
        p.add_argument("--degree", type=int)
        p.add_argument("--gamma", type=float)
        p.add_argument("--coef0", type=float)
        p.add_argument("--c", type=float)
        p.add_argument("--tol", type=float)
        p.add_argument("--max-passes", dest="max_passes", type=int)
        p.add_argument("--folds", type=int, help="cross-validation folds; 0 skips CV")
        p.add_argument("--grid-c", dest="grid_c", help="comma-separated C grid for CV")
        p.add_argument("--grid-b", dest="grid_b", help="comma-separated b grid for CV")
        p.add_argument("--grid-b-prime", dest="grid_b_prime",
                       help="comma-separated b' grid for CV")
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int)
        p.add_argument("--model", help="model file path")
        p.add_argument("--out", help="report/output file path")
        p.add_argument("--dump-masks", dest="dump_masks", action="store_const",
                       const=True, help="include per-pair mask index lists (inspect)")
        p.add_argument("-v", "--verbose", action="count")
    return parser


def _resolve_config(args: argparse.Namespace) -> dict:
    resolved = dict(DEFAULTS)
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise CliError(f"config file not found: {path}")
        try:
            loaded = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise CliError(f"config file {path}: {exc}")
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise CliError(f"config file {path}: unknown keys {sorted(unknown)}")
        resolved.update(loaded)
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            resolved[key] = value
    resolved["command"] = args.command
    return resolved


def _require_paths(cfg: dict, keys) -> None:
    for key in keys:
        value = cfg.get(key)
        if not value:
            raise CliError(f"--{key.replace('_', '-')} is required for this command")
        if not Path(value).exists():
            raise CliError(f"input path does not exist: {value}")


def _kernel_from_cfg(cfg: dict) -> KernelSpec:
    return KernelSpec(
        kind=cfg["kernel"],
        degree=int(cfg["degree"]),
        gamma=cfg["gamma"],
        coef0=float(cfg["coef0"]),
    )


def _cdf_config(cfg: dict) -> CdfConfig:
    return CdfConfig(
        b=float(cfg["b"]),
        b_prime=float(cfg["b_prime"]),
        selection_mode=cfg["selection_mode"],
        feature_mode=cfg["feature_mode"],
        smoothing_eps=float(cfg["smoothing_eps"]),
    )


def _parse_grid(text: str, flag: str) -> list[float]:
    try:
        values = [float(tok) for tok in str(text).split(",") if tok.strip()]
    except ValueError:
        raise CliError(f"--{flag}: expected comma-separated numbers, got {text!r}")
    if not values:
        raise CliError(f"--{flag}: empty grid")
    return values


def _load_dataset(cfg: dict, default_split: str) -> Dataset:
    fmt = cfg.get("format")
    if fmt == "idx":
        _require_paths(cfg, ["images", "labels"])
        images = ingest.load_idx_images(Path(cfg["images"]).read_bytes())
        labels = ingest.load_idx_labels(Path(cfg["labels"]).read_bytes())
        keep = None
        if cfg.get("classes"):
            keep = [int(tok) for tok in str(cfg["classes"]).split(",") if tok.strip()]
        dataset = ingest.idx_dataset(images, labels, keep_classes=keep)
    elif fmt == "sparse":
        _require_paths(cfg, ["data"])
        dataset = ingest.load_sparse(Path(cfg["data"]).read_text(), dim=cfg.get("dim"))
    elif fmt == "reuters":
        _require_paths(cfg, ["sgml_dir"])
        docs = ingest.read_sgml_dir(cfg["sgml_dir"])
        categories = ingest.top_topics(docs, k=int(cfg["topics"]))
        vocab = ingest.build_vocabulary(docs, min_df=int(cfg["min_df"]))
        split = cfg.get("split") or default_split
        split_docs = [d for d in docs if d.split_tag == split]
        result = ingest.vectorize_bow(split_docs, vocab, categories)
        print(f"reuters: split={split} kept={len(result.dataset)} "
              f"excluded={result.excluded} vocab={len(vocab)}", file=sys.stderr)
        dataset = result.dataset
    else:
        raise CliError("--format must be one of idx, sparse, reuters")

    cap = cfg.get("max_per_class")
    if cap:
        dataset = _cap_per_class(dataset, int(cap))
    return dataset


def _cap_per_class(dataset: Dataset, cap: int) -> Dataset:
    keep: list[int] = []
    for idx_list in dataset.class_index:
        keep.extend(idx_list[:cap])
    keep.sort()
    x = np.stack([dataset.samples[i] for i in keep])
    y = [dataset.labels[i] for i in keep]
    return Dataset.from_arrays(x, y, label_names=dataset.label_names)


def _config_echo_lines(cfg: dict) -> list[str]:
    lines = [f"command={cfg['command']}"]
    for key in CONFIG_ECHO_KEYS:
        value = cfg.get(key)
        if isinstance(value, float):
            text = fmt_float(value)
        elif value is None:
            text = ""
        else:
            text = str(value)
        lines.append(f"{key}={text}")
    return lines


def _write_report(cfg: dict, lines: list[str]) -> None:
    text = "\n".join(lines) + "\n" if lines else ""
    if cfg.get("out"):
        Path(cfg["out"]).write_text(text)
    else:
        sys.stdout.write(text)


def _load_model(cfg: dict) -> CdfModel:
    _require_paths(cfg, ["model"])
    try:
        return model_from_json(Path(cfg["model"]).read_text())
    except (ValueError, KeyError) as exc:
        raise CliError(f"unreadable model {cfg['model']}: {exc}")


def cmd_train(cfg: dict) -> int:
    dataset = _load_dataset(cfg, default_split="train")
    if not cfg.get("model"):
        raise CliError("--model output path is required for train")
    base = _cdf_config(cfg)
    kernel = _kernel_from_cfg(cfg)
    seed = int(cfg["seed"])
    tol = float(cfg["tol"])
    max_passes = int(cfg["max_passes"])
    jobs = int(cfg["jobs"])
    c = float(cfg["c"])
    b, b_prime = base.b, base.b_prime

    report = _config_echo_lines(cfg)
    report.append(f"num_classes={dataset.num_classes}")
    report.append(f"dim={dataset.dim}")
    report.append(f"samples={len(dataset)}")

    t0 = time.perf_counter()
    folds = int(cfg["folds"])
    if folds >= 2:
        grid = [
            GridCell(c=gc, kernel=kernel, b=gb, b_prime=gbp)
            for gc in _parse_grid(cfg["grid_c"], "grid-c")
            for gb in _parse_grid(cfg["grid_b"], "grid-b")
            for gbp in _parse_grid(cfg["grid_b_prime"], "grid-b-prime")
        ]
        trainer = multiclass.pipeline_trainer(
            base, tol=tol, max_passes=max_passes, seed=seed, jobs=jobs
        )
        result = cross_validate(
            dataset.matrix(), np.asarray(dataset.labels), grid, folds, seed, trainer
        )
        for k, (cell, acc) in enumerate(result.table):
            report.append(
                f"cv_cell_{k}=c:{fmt_float(cell.c)} b:{fmt_float(cell.b)} "
                f"b_prime:{fmt_float(cell.b_prime)} accuracy:{fmt_float(acc)}"
            )
        c, b, b_prime = result.best.c, result.best.b, result.best.b_prime
        report.append(
            f"cv_best=c:{fmt_float(c)} b:{fmt_float(b)} b_prime:{fmt_float(b_prime)}"
        )
    t_cv = time.perf_counter() - t0

    final_cfg = replace(base, b=b, b_prime=b_prime)
    t1 = time.perf_counter()
    model = multiclass.train(
        dataset, final_cfg, kernel=kernel, c=c, tol=tol,
        max_passes=max_passes, seed=seed, jobs=jobs,
    )
    t_train = time.perf_counter() - t1

    Path(cfg["model"]).write_text(model_to_json(model))
    for ctx, _ in model.pairs:
        key = f"pair_{ctx.class_x}_{ctx.class_y}"
        report.append(f"{key}_mask_size={ctx.mask.size}")
        report.append(f"{key}_fallback={int(ctx.fallback)}")
    _write_report(cfg, report)
    print(f"model_file={cfg['model']}", file=sys.stderr)
    print(f"time_cv_s={t_cv:.3f}", file=sys.stderr)
    print(f"time_train_s={t_train:.3f}", file=sys.stderr)
    return 0


def _check_dims(model: CdfModel, dataset: Dataset) -> None:
    if dataset.dim != model.dim:
        raise CliError(
            f"dimension mismatch: model expects {model.dim}, dataset has {dataset.dim}"
        )


def _align_truth(model: CdfModel, dataset: Dataset) -> list[int]:
    """Map the dataset's dense ids into the model's label space by name.

    A dataset missing some of the model's labels assigns different dense ids,
    so ids cannot be compared directly.
    """
    lookup = {name: i for i, name in enumerate(model.label_names)}
    truth = []
    for lab in dataset.labels:
        name = dataset.label_names[lab]
        if name not in lookup:
            raise CliError(f"dataset label {name!r} unknown to the model")
        truth.append(lookup[name])
    return truth


def cmd_eval(cfg: dict) -> int:
    model = _load_model(cfg)
    dataset = _load_dataset(cfg, default_split="test")
    _check_dims(model, dataset)

    t0 = time.perf_counter()
    preds = [multiclass.predict(model, s)[0] for s in dataset.samples]
    t_eval = time.perf_counter() - t0

    truth = _align_truth(model, dataset)
    cm = metrics.confusion(preds, truth, model.num_classes)
    report = _config_echo_lines(cfg)
    report.extend(metrics.metric_lines(preds, truth, model.num_classes, model.label_names))
    report.append("confusion_matrix:")
    report.append(metrics.format_confusion(cm, model.label_names))
    _write_report(cfg, report)
    print(f"time_eval_s={t_eval:.3f}", file=sys.stderr)
    return 0


def cmd_predict(cfg: dict) -> int:
    model = _load_model(cfg)
    dataset = _load_dataset(cfg, default_split="test")
    _check_dims(model, dataset)

    lines = []
    for i, sample in enumerate(dataset.samples):
        winner, record = multiclass.predict(model, sample)
        lines.append(
            f"{i} {model.label_names[winner]} {record.votes[winner]} "
            f"{fmt_float(record.margin_sums[winner])}"
        )
    _write_report(cfg, lines)
    return 0


def cmd_inspect(cfg: dict) -> int:
    model = _load_model(cfg)
    report = _config_echo_lines(cfg)
    report.append(f"num_classes={model.num_classes}")
    report.append(f"dim={model.dim}")
    report.append(f"pairs={len(model.pairs)}")
    for ctx, svm in model.pairs:
        key = f"pair_{ctx.class_x}_{ctx.class_y}"
        report.append(f"{key}_mask_size={ctx.mask.size}")
        report.append(f"{key}_retained_fraction={fmt_float(ctx.mask.size / model.dim)}")
        report.append(f"{key}_mu_xy={fmt_float(ctx.mu_xy)}")
        report.append(f"{key}_mu_yx={fmt_float(ctx.mu_yx)}")
        report.append(f"{key}_tau={fmt_float(ctx.tau)}")
        report.append(f"{key}_tau_prime={fmt_float(ctx.tau_prime)}")
        report.append(f"{key}_b={fmt_float(ctx.b)}")
        report.append(f"{key}_b_prime={fmt_float(ctx.b_prime)}")
        report.append(f"{key}_fallback={int(ctx.fallback)}")
        report.append(f"{key}_support_vectors={svm.support_vectors.shape[0]}")
        if cfg.get("dump_masks"):
            report.append(f"{key}_mask={','.join(str(int(i)) for i in ctx.mask)}")
    _write_report(cfg, report)
    return 0


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "predict": cmd_predict,
    "inspect": cmd_inspect,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
        return COMMANDS[args.command](cfg)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
