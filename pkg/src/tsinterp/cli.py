"""Command-line pipeline: gen, train, attribute, evaluate, report.

Exit codes: 0 success, 2 config error, 3 generation failure,
4 shape/manifest mismatch, 5 external-scorer failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .attribution import METHODS, AttributionConfig, attribute_dataset
from .errors import (
    ConfigError,
    ExternalScorerFailure,
    FormatVersionMismatch,
    GenerationFailed,
    IoFailure,
    MethodUnsupportedForScorer,
    ShapeMismatch,
    TsInterpError,
)
from .evaluation import EvaluationConfig, evaluate_method
from .generate import GenerationConfig, generate_dataset
from .models import TrainConfig, accuracy, expectancy, load_model, save_model, train
from .protocol import ExternalScorer
from .report import read_report, write_ranking, write_report
from .store import (
    canonical_json,
    read_dataset,
    read_relevance,
    split_dataset,
    write_dataset,
    write_relevance,
)

EXIT_CONFIG = 2
EXIT_GENERATION = 3
EXIT_SHAPE = 4
EXIT_EXTERNAL = 5

DEFAULT_SPLIT = (0.7, 0.15, 0.15)


def _default_seed() -> int:
    return int(os.environ.get("ITB_SEED", "0"))


def _write_run_manifest(out_dir: Path, command: str, args: dict, started: float) -> None:
    manifest = {
        "command": command,
        "args": {k: v for k, v in sorted(args.items())},
        "tool_version": __version__,
        "wall_clock_s": round(time.monotonic() - started, 3),
    }
    (out_dir / "run_manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2, default=str) + "\n")


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot read config file {path}: {err}") from err


def _open_scorer(spec: str, dataset=None):
    """Scorer from "external:CMD...", "tcp:HOST:PORT" or a model directory."""
    if spec.startswith("external:"):
        endpoint = spec[len("external:"):]
        kwargs = {}
        if dataset is not None:
            n, m, t = dataset.shape
            kwargs = {"expected_shape": (m, t), "expected_classes": dataset.n_classes}
        if not endpoint.startswith("tcp:"):
            endpoint = endpoint.split()
        return ExternalScorer(endpoint, **kwargs)
    return load_model(spec)


def cmd_gen(args) -> int:
    started = time.monotonic()
    overrides = _load_config_file(args.config)
    cfg_dict = {
        "variant": args.variant.upper(),
        "n_per_class": args.n_per_class,
        "seed": args.seed,
        **overrides,
    }
    config = GenerationConfig.from_dict(cfg_dict)
    config.workers = args.workers
    config.validate()
    dataset = generate_dataset(config)
    splits = split_dataset(dataset.labels, DEFAULT_SPLIT, seed=config.seed)
    out = Path(args.out)
    write_dataset(dataset, out, splits=splits)
    _write_run_manifest(out, "gen", vars(args), started)
    print(f"wrote {dataset.values.shape[0]} samples ({config.variant}) to {out}")
    return 0


def cmd_train(args) -> int:
    started = time.monotonic()
    dataset = read_dataset(args.dataset)
    splits = dataset.splits
    if splits is None:
        splits = split_dataset(dataset.labels, DEFAULT_SPLIT, seed=args.seed)
    overrides = _load_config_file(args.config)
    cfg_dict = {"kind": args.kind, "hidden": args.hidden, "learning_rate": args.learning_rate,
                "max_epochs": args.epochs, "seed": args.seed, **overrides}
    unknown = set(cfg_dict) - set(TrainConfig.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown training config keys: {sorted(unknown)}")
    config = TrainConfig(**cfg_dict)
    model = train(dataset.values[splits["train"]], dataset.labels[splits["train"]],
                  dataset.values[splits["val"]], dataset.labels[splits["val"]], config)
    out = Path(args.out)
    save_model(model, out)
    metrics = {
        split: accuracy(model, dataset.values[idx], dataset.labels[idx])
        for split, idx in splits.items()
    }
    (out / "metrics.json").write_text(canonical_json(metrics))
    _write_run_manifest(out, "train", vars(args), started)
    print("accuracy: " + ", ".join(f"{k}={v:.3f}" for k, v in metrics.items()))
    return 0


def cmd_attribute(args) -> int:
    started = time.monotonic()
    dataset = read_dataset(args.dataset)
    scorer = _open_scorer(args.scorer, dataset)
    splits = dataset.splits
    idx = splits[args.split] if splits is not None else np.arange(len(dataset.labels))
    values = dataset.values[idx].astype(np.float64)
    targets = dataset.labels[idx]
    out = Path(args.out)
    for method in args.methods.split(","):
        method = method.strip()
        if method not in METHODS:
            raise ConfigError(f"unknown method {method!r}; choose from {METHODS}")
        cfg = AttributionConfig(method=method, n_permutations=args.n_permutations,
                                n_coalitions=args.n_coalitions, ig_steps=args.ig_steps,
                                baseline_policy=args.baseline,
                                fd_fallback=args.fd_fallback, seed=args.seed)
        relevance = attribute_dataset(scorer, values, targets, cfg)
        write_relevance(out / method, relevance, method=method, scorer_id=scorer.scorer_id,
                        target_policy="true", seed=args.seed, params=cfg.to_dict())
        print(f"wrote {method} relevance for {len(values)} samples")
    _write_run_manifest(out, "attribute", vars(args), started)
    return 0


def cmd_evaluate(args) -> int:
    started = time.monotonic()
    dataset = read_dataset(args.dataset)
    scorer = _open_scorer(args.scorer, dataset)
    splits = dataset.splits
    idx = splits[args.split] if splits is not None else np.arange(len(dataset.labels))
    values = dataset.values[idx].astype(np.float64)
    labels = dataset.labels[idx]
    weights = dataset.expert_weights[idx] if dataset.expert_weights is not None else None
    exp = expectancy(scorer, values)
    config = EvaluationConfig(occlusion=args.occlusion, seed=args.seed)
    rel_root = Path(args.relevance)
    reports = {}
    for method in args.methods.split(","):
        method = method.strip()
        container = read_relevance(rel_root / method)
        shape = container.relevance.shape
        if shape[1:] != dataset.values.shape[1:]:
            raise ShapeMismatch(f"relevance per-sample shape {shape[1:]} != dataset {dataset.values.shape[1:]}")
        if shape[0] == len(idx):
            rel = container.relevance
        elif shape[0] == len(dataset.labels):
            rel = container.relevance[idx]
        else:
            raise ShapeMismatch(f"relevance covers {shape[0]} samples; split has {len(idx)}")
        reports[method] = evaluate_method(scorer, values, labels, rel, config, exp,
                                          method_name=method, expert_weights=weights)
    out = Path(args.out)
    meta = {
        "dataset": str(args.dataset),
        "variant": dataset.manifest.get("variant"),
        "occlusion": args.occlusion,
        "split": args.split,
        "seed": args.seed,
        "scorer": scorer.scorer_id,
    }
    write_report(out, reports, meta)
    _write_run_manifest(out, "evaluate", vars(args), started)
    for name, rep in sorted(reports.items(), key=lambda kv: -kv[1].auc_s_e):
        print(f"{name}: AUC={rep.auc_s_e:.3f} n={rep.n_evaluated}")
    return 0


def cmd_report(args) -> int:
    payloads = {}
    for entry in args.reports.split(","):
        path = Path(entry.strip())
        payload = read_report(path)
        name = payload.get("meta", {}).get("variant") or path.name
        while name in payloads:
            name = f"{path.parent.name}/{name}"
        payloads[name] = payload
    if not payloads:
        raise IoFailure("no report directories given")
    write_ranking(args.out, payloads)
    print(f"wrote ranking to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsinterp")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    p.add_argument("--variant", default="sd1", choices=["sd1", "sd2", "sd3", "SD1", "SD2", "SD3"])
    p.add_argument("--n-per-class", type=int, default=500)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.add_argument("--config", help="JSON file overriding generation config keys")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a builtin classifier")
    p.add_argument("--dataset", required=True)
    p.add_argument("--kind", default="mlp", choices=["mlp", "linear"])
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--learning-rate", type=float, default=0.05)
    p.add_argument("--epochs", type=int, default=400)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--config", help="JSON file overriding training config keys")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("attribute", help="compute relevance maps")
    p.add_argument("--dataset", required=True)
    p.add_argument("--scorer", required=True,
                   help="model directory, external:CMD, or external:tcp:HOST:PORT")
    p.add_argument("--methods", default="shapley,ig,random")
    p.add_argument("--split", default="test", choices=["train", "val", "test"])
    p.add_argument("--n-permutations", type=int, default=25)
    p.add_argument("--n-coalitions", type=int, default=2048)
    p.add_argument("--ig-steps", type=int, default=50)
    p.add_argument("--baseline", default="zeros", choices=["zeros", "normal_noise"],
                   help="reference input for shapley/kernelshap/ig")
    p.add_argument("--fd-fallback", action="store_true",
                   help="use finite differences when the scorer has no gradients")
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_attribute)

    p = sub.add_parser("evaluate", help="score relevance maps with occlusion metrics")
    p.add_argument("--dataset", required=True)
    p.add_argument("--scorer", required=True)
    p.add_argument("--relevance", required=True, help="directory holding per-method containers")
    p.add_argument("--methods", default="shapley,ig,random")
    p.add_argument("--split", default="test", choices=["train", "val", "test"])
    p.add_argument("--occlusion", default="normal", choices=["normal", "permute"])
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="aggregate reports into a ranking CSV")
    p.add_argument("--reports", required=True, help="comma-separated report directories")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except GenerationFailed as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_GENERATION
    except ExternalScorerFailure as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_EXTERNAL
    except (ShapeMismatch, FormatVersionMismatch, IoFailure, MethodUnsupportedForScorer) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_SHAPE
    except TsInterpError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
