"""Bridge command line: train reference models, serve them, export attributions."""

from __future__ import annotations

import argparse
import sys

import numpy as np
import torch

from . import __version__
from .attribution import METHODS, AttributionSettings, attribute_dataset
from .containers import read_dataset, write_relevance
from .models import FitConfig, build_model, fit, load_model, save_model, score
from .protocol import serve_stdio, serve_tcp


def cmd_train(args) -> int:
    ds = read_dataset(args.dataset)
    splits = ds.splits
    idx = splits["train"] if splits is not None else np.arange(len(ds.labels))
    torch.manual_seed(args.seed)  # covers weight init; fit() seeds the loop
    model = build_model(args.kind, ds.values.shape[1:], ds.n_classes)
    cfg = FitConfig(epochs=args.epochs, learning_rate=args.learning_rate, seed=args.seed)
    fit(model, ds.values[idx], ds.labels[idx], cfg)
    save_model(model, args.out)
    for name in ("train", "val", "test") if splits is not None else ("all",):
        part = splits[name] if splits is not None else idx
        acc = float(np.mean(score(model, ds.values[part]).argmax(1) == ds.labels[part]))
        print(f"{name} accuracy: {acc:.3f}")
    return 0


def cmd_serve(args) -> int:
    model = load_model(args.model)
    if args.tcp:
        host, port = args.tcp.rsplit(":", 1)
        serve_tcp(model, host, int(port), batch_size=args.batch_size)
    else:
        serve_stdio(model, batch_size=args.batch_size)
    return 0


def cmd_export(args) -> int:
    model = load_model(args.model)
    ds = read_dataset(args.dataset)
    splits = ds.splits
    idx = splits[args.split] if splits is not None else np.arange(len(ds.labels))
    values = ds.values[idx].astype(np.float64)
    targets = ds.labels[idx]
    for method in args.methods.split(","):
        settings = AttributionSettings(method=method.strip(), ig_steps=args.ig_steps,
                                       gradshap_samples=args.gradshap_samples, seed=args.seed)
        relevance = attribute_dataset(model, values, targets, settings)
        write_relevance(f"{args.out}/{settings.method}", relevance, method=settings.method,
                        scorer_id=f"bridge:{model.kind}", target_policy="true",
                        seed=args.seed, params=vars(settings))
        print(f"wrote {settings.method} relevance for {len(values)} samples")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nnbridge")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a reference torch model on a dataset container")
    p.add_argument("--dataset", required=True)
    p.add_argument("--kind", default="cnn", choices=["cnn", "linear"])
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("serve", help="serve a model over the scoring protocol")
    p.add_argument("--model", required=True)
    p.add_argument("--tcp", help="HOST:PORT (default: stdio)")
    p.add_argument("--batch-size", type=int, default=256)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("export", help="write native attributions as relevance containers")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--methods", default="saliency,ig,deeplift,gradshap",
                   help=f"comma-separated subset of {METHODS}")
    p.add_argument("--split", default="test", choices=["train", "val", "test"])
    p.add_argument("--ig-steps", type=int, default=50)
    p.add_argument("--gradshap-samples", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
