#!/usr/bin/env python3
"""End-to-end benchmark driver: generate, train, attribute, evaluate, rank.

Produces, under --out:
  <variant>/ds, <variant>/model, <variant>/rel, <variant>/report-<occlusion>
and ranking-<occlusion>.csv across all requested variants.
"""

import argparse
import json
import sys
import tempfile
from pathlib import Path

from tsinterp.cli import main as cli

# Per-variant settings that reach >=0.90 desk-scale test accuracy with the
# builtin MLP and keep the attribution ordering gaps healthy (see
# tests/test_acceptance.py). SD1 information is globally redundant, so a
# denser shift ensemble (stride 10) gives sharper attribution maps there;
# SD2 needs the stride-25 ensemble for accuracy. Shapley permutations follow
# the same trade-off.
RECIPE = {
    "hidden": 128,
    "learning_rate": 0.01,
    "batch_size": 32,
    "max_epochs": 3000,
    "weight_decay": 1e-3,
    "lr_schedule": "cosine",
    "label_smoothing": 0.1,
    "augment_shifts": 4,
    "init": "sine",
    "snapshot_every": 50,
}
ENSEMBLE_STRIDE = {"SD1": 10, "SD2": 25, "SD3": 25}
N_PERMUTATIONS = {"SD1": 16, "SD2": 10, "SD3": 10}


def run(args: list[str]) -> None:
    code = cli(args)
    if code != 0:
        sys.exit(code)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--variants", default="SD1,SD2")
    parser.add_argument("--n-per-class", type=int, default=100)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--train-seed", type=int, default=6)
    parser.add_argument("--methods", default="shapley,kernelshap,ig,random")
    parser.add_argument("--baseline", default="normal_noise", choices=["zeros", "normal_noise"])
    parser.add_argument("--out", required=True)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    variants = [v.strip().upper() for v in args.variants.split(",")]
    for variant in variants:
        base = out / variant
        recipe = {**RECIPE, "seed": args.train_seed,
                  "ensemble_stride": ENSEMBLE_STRIDE.get(variant, 25)}
        with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
            json.dump(recipe, fh)
            train_cfg = fh.name
        run(["gen", "--variant", variant.lower(), "--n-per-class", str(args.n_per_class),
             "--seed", str(args.seed), "--out", str(base / "ds")])
        run(["train", "--dataset", str(base / "ds"), "--config", train_cfg,
             "--seed", str(args.train_seed), "--out", str(base / "model")])
        run(["attribute", "--dataset", str(base / "ds"), "--scorer", str(base / "model"),
             "--methods", args.methods, "--seed", str(args.seed),
             "--n-permutations", str(N_PERMUTATIONS.get(variant, 10)),
             "--baseline", args.baseline,
             "--out", str(base / "rel")])
        for occlusion in ("normal", "permute"):
            run(["evaluate", "--dataset", str(base / "ds"), "--scorer", str(base / "model"),
                 "--relevance", str(base / "rel"), "--methods", args.methods,
                 "--occlusion", occlusion, "--seed", str(args.seed),
                 "--out", str(base / f"report-{occlusion}")])
    for occlusion in ("normal", "permute"):
        reports = ",".join(str(out / v / f"report-{occlusion}") for v in variants)
        run(["report", "--reports", reports,
             "--out", str(out / f"ranking-{occlusion}.csv")])
    print(f"benchmark complete; rankings in {out}")


if __name__ == "__main__":
    main()
