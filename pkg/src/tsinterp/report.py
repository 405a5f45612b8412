"""Evaluation report serialization: canonical JSON, curve CSVs, ranking CSV."""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .errors import IoFailure
from .evaluation import MethodReport
from .store import canonical_json


def write_report(out_dir: str | Path, reports: dict[str, MethodReport], meta: dict) -> None:
    """Write report.json (canonical, deterministic) and curves.csv."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "meta": meta,
        "methods": {name: rep.to_dict() for name, rep in sorted(reports.items())},
    }
    (out_dir / "report.json").write_text(canonical_json(payload), encoding="utf-8")
    with open(out_dir / "curves.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "q", "n_r", "tic", "s_e", "accuracy_n_r", "accuracy"])
        for name, rep in sorted(reports.items()):
            for i, q in enumerate(rep.quantiles):
                writer.writerow([
                    name, f"{q:g}",
                    repr(float(rep.mean_n_r[i])), repr(float(rep.mean_tic[i])),
                    repr(float(rep.mean_s_e[i])),
                    repr(float(rep.accuracy_n_r[i])), repr(float(rep.accuracy[i])),
                ])


def read_report(path: str | Path) -> dict:
    path = Path(path)
    try:
        return json.loads((path / "report.json").read_text(encoding="utf-8"))
    except OSError as err:
        raise IoFailure(f"cannot read report in {path}") from err
    except json.JSONDecodeError as err:
        raise IoFailure(f"corrupt report in {path}") from err


def write_ranking(out_path: str | Path, reports_by_dataset: dict[str, dict]) -> None:
    """Aggregate several report.json payloads (keyed by dataset name) into a
    ranking table: method, per-dataset AUC, average, rank."""
    datasets = sorted(reports_by_dataset)
    methods: set[str] = set()
    for payload in reports_by_dataset.values():
        methods.update(payload["methods"])
    if not methods:
        raise IoFailure("no methods found in any report")
    rows = []
    for method in sorted(methods):
        aucs = []
        for ds in datasets:
            rep = reports_by_dataset[ds]["methods"].get(method)
            aucs.append(rep["auc_s_e"] if rep is not None else None)
        present = [a for a in aucs if a is not None]
        rows.append([method, aucs, sum(present) / len(present)])
    rows.sort(key=lambda r: -r[2])
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", *datasets, "average", "rank"])
        for rank, (method, aucs, avg) in enumerate(rows, start=1):
            writer.writerow([
                method,
                *["" if a is None else repr(float(a)) for a in aucs],
                repr(float(avg)), rank,
            ])
