"""Bit-exact directory containers for datasets, relevance maps, and splits.

Layout: manifest.json plus raw little-endian tensors (values.f32, labels.u8,
expert_weights.u8, relevance.f32). The manifest is canonical JSON (sorted
keys, no whitespace) so directory checksums are stable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyClassSplit, FormatVersionMismatch, IoFailure, ShapeMismatch
from .generate import Dataset, GenerationConfig

FORMAT_VERSION = 1


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False) + "\n"


def _write_manifest(path: Path, manifest: dict) -> None:
    (path / "manifest.json").write_text(canonical_json(manifest), encoding="utf-8")


def _read_manifest(path: Path) -> dict:
    try:
        manifest = json.loads((path / "manifest.json").read_text(encoding="utf-8"))
    except OSError as err:
        raise IoFailure(f"cannot read manifest in {path}") from err
    except json.JSONDecodeError as err:
        raise IoFailure(f"corrupt manifest in {path}") from err
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise FormatVersionMismatch(f"format version {version}, expected {FORMAT_VERSION}")
    return manifest


def _write_tensor(path: Path, arr: np.ndarray) -> None:
    path.write_bytes(np.ascontiguousarray(arr).tobytes())


def _read_tensor(path: Path, dtype: str, shape: tuple[int, ...]) -> np.ndarray:
    expected = int(np.prod(shape)) * np.dtype(dtype).itemsize
    try:
        raw = path.read_bytes()
    except OSError as err:
        raise IoFailure(f"cannot read {path}") from err
    if len(raw) != expected:
        raise ShapeMismatch(f"{path.name}: expected {expected} bytes, found {len(raw)}")
    return np.frombuffer(raw, dtype=np.dtype(dtype).newbyteorder("<")).reshape(shape).copy()


@dataclass
class DatasetContainer:
    manifest: dict
    values: np.ndarray          # (N, M, T) float32
    labels: np.ndarray          # (N,) uint8
    expert_weights: np.ndarray | None

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape

    @property
    def n_classes(self) -> int:
        return len(self.manifest["class_names"])

    @property
    def config(self) -> GenerationConfig:
        return GenerationConfig.from_dict(self.manifest["generation_config"])

    @property
    def splits(self) -> dict[str, np.ndarray] | None:
        raw = self.manifest.get("splits")
        if raw is None:
            return None
        return {k: np.asarray(v, dtype=np.int64) for k, v in raw.items()}


def write_dataset(dataset: Dataset | DatasetContainer, path: str | Path,
                  splits: dict[str, np.ndarray] | None = None) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    if isinstance(dataset, Dataset):
        n, m, t = dataset.values.shape
        manifest = {
            "format_version": FORMAT_VERSION,
            "kind": "dataset",
            "n": n, "m": m, "t": t,
            "class_names": list(dataset.class_names),
            "variant": dataset.config.variant,
            "generation_config": dataset.config.to_dict(),
            "seed": dataset.config.seed,
            "has_expert_weights": dataset.expert_weights is not None,
        }
        values, labels, weights = dataset.values, dataset.labels, dataset.expert_weights
    else:
        manifest = dict(dataset.manifest)
        values, labels, weights = dataset.values, dataset.labels, dataset.expert_weights
    if splits is not None:
        manifest["splits"] = {k: [int(i) for i in v] for k, v in splits.items()}
    _write_manifest(path, manifest)
    _write_tensor(path / "values.f32", values.astype("<f4"))
    _write_tensor(path / "labels.u8", labels.astype(np.uint8))
    if weights is not None:
        _write_tensor(path / "expert_weights.u8", weights.astype(np.uint8))


def read_dataset(path: str | Path) -> DatasetContainer:
    path = Path(path)
    manifest = _read_manifest(path)
    if manifest.get("kind") != "dataset":
        raise IoFailure(f"{path} is not a dataset container")
    n, m, t = manifest["n"], manifest["m"], manifest["t"]
    values = _read_tensor(path / "values.f32", "f4", (n, m, t))
    labels = _read_tensor(path / "labels.u8", "u1", (n,))
    if int(labels.max(initial=0)) >= len(manifest["class_names"]):
        raise ShapeMismatch("label out of range for declared classes")
    weights = None
    if manifest.get("has_expert_weights"):
        weights = _read_tensor(path / "expert_weights.u8", "u1", (n, m, t))
    return DatasetContainer(manifest=manifest, values=values, labels=labels, expert_weights=weights)


@dataclass
class RelevanceContainer:
    manifest: dict
    relevance: np.ndarray       # (N, M, T) float32


def write_relevance(path: str | Path, relevance: np.ndarray, *, method: str,
                    scorer_id: str, target_policy: str, seed: int,
                    params: dict | None = None) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    relevance = np.asarray(relevance)
    if not np.all(np.isfinite(relevance)):
        raise ShapeMismatch("relevance contains non-finite values")
    n, m, t = relevance.shape
    manifest = {
        "format_version": FORMAT_VERSION,
        "kind": "relevance",
        "n": n, "m": m, "t": t,
        "method": method,
        "scorer_id": scorer_id,
        "target_policy": target_policy,
        "seed": seed,
        "params": params or {},
    }
    _write_manifest(path, manifest)
    _write_tensor(path / "relevance.f32", relevance.astype("<f4"))


def read_relevance(path: str | Path) -> RelevanceContainer:
    path = Path(path)
    manifest = _read_manifest(path)
    if manifest.get("kind") != "relevance":
        raise IoFailure(f"{path} is not a relevance container")
    n, m, t = manifest["n"], manifest["m"], manifest["t"]
    relevance = _read_tensor(path / "relevance.f32", "f4", (n, m, t))
    if not np.all(np.isfinite(relevance)):
        raise ShapeMismatch("relevance contains non-finite values")
    return RelevanceContainer(manifest=manifest, relevance=relevance)


def split_dataset(labels: np.ndarray, fractions: tuple[float, float, float],
                  seed: int) -> dict[str, np.ndarray]:
    """Stratified train/val/test split; per-class counts within 1 of exact
    proportionality, deterministic given seed."""
    if any(f <= 0 for f in fractions):
        raise EmptyClassSplit("all split fractions must be strictly positive")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise EmptyClassSplit(f"fractions must sum to 1, got {sum(fractions)}")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0xBEEF])))
    labels = np.asarray(labels)
    parts: dict[str, list[np.ndarray]] = {"train": [], "val": [], "test": []}
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        rng.shuffle(idx)
        counts = _allocate(len(idx), fractions)
        if counts[0] == 0:
            raise EmptyClassSplit(f"class {cls} has no training samples")
        ofs = 0
        for name, cnt in zip(("train", "val", "test"), counts):
            parts[name].append(idx[ofs : ofs + cnt])
            ofs += cnt
    return {k: np.sort(np.concatenate(v)) for k, v in parts.items()}


def _allocate(n: int, fractions: tuple[float, float, float]) -> list[int]:
    # Largest-remainder allocation; ties broken by split order.
    exact = [f * n for f in fractions]
    counts = [int(e) for e in exact]
    remainders = [e - c for e, c in zip(exact, counts)]
    for _ in range(n - sum(counts)):
        i = max(range(len(fractions)), key=lambda j: (remainders[j], -j))
        counts[i] += 1
        remainders[i] = -1.0
    return counts
