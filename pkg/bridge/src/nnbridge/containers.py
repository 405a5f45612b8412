"""Reader/writer for the benchmark's directory container format.

Implemented against the documented format (manifest.json in canonical JSON
plus raw little-endian tensors) rather than by importing the core package,
so the bridge only depends on the stable external interface.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


class ContainerError(RuntimeError):
    pass


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False) + "\n"


def _read_manifest(path: Path) -> dict:
    try:
        manifest = json.loads((path / "manifest.json").read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as err:
        raise ContainerError(f"cannot read manifest in {path}: {err}") from err
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ContainerError(f"unsupported format version {manifest.get('format_version')}")
    return manifest


def _read_tensor(path: Path, dtype: str, shape: tuple[int, ...]) -> np.ndarray:
    raw = path.read_bytes()
    expected = int(np.prod(shape)) * np.dtype(dtype).itemsize
    if len(raw) != expected:
        raise ContainerError(f"{path.name}: expected {expected} bytes, found {len(raw)}")
    return np.frombuffer(raw, dtype=np.dtype(dtype).newbyteorder("<")).reshape(shape).copy()


@dataclass
class BridgeDataset:
    manifest: dict
    values: np.ndarray          # (N, M, T) float32
    labels: np.ndarray          # (N,) uint8

    @property
    def n_classes(self) -> int:
        return len(self.manifest["class_names"])

    @property
    def splits(self) -> dict[str, np.ndarray] | None:
        raw = self.manifest.get("splits")
        if raw is None:
            return None
        return {k: np.asarray(v, dtype=np.int64) for k, v in raw.items()}


def read_dataset(path: str | Path) -> BridgeDataset:
    path = Path(path)
    manifest = _read_manifest(path)
    if manifest.get("kind") != "dataset":
        raise ContainerError(f"{path} is not a dataset container")
    n, m, t = manifest["n"], manifest["m"], manifest["t"]
    values = _read_tensor(path / "values.f32", "f4", (n, m, t))
    labels = _read_tensor(path / "labels.u8", "u1", (n,))
    return BridgeDataset(manifest=manifest, values=values, labels=labels)


def write_relevance(path: str | Path, relevance: np.ndarray, *, method: str,
                    scorer_id: str, target_policy: str, seed: int,
                    params: dict | None = None) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    relevance = np.asarray(relevance)
    if relevance.ndim != 3:
        raise ContainerError(f"relevance must be (N, M, T), got {relevance.shape}")
    if not np.all(np.isfinite(relevance)):
        raise ContainerError("relevance contains non-finite values")
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
    (path / "manifest.json").write_text(canonical_json(manifest), encoding="utf-8")
    (path / "relevance.f32").write_bytes(
        np.ascontiguousarray(relevance.astype("<f4")).tobytes())
