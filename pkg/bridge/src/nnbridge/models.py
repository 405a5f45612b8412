"""Torch classifier architectures served by the bridge.

Models output pre-softmax logits on (B, M, T) float tensors. Two reference
architectures: a linear probe (useful for closed-form attribution checks)
and a small 1-D CNN with global average pooling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn


class LinearProbe(nn.Module):
    """Single linear layer on the flattened sample."""

    kind = "linear"

    def __init__(self, input_shape: tuple[int, int], n_classes: int):
        super().__init__()
        self.input_shape = tuple(input_shape)
        self.n_classes = n_classes
        m, t = input_shape
        self.fc = nn.Linear(m * t, n_classes)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc(x.reshape(x.shape[0], -1))


class SmallCnn(nn.Module):
    """Three conv blocks with ReLU, global average pooling, linear head."""

    kind = "cnn"

    def __init__(self, input_shape: tuple[int, int], n_classes: int,
                 channels: int = 64, kernel: int = 7):
        super().__init__()
        self.input_shape = tuple(input_shape)
        self.n_classes = n_classes
        m, _ = input_shape
        pad = kernel // 2
        self.conv1 = nn.Conv1d(m, channels, kernel, padding=pad)
        self.conv2 = nn.Conv1d(channels, channels, kernel, padding=pad)
        self.conv3 = nn.Conv1d(channels, channels, kernel, padding=pad)
        self.head = nn.Linear(channels, n_classes)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = torch.relu(self.conv1(x))
        h = torch.relu(self.conv2(h))
        h = torch.relu(self.conv3(h))
        return self.head(h.mean(dim=2))


ARCHITECTURES = {"linear": LinearProbe, "cnn": SmallCnn}


def build_model(kind: str, input_shape: tuple[int, int], n_classes: int, **kwargs) -> nn.Module:
    if kind not in ARCHITECTURES:
        raise ValueError(f"unknown architecture {kind!r}; choose from {sorted(ARCHITECTURES)}")
    return ARCHITECTURES[kind](input_shape, n_classes, **kwargs)


def save_model(model: nn.Module, path: str | Path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    meta = {
        "kind": model.kind,
        "input_shape": list(model.input_shape),
        "n_classes": model.n_classes,
    }
    (path / "model.json").write_text(json.dumps(meta, sort_keys=True) + "\n")
    torch.save(model.state_dict(), path / "weights.pt")


def load_model(path: str | Path) -> nn.Module:
    path = Path(path)
    meta = json.loads((path / "model.json").read_text())
    state = torch.load(path / "weights.pt", map_location="cpu", weights_only=True)
    kwargs = {}
    if meta["kind"] == "cnn":
        kwargs["channels"] = state["conv1.weight"].shape[0]
        kwargs["kernel"] = state["conv1.weight"].shape[2]
    model = build_model(meta["kind"], tuple(meta["input_shape"]), meta["n_classes"], **kwargs)
    model.load_state_dict(state)
    model.eval()
    return model


@torch.no_grad()
def score(model: nn.Module, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Pre-softmax logits for a (B, M, T) float array."""
    model.eval()
    out = []
    for i in range(0, len(x), batch_size):
        batch = torch.as_tensor(x[i : i + batch_size], dtype=torch.float32)
        out.append(model(batch).numpy())
    return np.concatenate(out) if out else np.empty((0, model.n_classes))


@dataclass
class FitConfig:
    epochs: int = 200
    batch_size: int = 64
    learning_rate: float = 1e-3
    dropout_shift: bool = True      # random circular shift augmentation
    seed: int = 0


def fit(model: nn.Module, x: np.ndarray, y: np.ndarray, config: FitConfig) -> nn.Module:
    """Train with AdamW and cross-entropy (optionally shift-augmented)."""
    torch.manual_seed(config.seed)
    xt = torch.as_tensor(x, dtype=torch.float32)
    yt = torch.as_tensor(y, dtype=torch.long)
    opt = torch.optim.AdamW(model.parameters(), lr=config.learning_rate)
    loss_fn = nn.CrossEntropyLoss()
    t_len = xt.shape[2]
    model.train()
    for _ in range(config.epochs):
        perm = torch.randperm(len(xt))
        for start in range(0, len(xt), config.batch_size):
            idx = perm[start : start + config.batch_size]
            batch = xt[idx]
            if config.dropout_shift:
                batch = torch.roll(batch, int(torch.randint(0, t_len, (1,))), dims=2)
            opt.zero_grad()
            loss_fn(model(batch), yt[idx]).backward()
            opt.step()
    model.eval()
    return model
