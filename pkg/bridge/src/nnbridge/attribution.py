"""Framework-native attribution for the bridge's torch models.

Methods: saliency, integrated gradients, gradient SHAP, and DeepLift with
the rescale rule. All return numpy relevance maps shaped like the input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn
from torch.nn.grad import conv1d_input

from .models import LinearProbe, SmallCnn

METHODS = ("saliency", "ig", "gradshap", "deeplift", "random")


class UnsupportedMethod(RuntimeError):
    pass


@dataclass
class AttributionSettings:
    method: str = "ig"
    ig_steps: int = 50
    gradshap_samples: int = 20
    noise_std: float = 1.0 / (2.0 * np.sqrt(3.0))
    seed: int = 0

    def validate(self) -> None:
        if self.method not in METHODS:
            raise UnsupportedMethod(f"unknown method {self.method!r}; choose from {METHODS}")
        if min(self.ig_steps, self.gradshap_samples) < 1:
            raise ValueError("step/sample counts must be positive")


def _gradient(model: nn.Module, x: torch.Tensor, target: int) -> torch.Tensor:
    """d logit_target / d x for a batch, via autograd."""
    x = x.clone().requires_grad_(True)
    logits = model(x)
    logits[:, target].sum().backward()
    return x.grad.detach()


def saliency(model: nn.Module, x: np.ndarray, target: int) -> np.ndarray:
    xt = torch.as_tensor(x[None], dtype=torch.float32)
    return _gradient(model, xt, target)[0].abs().numpy()


def integrated_gradients(model: nn.Module, x: np.ndarray, target: int,
                         steps: int = 50, baseline: np.ndarray | None = None) -> np.ndarray:
    """Right-endpoint Riemann sum along the straight path from the baseline."""
    xt = torch.as_tensor(x, dtype=torch.float32)
    base = torch.zeros_like(xt) if baseline is None else torch.as_tensor(baseline, dtype=torch.float32)
    alphas = torch.arange(1, steps + 1, dtype=torch.float32) / steps
    points = base[None] + alphas[:, None, None] * (xt - base)[None]
    grads = _gradient(model, points, target)
    return ((xt - base) * grads.mean(dim=0)).numpy()


def gradient_shap(model: nn.Module, x: np.ndarray, target: int, settings: AttributionSettings,
                  rng: np.random.Generator) -> np.ndarray:
    """Expected gradients over noisy baselines and uniform path positions."""
    xt = torch.as_tensor(x, dtype=torch.float32)
    n = settings.gradshap_samples
    bases = torch.as_tensor(
        rng.normal(0.0, settings.noise_std, size=(n, *x.shape)), dtype=torch.float32)
    alphas = torch.as_tensor(rng.random(n), dtype=torch.float32)
    points = bases + alphas[:, None, None] * (xt[None] - bases)
    grads = _gradient(model, points, target)
    return ((xt[None] - bases) * grads).mean(dim=0).numpy()


def _rescale_multiplier(z: torch.Tensor, z_ref: torch.Tensor) -> torch.Tensor:
    """DeepLift rescale multiplier for ReLU: delta-out / delta-in, falling
    back to the local gradient where the input delta vanishes."""
    dz = z - z_ref
    dy = torch.relu(z) - torch.relu(z_ref)
    local = (z > 0).float()
    small = dz.abs() < 1e-7
    return torch.where(small, local, dy / torch.where(small, torch.ones_like(dz), dz))


def deeplift(model: nn.Module, x: np.ndarray, target: int,
             baseline: np.ndarray | None = None) -> np.ndarray:
    """DeepLift (rescale rule) contributions against a baseline reference.

    Supported architectures: LinearProbe (reduces to w * (x - x')) and
    SmallCnn (manual multiplier backprop through conv/ReLU/GAP/linear).
    """
    xt = torch.as_tensor(x, dtype=torch.float32)
    base = torch.zeros_like(xt) if baseline is None else torch.as_tensor(baseline, dtype=torch.float32)
    if isinstance(model, LinearProbe):
        w = model.fc.weight[target].reshape(model.input_shape)
        return (w * (xt - base)).detach().numpy()
    if not isinstance(model, SmallCnn):
        raise UnsupportedMethod(f"deeplift not implemented for {type(model).__name__}")

    with torch.no_grad():
        z1, z1r = model.conv1(xt[None]), model.conv1(base[None])
        a1, a1r = torch.relu(z1), torch.relu(z1r)
        z2, z2r = model.conv2(a1), model.conv2(a1r)
        a2, a2r = torch.relu(z2), torch.relu(z2r)
        z3, z3r = model.conv3(a2), model.conv3(a2r)

        t_len = xt.shape[-1]
        # head: logit = W @ mean_t(relu(z3)) + b
        m = model.head.weight[target][None, :, None].expand(1, -1, t_len) / t_len
        m = m * _rescale_multiplier(z3, z3r)
        m = conv1d_input(a2.shape, model.conv3.weight, m, padding=model.conv3.padding[0])
        m = m * _rescale_multiplier(z2, z2r)
        m = conv1d_input(a1.shape, model.conv2.weight, m, padding=model.conv2.padding[0])
        m = m * _rescale_multiplier(z1, z1r)
        m = conv1d_input(xt[None].shape, model.conv1.weight, m, padding=model.conv1.padding[0])
    return (m[0] * (xt - base)).numpy()


def attribute_sample(model: nn.Module, x: np.ndarray, target: int,
                     settings: AttributionSettings, rng: np.random.Generator) -> np.ndarray:
    settings.validate()
    if settings.method == "saliency":
        return saliency(model, x, target)
    if settings.method == "ig":
        return integrated_gradients(model, x, target, steps=settings.ig_steps)
    if settings.method == "gradshap":
        return gradient_shap(model, x, target, settings, rng)
    if settings.method == "deeplift":
        return deeplift(model, x, target)
    return rng.random(x.shape)


def attribute_dataset(model: nn.Module, values: np.ndarray, targets: np.ndarray,
                      settings: AttributionSettings) -> np.ndarray:
    settings.validate()
    out = np.empty(values.shape, dtype=np.float64)
    code = METHODS.index(settings.method)
    for i, (x, target) in enumerate(zip(values, targets)):
        rng = np.random.Generator(np.random.Philox(
            np.random.SeedSequence([settings.seed, code, i])))
        out[i] = attribute_sample(model, np.asarray(x, dtype=np.float64), int(target),
                                  settings, rng)
    return out
