from __future__ import annotations

import numpy as np
import pytest
import torch

from nnbridge.attribution import (
    METHODS,
    AttributionSettings,
    UnsupportedMethod,
    attribute_dataset,
    attribute_sample,
    deeplift,
    gradient_shap,
    integrated_gradients,
    saliency,
)
from nnbridge.models import score


def logit(model, x, target):
    return float(score(model, x[None])[0, target])


def test_saliency_is_abs_weight_for_linear(linear_model, rng):
    x = rng.normal(size=(2, 16))
    expected = np.abs(linear_model.fc.weight[1].detach().numpy().reshape(2, 16))
    np.testing.assert_allclose(saliency(linear_model, x, 1), expected, atol=1e-6)


def test_ig_exact_for_linear_any_steps(linear_model, rng):
    """For a linear scorer the path integral is exact at any resolution and
    equals w * (x - baseline)."""
    x = rng.normal(size=(2, 16))
    w = linear_model.fc.weight[2].detach().numpy().reshape(2, 16)
    for steps in (1, 3, 50):
        rel = integrated_gradients(linear_model, x, 2, steps=steps)
        np.testing.assert_allclose(rel, w * x, atol=1e-5)


def test_ig_completeness_cnn(cnn_model, rng):
    """Attributions sum to f(x) - f(baseline) as the path resolution grows."""
    x = rng.normal(size=(2, 16))
    rel = integrated_gradients(cnn_model, x, 0, steps=300)
    gap = logit(cnn_model, x, 0) - logit(cnn_model, np.zeros_like(x), 0)
    assert abs(rel.sum() - gap) <= 5e-3 * max(1.0, abs(gap))


def test_deeplift_linear_closed_form(linear_model, rng):
    x = rng.normal(size=(2, 16))
    w = linear_model.fc.weight[0].detach().numpy().reshape(2, 16)
    np.testing.assert_allclose(deeplift(linear_model, x, 0), w * x, atol=1e-6)


def test_deeplift_completeness_cnn(cnn_model, rng):
    """The rescale rule preserves the logit difference exactly (up to float32)."""
    for target in range(3):
        x = rng.normal(size=(2, 16))
        rel = deeplift(cnn_model, x, target)
        gap = logit(cnn_model, x, target) - logit(cnn_model, np.zeros_like(x), target)
        assert abs(rel.sum() - gap) <= 1e-4 * max(1.0, abs(gap))


def test_deeplift_nonzero_baseline_completeness(cnn_model, rng):
    x = rng.normal(size=(2, 16))
    base = rng.normal(size=(2, 16)) * 0.1
    rel = deeplift(cnn_model, x, 1, baseline=base)
    gap = logit(cnn_model, x, 1) - logit(cnn_model, base, 1)
    assert abs(rel.sum() - gap) <= 1e-4 * max(1.0, abs(gap))


def test_deeplift_matches_ig_for_relu_free_path(linear_model, rng):
    x = rng.normal(size=(2, 16))
    np.testing.assert_allclose(deeplift(linear_model, x, 1),
                               integrated_gradients(linear_model, x, 1, steps=4),
                               atol=1e-5)


def test_gradshap_linear_recovers_weights(linear_model):
    """For a linear model every expected-gradient sample is exactly w * (x - b),
    so the average converges to w * x minus w times the mean baseline."""
    x = np.full((2, 16), 0.5)
    settings = AttributionSettings(method="gradshap", gradshap_samples=4000, seed=0)
    rng = np.random.default_rng(5)
    rel = gradient_shap(linear_model, x, 1, settings, rng)
    w = linear_model.fc.weight[1].detach().numpy().reshape(2, 16)
    np.testing.assert_allclose(rel, w * x, atol=5e-2)


def test_autograd_matches_finite_differences(cnn_model, rng):
    x = rng.normal(size=(2, 16))
    rel = saliency(cnn_model, x, 2)
    fd = np.empty_like(x)
    h = 1e-3
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        fd[idx] = (logit(cnn_model, xp, 2) - logit(cnn_model, xm, 2)) / (2 * h)
    np.testing.assert_allclose(rel, np.abs(fd), atol=2e-3)


def test_dispatch_covers_all_methods(cnn_model, rng):
    x = rng.normal(size=(2, 16))
    for method in METHODS:
        settings = AttributionSettings(method=method, ig_steps=4, gradshap_samples=3)
        rel = attribute_sample(cnn_model, x, 0, settings, np.random.default_rng(0))
        assert rel.shape == x.shape
        assert np.all(np.isfinite(rel))


def test_unknown_method_rejected(cnn_model):
    with pytest.raises(UnsupportedMethod):
        AttributionSettings(method="lime").validate()


def test_deeplift_unsupported_architecture():
    class Odd(torch.nn.Module):
        input_shape = (2, 16)
        n_classes = 3
        kind = "odd"

    with pytest.raises(UnsupportedMethod):
        deeplift(Odd(), np.zeros((2, 16)), 0)


def test_attribute_dataset_deterministic(cnn_model, rng):
    values = rng.normal(size=(3, 2, 16))
    targets = np.array([0, 1, 2])
    settings = AttributionSettings(method="gradshap", gradshap_samples=3, seed=7)
    a = attribute_dataset(cnn_model, values, targets, settings)
    b = attribute_dataset(cnn_model, values, targets, settings)
    np.testing.assert_array_equal(a, b)


def test_attribute_dataset_per_sample_streams(cnn_model, rng):
    """Each sample draws from its own keyed stream, so identical inputs at
    different positions get different random relevance."""
    x = rng.normal(size=(2, 16))
    values = np.stack([x, x])
    settings = AttributionSettings(method="random", seed=3)
    rel = attribute_dataset(cnn_model, values, np.array([0, 0]), settings)
    assert not np.array_equal(rel[0], rel[1])
