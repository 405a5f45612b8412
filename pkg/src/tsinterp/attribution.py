"""Black-box and gradient attribution methods producing relevance maps.

All methods take a Scorer, one sample x of shape (M, T), and a target class,
and return a relevance map of the same shape. Determinism comes from the
caller-supplied numpy Generator.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import MethodUnsupportedForScorer, SingularRegression
from .generate import DEFAULT_NOISE_STD
from .models import GradientProvider, Scorer

METHODS = ("shapley", "kernelshap", "saliency", "ig", "random")

FD_COST_WARNING_ELEMENTS = 10_000


@dataclass
class AttributionConfig:
    method: str = "shapley"
    n_permutations: int = 25
    n_coalitions: int = 2048
    ig_steps: int = 50
    baseline_policy: str = "zeros"     # "zeros" | "normal_noise"
    group_time_steps: bool = False
    fd_fallback: bool = False          # allow finite differences for gradient-free scorers
    seed: int = 0

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if min(self.n_permutations, self.n_coalitions, self.ig_steps) < 1:
            raise ValueError("counts must be positive")
        if self.baseline_policy not in ("zeros", "normal_noise"):
            raise ValueError(f"unknown baseline policy {self.baseline_policy!r}")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "n_permutations": self.n_permutations,
            "n_coalitions": self.n_coalitions,
            "ig_steps": self.ig_steps,
            "baseline_policy": self.baseline_policy,
            "group_time_steps": self.group_time_steps,
            "fd_fallback": self.fd_fallback,
            "seed": self.seed,
        }


def make_baseline(x: np.ndarray, policy: str, rng: np.random.Generator) -> np.ndarray:
    if policy == "zeros":
        return np.zeros_like(x)
    return rng.normal(0.0, DEFAULT_NOISE_STD, size=x.shape)


def _player_masks(shape: tuple[int, int], grouped: bool) -> np.ndarray:
    """Boolean (n_players, M*T) matrix mapping players to flattened elements."""
    m, t = shape
    d = m * t
    if not grouped:
        return np.eye(d, dtype=bool)
    masks = np.zeros((t, d), dtype=bool)
    for j in range(t):
        masks[j, j::t] = True
    return masks


def _coalition_values(scorer: Scorer, x: np.ndarray, baseline: np.ndarray, target: int,
                      coalitions: np.ndarray, players: np.ndarray,
                      batch_size: int = 1024) -> np.ndarray:
    """Score v(S) for each coalition row (boolean over players)."""
    xf = x.reshape(-1)
    bf = baseline.reshape(-1)
    elem = coalitions.astype(np.float64) @ players.astype(np.float64)  # (n, M*T) in {0,1}
    states = bf[None, :] + elem * (xf - bf)[None, :]
    out = np.empty(len(states))
    for i in range(0, len(states), batch_size):
        chunk = states[i : i + batch_size].reshape(-1, *x.shape)
        out[i : i + batch_size] = scorer.score_batch(chunk)[:, target]
    return out


def _spread(phi: np.ndarray, players: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Distribute per-player values evenly over their elements."""
    counts = players.sum(axis=1)
    flat = (phi / counts) @ players.astype(np.float64)
    return flat.reshape(shape)


def shapley_sampling(scorer: Scorer, x: np.ndarray, target: int, cfg: AttributionConfig,
                     rng: np.random.Generator, return_stderr: bool = False):
    """Permutation-sampling estimate of per-element Shapley values."""
    players = _player_masks(x.shape, cfg.group_time_steps)
    d = len(players)
    xf, bf = x.reshape(-1), make_baseline(x, cfg.baseline_policy, rng).reshape(-1)
    total = np.zeros(d)
    total_sq = np.zeros(d)
    for _ in range(cfg.n_permutations):
        order = rng.permutation(d)
        ranks = np.empty(d, dtype=np.int64)
        ranks[order] = np.arange(d)
        reveal = ranks[None, :] < np.arange(d + 1)[:, None]     # (d+1, d) players
        elem = reveal.astype(np.float64) @ players.astype(np.float64)
        states = (bf[None, :] + elem * (xf - bf)[None, :]).reshape(-1, *x.shape)
        scores = scorer.score_batch(states)[:, target]
        marginals = np.diff(scores)
        contrib = np.empty(d)
        contrib[order] = marginals
        total += contrib
        total_sq += contrib * contrib
    phi = total / cfg.n_permutations
    out = _spread(phi, players, x.shape)
    if not return_stderr:
        return out
    if cfg.n_permutations > 1:
        var = (total_sq - cfg.n_permutations * phi * phi) / (cfg.n_permutations - 1)
        se = np.sqrt(np.maximum(var, 0.0) / cfg.n_permutations)
    else:
        se = np.full(d, np.inf)
    return out, _spread(se * players.sum(axis=1), players, x.shape)


def exact_shapley(scorer: Scorer, x: np.ndarray, target: int,
                  baseline: np.ndarray | None = None,
                  group_time_steps: bool = False) -> np.ndarray:
    """Exact Shapley values by enumerating all 2^d coalitions (oracle; d <= 20)."""
    players = _player_masks(x.shape, group_time_steps)
    d = len(players)
    if d > 20:
        raise ValueError(f"exact enumeration infeasible for d={d}")
    if baseline is None:
        baseline = np.zeros_like(x)
    subsets = np.arange(1 << d)
    coalitions = (subsets[:, None] >> np.arange(d)) & 1
    v = _coalition_values(scorer, x, baseline, target, coalitions.astype(bool), players)
    sizes = coalitions.sum(axis=1)
    fact = np.array([math.factorial(i) for i in range(d + 1)], dtype=np.float64)
    phi = np.zeros(d)
    for i in range(d):
        without = subsets[(subsets >> i) & 1 == 0]
        s = sizes[without]
        w = fact[s] * fact[d - s - 1] / fact[d]
        phi[i] = np.sum(w * (v[without | (1 << i)] - v[without]))
    return _spread(phi, players, x.shape)


def _kernel_weight(d: int, s: np.ndarray) -> np.ndarray:
    comb = np.array([math.comb(d, int(k)) for k in s], dtype=np.float64)
    return (d - 1) / (comb * s * (d - s))


def _sample_coalitions(d: int, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Sample masks with density proportional to the Shapley kernel weight;
    rows then enter the regression unweighted."""
    sizes = np.arange(1, d)
    p = (d - 1) / (sizes * (d - sizes))
    p = p / p.sum()
    drawn = rng.choice(sizes, size=n, p=p)
    masks = np.zeros((n, d), dtype=bool)
    for row, s in enumerate(drawn):
        masks[row, rng.choice(d, size=int(s), replace=False)] = True
    return masks, np.ones(n)


def kernel_shap(scorer: Scorer, x: np.ndarray, target: int, cfg: AttributionConfig,
                rng: np.random.Generator) -> np.ndarray:
    """Shapley-kernel-weighted linear regression over sampled coalitions.

    The empty and full coalitions are handled exactly through the intercept
    and the sum constraint (local accuracy), so small-d enumerations
    reproduce exact Shapley values.
    """
    players = _player_masks(x.shape, cfg.group_time_steps)
    d = len(players)
    if cfg.n_coalitions < d + 2:
        raise ValueError(f"n_coalitions must be >= {d + 2} for d={d} players")
    baseline = make_baseline(x, cfg.baseline_policy, rng)
    trivial = np.array([[False] * d, [True] * d])
    v0, vf = _coalition_values(scorer, x, baseline, target, trivial, players)

    exhaustive = d <= 16 and (1 << d) - 2 <= cfg.n_coalitions
    for attempt in range(2):
        if exhaustive:
            subsets = np.arange(1, (1 << d) - 1)
            masks = ((subsets[:, None] >> np.arange(d)) & 1).astype(bool)
            weights = _kernel_weight(d, masks.sum(axis=1))
        else:
            masks, weights = _sample_coalitions(d, cfg.n_coalitions, rng)
        v = _coalition_values(scorer, x, baseline, target, masks, players)
        z = masks.astype(np.float64)
        # eliminate the last player via the sum constraint
        y_adj = v - v0 - z[:, -1] * (vf - v0)
        design = z[:, :-1] - z[:, -1:]
        wd = design * weights[:, None]
        lhs = wd.T @ design
        rhs = wd.T @ y_adj
        try:
            beta = np.linalg.solve(lhs, rhs)
        except np.linalg.LinAlgError:
            if attempt == 0 and not exhaustive:
                continue
            raise SingularRegression("coalition regression singular after resampling")
        phi = np.append(beta, (vf - v0) - beta.sum())
        return _spread(phi, players, x.shape)
    raise SingularRegression("unreachable")


def _fd_gradient(scorer: Scorer, x: np.ndarray, target: int,
                 batch_size: int = 512) -> np.ndarray:
    """Central-difference gradient fallback for scorers without gradients."""
    if x.size > FD_COST_WARNING_ELEMENTS:
        warnings.warn(f"finite-difference gradient over {x.size} elements is expensive",
                      stacklevel=3)
    xf = x.reshape(-1)
    h = 1e-3 * (1.0 + np.abs(xf))
    states = np.repeat(xf[None, :], 2 * xf.size, axis=0)
    idx = np.arange(xf.size)
    states[2 * idx, idx] += h
    states[2 * idx + 1, idx] -= h
    scores = np.empty(len(states))
    for i in range(0, len(states), batch_size):
        scores[i : i + batch_size] = scorer.score_batch(
            states[i : i + batch_size].reshape(-1, *x.shape))[:, target]
    grad = (scores[0::2] - scores[1::2]) / (2.0 * h)
    return grad.reshape(x.shape)


def _gradient(scorer: Scorer, x: np.ndarray, target: int, fd_fallback: bool) -> np.ndarray:
    if isinstance(scorer, GradientProvider):
        return scorer.gradient(x, target)
    if fd_fallback:
        return _fd_gradient(scorer, x, target)
    raise MethodUnsupportedForScorer(
        f"{scorer.scorer_id} provides no gradients (pass fd_fallback to use finite differences)")


def saliency(scorer: Scorer, x: np.ndarray, target: int,
             fd_fallback: bool = False) -> np.ndarray:
    """Absolute input gradient of the target logit."""
    return np.abs(_gradient(scorer, x, target, fd_fallback))


def integrated_gradients(scorer: Scorer, x: np.ndarray, target: int, cfg: AttributionConfig,
                         rng: np.random.Generator) -> np.ndarray:
    """Right-endpoint Riemann sum of gradients along the straight path from
    the baseline to x, scaled by (x - baseline)."""
    baseline = make_baseline(x, cfg.baseline_policy, rng)
    k = cfg.ig_steps
    alphas = np.arange(1, k + 1) / k
    points = baseline[None] + alphas[:, None, None] * (x - baseline)[None]
    if isinstance(scorer, GradientProvider):
        grads = scorer.gradient_batch(points, target)
    elif cfg.fd_fallback:
        grads = np.stack([_fd_gradient(scorer, p, target) for p in points])
    else:
        raise MethodUnsupportedForScorer(
            f"{scorer.scorer_id} provides no gradients (pass fd_fallback to use finite differences)")
    return (x - baseline) * grads.mean(axis=0)


def random_relevance(shape: tuple[int, int], rng: np.random.Generator) -> np.ndarray:
    """Uniform(0,1) relevance baseline; all positive so the positive set
    spans the full grid."""
    return rng.random(shape)


def attribute_sample(scorer: Scorer, x: np.ndarray, target: int, cfg: AttributionConfig,
                     rng: np.random.Generator) -> np.ndarray:
    cfg.validate()
    if cfg.method == "shapley":
        return shapley_sampling(scorer, x, target, cfg, rng)
    if cfg.method == "kernelshap":
        return kernel_shap(scorer, x, target, cfg, rng)
    if cfg.method == "saliency":
        return saliency(scorer, x, target, fd_fallback=cfg.fd_fallback)
    if cfg.method == "ig":
        return integrated_gradients(scorer, x, target, cfg, rng)
    return random_relevance(x.shape, rng)


def attribute_dataset(scorer: Scorer, values: np.ndarray, targets: np.ndarray,
                      cfg: AttributionConfig) -> np.ndarray:
    """Relevance maps for every sample, each from its own RNG substream so
    results are independent of evaluation order."""
    cfg.validate()
    out = np.empty_like(values, dtype=np.float64)
    method_code = METHODS.index(cfg.method)
    for i, (x, target) in enumerate(zip(values, targets)):
        rng = np.random.Generator(np.random.Philox(
            np.random.SeedSequence([cfg.seed, method_code, i])))
        out[i] = attribute_sample(scorer, np.asarray(x, dtype=np.float64), int(target), cfg, rng)
    return out
