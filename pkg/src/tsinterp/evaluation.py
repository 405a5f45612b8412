"""Occlusion-based evaluation: TIC, normalized score drop, AUC, IR, HMI.

All metrics operate on one sample's relevance map at a set of quantiles of
its strictly positive relevance values. Masked elements are occluded and the
sample rescored; the drop is normalized by the gap between the original score
and the scorer's expectancy over the evaluation split.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateReference,
    InsufficientSamples,
    NoPositiveRelevance,
    NoValidPairs,
)
from .generate import DEFAULT_NOISE_STD
from .models import Scorer, predict

DEFAULT_QUANTILES = tuple(round(0.05 + 0.1 * i, 2) for i in range(10))  # 0.05 .. 0.95

EPS = 1e-8

OCCLUSION_METHODS = ("normal", "permute")


@dataclass
class EvaluationConfig:
    quantiles: tuple[float, ...] = DEFAULT_QUANTILES
    occlusion: str = "normal"           # "normal" | "permute"
    random_mask_baseline: bool = False  # occlude a random mask of matched size instead
    noise_std: float = DEFAULT_NOISE_STD
    correct_only: bool = True
    target_policy: str = "true"         # "true" | "predicted"
    per_class_expectancy: bool = True
    min_samples: int = 5
    eps: float = EPS
    seed: int = 0

    def validate(self) -> None:
        q = self.quantiles
        if not q or any(not (0 < v < 1) for v in q) or any(b <= a for a, b in zip(q, q[1:])):
            raise ValueError("quantiles must be strictly increasing within (0,1)")
        if self.occlusion not in OCCLUSION_METHODS:
            raise ValueError(f"unknown occlusion method {self.occlusion!r}")
        if self.target_policy not in ("true", "predicted"):
            raise ValueError(f"unknown target policy {self.target_policy!r}")


def positive_set(relevance: np.ndarray, q: float) -> np.ndarray:
    """Mask of elements with positive relevance at or above the q-quantile of
    the sample's strictly positive relevance values. Empty if no entry is
    positive. Nested: larger q gives a subset."""
    if not 0 < q < 1:
        raise ValueError("q must lie in (0,1)")
    positive = relevance > 0
    if not positive.any():
        return np.zeros_like(positive)
    threshold = np.quantile(relevance[positive], q)
    return positive & (relevance >= threshold)


def tic(relevance: np.ndarray, q: float, eps: float = EPS) -> float:
    """Share of the total positive relevance mass captured by the q-mask."""
    mask = positive_set(relevance, q)
    total = float(relevance[relevance > 0].sum()) + eps
    return float(relevance[mask].sum()) / total


def occlude(x: np.ndarray, mask: np.ndarray, method: str, rng: np.random.Generator,
            noise_std: float = DEFAULT_NOISE_STD) -> np.ndarray:
    """Replace masked elements: "normal" draws N(0, noise_std^2), "permute"
    shuffles the masked values among the masked positions."""
    if mask.shape != x.shape:
        raise ValueError("mask shape must match sample shape")
    out = x.copy()
    n = int(mask.sum())
    if n == 0:
        return out
    if method == "normal":
        out[mask] = rng.normal(0.0, noise_std, size=n)
    elif method == "permute":
        out[mask] = rng.permutation(out[mask])
    else:
        raise ValueError(f"unknown occlusion method {method!r}")
    return out


def random_mask(shape: tuple[int, ...], n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform random mask of given cardinality (the occlusion baseline)."""
    flat = np.zeros(int(np.prod(shape)), dtype=bool)
    flat[rng.choice(flat.size, size=n, replace=False)] = True
    return flat.reshape(shape)


def s_e(s_orig: float, s_occl: float, expectancy_value: float) -> float:
    """Drop in score normalized by the gap to the expectancy."""
    gap = s_orig - expectancy_value
    if abs(gap) <= 1e-9:
        raise DegenerateReference("original score coincides with the expectancy")
    return 1.0 - (s_occl - expectancy_value) / gap


def hmi(relevance: np.ndarray, expert_weights: np.ndarray, eps: float = EPS) -> float:
    """Overlap between positive relevance and the binary expert mask,
    penalized by the mismatch in flagged-point counts. Always in [0, 1]."""
    if relevance.shape != expert_weights.shape:
        raise ValueError("shape mismatch between relevance and expert weights")
    positive = relevance > 0
    n_pos = int(positive.sum())
    if n_pos == 0:
        raise NoPositiveRelevance("no strictly positive relevance")
    pos_rel = relevance[positive]
    raw = float((expert_weights[positive] * pos_rel).sum()) / (float(pos_rel.sum()) + eps)
    delta = abs(n_pos - int((expert_weights != 0).sum()))
    gamma = min(1.0, delta / n_pos)
    return raw * (1.0 - gamma)


@dataclass
class SampleCurve:
    quantiles: np.ndarray       # ascending
    n_removed: np.ndarray       # mask cardinality per q
    n_r: np.ndarray             # fraction removed per q
    tic: np.ndarray
    s_e: np.ndarray
    occluded_logits: np.ndarray  # (|Q|, K)
    s_orig: float
    expectancy: float


def evaluate_sample(scorer: Scorer, x: np.ndarray, target: int, relevance: np.ndarray,
                    config: EvaluationConfig, expectancy_value: float,
                    rng: np.random.Generator) -> SampleCurve:
    """Mask, occlude, and rescore at each quantile (descending)."""
    x = np.asarray(x, dtype=np.float64)
    s_orig = float(scorer.score_one(x)[target])
    if abs(s_orig - expectancy_value) <= 1e-9:
        raise DegenerateReference("original score coincides with the expectancy")
    total_positive = float(relevance[relevance > 0].sum()) + config.eps
    qs = sorted(config.quantiles, reverse=True)
    states, counts, tics = [], [], []
    for qi, q in enumerate(qs):
        mask = positive_set(relevance, q)
        n = int(mask.sum())
        if config.random_mask_baseline and n > 0:
            mask_rng = np.random.Generator(np.random.Philox(
                np.random.SeedSequence([config.seed, 0x0CC, qi])))
            mask = random_mask(x.shape, n, mask_rng)
        states.append(occlude(x, mask, config.occlusion, rng, config.noise_std))
        counts.append(n)
        tics.append(float(relevance[positive_set(relevance, q)].sum()) / total_positive)
    logits = scorer.score_batch(np.stack(states))
    drops = np.array([s_e(s_orig, float(l[target]), expectancy_value) for l in logits])
    counts = np.array(counts, dtype=np.int64)
    return SampleCurve(
        quantiles=np.array(qs[::-1]),
        n_removed=counts[::-1].copy(),
        n_r=(counts[::-1] / x.size).astype(np.float64),
        tic=np.array(tics[::-1]),
        s_e=drops[::-1].copy(),
        occluded_logits=logits[::-1].copy(),
        s_orig=s_orig,
        expectancy=expectancy_value,
    )


def auc_se(n_r: np.ndarray, drops: np.ndarray) -> float:
    """Trapezoidal area of the drop curve over [0, 1].

    The curve is extended through the origin, and the value at full removal
    is taken from the smallest quantile (the largest mask).
    """
    order = np.argsort(n_r)
    xs = np.concatenate(([0.0], np.asarray(n_r)[order], [1.0]))
    ys = np.concatenate(([0.0], np.asarray(drops)[order], [np.asarray(drops)[order][-1]]))
    integrate = getattr(np, "trapezoid", np.trapz)
    return float(integrate(ys, xs))


def information_ratio(curves: list[SampleCurve], tol: float = 1e-6) -> float:
    """Mean slope of the drop against TIC over adjacent quantile pairs."""
    slopes = []
    for curve in curves:
        d_tic = np.diff(curve.tic)
        d_se = np.diff(curve.s_e)
        keep = np.abs(d_tic) >= tol
        slopes.extend((d_se[keep] / d_tic[keep]).tolist())
    if not slopes:
        raise NoValidPairs("no quantile pairs with distinct TIC values")
    return float(np.mean(slopes))


@dataclass
class MethodReport:
    method: str
    occlusion: str
    quantiles: np.ndarray
    mean_n_r: np.ndarray
    mean_tic: np.ndarray
    mean_s_e: np.ndarray
    auc_s_e: float
    information_ratio: float | None
    hmi_mean: float | None
    accuracy_n_r: np.ndarray        # mean fraction removed per q over all eval samples
    accuracy: np.ndarray            # occluded accuracy per q
    n_evaluated: int
    n_skipped: int
    flagged: bool = False
    audit: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "occlusion": self.occlusion,
            "quantiles": [float(v) for v in self.quantiles],
            "mean_n_r": [float(v) for v in self.mean_n_r],
            "mean_tic": [float(v) for v in self.mean_tic],
            "mean_s_e": [float(v) for v in self.mean_s_e],
            "auc_s_e": self.auc_s_e,
            "information_ratio": self.information_ratio,
            "hmi_mean": self.hmi_mean,
            "accuracy_n_r": [float(v) for v in self.accuracy_n_r],
            "accuracy": [float(v) for v in self.accuracy],
            "n_evaluated": self.n_evaluated,
            "n_skipped": self.n_skipped,
            "flagged": self.flagged,
            "audit": self.audit,
        }


def evaluate_method(scorer: Scorer, values: np.ndarray, labels: np.ndarray,
                    relevance: np.ndarray, config: EvaluationConfig,
                    expectancies: np.ndarray, method_name: str = "method",
                    expert_weights: np.ndarray | None = None) -> MethodReport:
    """Aggregate per-sample curves into a method report.

    values/labels/relevance are aligned arrays restricted to the evaluation
    split. Curves are averaged pointwise per quantile; the AUC is computed on
    the mean curve (average-then-integrate).
    """
    config.validate()
    values = np.asarray(values, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    preds = predict(scorer, values)
    targets = labels if config.target_policy == "true" else preds

    curves: list[SampleCurve] = []
    hmi_values: list[float] = []
    audit: list[dict] = []
    for i in range(len(values)):
        if config.correct_only and preds[i] != labels[i]:
            audit.append({"sample": i, "reason": "misclassified"})
            continue
        rel = np.asarray(relevance[i], dtype=np.float64)
        if not (rel > 0).any():
            audit.append({"sample": i, "reason": "no positive relevance"})
            continue
        rng = np.random.Generator(np.random.Philox(
            np.random.SeedSequence([config.seed, 0xE7A, i])))
        try:
            curve = evaluate_sample(scorer, values[i], int(targets[i]), rel, config,
                                    float(expectancies[targets[i]]), rng)
        except DegenerateReference:
            audit.append({"sample": i, "reason": "degenerate reference"})
            continue
        curves.append(curve)
        if expert_weights is not None:
            hmi_values.append(hmi(rel, np.asarray(expert_weights[i]), config.eps))

    flagged = len(curves) < config.min_samples
    if not curves:
        raise InsufficientSamples("no evaluable samples")

    qs = curves[0].quantiles
    mean_n_r = np.mean([c.n_r for c in curves], axis=0)
    mean_tic = np.mean([c.tic for c in curves], axis=0)
    mean_s_e = np.mean([c.s_e for c in curves], axis=0)
    try:
        ir = information_ratio(curves)
    except NoValidPairs:
        ir = None

    acc_n_r, acc = _accuracy_curve(scorer, values, labels, relevance, config)

    return MethodReport(
        method=method_name,
        occlusion=config.occlusion,
        quantiles=qs,
        mean_n_r=mean_n_r,
        mean_tic=mean_tic,
        mean_s_e=mean_s_e,
        auc_s_e=auc_se(mean_n_r, mean_s_e),
        information_ratio=ir,
        hmi_mean=float(np.mean(hmi_values)) if hmi_values else None,
        accuracy_n_r=acc_n_r,
        accuracy=acc,
        n_evaluated=len(curves),
        n_skipped=len(audit),
        flagged=flagged,
        audit=audit,
    )


def _accuracy_curve(scorer, values, labels, relevance, config):
    """Occluded-dataset accuracy per quantile, over all evaluation samples."""
    qs = sorted(config.quantiles)
    accs, fracs = [], []
    for qi, q in enumerate(qs):
        occluded = np.empty_like(values)
        removed = 0
        for i in range(len(values)):
            mask = positive_set(relevance[i], q)
            removed += int(mask.sum())
            rng = np.random.Generator(np.random.Philox(
                np.random.SeedSequence([config.seed, 0xACC, qi, i])))
            occluded[i] = occlude(values[i], mask, config.occlusion, rng, config.noise_std)
        preds = predict(scorer, occluded)
        accs.append(float(np.mean(preds == labels)))
        fracs.append(removed / (len(values) * values[0].size))
    return np.array(fracs), np.array(accs)
