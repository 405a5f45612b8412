"""Synthetic dataset generation: integrate, transform, rescale, corrupt.

Per-sample randomness comes from counter-based seeding keyed on
(seed, class index, sample index), so samples are independent of generation
order and safe to produce in parallel.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DegenerateSample, GenerationFailed, NonFiniteState, WindowTooLong
from .systems import CLASS_NAMES, SYSTEMS, SystemSpec, integrate_system

Interval = tuple[float, float]

VARIANTS = ("SD1", "SD2", "SD3")

DEFAULT_NOISE_STD = 1.0 / (2.0 * math.sqrt(3.0))

# Per-channel intervals for the a + b*sin(c*x + d) channel transform.
DEFAULT_TRANSFORM_INTERVALS: tuple[Interval, Interval, Interval, Interval] = (
    (-0.5, 0.5),
    (0.5, 1.5),
    (0.5, 2.0),
    (0.0, 2.0 * math.pi),
)

MAX_RESAMPLE_ATTEMPTS = 10


@dataclass
class GenerationConfig:
    variant: str = "SD1"
    n_per_class: int = 500
    n_integration_steps: int = 3500
    n_discard: int = 1000
    downsample_factor: int = 10
    dt: float = 0.02
    transform_intervals: tuple[Interval, Interval, Interval, Interval] = DEFAULT_TRANSFORM_INTERVALS
    noise_std: float = DEFAULT_NOISE_STD
    seed: int = 0
    workers: int = 1

    @property
    def series_length(self) -> int:
        return (self.n_integration_steps - self.n_discard) // self.downsample_factor

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        for name in ("n_per_class", "n_integration_steps", "downsample_factor"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.n_discard < 0 or self.n_discard >= self.n_integration_steps:
            raise ConfigError("n_discard must lie in [0, n_integration_steps)")
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.noise_std <= 0:
            raise ConfigError("noise_std must be positive")
        if self.series_length <= 0:
            raise ConfigError("retained series length must be positive")

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "n_per_class": self.n_per_class,
            "n_integration_steps": self.n_integration_steps,
            "n_discard": self.n_discard,
            "downsample_factor": self.downsample_factor,
            "dt": self.dt,
            "transform_intervals": [list(iv) for iv in self.transform_intervals],
            "noise_std": self.noise_std,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GenerationConfig":
        kwargs = dict(d)
        if "transform_intervals" in kwargs:
            kwargs["transform_intervals"] = tuple(tuple(iv) for iv in kwargs["transform_intervals"])
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(kwargs) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**kwargs)


@dataclass
class RawSample:
    values: np.ndarray        # (3, T) float64
    label: int
    expert_weights: np.ndarray  # (3, T) uint8, 0 where noise was injected


@dataclass
class Dataset:
    values: np.ndarray          # (N, M, T) float32
    labels: np.ndarray          # (N,) uint8
    expert_weights: np.ndarray | None  # (N, M, T) uint8 or None (SD1)
    class_names: tuple[str, ...]
    config: GenerationConfig


def sample_rng(seed: int, class_idx: int, sample_idx: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, class_idx, sample_idx])))


def sample_instance(spec: SystemSpec, config: GenerationConfig, rng: np.random.Generator, label: int) -> RawSample:
    """Integrate one trajectory, discard transients, downsample."""
    last_err: NonFiniteState | None = None
    for _ in range(MAX_RESAMPLE_ATTEMPTS):
        init = np.array([rng.uniform(lo, hi) for lo, hi in spec.init_intervals])
        param = rng.uniform(*spec.sampled_param_interval)
        try:
            traj = integrate_system(spec, init, param, config.n_integration_steps, config.dt)
        except NonFiniteState as err:
            last_err = err
            continue
        values = traj[:, config.n_discard :: config.downsample_factor]
        weights = np.ones_like(values, dtype=np.uint8)
        return RawSample(values=values, label=label, expert_weights=weights)
    raise GenerationFailed(f"{spec.system_id}: integration diverged {MAX_RESAMPLE_ATTEMPTS} times") from last_err


def apply_transform(sample: RawSample, a: np.ndarray, b: np.ndarray, c: np.ndarray, d: np.ndarray) -> RawSample:
    """Per-channel nonlinear warp x -> a + b*sin(c*x + d)."""
    values = a[:, None] + b[:, None] * np.sin(c[:, None] * sample.values + d[:, None])
    return replace(sample, values=values)


def rescale(sample: RawSample) -> RawSample:
    """Remove the per-channel temporal mean, then divide all channels by the
    global max-abs so exactly one element attains magnitude 1."""
    centered = sample.values - sample.values.mean(axis=1, keepdims=True)
    peak = np.max(np.abs(centered))
    if peak < 1e-12:
        raise DegenerateSample("sample is constant after mean removal")
    return replace(sample, values=centered / peak)


def corrupt(sample: RawSample, variant: str, noise_std: float, rng: np.random.Generator) -> RawSample:
    """Replace regions with white noise and zero the expert weights there.

    SD3 zeroes the first 100 steps of every channel; SD2 one contiguous
    window per channel with length U[50, 100] and uniform start.
    """
    values = sample.values.copy()
    weights = sample.expert_weights.copy()
    m, t = values.shape
    if variant == "SD3":
        n = min(100, t)
        values[:, :n] = rng.normal(0.0, noise_std, size=(m, n))
        weights[:, :n] = 0
    elif variant == "SD2":
        for ch in range(m):
            length = int(rng.integers(50, 101))
            if length > t:
                raise WindowTooLong(f"window length {length} exceeds series length {t}")
            start = int(rng.integers(0, t - length + 1))
            values[ch, start : start + length] = rng.normal(0.0, noise_std, size=length)
            weights[ch, start : start + length] = 0
    else:
        raise ConfigError(f"corrupt only applies to SD2/SD3, got {variant!r}")
    return replace(sample, values=values, expert_weights=weights)


def generate_sample(class_idx: int, sample_idx: int, config: GenerationConfig) -> RawSample:
    """Full pipeline for one (class, index) pair: integrate, rescale,
    transform, rescale, corrupt. Pure given the config.

    The first rescale brings the raw attractor states (which span wildly
    different magnitudes across systems) into [-1, 1] before the sine warp;
    without it the warp wraps many periods and washes out class structure.
    """
    spec = SYSTEMS[class_idx]
    rng = sample_rng(config.seed, class_idx, sample_idx)
    sample = sample_instance(spec, config, rng, label=class_idx)
    sample = rescale(sample)
    params = [np.array([rng.uniform(lo, hi) for _ in range(3)]) for lo, hi in config.transform_intervals]
    sample = apply_transform(sample, *params)
    sample = rescale(sample)
    if config.variant in ("SD2", "SD3"):
        sample = corrupt(sample, config.variant, config.noise_std, rng)
    return sample


def _generate_chunk(args: tuple[GenerationConfig, list[tuple[int, int]]]) -> list[RawSample]:
    config, pairs = args
    return [generate_sample(ci, si, config) for ci, si in pairs]


def generate_dataset(config: GenerationConfig) -> Dataset:
    """Generate n_per_class samples for each of the five systems."""
    config.validate()
    pairs = [(ci, si) for ci in range(len(SYSTEMS)) for si in range(config.n_per_class)]
    if config.workers > 1:
        chunks = [pairs[i :: config.workers] for i in range(config.workers)]
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = pool.map(_generate_chunk, [(config, ch) for ch in chunks])
        by_key = {}
        for chunk, samples in zip(chunks, results):
            by_key.update(dict(zip(chunk, samples)))
        samples = [by_key[p] for p in pairs]
    else:
        samples = [generate_sample(ci, si, config) for ci, si in pairs]

    values = np.stack([s.values for s in samples]).astype(np.float32)
    labels = np.array([s.label for s in samples], dtype=np.uint8)
    if config.variant == "SD1":
        weights = None
    else:
        weights = np.stack([s.expert_weights for s in samples]).astype(np.uint8)
    return Dataset(values=values, labels=labels, expert_weights=weights,
                   class_names=CLASS_NAMES, config=config)
