"""The five chaotic systems used as dataset classes.

Each system is three-dimensional; one parameter per system is drawn uniformly
from an interval while the others are fixed. The class order (Chua, Duffing,
Lorenz, Rikitake, Rossler) defines the integer labels 0..4.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .rk5 import rk5_integrate

Interval = tuple[float, float]

# Forcing frequency of the Duffing oscillator; kept in a classic chaotic
# regime and exposed through SystemSpec.fixed_params.
DUFFING_OMEGA = 1.2


@dataclass(frozen=True)
class SystemSpec:
    system_id: str
    fixed_params: dict[str, float]
    sampled_param: str
    sampled_param_interval: Interval
    init_intervals: tuple[Interval, Interval, Interval]
    rhs: Callable[[np.ndarray, float, dict[str, float]], np.ndarray] = field(repr=False)


def _chua(s: np.ndarray, b: float, p: dict[str, float]) -> np.ndarray:
    x, y, z = s
    a, v1, v2 = p["a"], p["nu1"], p["nu2"]
    h = v2 * x + 0.5 * (v1 - v2) * (abs(x + 1) - abs(x - 1))
    return np.array([a * (y - x - h), x - y - z, -b * y])


def _duffing(s: np.ndarray, b: float, p: dict[str, float]) -> np.ndarray:
    x, y, z = s
    a, omega = p["a"], p["omega"]
    return np.array([y, -a * y - x**3 + b * np.cos(omega * z), 1.0])


def _lorenz(s: np.ndarray, rho: float, p: dict[str, float]) -> np.ndarray:
    x, y, z = s
    sigma, beta = p["sigma"], p["beta"]
    return np.array([sigma * (y - x), x * (rho - z) - y, x * y - beta * z])


def _rikitake(s: np.ndarray, a: float, p: dict[str, float]) -> np.ndarray:
    x, y, z = s
    b, c, d = p["b"], p["c"], p["d"]
    return np.array([-a * x + y * (z + c), -b * y + x * (z - c), d * z - x * y])


def _rossler(s: np.ndarray, c: float, p: dict[str, float]) -> np.ndarray:
    x, y, z = s
    a, b = p["a"], p["b"]
    return np.array([-(y + z), x + a * y, b + z * (x - c)])


SYSTEMS: tuple[SystemSpec, ...] = (
    SystemSpec(
        "Chua",
        {"a": 15.6, "nu1": -1.143, "nu2": -0.714},
        "b",
        (25.0, 51.0),
        ((0.6, 0.61), (0.2, 0.21), (0.1, 0.11)),
        _chua,
    ),
    SystemSpec(
        "Duffing",
        {"a": 0.1, "omega": DUFFING_OMEGA},
        "b",
        (0.1, 0.65),
        ((0.6, 7.5), (0.2, 1.5), (0.1, 1.6)),
        _duffing,
    ),
    SystemSpec(
        "Lorenz",
        {"sigma": 10.0, "beta": 8.0 / 3.0},
        "rho",
        (28.0, 100.0),
        ((0.6, 1.1), (0.2, 0.7), (0.1, 0.6)),
        _lorenz,
    ),
    SystemSpec(
        "Rikitake",
        {"b": 3.0, "c": 5.0, "d": 0.75},
        "a",
        (2.0, 7.0),
        ((0.6, 1.1), (0.2, 0.7), (0.1, 0.6)),
        _rikitake,
    ),
    SystemSpec(
        "Rossler",
        {"a": 0.2, "b": 0.2},
        "c",
        (4.0, 18.0),
        ((0.6, 1.6), (0.2, 1.2), (0.1, 1.1)),
        _rossler,
    ),
)

CLASS_NAMES: tuple[str, ...] = tuple(s.system_id for s in SYSTEMS)


def integrate_system(
    spec: SystemSpec,
    init: np.ndarray,
    sampled_param: float,
    n_steps: int,
    dt: float,
) -> np.ndarray:
    """Integrate one system; returns a (3, n_steps) trajectory.

    Raises NonFiniteState on divergence so the caller can resample the
    initial condition.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    return rk5_integrate(
        lambda s: spec.rhs(s, sampled_param, spec.fixed_params),
        np.asarray(init, dtype=np.float64),
        dt,
        n_steps,
    )
