"""Fixed-step 5th-order Runge-Kutta integration.

Uses the classic 6-stage tableau (Butcher 1964). Fixed stepping keeps the
generated datasets bit-reproducible across runs and platforms.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import NonFiniteState

# Butcher tableau of the 6-stage 5th-order method.
_A = (
    (),
    (1 / 4,),
    (1 / 8, 1 / 8),
    (0.0, -1 / 2, 1.0),
    (3 / 16, 0.0, 0.0, 9 / 16),
    (-3 / 7, 2 / 7, 12 / 7, -12 / 7, 8 / 7),
)
_B = (7 / 90, 0.0, 32 / 90, 12 / 90, 32 / 90, 7 / 90)


def rk5_step(f: Callable[[np.ndarray], np.ndarray], y: np.ndarray, dt: float) -> np.ndarray:
    """Advance an autonomous system dy/dt = f(y) by one step of size dt."""
    k = []
    for row in _A:
        yi = y
        for a, kj in zip(row, k):
            if a != 0.0:
                yi = yi + dt * a * kj
        k.append(f(yi))
    out = y
    for b, ki in zip(_B, k):
        if b != 0.0:
            out = out + dt * b * ki
    return out


def rk5_integrate(
    f: Callable[[np.ndarray], np.ndarray],
    y0: np.ndarray,
    dt: float,
    n_steps: int,
) -> np.ndarray:
    """Integrate n_steps from y0; returns shape (dim, n_steps).

    Column k holds the state after k+1 steps (the initial condition itself is
    not part of the output). Raises NonFiniteState as soon as any component
    becomes NaN/Inf.
    """
    y0 = np.asarray(y0, dtype=np.float64)
    out = np.empty((y0.shape[0], n_steps), dtype=np.float64)
    y = y0
    for i in range(n_steps):
        y = rk5_step(f, y, dt)
        if not np.all(np.isfinite(y)):
            raise NonFiniteState(f"non-finite state at step {i}")
        out[:, i] = y
    return out
