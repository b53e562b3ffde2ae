"""Pure NumPy fallback for the per-tick pose kernels.

Must stay numerically bit-identical to the compiled twin in ``_speed.pyx``:
same operation order, one IEEE-754 rounding per multiply/add, fmod-based
angle wrapping.  The cross-implementation equality test in
tests/test_kernels.py enforces this.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "pure"

_TWO_PI = 2.0 * math.pi


def add_offsets(bones: np.ndarray, idx: np.ndarray, deltas: np.ndarray, scale: float) -> None:
    """Accumulate ``scale * deltas`` into ``bones`` rows, then wrap angles.

    bones: (n, 6) float64, modified in place.  Columns 0:3 position, 3:6
    orientation (radians).  Duplicate indices accumulate in order, which the
    explicit loop guarantees (np.add.at leaves the order unspecified).
    """
    k = idx.shape[0]
    for i in range(k):
        b = idx[i]
        for j in range(6):
            bones[b, j] = bones[b, j] + scale * deltas[i, j]
    wrap_angles(bones[:, 3:6])


def wrap_angles(x: np.ndarray) -> None:
    """Wrap radians into [-pi, pi) in place; matches C fmod semantics."""
    r = np.fmod(x + math.pi, _TWO_PI)
    np.add(r, _TWO_PI, out=r, where=r < 0.0)
    np.subtract(r, math.pi, out=x)


def ema_blend(prev: np.ndarray, target: np.ndarray, alpha: float, out: np.ndarray) -> None:
    """Per-channel exponential moving average: out = alpha*target + (1-alpha)*prev."""
    np.add(alpha * target, (1.0 - alpha) * prev, out=out)
