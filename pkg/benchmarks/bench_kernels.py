#!/usr/bin/env python3
"""Compare the compiled kernel backend against the pure NumPy fallback.

Times the two hot per-tick operations (offset accumulation + angle wrap,
EMA state blend) and a full layer composition through the public API.
"""

from __future__ import annotations

import time

import numpy as np

from rigserve import blend, rig
from rigserve.kernels import _pure

try:
    from rigserve.kernels import _speed
except ImportError:
    _speed = None

BONES = 38
OFFSETS = 60  # a busy tick: emotion + viseme + direct layers
REPEAT = 20_000


def time_fn(fn, *args, repeat=REPEAT) -> float:
    started = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - started) / repeat * 1e6  # us/op


def bench_backend(impl) -> dict[str, float]:
    rng = np.random.default_rng(7)
    bones = rng.uniform(-4, 4, (BONES, 6))
    idx = rng.integers(0, BONES, OFFSETS).astype(np.int64)
    deltas = rng.uniform(-1, 1, (OFFSETS, 6))
    prev = rng.uniform(-4, 4, BONES * 6)
    target = rng.uniform(-4, 4, BONES * 6)
    out = np.empty_like(prev)
    return {
        "add_offsets": time_fn(impl.add_offsets, bones, idx, deltas, 0.7),
        "ema_blend": time_fn(impl.ema_blend, prev, target, 0.5, out),
    }


def bench_compose(defs) -> float:
    offsets = []
    for au in (1, 2, 6, 12):
        offsets.extend(rig.preset_pose(defs, au, 0.8))
    layers = [
        blend.Layer("expression", tuple(offsets)),
        blend.Layer("lipsync", tuple(rig.preset_pose(defs, "oh", 0.9))),
    ]
    return time_fn(blend.compose, defs, layers, True, repeat=2_000)


def main() -> None:
    defs = rig.load_default_rig()
    pure = bench_backend(_pure)
    rows = [("pure", pure)]
    if _speed is not None:
        rows.append(("native", bench_backend(_speed)))
    else:
        print("compiled extension not available; showing fallback only")

    print(f"{'backend':<8} {'add_offsets':>14} {'ema_blend':>12}")
    for name, res in rows:
        print(f"{name:<8} {res['add_offsets']:>11.2f} us {res['ema_blend']:>9.2f} us")
    if _speed is not None:
        speedup = pure["add_offsets"] / rows[1][1]["add_offsets"]
        print(f"\nnative speedup on add_offsets: {speedup:.1f}x")

    from rigserve import kernels

    print(f"\nselected backend: {kernels.BACKEND}")
    print(f"full compose (4 AUs + viseme, masked): {bench_compose(defs):.1f} us/tick")

    # the two backends must agree bit for bit
    rng = np.random.default_rng(11)
    bones_a = rng.uniform(-4, 4, (BONES, 6))
    bones_b = bones_a.copy()
    idx = rng.integers(0, BONES, OFFSETS).astype(np.int64)
    deltas = rng.uniform(-1, 1, (OFFSETS, 6))
    _pure.add_offsets(bones_a, idx, deltas, 0.7)
    if _speed is not None:
        _speed.add_offsets(bones_b, idx, deltas, 0.7)
        print(f"backends bit-identical: {bones_a.tobytes() == bones_b.tobytes()}")


if __name__ == "__main__":
    main()
