"""The compiled and pure kernel backends must agree bit for bit."""

from __future__ import annotations

import math
import random

import numpy as np
import pytest

from rigserve.kernels import _pure

try:
    from rigserve.kernels import _speed
except ImportError:
    _speed = None

needs_native = pytest.mark.skipif(_speed is None, reason="compiled extension not built")


def _random_case(rng: random.Random, n_bones: int = 38, k: int = 25):
    bones = rng_array(rng, (n_bones, 6), -4.0, 4.0)
    idx = np.array([rng.randrange(n_bones) for _ in range(k)], dtype=np.int64)
    deltas = rng_array(rng, (k, 6), -2.0, 2.0)
    return bones, idx, deltas


def rng_array(rng: random.Random, shape, lo, hi):
    flat = np.array([rng.uniform(lo, hi) for _ in range(int(np.prod(shape)))])
    return flat.reshape(shape)


@needs_native
def test_add_offsets_backends_identical():
    rng = random.Random(101)
    for _ in range(200):
        bones, idx, deltas = _random_case(rng)
        a, b = bones.copy(), bones.copy()
        scale = rng.uniform(0.0, 1.0)
        _pure.add_offsets(a, idx, deltas, scale)
        _speed.add_offsets(b, idx, deltas, scale)
        assert a.tobytes() == b.tobytes()


@needs_native
def test_ema_backends_identical():
    rng = random.Random(102)
    for _ in range(200):
        prev = rng_array(rng, (228,), -5.0, 5.0)
        target = rng_array(rng, (228,), -5.0, 5.0)
        alpha = rng.uniform(0.001, 1.0)
        out_a = np.empty_like(prev)
        out_b = np.empty_like(prev)
        _pure.ema_blend(prev, target, alpha, out_a)
        _speed.ema_blend(prev, target, alpha, out_b)
        assert out_a.tobytes() == out_b.tobytes()


@needs_native
def test_wrap_backends_identical():
    rng = random.Random(103)
    for _ in range(200):
        x = rng_array(rng, (38, 3), -50.0, 50.0)
        a, b = x.copy(), x.copy()
        _pure.wrap_angles(a)
        _speed.wrap_angles(b)
        assert a.tobytes() == b.tobytes()


def test_wrap_range():
    rng = random.Random(104)
    x = rng_array(rng, (64, 3), -100.0, 100.0)
    _pure.wrap_angles(x)
    assert (x >= -math.pi).all() and (x < math.pi).all()


def test_add_offsets_accumulates_duplicates_in_order():
    bones = np.zeros((38, 6))
    idx = np.array([3, 3, 3], dtype=np.int64)
    deltas = np.ones((3, 6))
    _pure.add_offsets(bones, idx, deltas, 0.5)
    assert bones[3, 0] == pytest.approx(1.5)
    assert bones[2].sum() == 0.0


def test_ema_alpha_one_returns_target():
    prev = np.full(10, 2.0)
    target = np.linspace(-1, 1, 10)
    out = np.empty(10)
    _pure.ema_blend(prev, target, 1.0, out)
    assert (out == target).all()
