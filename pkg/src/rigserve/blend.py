"""Layer composition into one pose per tick.

Layers stack over the rest pose in priority order (expression < lipsync <
direct).  Only the expression layer is masked: while lip sync is active it
is confined to the upper face so expression controls cannot fight the mouth.
Temporal smoothing is a per-channel EMA against the previous composed state,
and blinking is a seeded, deterministic eyelid schedule.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import numpy as np

from rigserve import kernels
from rigserve.rig import (
    BoneOffset,
    RigDefinition,
    RigState,
    AppearanceParams,
    CameraPose,
    HeadPose,
    apply_bone_offsets,
    rest_state,
)

LAYER_PRIORITIES = {"expression": 0, "lipsync": 1, "direct": 2}


@dataclass(frozen=True)
class Layer:
    kind: str
    offsets: tuple[BoneOffset, ...]
    priority: int = -1

    def __post_init__(self) -> None:
        if self.kind not in LAYER_PRIORITIES:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.priority < 0:
            object.__setattr__(self, "priority", LAYER_PRIORITIES[self.kind])


@dataclass(frozen=True)
class BoneMask:
    allowed: frozenset[str]

    def permits(self, bone_name: str) -> bool:
        return bone_name in self.allowed


@dataclass(frozen=True)
class SmoothingConfig:
    """EMA coefficient per channel; alpha 1 passes the target through exactly."""

    alpha: float = 1.0
    enabled: bool = True

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")


def active_mask(lipsync_active: bool, defs: RigDefinition) -> BoneMask:
    """Bones the expression layer may touch: upper face only during lip sync."""
    if lipsync_active:
        return BoneMask(defs.upper_region)
    return BoneMask(defs.facial_bones)


def compose(defs: RigDefinition, layers: list[Layer], lipsync_active: bool) -> RigState:
    """Resolve layers over the rest pose; deterministic for identical inputs."""
    state = rest_state(defs)
    expr_mask = active_mask(lipsync_active, defs)
    for layer in sorted(layers, key=lambda l: l.priority):
        offsets = list(layer.offsets)
        if layer.kind == "expression":
            offsets = [o for o in offsets if expr_mask.permits(o.bone.name)]
        state = apply_bone_offsets(state, offsets)
    return state


def smooth_state(previous: RigState, target: RigState, cfg: SmoothingConfig) -> RigState:
    """Per channel: alpha*target + (1-alpha)*previous, bones and head alike."""
    if not cfg.enabled or cfg.alpha == 1.0:
        return target
    bones = np.empty_like(target.bones)
    kernels.ema_blend(previous.bones.ravel(), target.bones.ravel(), cfg.alpha, bones.ravel())

    extras_prev = np.concatenate(
        [previous.head.as_array(), previous.appearance.as_array(), previous.camera.as_array()]
    )
    extras_target = np.concatenate(
        [target.head.as_array(), target.appearance.as_array(), target.camera.as_array()]
    )
    extras = np.empty_like(extras_target)
    kernels.ema_blend(extras_prev, extras_target, cfg.alpha, extras)
    return RigState(
        bones=bones,
        head=HeadPose(extras[0], extras[1], extras[2]),
        appearance=AppearanceParams(extras[3], extras[4]),
        camera=CameraPose(tuple(extras[5:8]), tuple(extras[8:11])),
    )


@dataclass
class BlinkSchedule:
    """Deterministic blink timing: seeded uniform intervals, fixed duration."""

    rng_seed: int
    interval_range: tuple[float, float] = (2.0, 6.0)
    blink_duration_ms: float = 200.0
    next_blink_at: float = 0.0
    _rng: random.Random = field(repr=False, compare=False, default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        lo, hi = self.interval_range
        if not 0.0 < lo <= hi:
            raise ValueError(f"interval range must satisfy 0 < min <= max, got {self.interval_range}")
        if self.blink_duration_ms <= 0.0:
            raise ValueError("blink duration must be > 0")
        if self._rng is None:
            self._rng = random.Random(self.rng_seed)

    @classmethod
    def create(
        cls,
        seed: int,
        interval_range: tuple[float, float] = (2.0, 6.0),
        duration_ms: float = 200.0,
        start_ms: float = 0.0,
    ) -> "BlinkSchedule":
        schedule = cls(rng_seed=seed, interval_range=interval_range, blink_duration_ms=duration_ms)
        schedule.next_blink_at = start_ms + schedule._draw_interval_ms()
        return schedule

    def _draw_interval_ms(self) -> float:
        lo, hi = self.interval_range
        return self._rng.uniform(lo, hi) * 1000.0

    def window(self) -> tuple[float, float]:
        return (self.next_blink_at, self.next_blink_at + self.blink_duration_ms)


def blink_offsets(
    now_ms: float, schedule: BlinkSchedule, defs: RigDefinition
) -> tuple[list[BoneOffset], BlinkSchedule]:
    """Eyelid offsets at `now`: zero between blinks, triangular inside a window.

    Completed (or skipped-over) windows each consume one interval draw, so the
    blink times depend only on the seed and the monotone query sequence.
    """
    dur = schedule.blink_duration_ms
    while now_ms >= schedule.next_blink_at + dur:
        schedule.next_blink_at += dur + schedule._draw_interval_ms()
    if now_ms < schedule.next_blink_at:
        return [], schedule
    phase = (now_ms - schedule.next_blink_at) / dur  # in [0, 1)
    amplitude = 1.0 - abs(2.0 * phase - 1.0)
    if amplitude == 0.0:
        return [], schedule
    return [o.scaled(amplitude) for o in defs.eyelid_closure_offsets()], schedule
