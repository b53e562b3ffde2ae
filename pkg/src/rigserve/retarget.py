"""External expression evidence to expression-layer controls.

Two data paths: 12-dimensional action-unit probability frames from a
recognizer stream (optionally thresholded, then EMA-smoothed), and raw bone
parameter frames produced by an external transfer model.  Also composes
cardinal emotions from the rig's AU-combination table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from rigserve.rig import (
    AU_KEYS,
    BONE_COUNT,
    BoneOffset,
    RigDefinition,
    UnknownBoneError,
    UnknownEmotionError,
    preset_pose,
)

# Column order of recognizer streams; AU43 (eyes closed) has no preset among
# the 24 and routes to the dedicated eyelid_close channel.
AU_STREAM_ORDER: tuple[int, ...] = (1, 2, 4, 5, 6, 9, 12, 17, 20, 25, 26, 43)
AU_STREAM_HEADER = "t_ms," + ",".join(f"au{n}" for n in AU_STREAM_ORDER)


class AuStreamError(Exception):
    pass


@dataclass(frozen=True)
class AuProbabilityFrame:
    timestamp_ms: int
    probabilities: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.probabilities) != len(AU_STREAM_ORDER):
            raise ValueError(
                f"expected {len(AU_STREAM_ORDER)} probabilities, got {len(self.probabilities)}"
            )
        for p in self.probabilities:
            if not (math.isfinite(p) and 0.0 <= p <= 1.0):
                raise ValueError(f"probability {p!r} outside [0, 1]")


@dataclass(frozen=True)
class AuControls:
    """Intensity per driven action unit plus the AU43 eyelid-close carrier."""

    intensities: dict[int, float] = field(default_factory=dict)
    eyelid_close: float = 0.0

    def __post_init__(self) -> None:
        nonzero = {}
        for au, v in self.intensities.items():
            if au not in AU_KEYS:
                raise ValueError(f"AU {au} outside the rig's 24-key set")
            if not (math.isfinite(v) and 0.0 <= v <= 1.0):
                raise ValueError(f"AU {au} intensity {v!r} outside [0, 1]")
            if v != 0.0:
                nonzero[au] = v
        if not (math.isfinite(self.eyelid_close) and 0.0 <= self.eyelid_close <= 1.0):
            raise ValueError(f"eyelid_close {self.eyelid_close!r} outside [0, 1]")
        object.__setattr__(self, "intensities", nonzero)

    @classmethod
    def zeros(cls) -> "AuControls":
        return cls({}, 0.0)

    def intensity(self, au: int) -> float:
        return self.intensities.get(au, 0.0)


@dataclass(frozen=True)
class RetargetOptions:
    """Pre-treatment of recognizer probabilities: round first, then smooth."""

    smoothing_alpha: float = 1.0
    rounding: str = "off"  # "off" | "threshold"
    threshold: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 < self.smoothing_alpha <= 1.0:
            raise ValueError(f"smoothing_alpha must be in (0, 1], got {self.smoothing_alpha}")
        if self.rounding not in ("off", "threshold"):
            raise ValueError(f"rounding must be 'off' or 'threshold', got {self.rounding!r}")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must be in (0, 1), got {self.threshold}")


@dataclass(frozen=True)
class ExternalBoneFrame:
    timestamp_ms: int
    offsets: tuple[BoneOffset, ...]


def parse_au_stream(document: str) -> list[AuProbabilityFrame]:
    """Parse a recognizer stream CSV; returns timestamp-sorted frames.

    The header row is optional; rows are `t_ms` plus 12 probabilities in the
    AU_STREAM_ORDER column order.
    """
    frames = []
    for lineno, raw in enumerate(document.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if lineno == 1 and line.lower().replace(" ", "") == AU_STREAM_HEADER:
            continue
        parts = line.split(",")
        if len(parts) != 1 + len(AU_STREAM_ORDER):
            raise AuStreamError(
                f"line {lineno}: expected {1 + len(AU_STREAM_ORDER)} columns, got {len(parts)}"
            )
        try:
            t_ms = int(parts[0])
            probs = tuple(float(p) for p in parts[1:])
        except ValueError:
            raise AuStreamError(f"line {lineno}: columns must be numbers") from None
        try:
            frames.append(AuProbabilityFrame(t_ms, probs))
        except ValueError as e:
            raise AuStreamError(f"line {lineno}: {e}") from None
    frames.sort(key=lambda f: f.timestamp_ms)
    return frames


def au_frame_to_controls(
    frame: AuProbabilityFrame, prev: AuControls, opts: RetargetOptions
) -> AuControls:
    """One recognizer frame to control intensities: optional threshold
    rounding, then per-AU EMA against the previous controls.  Action units
    outside the 12-dim input stay zero."""
    alpha = opts.smoothing_alpha
    intensities: dict[int, float] = {}
    eyelid = 0.0
    for au, p in zip(AU_STREAM_ORDER, frame.probabilities):
        raw = p
        if opts.rounding == "threshold":
            raw = 1.0 if raw >= opts.threshold else 0.0
        previous = prev.eyelid_close if au == 43 else prev.intensity(au)
        value = alpha * raw + (1.0 - alpha) * previous
        if au == 43:
            eyelid = value
        else:
            intensities[au] = value
    return AuControls(intensities, eyelid)


def emotion_to_aus(label: str, intensity: float, defs: RigDefinition) -> AuControls:
    """Cardinal emotion to AU intensities via the rig's combination table."""
    try:
        combo = defs.emotion_table[label]
    except KeyError:
        raise UnknownEmotionError(f"unknown emotion {label!r}") from None
    intensity = min(1.0, max(0.0, float(intensity)))
    return AuControls({au: weight * intensity for au, weight in combo})


def controls_to_offsets(controls: AuControls, defs: RigDefinition) -> list[BoneOffset]:
    """Expression-layer offsets: each active AU's preset at its intensity,
    plus eyelid closure scaled by the AU43 carrier."""
    offsets: list[BoneOffset] = []
    for au in sorted(controls.intensities):
        offsets.extend(preset_pose(defs, au, controls.intensities[au]))
    if controls.eyelid_close > 0.0:
        offsets.extend(o.scaled(controls.eyelid_close) for o in defs.eyelid_closure_offsets())
    return offsets


def ingest_bone_frame(frame: ExternalBoneFrame) -> list[BoneOffset]:
    """Externally produced bone parameters pass through to the expression
    layer unchanged (and hence under the upper-face mask during lip sync)."""
    for o in frame.offsets:
        if not 0 <= o.bone.index < BONE_COUNT:
            raise UnknownBoneError(f"bone frame references unknown bone {o.bone!r}")
    return list(frame.offsets)
