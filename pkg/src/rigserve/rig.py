"""Rig model: bone registry, action-unit/viseme presets, regions, pose math.

The rig is pure data loaded from a JSON definition document.  Everything in
this module is value-semantic: operations return new states and never mutate
their inputs, so they are safe to call from any number of concurrent callers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Iterable

import numpy as np

from rigserve import kernels

# The 24 action units with shipped presets (FACS numbering).
AU_KEYS: tuple[int, ...] = (1, 2, 4, 5, 6, 7, 9, 10, 11, 12, 13, 14, 15, 16,
                            17, 18, 20, 22, 23, 24, 25, 26, 27, 28)

BONE_COUNT = 38
VISEME_COUNT = 19
PHONEME_COUNT = 44

# Rigid body/head bones: controllable only via direct bone commands and the
# head-pose channel; presets and region masks never touch them.
NONFACIAL_BONES: frozenset[str] = frozenset({"Chest", "Neck", "Head", "Root", "Hair"})

_TWO_PI = 2.0 * math.pi


class RigError(Exception):
    pass


class RigParseError(RigError):
    """Definition document is not well-formed."""


class RigValidationError(RigError):
    """Document parsed but violates a registry invariant; names the first one."""


class UnknownBoneError(RigError):
    pass


class UnknownPresetError(RigError):
    pass


class UnknownEmotionError(RigError):
    pass


def wrap_angle(x: float) -> float:
    """Scalar twin of the kernel angle wrap: radians into [-pi, pi)."""
    r = math.fmod(x + math.pi, _TWO_PI)
    if r < 0.0:
        r += _TWO_PI
    return r - math.pi


def _check_finite(values: Iterable[float], what: str) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"{what} must be finite, got {v!r}")


def _clamp(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


@dataclass(frozen=True)
class BonePose:
    """Six degrees of freedom: position in rig units, orientation in radians."""

    position: tuple[float, float, float]
    orientation: tuple[float, float, float]

    def __post_init__(self) -> None:
        _check_finite(self.position, "bone position")
        _check_finite(self.orientation, "bone orientation")

    def normalized(self) -> "BonePose":
        return BonePose(self.position, tuple(wrap_angle(a) for a in self.orientation))

    def as_row(self) -> np.ndarray:
        return np.array([*self.position, *self.orientation], dtype=np.float64)

    @classmethod
    def from_row(cls, row: np.ndarray) -> "BonePose":
        return cls((row[0], row[1], row[2]), (row[3], row[4], row[5]))


@dataclass(frozen=True)
class BoneId:
    index: int
    name: str


@dataclass(frozen=True)
class BoneOffset:
    """Additive delta relative to the current pose (positions and radians)."""

    bone: BoneId
    delta_position: tuple[float, float, float]
    delta_orientation: tuple[float, float, float]

    def __post_init__(self) -> None:
        _check_finite(self.delta_position, "offset position delta")
        _check_finite(self.delta_orientation, "offset orientation delta")

    def scaled(self, factor: float) -> "BoneOffset":
        return BoneOffset(
            self.bone,
            tuple(c * factor for c in self.delta_position),
            tuple(c * factor for c in self.delta_orientation),
        )


@dataclass(frozen=True)
class Preset:
    """Named pose delta at intensity 1.0 (an action unit or a viseme)."""

    id: int | str
    kind: str  # "action-unit" | "viseme"
    offsets: tuple[BoneOffset, ...]

    @property
    def region(self) -> frozenset[str]:
        return frozenset(o.bone.name for o in self.offsets)


@dataclass(frozen=True)
class HeadPose:
    """Dimensionless yaw/pitch/roll, clamped to [-1, 1]."""

    yaw: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0

    def __post_init__(self) -> None:
        _check_finite((self.yaw, self.pitch, self.roll), "head pose")
        for f in ("yaw", "pitch", "roll"):
            object.__setattr__(self, f, _clamp(getattr(self, f), -1.0, 1.0))

    def as_array(self) -> np.ndarray:
        return np.array([self.yaw, self.pitch, self.roll], dtype=np.float64)


@dataclass(frozen=True)
class AppearanceParams:
    """Skin tone light(0)..dark(1) and age texture youthful(0)..old(1)."""

    skin_tone: float = 0.5
    skin_age: float = 0.0

    def __post_init__(self) -> None:
        _check_finite((self.skin_tone, self.skin_age), "appearance")
        object.__setattr__(self, "skin_tone", _clamp(self.skin_tone, 0.0, 1.0))
        object.__setattr__(self, "skin_age", _clamp(self.skin_age, 0.0, 1.0))

    def as_array(self) -> np.ndarray:
        return np.array([self.skin_tone, self.skin_age], dtype=np.float64)


@dataclass(frozen=True)
class CameraPose:
    position: tuple[float, float, float]
    orientation: tuple[float, float, float]

    def __post_init__(self) -> None:
        _check_finite(self.position, "camera position")
        _check_finite(self.orientation, "camera orientation")

    def as_array(self) -> np.ndarray:
        return np.array([*self.position, *self.orientation], dtype=np.float64)


@dataclass(frozen=True)
class ValidationFinding:
    preset: str
    bone: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[ValidationFinding, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.findings

    def lines(self) -> list[str]:
        return [f"{f.preset}: {f.message}" for f in self.findings]


@dataclass(frozen=True)
class RigDefinition:
    """The loaded avatar: registry, rest pose, presets, regions, tables."""

    bones: tuple[BoneId, ...]
    rest_poses: tuple[BonePose, ...]
    au_presets: dict[int, Preset]
    viseme_presets: dict[str, Preset]
    phoneme_map: dict[str, str]
    upper_region: frozenset[str]
    lower_region: frozenset[str]
    emotion_table: dict[str, tuple[tuple[int, float], ...]]
    camera_default: CameraPose

    _name_to_index: dict[str, int] = field(init=False, repr=False, compare=False, default_factory=dict)
    _rest_rows: np.ndarray = field(init=False, repr=False, compare=False, default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        object.__setattr__(self, "_name_to_index", {b.name: b.index for b in self.bones})
        rows = np.stack([p.as_row() for p in self.rest_poses])
        rows.flags.writeable = False
        object.__setattr__(self, "_rest_rows", rows)

    # -- registry lookups ------------------------------------------------

    def bone_index(self, name: str) -> int:
        try:
            return self._name_to_index[name]
        except KeyError:
            raise UnknownBoneError(f"unknown bone {name!r}") from None

    def bone_name(self, index: int) -> str:
        return self.bones[index].name

    def bone_id(self, name: str) -> BoneId:
        return self.bones[self.bone_index(name)]

    @property
    def facial_bones(self) -> frozenset[str]:
        return frozenset(b.name for b in self.bones) - NONFACIAL_BONES

    def rest_rows(self) -> np.ndarray:
        return self._rest_rows

    def offset(
        self,
        bone: str,
        dp: tuple[float, float, float] = (0.0, 0.0, 0.0),
        dr: tuple[float, float, float] = (0.0, 0.0, 0.0),
    ) -> BoneOffset:
        return BoneOffset(self.bone_id(bone), tuple(dp), tuple(dr))

    def find_preset(self, preset_id: int | str) -> Preset:
        if isinstance(preset_id, str):
            if preset_id in self.viseme_presets:
                return self.viseme_presets[preset_id]
            if preset_id.lstrip("-").isdigit():
                preset_id = int(preset_id)
            else:
                raise UnknownPresetError(f"unknown preset {preset_id!r}")
        if isinstance(preset_id, int) and preset_id in self.au_presets:
            return self.au_presets[preset_id]
        raise UnknownPresetError(f"unknown preset {preset_id!r}")

    def eyelid_closure_offsets(self) -> tuple[BoneOffset, ...]:
        """Offsets that bring each eyelid to its eye centre (full closure).

        Derived from the rest pose so blinking and the eyes-closed control
        adapt to whatever layout the definition ships.
        """
        offsets = []
        for side in ("L", "R"):
            try:
                eye_y = self.rest_poses[self.bone_index(f"{side}Eye")].position[1]
                for lid in (f"{side}UpperEyelid", f"{side}LowerEyelid"):
                    lid_y = self.rest_poses[self.bone_index(lid)].position[1]
                    offsets.append(self.offset(lid, dp=(0.0, eye_y - lid_y, 0.0)))
            except UnknownBoneError:
                continue
        return tuple(offsets)


class RigState:
    """One full pose: 38 bone rows plus head, appearance and camera.

    The bone array is frozen; operations hand back new states.
    """

    __slots__ = ("bones", "head", "appearance", "camera")

    def __init__(
        self,
        bones: np.ndarray,
        head: HeadPose,
        appearance: AppearanceParams,
        camera: CameraPose,
    ):
        if bones.shape != (BONE_COUNT, 6):
            raise ValueError(f"state needs ({BONE_COUNT}, 6) bone rows, got {bones.shape}")
        if not np.isfinite(bones).all():
            raise ValueError("bone channels must be finite")
        if bones.flags.writeable:
            bones = bones.copy()
            bones.flags.writeable = False
        self.bones = bones
        self.head = head
        self.appearance = appearance
        self.camera = camera

    def bone_pose(self, index: int) -> BonePose:
        return BonePose.from_row(self.bones[index])

    def replace(self, **kwargs: Any) -> "RigState":
        parts = {s: getattr(self, s) for s in self.__slots__}
        parts.update(kwargs)
        return RigState(**parts)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RigState):
            return NotImplemented
        return (
            np.array_equal(self.bones, other.bones)
            and self.head == other.head
            and self.appearance == other.appearance
            and self.camera == other.camera
        )

    def __repr__(self) -> str:
        return f"RigState(head={self.head}, appearance={self.appearance})"


# ---------------------------------------------------------------------------
# Definition document loading
# ---------------------------------------------------------------------------

_TOP_KEYS = {"bones", "au_presets", "viseme_presets", "phoneme_map",
             "regions", "emotion_table", "camera_default"}


def _reject_nonfinite(name: str) -> float:
    raise RigParseError(f"non-finite number {name!r} in definition document")


def _as_vec3(value: Any, what: str) -> tuple[float, float, float]:
    if not isinstance(value, list) or len(value) != 3:
        raise RigValidationError(f"{what} must be a 3-vector")
    try:
        vec = tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise RigValidationError(f"{what} must contain numbers") from None
    _check_finite(vec, what)
    return vec  # type: ignore[return-value]


def _parse_offsets(entries: Any, what: str, bone_ids: dict[str, BoneId]) -> tuple[BoneOffset, ...]:
    if not isinstance(entries, list):
        raise RigValidationError(f"{what} offsets must be an array")
    offsets = []
    for entry in entries:
        if not isinstance(entry, dict) or set(entry) - {"bone", "dp", "dr"}:
            raise RigValidationError(f"{what}: offset entries need bone/dp/dr only")
        bone = entry.get("bone")
        if bone not in bone_ids:
            raise RigValidationError(f"{what} references unknown bone {bone!r}")
        offsets.append(
            BoneOffset(
                bone_ids[bone],
                _as_vec3(entry.get("dp", [0, 0, 0]), f"{what} dp"),
                _as_vec3(entry.get("dr", [0, 0, 0]), f"{what} dr"),
            )
        )
    return tuple(offsets)


def load_rig_definition(document: str) -> RigDefinition:
    """Parse and validate a rig-definition document (UTF-8 JSON text).

    Raises RigParseError for malformed JSON and RigValidationError naming the
    first violated invariant otherwise.
    """
    try:
        doc = json.loads(document, parse_constant=_reject_nonfinite)
    except json.JSONDecodeError as e:
        raise RigParseError(f"malformed rig definition: {e}") from None

    if not isinstance(doc, dict):
        raise RigParseError("rig definition must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise RigValidationError(f"unknown top-level keys: {sorted(unknown)}")
    missing = _TOP_KEYS - set(doc)
    if missing:
        raise RigValidationError(f"missing top-level keys: {sorted(missing)}")

    # bones -------------------------------------------------------------
    raw_bones = doc["bones"]
    if not isinstance(raw_bones, list) or len(raw_bones) != BONE_COUNT:
        raise RigValidationError(f"registry must contain {BONE_COUNT} bones")
    by_index: dict[int, BoneId] = {}
    rest: dict[int, BonePose] = {}
    names: set[str] = set()
    for entry in raw_bones:
        if not isinstance(entry, dict) or set(entry) != {"index", "name", "rest"}:
            raise RigValidationError("bone entries need exactly index/name/rest")
        idx, name = entry["index"], entry["name"]
        if not isinstance(idx, int) or not 0 <= idx < BONE_COUNT:
            raise RigValidationError(f"bone index {idx!r} outside 0..{BONE_COUNT - 1}")
        if idx in by_index:
            raise RigValidationError(f"duplicate bone index {idx}")
        if not isinstance(name, str) or not name:
            raise RigValidationError("bone name must be a non-empty string")
        if name in names:
            raise RigValidationError(f"duplicate bone {name!r}")
        pose = entry["rest"]
        if not isinstance(pose, dict) or set(pose) != {"p", "r"}:
            raise RigValidationError(f"bone {name!r} rest pose needs p and r")
        by_index[idx] = BoneId(idx, name)
        rest[idx] = BonePose(
            _as_vec3(pose["p"], f"bone {name!r} rest position"),
            _as_vec3(pose["r"], f"bone {name!r} rest orientation"),
        ).normalized()
        names.add(name)

    bones = tuple(by_index[i] for i in range(BONE_COUNT))
    rest_poses = tuple(rest[i] for i in range(BONE_COUNT))
    bone_ids = {b.name: b for b in bones}

    # action-unit presets -------------------------------------------------
    raw_aus = doc["au_presets"]
    if not isinstance(raw_aus, dict):
        raise RigValidationError("au_presets must be a map")
    au_presets: dict[int, Preset] = {}
    for key, entries in raw_aus.items():
        try:
            au = int(key)
        except ValueError:
            raise RigValidationError(f"AU key {key!r} is not a number") from None
        if au not in AU_KEYS:
            raise RigValidationError(f"AU {au} not in Table-1 set")
        au_presets[au] = Preset(au, "action-unit", _parse_offsets(entries, f"AU{au}", bone_ids))
    if set(au_presets) != set(AU_KEYS):
        missing_aus = sorted(set(AU_KEYS) - set(au_presets))
        raise RigValidationError(f"missing AU presets: {missing_aus}")

    # viseme presets ------------------------------------------------------
    raw_vis = doc["viseme_presets"]
    if not isinstance(raw_vis, dict):
        raise RigValidationError("viseme_presets must be a map")
    if len(raw_vis) != VISEME_COUNT:
        raise RigValidationError(f"viseme preset count must be {VISEME_COUNT}, got {len(raw_vis)}")
    viseme_presets = {
        vid: Preset(vid, "viseme", _parse_offsets(entries, f"viseme {vid!r}", bone_ids))
        for vid, entries in raw_vis.items()
    }

    # phoneme map ----------------------------------------------------------
    raw_map = doc["phoneme_map"]
    if not isinstance(raw_map, dict):
        raise RigValidationError("phoneme_map must be a map")
    if len(raw_map) != PHONEME_COUNT:
        raise RigValidationError(f"phoneme map must contain {PHONEME_COUNT} entries, got {len(raw_map)}")
    for ph, vid in raw_map.items():
        if vid not in viseme_presets:
            raise RigValidationError(f"phoneme {ph!r} maps to unknown viseme {vid!r}")
    phoneme_map = dict(raw_map)

    # regions --------------------------------------------------------------
    raw_regions = doc["regions"]
    if not isinstance(raw_regions, dict) or set(raw_regions) != {"upper", "lower"}:
        raise RigValidationError("regions must define upper and lower")
    upper = frozenset(raw_regions["upper"])
    lower = frozenset(raw_regions["lower"])
    for name in (upper | lower) - names:
        raise RigValidationError(f"region references unknown bone {name!r}")
    if upper & lower:
        raise RigValidationError(f"regions overlap: {sorted(upper & lower)}")
    if (upper | lower) & NONFACIAL_BONES:
        raise RigValidationError("non-facial bones may not appear in regions")
    facial = names - NONFACIAL_BONES
    if (upper | lower) != facial:
        raise RigValidationError(f"regions must cover facial bones; missing {sorted(facial - (upper | lower))}")

    # emotion table ----------------------------------------------------------
    raw_emotions = doc["emotion_table"]
    if not isinstance(raw_emotions, dict):
        raise RigValidationError("emotion_table must be a map")
    emotion_table: dict[str, tuple[tuple[int, float], ...]] = {}
    for label, combo in raw_emotions.items():
        if not isinstance(combo, list) or not combo:
            raise RigValidationError(f"emotion {label!r} needs a non-empty AU list")
        pairs = []
        for item in combo:
            if not isinstance(item, dict) or set(item) != {"au", "weight"}:
                raise RigValidationError(f"emotion {label!r} entries need au and weight")
            au, weight = item["au"], float(item["weight"])
            if au not in AU_KEYS:
                raise RigValidationError(f"emotion {label!r} uses AU {au} outside Table-1 set")
            if not 0.0 <= weight <= 1.0:
                raise RigValidationError(f"emotion {label!r} weight {weight} outside [0, 1]")
            pairs.append((au, weight))
        emotion_table[label] = tuple(pairs)

    camera = doc["camera_default"]
    if not isinstance(camera, dict) or set(camera) != {"p", "r"}:
        raise RigValidationError("camera_default needs p and r")
    camera_default = CameraPose(
        _as_vec3(camera["p"], "camera position"), _as_vec3(camera["r"], "camera orientation")
    )

    return RigDefinition(
        bones=bones,
        rest_poses=rest_poses,
        au_presets=au_presets,
        viseme_presets=viseme_presets,
        phoneme_map=phoneme_map,
        upper_region=upper,
        lower_region=lower,
        emotion_table=emotion_table,
        camera_default=camera_default,
    )


def serialize_rig_definition(defs: RigDefinition) -> str:
    """Inverse of load_rig_definition (load(serialize(d)) == d)."""

    def offsets_out(preset: Preset) -> list[dict[str, Any]]:
        return [
            {"bone": o.bone.name, "dp": list(o.delta_position), "dr": list(o.delta_orientation)}
            for o in preset.offsets
        ]

    doc = {
        "bones": [
            {
                "index": b.index,
                "name": b.name,
                "rest": {"p": list(p.position), "r": list(p.orientation)},
            }
            for b, p in zip(defs.bones, defs.rest_poses)
        ],
        "au_presets": {str(au): offsets_out(p) for au, p in defs.au_presets.items()},
        "viseme_presets": {vid: offsets_out(p) for vid, p in defs.viseme_presets.items()},
        "phoneme_map": dict(defs.phoneme_map),
        "regions": {"upper": sorted(defs.upper_region), "lower": sorted(defs.lower_region)},
        "emotion_table": {
            label: [{"au": au, "weight": w} for au, w in combo]
            for label, combo in defs.emotion_table.items()
        },
        "camera_default": {
            "p": list(defs.camera_default.position),
            "r": list(defs.camera_default.orientation),
        },
    }
    return json.dumps(doc, indent=1)


def load_rig_file(path: str) -> RigDefinition:
    with open(path, "r", encoding="utf-8") as f:
        return load_rig_definition(f.read())


def load_default_rig() -> RigDefinition:
    text = resources.files("rigserve.data").joinpath("default_rig.json").read_text("utf-8")
    return load_rig_definition(text)


# ---------------------------------------------------------------------------
# Preset region policy
# ---------------------------------------------------------------------------

# Allowed bones per AU family, keyed to the default bone naming.  AUs absent
# here form the mouth family and defer to the definition's LOWER region, so
# re-partitioned rigs keep working.
_BROW = frozenset({"LInnerBrow", "RInnerBrow", "LMidBrow", "RMidBrow", "LOuterBrow", "ROuterBrow"})
_EYELIDS = frozenset({"LUpperEyelid", "RUpperEyelid", "LLowerEyelid", "RLowerEyelid"})
_UPPER_CHEEKS = frozenset({"LUpperCheek", "RUpperCheek"})
_NOSE = frozenset({"UpperNose", "LUpperNose", "RUpperNose", "LNostril", "RNostril"})
_JAW_CHIN = frozenset({"Jaw", "Chin"})

AU_ALLOWED_REGIONS: dict[int, frozenset[str]] = {
    1: _BROW, 2: _BROW, 4: _BROW,
    5: _EYELIDS, 7: _EYELIDS,
    6: _UPPER_CHEEKS,
    9: _NOSE,
    26: _JAW_CHIN, 27: _JAW_CHIN,
}

_REGION_LABELS = {
    id(_BROW): "brow region", id(_EYELIDS): "eyelid region",
    id(_UPPER_CHEEKS): "upper-cheek region", id(_NOSE): "nose region",
    id(_JAW_CHIN): "jaw/chin region",
}


def validate_presets(defs: RigDefinition) -> ValidationReport:
    """Report every preset offset that touches a bone outside its region."""
    findings: list[ValidationFinding] = []
    for au in sorted(defs.au_presets):
        preset = defs.au_presets[au]
        allowed = AU_ALLOWED_REGIONS.get(au, defs.lower_region)
        label = _REGION_LABELS.get(id(allowed), "LOWER region")
        for bone in sorted(preset.region - allowed):
            findings.append(
                ValidationFinding(f"AU{au}", bone, f"AU{au} touches {bone}, outside {label}")
            )
    for vid in sorted(defs.viseme_presets):
        preset = defs.viseme_presets[vid]
        for bone in sorted(preset.region - defs.lower_region):
            findings.append(
                ValidationFinding(
                    f"viseme {vid}", bone, f"viseme {vid} touches non-mouth bone {bone}"
                )
            )
    return ValidationReport(tuple(findings))


# ---------------------------------------------------------------------------
# Pose arithmetic
# ---------------------------------------------------------------------------


def rest_state(defs: RigDefinition) -> RigState:
    """The neutral pose: rest bones, centred head, default appearance/camera."""
    return RigState(
        bones=defs.rest_rows().copy(),
        head=HeadPose(),
        appearance=AppearanceParams(),
        camera=defs.camera_default,
    )


def preset_pose(defs: RigDefinition, preset_id: int | str, intensity: float) -> list[BoneOffset]:
    """The preset's offsets scaled linearly by intensity (clamped to [0, 1])."""
    preset = defs.find_preset(preset_id)
    intensity = _clamp(float(intensity), 0.0, 1.0)
    return [o.scaled(intensity) for o in preset.offsets]


def apply_bone_offsets(state: RigState, offsets: list[BoneOffset]) -> RigState:
    """Add deltas channel-wise; orientation re-normalized to [-pi, pi)."""
    if not offsets:
        return state
    k = len(offsets)
    idx = np.empty(k, dtype=np.int64)
    deltas = np.empty((k, 6), dtype=np.float64)
    for i, o in enumerate(offsets):
        if not 0 <= o.bone.index < BONE_COUNT:
            raise UnknownBoneError(f"offset references unknown bone {o.bone!r}")
        idx[i] = o.bone.index
        deltas[i, 0:3] = o.delta_position
        deltas[i, 3:6] = o.delta_orientation
    bones = state.bones.copy()
    kernels.add_offsets(bones, idx, deltas, 1.0)
    return state.replace(bones=bones)
