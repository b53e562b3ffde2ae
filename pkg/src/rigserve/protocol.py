"""Wire protocol: newline-delimited UTF-8 JSON, one message per line.

Client to server: command objects `{"id": ..., "cmd": "<Variant>", ...}`.
Server to client: exactly one response per command line, plus broadcast
frames (`"type": "frame"`) and a goodbye on server-initiated disconnects.
Malformed input yields an error response, never a disconnect.  Head pose,
appearance, and intensity fields clamp to their documented ranges and the
response records which fields were clamped; recognizer probabilities are
rejected outside [0, 1].
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Callable, Union

from rigserve.lipsync import PhonemeEvent, RampConfig, VisemeWeights, validate_events
from rigserve.lipsync import TrackParseError, UnknownPhonemeError
from rigserve.retarget import AU_STREAM_ORDER, AuControls, AuProbabilityFrame, ExternalBoneFrame
from rigserve.rig import (
    AU_KEYS,
    AppearanceParams,
    BonePose,
    CameraPose,
    HeadPose,
    RigDefinition,
    RigState,
    UnknownBoneError,
)

_JSON_OPTS = {"separators": (",", ":"), "allow_nan": False}


class ProtocolError(Exception):
    """Carries the machine error code and the offending request id (if any)."""

    def __init__(self, code: str, message: str, request_id: Union[int, str, None] = None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.request_id = request_id


# ---------------------------------------------------------------------------
# Command variants
# ---------------------------------------------------------------------------

RequestId = Union[int, str]


@dataclass(frozen=True)
class SetBonePose:
    id: RequestId
    bone: str
    pose: BonePose


@dataclass(frozen=True)
class SetAUs:
    id: RequestId
    intensities: dict[int, float]


@dataclass(frozen=True)
class SetViseme:
    id: RequestId
    viseme: str
    weight: float


@dataclass(frozen=True)
class PlayVisemeTrack:
    id: RequestId
    events: tuple[PhonemeEvent, ...]
    offset_ms: float = 0.0


@dataclass(frozen=True)
class StopTrack:
    id: RequestId


@dataclass(frozen=True)
class SetHeadPose:
    id: RequestId
    head: HeadPose


@dataclass(frozen=True)
class SetAppearance:
    id: RequestId
    appearance: AppearanceParams


@dataclass(frozen=True)
class SetCameraPose:
    id: RequestId
    pose: CameraPose


@dataclass(frozen=True)
class SetEmotion:
    id: RequestId
    label: str
    intensity: float


@dataclass(frozen=True)
class AuFrame:
    id: RequestId
    frame: AuProbabilityFrame
    alpha: Union[float, None] = None
    threshold: Union[float, None] = None


@dataclass(frozen=True)
class BoneFrame:
    id: RequestId
    frame: ExternalBoneFrame


@dataclass(frozen=True)
class Subscribe:
    id: RequestId


@dataclass(frozen=True)
class Unsubscribe:
    id: RequestId


@dataclass(frozen=True)
class QueryState:
    id: RequestId


@dataclass(frozen=True)
class Reset:
    id: RequestId


Command = Union[
    SetBonePose, SetAUs, SetViseme, PlayVisemeTrack, StopTrack, SetHeadPose,
    SetAppearance, SetCameraPose, SetEmotion, AuFrame, BoneFrame,
    Subscribe, Unsubscribe, QueryState, Reset,
]


@dataclass(frozen=True)
class Response:
    id: Union[RequestId, None]
    status: str  # "ok" | "error"
    code: Union[str, None] = None
    message: Union[str, None] = None
    payload: Union[dict[str, Any], None] = None

    @classmethod
    def ok(cls, request_id: RequestId, payload: Union[dict[str, Any], None] = None) -> "Response":
        return cls(request_id, "ok", payload=payload)

    @classmethod
    def error(cls, request_id: Union[RequestId, None], code: str, message: str) -> "Response":
        return cls(request_id, "error", code=code, message=message)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _reject_constant(name: str) -> float:
    raise ValueError(f"non-finite JSON number {name}")


def _require_number(obj: dict, key: str, rid: Any, *, default: Any = ...) -> float:
    if key not in obj:
        if default is not ...:
            return default
        raise ProtocolError("invalid_field", f"missing field {key!r}", rid)
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ProtocolError("invalid_field", f"field {key!r} must be a finite number", rid)
    return float(v)


def _clamped(obj: dict, key: str, lo: float, hi: float, rid: Any,
             notes: list[str], *, default: Any = ...) -> float:
    v = _require_number(obj, key, rid, default=default)
    if v < lo or v > hi:
        notes.append(key)
        return lo if v < lo else hi
    return v


def _require_str(obj: dict, key: str, rid: Any) -> str:
    v = obj.get(key)
    if not isinstance(v, str) or not v:
        raise ProtocolError("invalid_field", f"field {key!r} must be a non-empty string", rid)
    return v


def _require_vec3(value: Any, what: str, rid: Any) -> tuple[float, float, float]:
    if not isinstance(value, list) or len(value) != 3:
        raise ProtocolError("invalid_field", f"{what} must be a 3-number array", rid)
    out = []
    for v in value:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ProtocolError("invalid_field", f"{what} must contain finite numbers", rid)
        out.append(float(v))
    return tuple(out)  # type: ignore[return-value]


def _require_pose(obj: dict, key: str, rid: Any) -> tuple[tuple[float, ...], tuple[float, ...]]:
    v = obj.get(key)
    if not isinstance(v, dict) or set(v) != {"p", "r"}:
        raise ProtocolError("invalid_field", f"field {key!r} must be {{p, r}}", rid)
    return _require_vec3(v["p"], f"{key}.p", rid), _require_vec3(v["r"], f"{key}.r", rid)


def _check_fields(obj: dict, allowed: set[str], rid: Any) -> None:
    extra = set(obj) - allowed - {"id", "cmd"}
    if extra:
        raise ProtocolError("invalid_field", f"unknown fields: {sorted(extra)}", rid)


def _parse_bone_name(obj: dict, key: str, defs: RigDefinition, rid: Any) -> str:
    name = _require_str(obj, key, rid)
    try:
        defs.bone_index(name)
    except UnknownBoneError:
        raise ProtocolError("unknown_bone", f"unknown bone {name!r}", rid) from None
    return name


def _parse_set_bone_pose(obj, defs, rid, notes):
    _check_fields(obj, {"bone", "pose"}, rid)
    bone = _parse_bone_name(obj, "bone", defs, rid)
    p, r = _require_pose(obj, "pose", rid)
    return SetBonePose(rid, bone, BonePose(p, r))


def _parse_set_aus(obj, defs, rid, notes):
    _check_fields(obj, {"intensities"}, rid)
    raw = obj.get("intensities")
    if not isinstance(raw, dict):
        raise ProtocolError("invalid_field", "intensities must be a map", rid)
    intensities = {}
    for key, value in raw.items():
        try:
            au = int(key)
        except (TypeError, ValueError):
            raise ProtocolError("unknown_preset", f"AU key {key!r} is not a number", rid) from None
        if au not in AU_KEYS:
            raise ProtocolError("unknown_preset", f"AU {au} not in the 24-preset set", rid)
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ProtocolError("invalid_field", f"AU {au} intensity must be a finite number", rid)
        v = float(value)
        if v < 0.0 or v > 1.0:
            notes.append(f"intensities.{au}")
            v = 0.0 if v < 0.0 else 1.0
        intensities[au] = v
    return SetAUs(rid, intensities)


def _parse_set_viseme(obj, defs, rid, notes):
    _check_fields(obj, {"viseme", "weight"}, rid)
    viseme = _require_str(obj, "viseme", rid)
    if viseme not in defs.viseme_presets:
        raise ProtocolError("unknown_viseme", f"unknown viseme {viseme!r}", rid)
    weight = _clamped(obj, "weight", 0.0, 1.0, rid, notes)
    return SetViseme(rid, viseme, weight)


def _parse_play_track(obj, defs, rid, notes):
    _check_fields(obj, {"track", "offset_ms"}, rid)
    raw = obj.get("track")
    if not isinstance(raw, list):
        raise ProtocolError("invalid_field", "track must be an array of events", rid)
    events = []
    for entry in raw:
        if not isinstance(entry, dict) or set(entry) != {"ph", "start_ms", "dur_ms"}:
            raise ProtocolError("invalid_field", "track events need ph/start_ms/dur_ms", rid)
        ph = entry["ph"]
        start, dur = entry["start_ms"], entry["dur_ms"]
        if not isinstance(ph, str) or isinstance(start, bool) or isinstance(dur, bool) \
                or not isinstance(start, int) or not isinstance(dur, int):
            raise ProtocolError("invalid_field", "track event fields must be str/int/int", rid)
        try:
            events.append(PhonemeEvent(ph, start, dur))
        except ValueError as e:
            raise ProtocolError("invalid_field", str(e), rid) from None
    try:
        validate_events(events, defs, RampConfig())
    except UnknownPhonemeError as e:
        raise ProtocolError("unknown_phoneme", str(e), rid) from None
    except TrackParseError as e:
        raise ProtocolError("track_error", str(e), rid) from None
    offset = _require_number(obj, "offset_ms", rid, default=0.0)
    return PlayVisemeTrack(rid, tuple(events), offset)


def _parse_set_head(obj, defs, rid, notes):
    _check_fields(obj, {"yaw", "pitch", "roll"}, rid)
    yaw = _clamped(obj, "yaw", -1.0, 1.0, rid, notes, default=0.0)
    pitch = _clamped(obj, "pitch", -1.0, 1.0, rid, notes, default=0.0)
    roll = _clamped(obj, "roll", -1.0, 1.0, rid, notes, default=0.0)
    return SetHeadPose(rid, HeadPose(yaw, pitch, roll))


def _parse_set_appearance(obj, defs, rid, notes):
    _check_fields(obj, {"skin_tone", "skin_age"}, rid)
    tone = _clamped(obj, "skin_tone", 0.0, 1.0, rid, notes, default=0.5)
    age = _clamped(obj, "skin_age", 0.0, 1.0, rid, notes, default=0.0)
    return SetAppearance(rid, AppearanceParams(tone, age))


def _parse_set_camera(obj, defs, rid, notes):
    _check_fields(obj, {"pose"}, rid)
    p, r = _require_pose(obj, "pose", rid)
    return SetCameraPose(rid, CameraPose(p, r))


def _parse_set_emotion(obj, defs, rid, notes):
    _check_fields(obj, {"label", "intensity"}, rid)
    label = _require_str(obj, "label", rid)
    if label not in defs.emotion_table:
        raise ProtocolError("unknown_emotion", f"unknown emotion {label!r}", rid)
    intensity = _clamped(obj, "intensity", 0.0, 1.0, rid, notes, default=1.0)
    return SetEmotion(rid, label, intensity)


def _parse_au_frame(obj, defs, rid, notes):
    _check_fields(obj, {"t_ms", "probs", "alpha", "threshold"}, rid)
    t_ms = _require_number(obj, "t_ms", rid)
    raw = obj.get("probs")
    if not isinstance(raw, list) or len(raw) != len(AU_STREAM_ORDER):
        raise ProtocolError(
            "invalid_field", f"probs must be an array of {len(AU_STREAM_ORDER)} numbers", rid
        )
    probs = []
    for v in raw:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ProtocolError("invalid_field", "probs must contain finite numbers", rid)
        if v < 0.0 or v > 1.0:
            raise ProtocolError("out_of_range", f"probability {v} outside [0, 1]", rid)
        probs.append(float(v))
    alpha = threshold = None
    if "alpha" in obj:
        alpha = _require_number(obj, "alpha", rid)
        if not 0.0 < alpha <= 1.0:
            raise ProtocolError("out_of_range", f"alpha {alpha} outside (0, 1]", rid)
    if "threshold" in obj:
        threshold = _require_number(obj, "threshold", rid)
        if not 0.0 < threshold < 1.0:
            raise ProtocolError("out_of_range", f"threshold {threshold} outside (0, 1)", rid)
    return AuFrame(rid, AuProbabilityFrame(int(t_ms), tuple(probs)), alpha, threshold)


def _parse_bone_frame(obj, defs, rid, notes):
    _check_fields(obj, {"t_ms", "offsets"}, rid)
    t_ms = _require_number(obj, "t_ms", rid)
    raw = obj.get("offsets")
    if not isinstance(raw, list):
        raise ProtocolError("invalid_field", "offsets must be an array", rid)
    offsets = []
    for entry in raw:
        if not isinstance(entry, dict) or set(entry) - {"bone", "dp", "dr"}:
            raise ProtocolError("invalid_field", "offset entries need bone/dp/dr", rid)
        name = _parse_bone_name(entry, "bone", defs, rid)
        dp = _require_vec3(entry.get("dp", [0, 0, 0]), "dp", rid)
        dr = _require_vec3(entry.get("dr", [0, 0, 0]), "dr", rid)
        offsets.append(defs.offset(name, dp, dr))
    return BoneFrame(rid, ExternalBoneFrame(int(t_ms), tuple(offsets)))


def _parse_bare(cls: type) -> Callable:
    def parse(obj, defs, rid, notes):
        _check_fields(obj, set(), rid)
        return cls(rid)

    return parse


_PARSERS: dict[str, Callable] = {
    "SetBonePose": _parse_set_bone_pose,
    "SetAUs": _parse_set_aus,
    "SetViseme": _parse_set_viseme,
    "PlayVisemeTrack": _parse_play_track,
    "StopTrack": _parse_bare(StopTrack),
    "SetHeadPose": _parse_set_head,
    "SetAppearance": _parse_set_appearance,
    "SetCameraPose": _parse_set_camera,
    "SetEmotion": _parse_set_emotion,
    "AuFrame": _parse_au_frame,
    "BoneFrame": _parse_bone_frame,
    "Subscribe": _parse_bare(Subscribe),
    "Unsubscribe": _parse_bare(Unsubscribe),
    "QueryState": _parse_bare(QueryState),
    "Reset": _parse_bare(Reset),
}


def parse_message(line: str, defs: RigDefinition) -> tuple[Command, tuple[str, ...]]:
    """One line to one command; returns (command, names of clamped fields).

    Raises ProtocolError with a machine code; the caller turns that into an
    error response (the connection stays open).
    """
    try:
        obj = json.loads(line, parse_constant=_reject_constant)
    except ValueError as e:
        raise ProtocolError("parse_error", f"malformed message: {e}") from None
    if not isinstance(obj, dict):
        raise ProtocolError("parse_error", "message must be a JSON object")

    rid = obj.get("id")
    if isinstance(rid, bool) or not isinstance(rid, (int, str)):
        raise ProtocolError("invalid_field", "id must be an integer or string",
                            rid if isinstance(rid, (int, str)) else None)
    cmd_name = obj.get("cmd")
    if not isinstance(cmd_name, str):
        raise ProtocolError("invalid_field", "cmd must be a string", rid)
    parser = _PARSERS.get(cmd_name)
    if parser is None:
        raise ProtocolError("unknown_command", f"unknown command {cmd_name!r}", rid)
    notes: list[str] = []
    command = parser(obj, defs, rid, notes)
    return command, tuple(notes)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _pose_obj(p: tuple[float, ...], r: tuple[float, ...]) -> dict[str, list[float]]:
    return {"p": [float(v) for v in p], "r": [float(v) for v in r]}


def serialize_command(cmd: Command) -> str:
    """Canonical one-line JSON for a command (parse_message inverts it)."""
    obj: dict[str, Any] = {"id": cmd.id, "cmd": type(cmd).__name__}
    if isinstance(cmd, SetBonePose):
        obj["bone"] = cmd.bone
        obj["pose"] = _pose_obj(cmd.pose.position, cmd.pose.orientation)
    elif isinstance(cmd, SetAUs):
        obj["intensities"] = {str(au): v for au, v in cmd.intensities.items()}
    elif isinstance(cmd, SetViseme):
        obj["viseme"] = cmd.viseme
        obj["weight"] = cmd.weight
    elif isinstance(cmd, PlayVisemeTrack):
        obj["track"] = [
            {"ph": e.phoneme, "start_ms": e.start_ms, "dur_ms": e.duration_ms}
            for e in cmd.events
        ]
        obj["offset_ms"] = cmd.offset_ms
    elif isinstance(cmd, SetHeadPose):
        obj["yaw"], obj["pitch"], obj["roll"] = cmd.head.yaw, cmd.head.pitch, cmd.head.roll
    elif isinstance(cmd, SetAppearance):
        obj["skin_tone"] = cmd.appearance.skin_tone
        obj["skin_age"] = cmd.appearance.skin_age
    elif isinstance(cmd, SetCameraPose):
        obj["pose"] = _pose_obj(cmd.pose.position, cmd.pose.orientation)
    elif isinstance(cmd, SetEmotion):
        obj["label"], obj["intensity"] = cmd.label, cmd.intensity
    elif isinstance(cmd, AuFrame):
        obj["t_ms"] = cmd.frame.timestamp_ms
        obj["probs"] = list(cmd.frame.probabilities)
        if cmd.alpha is not None:
            obj["alpha"] = cmd.alpha
        if cmd.threshold is not None:
            obj["threshold"] = cmd.threshold
    elif isinstance(cmd, BoneFrame):
        obj["t_ms"] = cmd.frame.timestamp_ms
        obj["offsets"] = [
            {"bone": o.bone.name, "dp": list(o.delta_position), "dr": list(o.delta_orientation)}
            for o in cmd.frame.offsets
        ]
    return json.dumps(obj, **_JSON_OPTS)


def serialize_response(resp: Response) -> str:
    obj: dict[str, Any] = {"id": resp.id, "status": resp.status}
    if resp.status == "error":
        obj["error"] = {"code": resp.code, "message": resp.message}
    if resp.payload is not None:
        obj["payload"] = resp.payload
    return json.dumps(obj, **_JSON_OPTS)


def parse_response(line: str) -> Response:
    obj = json.loads(line)
    err = obj.get("error") or {}
    return Response(
        id=obj.get("id"),
        status=obj.get("status", ""),
        code=err.get("code"),
        message=err.get("message"),
        payload=obj.get("payload"),
    )


def goodbye_line(reason: str) -> str:
    return json.dumps({"type": "goodbye", "reason": reason}, **_JSON_OPTS)


# ---------------------------------------------------------------------------
# Frames
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FramePayload:
    """One broadcast frame: the full absolute pose plus activity flags."""

    tick: int
    time_ms: float
    state: RigState
    active_visemes: VisemeWeights
    active_aus: AuControls
    lipsync_active: bool

    def to_wire(self, defs: RigDefinition) -> dict[str, Any]:
        bones: dict[str, Any] = {}
        for b in defs.bones:
            row = self.state.bones[b.index]
            bones[b.name] = {
                "p": [float(row[0]), float(row[1]), float(row[2])],
                "r": [float(row[3]), float(row[4]), float(row[5])],
            }
        head = self.state.head
        appearance = self.state.appearance
        return {
            "type": "frame",
            "tick": self.tick,
            "time_ms": float(self.time_ms),
            "bones": bones,
            "head": {"yaw": head.yaw, "pitch": head.pitch, "roll": head.roll},
            "appearance": {"skin_tone": appearance.skin_tone, "skin_age": appearance.skin_age},
            "camera": _pose_obj(self.state.camera.position, self.state.camera.orientation),
            "active_visemes": {v: float(w) for v, w in sorted(self.active_visemes.weights.items())},
            "active_aus": {
                "aus": {str(au): float(v) for au, v in sorted(self.active_aus.intensities.items())},
                "eyelid_close": float(self.active_aus.eyelid_close),
            },
            "lipsync_active": self.lipsync_active,
        }


def serialize_frame(frame: FramePayload, defs: RigDefinition) -> str:
    return json.dumps(frame.to_wire(defs), **_JSON_OPTS)
