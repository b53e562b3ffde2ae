"""The authoritative avatar session.

Commands stage control inputs (direct bone deltas, AU controls, viseme
state, the track player, head/appearance/camera); every tick composes the
layers under the mask policy, smooths against the previous frame, and emits
one FramePayload.  The session is single-owner: the server's tick loop is
the only caller, and all I/O stays outside.
"""

from __future__ import annotations

from typing import Any

import numpy as np

from rigserve import blend, lipsync, protocol, retarget, rig
from rigserve.config import ServerConfig


class Session:
    def __init__(self, defs: rig.RigDefinition, config: ServerConfig):
        self.defs = defs
        self.config = config
        self.smoothing = blend.SmoothingConfig(alpha=config.smoothing_alpha)
        self.ramp = lipsync.RampConfig(config.ramp_ms)
        self.blink: blend.BlinkSchedule | None = None
        if config.blink_enabled:
            self.blink = blend.BlinkSchedule.create(
                config.blink_seed,
                interval_range=config.blink_interval_s,
                duration_ms=config.blink_duration_ms,
            )
        self.tick_no = 0
        self.prev_state = rig.rest_state(defs)
        self.last_frame: protocol.FramePayload | None = None
        self._reset_inputs()

    def _reset_inputs(self) -> None:
        self.direct: dict[int, np.ndarray] = {}
        self.au_controls = retarget.AuControls.zeros()
        self.external_offsets: list[rig.BoneOffset] = []
        self.manual_viseme: tuple[str, float] | None = None
        self.track: lipsync.PhonemeTrack | None = None
        self.track_start_ms = 0.0
        self.track_offset_ms = 0.0
        self.head = rig.HeadPose()
        self.appearance = rig.AppearanceParams()
        self.camera = self.defs.camera_default

    # ------------------------------------------------------------- commands

    def handle_command(
        self, cmd: protocol.Command, now_ms: float, clamped: tuple[str, ...] = ()
    ) -> protocol.Response:
        """Stage one command; effects appear in the next composed frame."""
        payload: dict[str, Any] | None = None

        if isinstance(cmd, protocol.SetBonePose):
            index = self.defs.bone_index(cmd.bone)
            delta = cmd.pose.as_row() - self.defs.rest_rows()[index]
            self.direct[index] = delta
        elif isinstance(cmd, protocol.SetAUs):
            merged = dict(self.au_controls.intensities)
            merged.update(cmd.intensities)
            self.au_controls = retarget.AuControls(merged, self.au_controls.eyelid_close)
        elif isinstance(cmd, protocol.SetViseme):
            self.manual_viseme = (cmd.viseme, cmd.weight) if cmd.weight > 0.0 else None
        elif isinstance(cmd, protocol.PlayVisemeTrack):
            self.track = lipsync.PhonemeTrack(cmd.events)
            self.track_start_ms = now_ms
            self.track_offset_ms = cmd.offset_ms
            payload = {"track_start_ms": now_ms, "total_ms": self.track.total_ms}
        elif isinstance(cmd, protocol.StopTrack):
            self.track = None
        elif isinstance(cmd, protocol.SetHeadPose):
            self.head = cmd.head
        elif isinstance(cmd, protocol.SetAppearance):
            self.appearance = cmd.appearance
        elif isinstance(cmd, protocol.SetCameraPose):
            self.camera = cmd.pose
        elif isinstance(cmd, protocol.SetEmotion):
            self.au_controls = retarget.emotion_to_aus(cmd.label, cmd.intensity, self.defs)
        elif isinstance(cmd, protocol.AuFrame):
            opts = self._retarget_options(cmd)
            self.au_controls = retarget.au_frame_to_controls(cmd.frame, self.au_controls, opts)
        elif isinstance(cmd, protocol.BoneFrame):
            self.external_offsets = retarget.ingest_bone_frame(cmd.frame)
        elif isinstance(cmd, (protocol.Subscribe, protocol.Unsubscribe)):
            pass  # subscription membership lives with the transport layer
        elif isinstance(cmd, protocol.QueryState):
            payload = {"frame": self.query_frame(now_ms).to_wire(self.defs)}
        elif isinstance(cmd, protocol.Reset):
            self._reset_inputs()
            self.prev_state = rig.rest_state(self.defs)
        else:
            return protocol.Response.error(cmd.id, "unknown_command", f"unhandled {type(cmd).__name__}")

        if clamped:
            payload = dict(payload or {})
            payload["clamped"] = sorted(set(clamped))
        return protocol.Response.ok(cmd.id, payload)

    def _retarget_options(self, cmd: protocol.AuFrame) -> retarget.RetargetOptions:
        alpha = cmd.alpha if cmd.alpha is not None else self.config.retarget_alpha
        threshold = cmd.threshold if cmd.threshold is not None else self.config.retarget_threshold
        if threshold is None:
            return retarget.RetargetOptions(smoothing_alpha=alpha, rounding="off")
        return retarget.RetargetOptions(smoothing_alpha=alpha, rounding="threshold", threshold=threshold)

    def query_frame(self, now_ms: float) -> protocol.FramePayload:
        """The last composed frame (a rest frame before the first tick)."""
        if self.last_frame is not None:
            return self.last_frame
        return protocol.FramePayload(
            tick=self.tick_no,
            time_ms=now_ms,
            state=self.prev_state,
            active_visemes=lipsync.VisemeWeights.silence(),
            active_aus=retarget.AuControls.zeros(),
            lipsync_active=False,
        )

    # ------------------------------------------------------------------ tick

    def _viseme_weights(self, now_ms: float) -> tuple[lipsync.VisemeWeights, bool]:
        if self.track is not None:
            t_rel = now_ms - self.track_start_ms + self.track_offset_ms
            if t_rel > self.track.total_ms + self.ramp.ramp_ms:
                self.track = None  # track ran out; fall through to manual state
            elif t_rel >= 0.0:
                weights = lipsync.sample_viseme_weights(self.track, t_rel, self.ramp, self.defs)
                return weights, True
            else:
                return lipsync.VisemeWeights.silence(), False  # awaiting start offset
        if self.manual_viseme is not None:
            viseme, weight = self.manual_viseme
            return lipsync.VisemeWeights({viseme: weight}), True
        return lipsync.VisemeWeights.silence(), False

    def tick(self, now_ms: float) -> protocol.FramePayload:
        """Compose, smooth, and emit the frame for this instant."""
        weights, lipsync_active = self._viseme_weights(now_ms)

        expression = list(retarget.controls_to_offsets(self.au_controls, self.defs))
        expression.extend(self.external_offsets)

        lip_offsets: list[rig.BoneOffset] = []
        for viseme in sorted(weights.weights):
            lip_offsets.extend(rig.preset_pose(self.defs, viseme, weights.weights[viseme]))

        direct_offsets = [
            rig.BoneOffset(self.defs.bones[i], tuple(d[0:3]), tuple(d[3:6]))
            for i, d in sorted(self.direct.items())
        ]

        layers = [
            blend.Layer("expression", tuple(expression)),
            blend.Layer("lipsync", tuple(lip_offsets)),
            blend.Layer("direct", tuple(direct_offsets)),
        ]
        if self.blink is not None:
            blink_offs, self.blink = blend.blink_offsets(now_ms, self.blink, self.defs)
            if blink_offs:
                layers.append(blend.Layer("direct", tuple(blink_offs), priority=3))

        target = blend.compose(self.defs, layers, lipsync_active)
        target = target.replace(head=self.head, appearance=self.appearance, camera=self.camera)
        state = blend.smooth_state(self.prev_state, target, self.smoothing)

        frame = protocol.FramePayload(
            tick=self.tick_no,
            time_ms=now_ms,
            state=state,
            active_visemes=weights,
            active_aus=self.au_controls,
            lipsync_active=lipsync_active,
        )
        self.prev_state = state
        self.last_frame = frame
        self.tick_no += 1
        return frame
