"""Deterministic script replay: a session driven by a virtual clock.

A puppet script is a JSON array of protocol commands, each with an extra
`at_ms` field.  Replaying the same script against the same config and blink
seed produces a byte-identical frame stream, in-process or across process
restarts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any

from rigserve import protocol, rig
from rigserve.config import ServerConfig
from rigserve.session import Session


class ScriptError(Exception):
    pass


@dataclass(frozen=True)
class ScriptedCommand:
    at_ms: float
    line: str  # the protocol message without at_ms


@dataclass(frozen=True)
class PuppetScript:
    commands: tuple[ScriptedCommand, ...]

    @property
    def last_at_ms(self) -> float:
        return max((c.at_ms for c in self.commands), default=0.0)


def parse_puppet_script(document: str) -> PuppetScript:
    """Parse a script file; commands must be sorted by at_ms."""
    try:
        raw = json.loads(document)
    except json.JSONDecodeError as e:
        raise ScriptError(f"script is not valid JSON: {e}") from None
    if not isinstance(raw, list):
        raise ScriptError("script must be a JSON array of commands")
    commands = []
    previous = 0.0
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict) or "at_ms" not in entry:
            raise ScriptError(f"script entry {i} needs an at_ms field")
        at_ms = entry["at_ms"]
        if isinstance(at_ms, bool) or not isinstance(at_ms, (int, float)) or at_ms < 0:
            raise ScriptError(f"script entry {i}: at_ms must be a non-negative number")
        if at_ms < previous:
            raise ScriptError(f"script entry {i}: at_ms {at_ms} is out of order")
        previous = at_ms
        body = {k: v for k, v in entry.items() if k != "at_ms"}
        commands.append(ScriptedCommand(float(at_ms), json.dumps(body, separators=(",", ":"))))
    return PuppetScript(tuple(commands))


@dataclass
class ReplayResult:
    frames: list[str]
    responses: list[protocol.Response]


def run_script(
    script: PuppetScript,
    config: ServerConfig,
    defs: rig.RigDefinition | None = None,
    duration_ms: float | None = None,
) -> ReplayResult:
    """Tick a session at the configured rate under virtual time.

    Commands apply at the first tick at or after their at_ms, in script
    order, before the frame composes -- exactly the server's drain-then-tick
    cadence.  Returns the serialized frame lines and the responses.
    """
    if defs is None:
        defs = rig.load_rig_file(config.rig_path) if config.rig_path else rig.load_default_rig()
    if duration_ms is None:
        duration_ms = script.last_at_ms + 2000.0
    session = Session(defs, config)
    period = config.tick_period_ms
    frames: list[str] = []
    responses: list[protocol.Response] = []
    pending = list(script.commands)
    tick = 0
    while True:
        now = tick * period
        if now >= duration_ms and tick > 0:
            break
        while pending and pending[0].at_ms <= now:
            cmd_line = pending.pop(0).line
            try:
                cmd, clamped = protocol.parse_message(cmd_line, defs)
            except protocol.ProtocolError as e:
                responses.append(protocol.Response.error(e.request_id, e.code, e.message))
                continue
            responses.append(session.handle_command(cmd, now, clamped))
        frame = session.tick(now)
        frames.append(protocol.serialize_frame(frame, defs))
        tick += 1
    return ReplayResult(frames, responses)
