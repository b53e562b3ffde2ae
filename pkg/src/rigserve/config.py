"""Server configuration: JSON file with keys mirroring ServerConfig fields.

The RIGSERVE_CONFIG environment variable points at the file when the CLI is
not given one explicitly.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from typing import Any


class ConfigError(Exception):
    pass


@dataclass
class ServerConfig:
    tick_hz: float = 60.0
    host: str = "127.0.0.1"
    port: int = 4618
    ws_port: int = 4619
    smoothing_alpha: float = 1.0
    ramp_ms: float = 40.0
    blink_enabled: bool = True
    blink_seed: int = 1
    blink_interval_s: tuple[float, float] = (2.0, 6.0)
    blink_duration_ms: float = 200.0
    rig_path: str | None = None  # None -> packaged default rig
    max_clients: int = 32
    subscriber_backlog: int = 120
    command_backlog: int = 1024
    retarget_alpha: float = 1.0
    retarget_threshold: float | None = None  # None -> rounding off

    def __post_init__(self) -> None:
        if self.tick_hz <= 0:
            raise ConfigError(f"tick_hz must be > 0, got {self.tick_hz}")
        if self.max_clients < 1:
            raise ConfigError(f"max_clients must be >= 1, got {self.max_clients}")
        if not 0.0 < self.smoothing_alpha <= 1.0:
            raise ConfigError(f"smoothing_alpha must be in (0, 1], got {self.smoothing_alpha}")
        if self.ramp_ms < 0:
            raise ConfigError(f"ramp_ms must be >= 0, got {self.ramp_ms}")
        lo, hi = self.blink_interval_s
        if not 0 < lo <= hi:
            raise ConfigError(f"blink_interval_s must satisfy 0 < min <= max, got {self.blink_interval_s}")
        if self.blink_duration_ms <= 0:
            raise ConfigError("blink_duration_ms must be > 0")
        if self.subscriber_backlog < 1 or self.command_backlog < 1:
            raise ConfigError("backlog bounds must be >= 1")
        if not 0.0 < self.retarget_alpha <= 1.0:
            raise ConfigError(f"retarget_alpha must be in (0, 1], got {self.retarget_alpha}")
        if self.retarget_threshold is not None and not 0.0 < self.retarget_threshold < 1.0:
            raise ConfigError(f"retarget_threshold must be in (0, 1), got {self.retarget_threshold}")

    @property
    def tick_period_ms(self) -> float:
        return 1000.0 / self.tick_hz

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ServerConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "blink_interval_s" in kwargs:
            iv = kwargs["blink_interval_s"]
            if not isinstance(iv, (list, tuple)) or len(iv) != 2:
                raise ConfigError("blink_interval_s must be a [min, max] pair")
            kwargs["blink_interval_s"] = (float(iv[0]), float(iv[1]))
        try:
            return cls(**kwargs)
        except TypeError as e:
            raise ConfigError(str(e)) from None

    @classmethod
    def from_file(cls, path: str) -> "ServerConfig":
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except OSError as e:
            raise ConfigError(f"cannot read config {path!r}: {e}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {path!r} is not valid JSON: {e}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["blink_interval_s"] = list(self.blink_interval_s)
        return out
