"""Clock interface for the tick loop.

Production reads the monotonic system clock; tests and the replay harness
inject a virtual clock so identical scripts produce identical frame streams.
"""

from __future__ import annotations

import time


class SystemClock:
    """Monotonic milliseconds since construction."""

    def __init__(self) -> None:
        self._origin = time.monotonic()

    def now_ms(self) -> float:
        return (time.monotonic() - self._origin) * 1000.0


class VirtualClock:
    """Manually advanced time; never moves on its own."""

    def __init__(self, start_ms: float = 0.0) -> None:
        self._now = start_ms

    def now_ms(self) -> float:
        return self._now

    def advance(self, delta_ms: float) -> float:
        self._now += delta_ms
        return self._now

    def set(self, t_ms: float) -> None:
        if t_ms < self._now:
            raise ValueError(f"virtual clock cannot move backwards ({t_ms} < {self._now})")
        self._now = t_ms
