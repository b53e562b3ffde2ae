"""Desk-scale load harness for the server.

Runs a real server plus N subscriber connections and a commander pushing a
fixed command rate over localhost TCP, all in one event loop, and measures
tick-deadline misses and command-to-frame latency.

A tick "misses its deadline" when it fires a full period or more late (its
frame slot was overrun).  Latency is measured end to end with probe
commands: the commander stamps a unique value onto an unused bone and a
subscriber records when the first frame carrying that value arrives.  The
probe config disables smoothing so the stamped value appears verbatim.
"""

from __future__ import annotations

import asyncio
import json
import time
from dataclasses import dataclass, field

from rigserve.config import ServerConfig
from rigserve.server import RigServer

PROBE_BONE = "Root"  # unused by presets; carries the probe sequence number


@dataclass
class BenchReport:
    duration_s: float
    tick_hz: float
    subscribers: int
    command_rate: float
    ticks: int = 0
    deadline_misses: int = 0
    frames_received: int = 0
    commands_sent: int = 0
    latencies_ms: list[float] = field(default_factory=list)

    @property
    def miss_pct(self) -> float:
        return 100.0 * self.deadline_misses / self.ticks if self.ticks else 0.0

    def latency_percentile(self, q: float) -> float:
        if not self.latencies_ms:
            return 0.0
        ordered = sorted(self.latencies_ms)
        k = min(len(ordered) - 1, int(q * len(ordered)))
        return ordered[k]

    def summary(self) -> str:
        period = 1000.0 / self.tick_hz
        return (
            f"{self.ticks} ticks @ {self.tick_hz:g} Hz over {self.duration_s:g}s | "
            f"misses {self.deadline_misses} ({self.miss_pct:.2f}%) | "
            f"{self.subscribers} subscribers, {self.frames_received} frames | "
            f"{self.commands_sent} commands | latency p50 {self.latency_percentile(0.50):.1f} ms, "
            f"p95 {self.latency_percentile(0.95):.1f} ms "
            f"({self.latency_percentile(0.95) / period:.2f} periods)"
        )


async def _subscriber(host: str, port: int, report: BenchReport,
                      probe_arrivals: dict[int, float], stop: asyncio.Event) -> None:
    reader, writer = await asyncio.open_connection(host, port)
    writer.write(b'{"id":0,"cmd":"Subscribe"}\n')
    await writer.drain()
    try:
        while not stop.is_set():
            line = await reader.readline()
            if not line:
                return
            obj = json.loads(line)
            if obj.get("type") != "frame":
                continue
            report.frames_received += 1
            seq = obj["bones"][PROBE_BONE]["p"][0]
            if seq > 0 and int(seq) not in probe_arrivals:
                probe_arrivals[int(seq)] = time.monotonic()
    finally:
        writer.close()


async def _commander(host: str, port: int, report: BenchReport, rate: float,
                     duration_s: float, probe_sends: dict[int, float]) -> None:
    reader, writer = await asyncio.open_connection(host, port)
    interval = 1.0 / rate
    started = time.monotonic()
    seq = 0
    i = 0
    while True:
        now = time.monotonic()
        if now - started >= duration_s:
            break
        # every tenth command is a latency probe; the rest exercise parsing
        # and staging across the command surface
        i += 1
        if i % 10 == 0:
            seq += 1
            probe_sends[seq] = now
            obj = {"id": i, "cmd": "SetBonePose", "bone": PROBE_BONE,
                   "pose": {"p": [float(seq), 0.0, 0.0], "r": [0.0, 0.0, 0.0]}}
        elif i % 3 == 0:
            obj = {"id": i, "cmd": "SetAUs", "intensities": {"12": (i % 100) / 100.0}}
        elif i % 3 == 1:
            obj = {"id": i, "cmd": "SetHeadPose", "yaw": ((i % 200) - 100) / 100.0,
                   "pitch": 0.0, "roll": 0.0}
        else:
            obj = {"id": i, "cmd": "SetEmotion", "label": "happiness",
                   "intensity": (i % 100) / 100.0}
        writer.write((json.dumps(obj, separators=(",", ":")) + "\n").encode())
        await writer.drain()
        report.commands_sent += 1
        due = started + i * interval
        lag = due - time.monotonic()
        if lag > 0:
            await asyncio.sleep(lag)
    writer.close()
    # drain pending responses so the socket closes cleanly
    try:
        await asyncio.wait_for(reader.read(), timeout=1.0)
    except (asyncio.TimeoutError, ConnectionError):
        pass


async def run_benchmark_async(
    duration_s: float = 30.0,
    subscribers: int = 8,
    command_rate: float = 500.0,
    tick_hz: float = 60.0,
) -> BenchReport:
    config = ServerConfig(
        tick_hz=tick_hz, port=0, ws_port=0, smoothing_alpha=1.0,
        blink_enabled=True, max_clients=subscribers + 4,
    )
    server = RigServer(config)
    await server.start()
    report = BenchReport(duration_s, tick_hz, subscribers, command_rate)
    probe_sends: dict[int, float] = {}
    probe_arrivals: dict[int, float] = {}
    stop = asyncio.Event()
    sub_tasks = [
        asyncio.create_task(
            _subscriber(config.host, server.tcp_port, report, probe_arrivals, stop))
        for _ in range(subscribers)
    ]
    await asyncio.sleep(0.2)  # let subscribers attach
    base_ticks, base_misses = server.ticks, server.deadline_misses
    await _commander(config.host, server.tcp_port, report, command_rate, duration_s, probe_sends)
    await asyncio.sleep(0.2)  # let the last probes flush
    report.ticks = server.ticks - base_ticks
    report.deadline_misses = server.deadline_misses - base_misses
    stop.set()
    await server.shutdown()
    for t in sub_tasks:
        t.cancel()
    await asyncio.gather(*sub_tasks, return_exceptions=True)
    for seq, sent in probe_sends.items():
        arrived = probe_arrivals.get(seq)
        if arrived is not None:
            report.latencies_ms.append((arrived - sent) * 1000.0)
    return report


def run_benchmark(**kwargs) -> BenchReport:
    return asyncio.run(run_benchmark_async(**kwargs))
