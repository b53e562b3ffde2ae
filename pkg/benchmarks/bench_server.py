#!/usr/bin/env python3
"""Desk-scale server benchmark: tick-deadline misses and command latency.

Defaults match the acceptance criterion: 60 Hz, 8 subscribers, 500
commands/s for 30 s, asserting < 1% deadline misses and p95 latency within
two tick periods.
"""

from __future__ import annotations

import argparse
import sys

from rigserve.bench import run_benchmark


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--duration", type=float, default=30.0, help="seconds under load")
    parser.add_argument("--subscribers", type=int, default=8)
    parser.add_argument("--command-rate", type=float, default=500.0, help="commands per second")
    parser.add_argument("--tick-hz", type=float, default=60.0)
    args = parser.parse_args()

    report = run_benchmark(
        duration_s=args.duration,
        subscribers=args.subscribers,
        command_rate=args.command_rate,
        tick_hz=args.tick_hz,
    )
    print(report.summary())
    period_ms = 1000.0 / args.tick_hz
    ok = report.miss_pct < 1.0 and report.latency_percentile(0.95) <= 2.0 * period_ms
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
