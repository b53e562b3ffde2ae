"""Independent oracles for the lip-sync scheduler.

The brute-force sampler re-derives every envelope from scratch by scanning
all events for overlaps (no sorting, no neighbour indices, no bisection),
so it shares no code path with the production sampler.
"""

from __future__ import annotations

from rigserve.lipsync import PhonemeEvent


def brute_force_weights(
    events: list[PhonemeEvent], t_ms: float, ramp_ms: float, phoneme_map: dict[str, str]
) -> dict[str, float]:
    """Viseme weights at an instant, from first principles."""
    weights: dict[str, float] = {}
    for e in events:
        s, end, d = e.start_ms, e.end_ms, e.duration_ms
        if not s < t_ms < end:
            continue
        # attack width: overlap poured in by any earlier-starting event,
        # else the ramp clipped to half this event
        attack = 0.0
        for other in events:
            if other is not e and other.start_ms < s < other.end_ms:
                attack = max(attack, other.end_ms - s)
        if attack == 0.0:
            attack = min(ramp_ms, d / 2.0)
        # release width: overlap handed to any later-starting event
        release = 0.0
        for other in events:
            if other is not e and s < other.start_ms < end:
                release = max(release, end - other.start_ms)
        if release == 0.0:
            release = min(ramp_ms, d / 2.0)

        if attack > 0.0 and t_ms < s + attack:
            w = (t_ms - s) / attack
        elif release > 0.0 and t_ms > end - release:
            w = (end - t_ms) / release
        else:
            w = 1.0
        if w != 0.0:
            viseme = phoneme_map[e.phoneme]
            weights[viseme] = weights.get(viseme, 0.0) + w
    return weights


def brute_force_timeline(
    events: list[PhonemeEvent], ramp_ms: float, phoneme_map: dict[str, str]
) -> list[dict[str, float]]:
    """Dense 1 ms table over [0, total]; index t is the weights at t ms."""
    total = max((e.end_ms for e in events), default=0)
    return [brute_force_weights(events, float(t), ramp_ms, phoneme_map) for t in range(total + 1)]
