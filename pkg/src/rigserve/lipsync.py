"""Timed phoneme tracks and their per-instant viseme weight vectors.

Each event contributes a trapezoid envelope: linear attack after its start,
full weight in the middle, linear release into its end.  Where two events
overlap (allowed up to the crossfade ramp), the outgoing release and the
incoming attack share the overlap window, so the two weights sum to exactly
one throughout the crossfade.  Isolated boundaries ramp against silence.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

from rigserve.rig import RigDefinition


class LipsyncError(Exception):
    pass


class TrackParseError(LipsyncError):
    pass


class UnknownPhonemeError(LipsyncError):
    pass


class LexiconError(LipsyncError):
    """A word of the utterance is missing from the pronunciation table."""


@dataclass(frozen=True)
class RampConfig:
    """Crossfade duration; per boundary the excess over half an event is clipped."""

    ramp_ms: float = 40.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.ramp_ms) and self.ramp_ms >= 0.0):
            raise ValueError(f"ramp_ms must be >= 0, got {self.ramp_ms}")


@dataclass(frozen=True)
class PhonemeEvent:
    phoneme: str
    start_ms: int
    duration_ms: int

    def __post_init__(self) -> None:
        if self.start_ms < 0:
            raise ValueError(f"event start must be >= 0, got {self.start_ms}")
        if self.duration_ms <= 0:
            raise ValueError(f"event duration must be > 0, got {self.duration_ms}")

    @property
    def end_ms(self) -> int:
        return self.start_ms + self.duration_ms


@dataclass(frozen=True)
class PhonemeTrack:
    """Events sorted by start; overlaps capped by the crossfade ramp."""

    events: tuple[PhonemeEvent, ...] = ()
    _starts: tuple[int, ...] = field(init=False, repr=False, compare=False, default=())

    def __post_init__(self) -> None:
        object.__setattr__(self, "_starts", tuple(e.start_ms for e in self.events))

    @property
    def total_ms(self) -> int:
        return max((e.end_ms for e in self.events), default=0)

    def shifted(self, delta_ms: int) -> "PhonemeTrack":
        return PhonemeTrack(
            tuple(
                PhonemeEvent(e.phoneme, e.start_ms + delta_ms, e.duration_ms)
                for e in self.events
            )
        )


@dataclass(frozen=True)
class VisemeWeights:
    """Sparse viseme activation vector; at most two visemes mid-crossfade."""

    weights: dict[str, float]

    def __post_init__(self) -> None:
        nonzero = {v: w for v, w in self.weights.items() if w != 0.0}
        for v, w in nonzero.items():
            if not 0.0 <= w <= 1.0:
                raise ValueError(f"viseme {v!r} weight {w} outside [0, 1]")
        if len(nonzero) > 2:
            raise ValueError(f"more than two visemes active: {sorted(nonzero)}")
        object.__setattr__(self, "weights", nonzero)

    @classmethod
    def silence(cls) -> "VisemeWeights":
        return cls({})

    def __bool__(self) -> bool:
        return bool(self.weights)


def _max_overlap(a: PhonemeEvent, b: PhonemeEvent, ramp: RampConfig) -> float:
    return min(ramp.ramp_ms, a.duration_ms / 2.0, b.duration_ms / 2.0)


def validate_events(events: list[PhonemeEvent], defs: RigDefinition, ramp: RampConfig) -> None:
    """Raise unless events are sorted, known, and overlap at most the ramp."""
    for e in events:
        if e.phoneme not in defs.phoneme_map:
            raise UnknownPhonemeError(f"unknown phoneme {e.phoneme!r}")
    for a, b in zip(events, events[1:]):
        if b.start_ms < a.start_ms:
            raise TrackParseError(
                f"events out of order: {b.phoneme!r}@{b.start_ms} after {a.phoneme!r}@{a.start_ms}"
            )
        overlap = a.end_ms - b.start_ms
        if overlap > _max_overlap(a, b, ramp):
            raise TrackParseError(
                f"events {a.phoneme!r} and {b.phoneme!r} overlap {overlap} ms, "
                f"beyond the {ramp.ramp_ms} ms crossfade ramp"
            )


def parse_phoneme_track(
    document: str, defs: RigDefinition, ramp: RampConfig = RampConfig()
) -> PhonemeTrack:
    """Parse `phoneme,start_ms,duration_ms` lines (# comments, blank lines ok)."""
    events = []
    for lineno, raw in enumerate(document.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3:
            raise TrackParseError(f"line {lineno}: expected phoneme,start_ms,duration_ms")
        phoneme, start_s, dur_s = parts
        try:
            start, dur = int(start_s), int(dur_s)
        except ValueError:
            raise TrackParseError(f"line {lineno}: start/duration must be integers") from None
        try:
            events.append(PhonemeEvent(phoneme, start, dur))
        except ValueError as e:
            raise TrackParseError(f"line {lineno}: {e}") from None
    validate_events(events, defs, ramp)
    return PhonemeTrack(tuple(events))


def map_phoneme(phoneme: str, defs: RigDefinition) -> str:
    """Resolve a phoneme symbol to its viseme preset id (many-to-one)."""
    try:
        return defs.phoneme_map[phoneme]
    except KeyError:
        raise UnknownPhonemeError(f"unknown phoneme {phoneme!r}") from None


def _event_weight(
    track: PhonemeTrack, i: int, t_ms: float, ramp: RampConfig
) -> float:
    """Envelope of event i at time t: 0 outside (start, end), trapezoid inside."""
    events = track.events
    e = events[i]
    if not e.start_ms < t_ms < e.end_ms:
        return 0.0
    attack = 0.0
    if i > 0:
        attack = max(0.0, events[i - 1].end_ms - e.start_ms)
    if attack == 0.0:
        attack = min(ramp.ramp_ms, e.duration_ms / 2.0)
    release = 0.0
    if i + 1 < len(events):
        release = max(0.0, e.end_ms - events[i + 1].start_ms)
    if release == 0.0:
        release = min(ramp.ramp_ms, e.duration_ms / 2.0)
    if attack > 0.0 and t_ms < e.start_ms + attack:
        return (t_ms - e.start_ms) / attack
    if release > 0.0 and t_ms > e.end_ms - release:
        return (e.end_ms - t_ms) / release
    return 1.0


def sample_viseme_weights(
    track: PhonemeTrack, t_ms: float, ramp: RampConfig, defs: RigDefinition
) -> VisemeWeights:
    """Viseme activations at an instant; crossfading weights sum to one."""
    if t_ms < 0 or not track.events:
        return VisemeWeights.silence()
    # Only the last two events starting at or before t can contain it
    # (triple overlap is excluded by the track invariant).
    hi = bisect_right(track._starts, t_ms)
    weights: dict[str, float] = {}
    for i in range(max(0, hi - 2), hi):
        w = _event_weight(track, i, t_ms, ramp)
        if w != 0.0:
            viseme = map_phoneme(track.events[i].phoneme, defs)
            weights[viseme] = weights.get(viseme, 0.0) + w
    return VisemeWeights(weights)


def compile_track(
    track: PhonemeTrack, tick_hz: float, ramp: RampConfig, defs: RigDefinition
) -> list[tuple[int, VisemeWeights]]:
    """Weight vector per tick for 0..ceil(total_ms*tick_hz/1000) inclusive."""
    if tick_hz <= 0:
        raise ValueError(f"tick_hz must be > 0, got {tick_hz}")
    last = math.ceil(track.total_ms * tick_hz / 1000.0)
    period_ms = 1000.0 / tick_hz
    return [
        (k, sample_viseme_weights(track, k * period_ms, ramp, defs))
        for k in range(last + 1)
    ]


def parse_lexicon(document: str, defs: RigDefinition | None = None) -> dict[str, list[str]]:
    """Parse `word: ph1 ph2 ...` lines into a pronunciation table."""
    lexicon: dict[str, list[str]] = {}
    for lineno, raw in enumerate(document.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        word, sep, rest = line.partition(":")
        phonemes = rest.split()
        if not sep or not word.strip() or not phonemes:
            raise TrackParseError(f"line {lineno}: expected `word: ph1 ph2 ...`")
        if defs is not None:
            for ph in phonemes:
                if ph not in defs.phoneme_map:
                    raise UnknownPhonemeError(f"line {lineno}: unknown phoneme {ph!r}")
        lexicon[word.strip().lower()] = phonemes
    return lexicon


WORD_GAP_MS = 120


def text_to_phoneme_track(
    text: str, lexicon: dict[str, list[str]], rate: float = 10.0
) -> PhonemeTrack:
    """Uniform-duration track for an utterance: 1000/rate ms per phoneme,
    back-to-back within a word, a silence gap between words."""
    if rate <= 0:
        raise ValueError(f"rate must be > 0, got {rate}")
    duration = max(1, round(1000.0 / rate))
    events = []
    cursor = 0
    for word in text.split():
        key = word.lower()
        if key not in lexicon:
            raise LexiconError(f"word {word!r} not in lexicon")
        if events:
            cursor += WORD_GAP_MS
        for phoneme in lexicon[key]:
            events.append(PhonemeEvent(phoneme, cursor, duration))
            cursor += duration
    return PhonemeTrack(tuple(events))
