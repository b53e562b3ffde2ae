"""Seeded generators shared by the unit and acceptance fuzz suites."""

from __future__ import annotations

import random

from rigserve import protocol
from rigserve.lipsync import PhonemeEvent
from rigserve.retarget import AU_STREAM_ORDER, AuProbabilityFrame, ExternalBoneFrame
from rigserve.rig import AU_KEYS, AppearanceParams, BonePose, CameraPose, HeadPose, RigDefinition


def random_track_events(rng: random.Random, defs: RigDefinition, ramp_ms: float = 40.0,
                        max_events: int = 12) -> list[PhonemeEvent]:
    """A valid event list: sorted, overlaps within the crossfade budget."""
    phonemes = sorted(defs.phoneme_map)
    events = []
    cursor = rng.randrange(0, 200)
    prev_dur = None
    for _ in range(rng.randrange(0, max_events + 1)):
        dur = rng.randrange(30, 400)
        if events and rng.random() < 0.5:
            # overlap into the previous event, within the allowed budget
            limit = int(min(ramp_ms, prev_dur / 2, dur / 2))
            back = rng.randrange(0, limit + 1)
            start = cursor - back
        else:
            start = cursor + rng.randrange(0, 150)
        events.append(PhonemeEvent(rng.choice(phonemes), start, dur))
        cursor = start + dur
        prev_dur = dur
    return events


def _rand_unit(rng: random.Random) -> float:
    return round(rng.random(), 6)


def _rand_vec(rng: random.Random, lo: float = -3.0, hi: float = 3.0) -> list[float]:
    return [round(rng.uniform(lo, hi), 6) for _ in range(3)]


def random_command(rng: random.Random, defs: RigDefinition, rid: int) -> protocol.Command:
    """One valid command, uniformly across the fifteen variants."""
    kind = rng.randrange(15)
    if kind == 0:
        bone = rng.choice(defs.bones).name
        return protocol.SetBonePose(rid, bone, BonePose(tuple(_rand_vec(rng)), tuple(_rand_vec(rng, -3.0, 3.0))))
    if kind == 1:
        aus = rng.sample(AU_KEYS, rng.randrange(1, 5))
        return protocol.SetAUs(rid, {au: _rand_unit(rng) for au in aus})
    if kind == 2:
        return protocol.SetViseme(rid, rng.choice(sorted(defs.viseme_presets)), _rand_unit(rng))
    if kind == 3:
        events = tuple(random_track_events(rng, defs, max_events=6))
        return protocol.PlayVisemeTrack(rid, events, round(rng.uniform(-200, 200), 3))
    if kind == 4:
        return protocol.StopTrack(rid)
    if kind == 5:
        return protocol.SetHeadPose(
            rid, HeadPose(*(round(rng.uniform(-1, 1), 6) for _ in range(3))))
    if kind == 6:
        return protocol.SetAppearance(rid, AppearanceParams(_rand_unit(rng), _rand_unit(rng)))
    if kind == 7:
        return protocol.SetCameraPose(rid, CameraPose(tuple(_rand_vec(rng, -50, 50)), tuple(_rand_vec(rng))))
    if kind == 8:
        return protocol.SetEmotion(rid, rng.choice(sorted(defs.emotion_table)), _rand_unit(rng))
    if kind == 9:
        frame = AuProbabilityFrame(rng.randrange(0, 10_000),
                                   tuple(_rand_unit(rng) for _ in AU_STREAM_ORDER))
        alpha = round(rng.uniform(0.05, 1.0), 6) if rng.random() < 0.5 else None
        threshold = round(rng.uniform(0.05, 0.95), 6) if rng.random() < 0.5 else None
        return protocol.AuFrame(rid, frame, alpha, threshold)
    if kind == 10:
        offsets = tuple(
            defs.offset(rng.choice(defs.bones).name, _rand_vec(rng), _rand_vec(rng))
            for _ in range(rng.randrange(0, 4))
        )
        return protocol.BoneFrame(rid, ExternalBoneFrame(rng.randrange(0, 10_000), offsets))
    if kind == 11:
        return protocol.Subscribe(rid)
    if kind == 12:
        return protocol.Unsubscribe(rid)
    if kind == 13:
        return protocol.QueryState(rid)
    return protocol.Reset(rid)


def malformed_line(rng: random.Random, i: int) -> str:
    """A line that must produce exactly one error response."""
    choices = [
        "not json at all",
        "{",
        "[1,2,3]",
        '"just a string"',
        "{}",
        '{"id":%d}' % i,
        '{"cmd":"SetHeadPose","yaw":0}',                      # missing id
        '{"id":%d,"cmd":"Frobnicate"}' % i,
        '{"id":%d,"cmd":"SetHeadPose","yaw":"fast"}' % i,
        '{"id":%d,"cmd":"SetHeadPose","yaw":NaN}' % i,
        '{"id":%d,"cmd":"SetHeadPose","zoom":1}' % i,
        '{"id":%d,"cmd":"SetBonePose","bone":"NoSuchBone","pose":{"p":[0,0,0],"r":[0,0,0]}}' % i,
        '{"id":%d,"cmd":"SetBonePose","bone":"Jaw","pose":{"p":[0,0],"r":[0,0,0]}}' % i,
        '{"id":%d,"cmd":"SetAUs","intensities":{"3":0.5}}' % i,
        '{"id":%d,"cmd":"SetAUs","intensities":{"12":true}}' % i,
        '{"id":%d,"cmd":"SetViseme","viseme":"zz","weight":1}' % i,
        '{"id":%d,"cmd":"SetEmotion","label":"boredom","intensity":1}' % i,
        '{"id":%d,"cmd":"AuFrame","t_ms":0,"probs":[0,0,0,0,0,0,0,0,0,0,0]}' % i,
        '{"id":%d,"cmd":"AuFrame","t_ms":0,"probs":[0,0,0,0,0,0,1.5,0,0,0,0,0]}' % i,
        '{"id":%d,"cmd":"PlayVisemeTrack","track":[{"ph":"ae","start_ms":100,"dur_ms":50},{"ph":"b","start_ms":0,"dur_ms":50}]}' % i,
        '{"id":%d,"cmd":"QueryState","extra":1}' % i,
        '{"id":[1],"cmd":"QueryState"}',
        '{"id":%d,"cmd":"Subscribe","id2":3}' % i,
        '{"id":%d,"cmd":"SetAppearance","skin_tone":{}}' % i,
    ]
    return rng.choice(choices)
