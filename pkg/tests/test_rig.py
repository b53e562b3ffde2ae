from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rigserve import rig


# ---------------------------------------------------------------- loading


def test_default_rig_cardinalities(defs):
    assert len(defs.bones) == 38
    assert len(defs.au_presets) == 24
    assert set(defs.au_presets) == set(rig.AU_KEYS)
    assert len(defs.viseme_presets) == 19
    assert len(defs.phoneme_map) == 44


def test_bone_names_unique_and_bijective(defs):
    names = [b.name for b in defs.bones]
    assert len(set(names)) == 38
    for b in defs.bones:
        assert defs.bone_index(b.name) == b.index
        assert defs.bone_name(b.index) == b.name


def test_regions_partition_facial_bones(defs):
    assert not defs.upper_region & defs.lower_region
    assert defs.upper_region | defs.lower_region == defs.facial_bones
    assert not (defs.upper_region | defs.lower_region) & rig.NONFACIAL_BONES


def test_au3_key_rejected(default_doc):
    doc = json.loads(default_doc)
    doc["au_presets"]["3"] = [{"bone": "Jaw", "dp": [0, 0, 0], "dr": [0, 0, 0]}]
    with pytest.raises(rig.RigValidationError, match="not in Table-1 set"):
        rig.load_rig_definition(json.dumps(doc))


def test_missing_bone_rejected(default_doc):
    doc = json.loads(default_doc)
    doc["bones"] = [b for b in doc["bones"] if b["name"] != "Jaw"]
    with pytest.raises(rig.RigValidationError, match="38 bones"):
        rig.load_rig_definition(json.dumps(doc))


def test_duplicate_bone_rejected(default_doc):
    doc = json.loads(default_doc)
    doc["bones"][1] = dict(doc["bones"][0], index=1)
    with pytest.raises(rig.RigValidationError, match="duplicate bone"):
        rig.load_rig_definition(json.dumps(doc))


def test_unknown_top_level_key_rejected(default_doc):
    doc = json.loads(default_doc)
    doc["extras"] = {}
    with pytest.raises(rig.RigValidationError, match="unknown top-level"):
        rig.load_rig_definition(json.dumps(doc))


def test_malformed_json_is_parse_error():
    with pytest.raises(rig.RigParseError):
        rig.load_rig_definition("{nope")


def test_nonfinite_number_rejected(default_doc):
    doc = json.loads(default_doc)
    doc["camera_default"]["p"][0] = float("nan")  # dumps emits a NaN literal
    with pytest.raises(rig.RigParseError, match="non-finite"):
        rig.load_rig_definition(json.dumps(doc))


def test_phoneme_map_must_cover_44(default_doc):
    doc = json.loads(default_doc)
    doc["phoneme_map"].pop("ae")
    with pytest.raises(rig.RigValidationError, match="44"):
        rig.load_rig_definition(json.dumps(doc))


def test_phoneme_map_values_must_be_visemes(default_doc):
    doc = json.loads(default_doc)
    doc["phoneme_map"]["ae"] = "nope"
    with pytest.raises(rig.RigValidationError, match="unknown viseme"):
        rig.load_rig_definition(json.dumps(doc))


def test_viseme_count_enforced(default_doc):
    doc = json.loads(default_doc)
    doc["viseme_presets"].pop("ae")
    with pytest.raises(rig.RigValidationError, match="19"):
        rig.load_rig_definition(json.dumps(doc))


def test_emotion_weight_range_enforced(default_doc):
    doc = json.loads(default_doc)
    doc["emotion_table"]["happiness"][0]["weight"] = 1.5
    with pytest.raises(rig.RigValidationError, match="outside"):
        rig.load_rig_definition(json.dumps(doc))


def test_region_must_cover_all_facial(default_doc):
    doc = json.loads(default_doc)
    doc["regions"]["upper"].remove("LOuterBrow")
    with pytest.raises(rig.RigValidationError, match="cover"):
        rig.load_rig_definition(json.dumps(doc))


def test_round_trip(defs):
    again = rig.load_rig_definition(rig.serialize_rig_definition(defs))
    assert again == defs


# ---------------------------------------------------------------- validator


def test_default_presets_validate_clean(defs):
    assert rig.validate_presets(defs).ok


def test_au1_touching_jaw_is_flagged(default_doc):
    doc = json.loads(default_doc)
    doc["au_presets"]["1"].append({"bone": "Jaw", "dp": [0, -1, 0], "dr": [0, 0, 0]})
    report = rig.validate_presets(rig.load_rig_definition(json.dumps(doc)))
    assert any("AU1 touches Jaw" in line for line in report.lines())


def test_viseme_touching_brow_is_flagged(default_doc):
    doc = json.loads(default_doc)
    doc["viseme_presets"]["ae"].append({"bone": "LOuterBrow", "dp": [0, 1, 0], "dr": [0, 0, 0]})
    report = rig.validate_presets(rig.load_rig_definition(json.dumps(doc)))
    assert any("non-mouth bone" in line for line in report.lines())


# ---------------------------------------------------------------- rest state


def test_rest_state(defs):
    state = rig.rest_state(defs)
    assert np.array_equal(state.bones, defs.rest_rows())
    assert state.head == rig.HeadPose(0.0, 0.0, 0.0)
    assert state.appearance == rig.AppearanceParams(0.5, 0.0)
    assert state.camera == defs.camera_default
    assert rig.rest_state(defs) == state  # purity


# ---------------------------------------------------------------- presets


def test_zero_intensity_zeroes_all_channels(defs):
    for off in rig.preset_pose(defs, 12, 0.0):
        assert off.delta_position == (0.0, 0.0, 0.0)
        assert off.delta_orientation == (0.0, 0.0, 0.0)


def test_half_intensity_is_half_channels(defs):
    full = rig.preset_pose(defs, 12, 1.0)
    half = rig.preset_pose(defs, 12, 0.5)
    for f, h in zip(full, half):
        assert h.delta_position == tuple(c * 0.5 for c in f.delta_position)
        assert h.delta_orientation == tuple(c * 0.5 for c in f.delta_orientation)


@pytest.mark.parametrize("bad", [99, 3, "zz", "AU12"])
def test_unknown_preset_rejected(defs, bad):
    with pytest.raises(rig.UnknownPresetError):
        rig.preset_pose(defs, bad, 1.0)


def test_intensity_clamped(defs):
    assert rig.preset_pose(defs, 12, 1.7) == rig.preset_pose(defs, 12, 1.0)
    assert rig.preset_pose(defs, 12, -0.5) == rig.preset_pose(defs, 12, 0.0)


def test_string_au_key_accepted(defs):
    assert rig.preset_pose(defs, "12", 1.0) == rig.preset_pose(defs, 12, 1.0)


def test_linearity_all_presets(defs):
    ids = list(defs.au_presets) + list(defs.viseme_presets)
    for pid in ids:
        quarter = rig.preset_pose(defs, pid, 0.25)
        full = rig.preset_pose(defs, pid, 1.0)
        for q, f in zip(quarter, full):
            for qc, fc in zip(
                q.delta_position + q.delta_orientation,
                f.delta_position + f.delta_orientation,
            ):
                assert abs(qc - 0.25 * fc) <= 1e-12


# ---------------------------------------------------------------- offsets


def test_apply_empty_offsets_is_identity(defs):
    state = rig.rest_state(defs)
    assert rig.apply_bone_offsets(state, []) == state


def test_apply_additive_inverse_returns_to_rest(defs):
    state = rig.rest_state(defs)
    up = defs.offset("Jaw", dp=(0.1, -0.4, 0.2), dr=(0.05, 0.0, -0.1))
    there = rig.apply_bone_offsets(state, [up])
    back = rig.apply_bone_offsets(there, [up.scaled(-1.0)])
    assert np.abs(back.bones - state.bones).max() <= 1e-12


def test_disjoint_offsets_commute(defs):
    state = rig.rest_state(defs)
    a = defs.offset("Jaw", dp=(0.0, -0.5, 0.0))
    b = defs.offset("Chin", dp=(0.0, -0.3, 0.1))
    assert rig.apply_bone_offsets(state, [a, b]) == rig.apply_bone_offsets(state, [b, a])


def test_apply_does_not_mutate_input(defs):
    state = rig.rest_state(defs)
    before = state.bones.copy()
    rig.apply_bone_offsets(state, [defs.offset("Jaw", dp=(0, -1, 0))])
    assert np.array_equal(state.bones, before)


def test_orientation_renormalized(defs):
    state = rig.rest_state(defs)
    spun = rig.apply_bone_offsets(state, [defs.offset("Jaw", dr=(7.0, -7.0, 4.0))])
    row = spun.bones[defs.bone_index("Jaw")]
    assert (row[3:] >= -math.pi).all() and (row[3:] < math.pi).all()
    assert row[3] == pytest.approx(7.0 - 2 * math.pi)


def test_unknown_bone_offset_rejected(defs):
    state = rig.rest_state(defs)
    bad = rig.BoneOffset(rig.BoneId(77, "Nope"), (0, 0, 0), (0, 0, 0))
    with pytest.raises(rig.UnknownBoneError):
        rig.apply_bone_offsets(state, [bad])


def test_bone_offset_requires_finite():
    with pytest.raises(ValueError):
        rig.BoneOffset(rig.BoneId(0, "X"), (float("nan"), 0, 0), (0, 0, 0))


# ---------------------------------------------------------------- small types


def test_head_pose_clamps():
    head = rig.HeadPose(1.5, -2.0, 0.25)
    assert (head.yaw, head.pitch, head.roll) == (1.0, -1.0, 0.25)


def test_appearance_clamps():
    looks = rig.AppearanceParams(-0.2, 1.4)
    assert (looks.skin_tone, looks.skin_age) == (0.0, 1.0)


def test_eyelid_closure_meets_eye_centre(defs):
    state = rig.rest_state(defs)
    closed = rig.apply_bone_offsets(state, list(defs.eyelid_closure_offsets()))
    for side in ("L", "R"):
        eye_y = state.bones[defs.bone_index(f"{side}Eye")][1]
        for lid in (f"{side}UpperEyelid", f"{side}LowerEyelid"):
            assert closed.bones[defs.bone_index(lid)][1] == pytest.approx(eye_y)


@given(st.floats(-1e6, 1e6))
def test_wrap_angle_in_range(x):
    w = rig.wrap_angle(x)
    assert -math.pi <= w < math.pi
    assert math.isclose(math.sin(w), math.sin(x), abs_tol=1e-6)
