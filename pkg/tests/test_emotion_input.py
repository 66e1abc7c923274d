import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from gesturesync.emotion_input import (
    EmotionSegment,
    ScenarioError,
    estimate_beta,
    load_scenario,
    parse_scenario,
    speech_params,
)


def test_two_segment_scenario(two_segment):
    t1, t2 = two_segment.segments
    assert (t1.predicted_duration, t2.predicted_duration) == (1.51, 2.13)
    assert (t1.valence, t1.arousal, t2.valence, t2.arousal) == (7, 5, 6, 4)
    assert t1.emotion_labels == ("happy", "curious")


def test_load_scenario_returns_segments_in_order(tmp_path):
    p = tmp_path / "s.json"
    segs = [
        {"phrase": f"p{i}", "response_text": "", "valence": 0, "arousal": i, "predicted_duration": 1.0}
        for i in range(3)
    ]
    p.write_text(json.dumps({"segments": segs}))
    assert [s.arousal for s in load_scenario(p)] == [0, 1, 2]


def test_empty_segment_list_rejected():
    with pytest.raises(ScenarioError) as exc:
        parse_scenario({"segments": []})
    assert exc.value.field == "segments"


def test_out_of_range_valence_names_field():
    data = {"segments": [{"phrase": "x", "response_text": "x", "valence": 12, "arousal": 0, "predicted_duration": 1.0}]}
    with pytest.raises(ScenarioError) as exc:
        parse_scenario(data)
    assert exc.value.field == "segments[0].valence"


@pytest.mark.parametrize("key", ["phrase", "valence", "predicted_duration"])
def test_missing_field_named(key):
    item = {"phrase": "x", "response_text": "x", "valence": 1, "arousal": 0, "predicted_duration": 1.0}
    del item[key]
    with pytest.raises(ScenarioError, match=key):
        parse_scenario({"segments": [item]})


def test_non_positive_duration_rejected():
    with pytest.raises(ScenarioError):
        EmotionSegment("x", "x", 0, 0, 0.0)


def test_invalid_json_is_a_scenario_error(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ScenarioError):
        load_scenario(p)


@pytest.mark.parametrize("arousal, beta", [(0, 1.0), (10, 1.1), (-10, 0.9), (5, 1.05)])
def test_estimate_beta(arousal, beta):
    assert estimate_beta(arousal) == pytest.approx(beta, abs=1e-12)


def test_estimate_beta_rejects_out_of_range():
    with pytest.raises(ValueError):
        estimate_beta(11)


@pytest.mark.parametrize(
    "v, a, pitch, volume",
    [(7, 5, 1.25, 0.85), (0, 0, 1.0, 0.5), (-10, -10, 0.5, 0.05)],
)
def test_speech_params(v, a, pitch, volume):
    p = speech_params(v, a)
    assert (p.pitch_modifier, p.volume_modifier) == (pitch, volume)


def test_two_segment_pitch_datapoint_reproduced():
    # the printed pitch modifier is matched; the printed volume (0.75) is not
    assert speech_params(7, 5).pitch_modifier == 1.25


affect = st.integers(-10, 10)


@given(affect, affect)
def test_beta_monotone_and_bounded(a, b):
    lo, hi = sorted((a, b))
    assert 0.9 <= estimate_beta(lo) <= estimate_beta(hi) <= 1.1


@given(affect, affect)
def test_speech_params_bounded(v, a):
    p = speech_params(v, a)
    assert 0.5 <= p.pitch_modifier <= 2.0
    assert 0.0 < p.volume_modifier <= 1.0
