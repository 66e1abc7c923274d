from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gesturesync.alignment import plan_alignment
from gesturesync.constraints import verify
from gesturesync.emotion_input import EmotionSegment, Scenario
from gesturesync.execution_sim import (
    MODES,
    DeviationModel,
    checkpoint_times,
    interpolate,
    load_fixture_scenario,
    make_eval_scenarios,
    plan_mode,
    predefined_label,
    run_ablation,
    run_closed_loop,
    speech_truth,
)
from gesturesync.joint_model import JointTrack, MotionSegment, serialize_keyframe_script
from gesturesync.sync_monitor import SyncClass

DRIFT_E_SYNC = [0.0, 0.05, 0.1, 0.2, 1 / 6, 0.1, 0.0, 0.0, 0.0]


def toy(n=4):
    segs = [EmotionSegment("p", "t", 0, 0, 1.0) for _ in range(n)]
    motions = [MotionSegment((JointTrack("HeadYaw", (0.5, 1.0), (0.2, 0.0)),)) for _ in range(n)]
    return motions, plan_alignment(segs, [1.0] * n)


def test_interpolate_examples():
    tr = JointTrack("HeadYaw", (1.0, 2.0), (0.0, 1.0))
    assert interpolate(tr, 1.5) == 0.5
    assert interpolate(tr, 0.0) == 0.0
    assert interpolate(tr, 9.0) == 1.0


def test_checkpoint_times():
    assert checkpoint_times([1.0, 2.0]) == [0.0, 0.5, 1.0, 2.0, 3.0]


def test_deviation_models():
    d = [1.0, 2.0]
    assert list(DeviationModel.none().apply(d)) == d
    assert list(DeviationModel.drift(1.2).apply(d)) == pytest.approx([1.2, 2.4])
    j = DeviationModel.jitter(0.01, seed=3)
    assert list(j.apply(d)) == list(j.apply(d))
    with pytest.raises(ValueError):
        DeviationModel.drift(2.5)
    with pytest.raises(ValueError):
        DeviationModel("wobble")


def test_no_deviation_means_no_events():
    motions, plan = toy()
    tr = run_closed_loop(motions, plan)
    assert tr.events == []
    assert max(tr.e_sync) == 0.0
    assert tr.tsa_ms() == 0.0


def test_constant_drift_is_recovered():
    motions, plan = toy()
    tr = run_closed_loop(motions, plan, DeviationModel.drift(1.2))
    assert tr.e_sync == pytest.approx(DRIFT_E_SYNC, abs=1e-9)
    assert tr.events[0].sync_class is SyncClass.DegradedMild
    assert tr.events[0].e_sync_after < tr.events[0].e_sync_before
    open_loop = run_closed_loop(motions, plan, DeviationModel.drift(1.2), recover=False)
    assert open_loop.events == []
    assert tr.tsa_ms() < open_loop.tsa_ms()
    assert tr.events_jsonl().count("\n") == len(tr.events)


@settings(max_examples=20, deadline=None)
@given(st.floats(1.1, 1.5))
def test_recovery_beats_open_loop_under_drift(rate):
    motions, plan = toy()
    dev = DeviationModel.drift(rate)
    with_rec = run_closed_loop(motions, plan, dev)
    without = run_closed_loop(motions, plan, dev, recover=False)
    assert with_rec.tsa_ms() < without.tsa_ms()


def test_small_jitter_stays_normal(two_segment):
    res = run_ablation(two_segment, "Full", deviation=DeviationModel.jitter(0.01, seed=0))
    assert set(res.trace.classes) == {SyncClass.Normal}
    assert res.trace.events == []


def test_full_without_deviation_is_synchronous(two_segment):
    assert run_ablation(two_segment, "Full").tsa_ms == pytest.approx(0.0, abs=1e-6)


def test_full_beats_nosync_under_drift(two_segment):
    dev = DeviationModel.drift(1.2)
    full = run_ablation(two_segment, "Full", deviation=dev)
    nosync = run_ablation(two_segment, "NoSync", deviation=dev)
    assert full.tsa_ms < nosync.tsa_ms


def test_predefined_ignores_text(two_segment):
    other = Scenario(
        tuple(replace(s, phrase="completely different words", response_text="Other text.") for s in two_segment.segments)
    )
    a = plan_mode(two_segment, "PreDefined").motions
    b = plan_mode(other, "PreDefined").motions
    assert [serialize_keyframe_script(m) for m in a] == [serialize_keyframe_script(m) for m in b]


def test_predefined_label_fallback():
    assert predefined_label(EmotionSegment("x", "y", 6, 5, 1.0, ("joyful",))) == "happy"
    assert predefined_label(EmotionSegment("x", "y", -6, -5, 1.0)) == "sad"


def test_noemotion_keeps_predicted_durations(two_segment):
    mp = plan_mode(two_segment, "NoEmotion")
    assert mp.plan.betas == (1.0, 1.0)
    assert mp.plan.total_duration == pytest.approx(sum(s.predicted_duration for s in two_segment.segments))
    assert plan_mode(two_segment, "Full").plan.total_duration > mp.plan.total_duration


def test_mode_gating(two_segment):
    assert plan_mode(two_segment, "TextOnly").recover is False
    assert plan_mode(two_segment, "NoSync").recover is False
    assert plan_mode(two_segment, "Full").primitive == "bezier"
    assert plan_mode(two_segment, "SpeechOnly").primitive == "linear"
    with pytest.raises(ValueError):
        plan_mode(two_segment, "Bogus")


@pytest.mark.parametrize("mode", MODES)
def test_runs_are_deterministic_and_safe(two_segment, constraints, mode):
    dev = DeviationModel.drift(1.15)
    a = run_ablation(two_segment, mode, seed=4, deviation=dev, speech_noise=0.04)
    b = run_ablation(two_segment, mode, seed=4, deviation=dev, speech_noise=0.04)
    assert np.array_equal(a.trace.trajectory.angles, b.trace.trajectory.angles)
    assert a.tsa_ms == b.tsa_ms
    for m in a.motions:
        assert verify(m, constraints).ok
    traj = a.trace.trajectory
    for j, name in enumerate(traj.joints):
        lim = constraints.limits[name]
        assert traj.angles[:, j].min() >= lim.min_angle - 1e-9
        assert traj.angles[:, j].max() <= lim.max_angle + 1e-9


def test_speech_truth_is_shared_across_modes(two_segment):
    a = speech_truth(two_segment.segments, 2, DeviationModel.drift(1.1), 0.04)
    b = speech_truth(two_segment.segments, 2, DeviationModel.drift(1.1), 0.04)
    assert np.array_equal(a, b)
    plain = speech_truth(two_segment.segments, 2, DeviationModel.none(), 0.0)
    assert plain[0] == pytest.approx(1.51 * 1.05)


def test_eval_scenarios_and_fixtures():
    sets = make_eval_scenarios(4, 0)
    assert len(sets) == 4
    assert all(2 <= len(sc.segments) <= 4 for sc, _ in sets)
    assert all(0.85 <= dev.rate <= 1.25 for _, dev in sets)
    assert [s.name for s, _ in sets] == [s.name for s, _ in make_eval_scenarios(4, 0)]
    assert len(load_fixture_scenario("sad").segments) == 2
