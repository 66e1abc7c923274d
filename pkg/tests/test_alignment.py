import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gesturesync.alignment import (
    allocate_keyframe_times,
    bezier_controls,
    cubic_bezier,
    default_weights,
    evaluate_track,
    plan_alignment,
    retime_segment,
    sample_schedule,
    schedule_back_to_back,
    scale_duration,
    synthesize_trajectory,
    track_primitives,
)
from gesturesync.emotion_input import EmotionSegment
from gesturesync.joint_model import JointTrack, MotionSegment
from oracles import quantize, start_times, weights

# frozen oracle outputs
TWO_SEGMENT_ALPHA = (0.41483516483516486, 0.5851648351648352)
HEADPITCH_RETIMED_END = 1.6568


def es(duration, arousal=0):
    return EmotionSegment("p", "p", 0, arousal, duration)


def ramp(t0, t1, a0, a1, joint="HeadYaw"):
    return MotionSegment((JointTrack(joint, (t0, t1), (a0, a1)),))


def test_frozen_values_match_oracles():
    assert [float(x) for x in weights(["1.51", "2.13"])] == list(TWO_SEGMENT_ALPHA)
    assert float(quantize(1.5062 * 1.1)) == HEADPITCH_RETIMED_END


@pytest.mark.parametrize("beta, t_hat, expected", [(1.0, 2.13, 2.13), (1.1, 1.51, 1.661)])
def test_scale_duration(beta, t_hat, expected):
    assert scale_duration(beta, t_hat) == pytest.approx(expected, abs=1e-9)


def test_scale_duration_rejects_beta_out_of_range():
    with pytest.raises(ValueError):
        scale_duration(0.8, 1.0)


@pytest.mark.parametrize(
    "alphas, total, expected",
    [((0.5, 0.5), 4.0, (0.0, 2.0)), ((0.2, 0.3, 0.5), 10.0, (0.0, 2.0, 5.0))],
)
def test_allocate_keyframe_times(alphas, total, expected):
    assert allocate_keyframe_times(alphas, total) == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("alphas", [(0.6, 0.6), (1.2, -0.2), ()])
def test_allocate_rejects_bad_weights(alphas):
    with pytest.raises(ValueError):
        allocate_keyframe_times(alphas, 1.0)


def test_default_weights():
    assert default_weights([es(1.51), es(2.13)]) == pytest.approx(TWO_SEGMENT_ALPHA, abs=1e-12)
    assert default_weights([es(2.0)]) == [1.0]
    assert default_weights([es(1.0)] * 4) == pytest.approx([0.25] * 4)


def test_plan_alignment_two_segment(two_segment):
    plan = plan_alignment(two_segment.segments)
    assert plan.betas == pytest.approx((1.05, 1.04))
    assert plan.interval_durations == pytest.approx((1.51 * 1.05, 2.13 * 1.04), abs=1e-9)
    assert plan.total_duration == pytest.approx(plan.beta * plan.predicted_duration, abs=1e-12)
    assert plan.start_times[0] == 0.0


def test_plan_alignment_uniform_beta_matches_equation_one():
    plan = plan_alignment([es(1.51), es(2.13)], betas=[1.1, 1.1])
    assert plan.total_duration == pytest.approx(1.1 * 3.64, abs=1e-9)
    assert plan.weights == pytest.approx(TWO_SEGMENT_ALPHA, abs=1e-12)


def test_retime_examples(headpitch):
    seg = MotionSegment((JointTrack("HeadYaw", (0.5, 1.5, 2.0), (0.0, 0.2, 0.0)),))
    half = retime_segment(seg, 1.0)
    assert half.track("HeadYaw").times == (0.25, 0.75, 1.0)
    assert retime_segment(seg, 2.0) == seg
    assert retime_segment(headpitch, 1.5062 * 1.1).track("HeadPitch").times[-1] == HEADPITCH_RETIMED_END


def test_linear_primitive_midpoint():
    plan = plan_alignment([es(2.0)], betas=[1.0])
    traj = synthesize_trajectory([ramp(0.0, 2.0, 0.0, 1.0)], plan, sample_rate=50)
    assert traj.at(1.0)["HeadYaw"] == pytest.approx(0.5)


def test_boundary_sample_belongs_to_next_segment():
    plan = plan_alignment([es(1.0), es(1.0)], betas=[1.0, 1.0])
    segs = [ramp(0.0, 1.0, 0.0, 0.5), ramp(0.0, 1.0, 1.0, 1.0)]
    traj = synthesize_trajectory(segs, plan, sample_rate=10)
    assert traj.at(1.0)["HeadYaw"] == pytest.approx(1.0)
    assert traj.at(0.9)["HeadYaw"] == pytest.approx(0.45)


def test_degenerate_bezier_is_constant():
    u = np.linspace(0, 1, 11)
    assert np.allclose(cubic_bezier([0.3] * 4, u), 0.3)


def test_bezier_passes_through_keyframes_without_overshoot():
    times, keys = [0.0, 0.5, 1.0, 1.6], [0.0, 1.0, 0.2, 0.2]
    t = np.linspace(0.0, 1.6, 161)
    y = evaluate_track(times, keys, t, "bezier")
    assert np.allclose(evaluate_track(times, keys, np.array(times), "bezier"), keys)
    assert y.min() >= -1e-12 and y.max() <= 1.0 + 1e-12
    prims = track_primitives(times, keys, "bezier")
    for a, b in zip(prims, prims[1:]):
        assert float(a(a.end)) == pytest.approx(float(b(b.start)))
    assert bezier_controls(times, keys).shape == (3, 4)


def test_inactive_joints_hold_last_value():
    segs = [ramp(0.0, 1.0, 0.0, 0.4, "HeadYaw"), ramp(0.0, 1.0, 0.0, 0.3, "HeadPitch")]
    traj = sample_schedule(schedule_back_to_back(segs), 10, initial_pose={"HeadYaw": 0.0, "HeadPitch": 0.0})
    assert traj.at(1.5)["HeadYaw"] == pytest.approx(0.4)
    assert traj.at(0.5)["HeadPitch"] == pytest.approx(0.0)


def test_segment_plan_mismatch():
    plan = plan_alignment([es(1.0), es(1.0)], betas=[1.0, 1.0])
    with pytest.raises(ValueError):
        synthesize_trajectory([ramp(0.0, 1.0, 0.0, 0.5)], plan)


def test_literal_weighting_scales_angles():
    plan = plan_alignment([es(1.0), es(3.0)], betas=[1.0, 1.0])
    segs = [ramp(0.0, 1.0, 1.0, 1.0), ramp(0.0, 1.0, 1.0, 1.0)]
    traj = synthesize_trajectory(segs, plan, sample_rate=10, literal_weighting=True)
    assert traj.at(0.5)["HeadYaw"] == pytest.approx(0.25)
    assert traj.at(2.0)["HeadYaw"] == pytest.approx(0.75)


def test_csv_export(tmp_path):
    plan = plan_alignment([es(1.0)], betas=[1.0])
    traj = synthesize_trajectory([ramp(0.0, 1.0, 0.0, 0.5)], plan, sample_rate=10)
    p = tmp_path / "t.csv"
    traj.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "time_s,joint,angle_rad,velocity_rad_s,acceleration_rad_s2,jerk_rad_s3"
    assert len(lines) == 1 + 11


positive = st.floats(0.01, 10.0, allow_nan=False)


@given(st.lists(positive, min_size=1, max_size=8), st.floats(0.1, 100.0))
def test_allocation_properties(raw, total):
    w = [x / sum(raw) for x in raw]
    w[-1] = 1.0 - sum(w[:-1])
    if w[-1] <= 0:
        return
    starts = allocate_keyframe_times(w, total)
    assert starts[0] == 0.0
    assert all(b >= a for a, b in zip(starts, starts[1:]))
    assert allocate_keyframe_times(w, 2 * total) == pytest.approx([2 * s for s in starts], abs=1e-9)
    # exact-rational oracle
    from fractions import Fraction

    exact = start_times([Fraction(x) for x in w], Fraction(total))
    assert starts == pytest.approx([float(x) for x in exact], abs=1e-9)


@given(
    st.lists(st.integers(1, 3000), min_size=2, max_size=6, unique=True).map(sorted),
    st.floats(0.3, 3.0),
)
def test_retime_preserves_angles_and_count(ticks, factor):
    seg = MotionSegment((JointTrack("HeadYaw", tuple(t / 1000 for t in ticks), tuple(range(len(ticks)))),))
    try:
        out = retime_segment(seg, seg.duration * factor)
    except ValueError:
        return  # keyframes merged on the 0.1 ms grid
    assert out.track("HeadYaw").keys == seg.track("HeadYaw").keys
    assert len(out.track("HeadYaw")) == len(ticks)
