from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import FIXTURES
from gesturesync.constraints import (
    ConstraintSet,
    ViolationKind,
    load_constraints,
    render_constraints_digest,
    verify,
)
from gesturesync.joint_model import JointLimits, JointTrack, MotionSegment


def seg(*tracks, duration=None):
    return MotionSegment(tuple(JointTrack(j, t, k) for j, t, k in tracks), duration=duration)


def test_headpitch_script_verifies_clean(headpitch, constraints):
    assert verify(headpitch, constraints).ok


def test_angle_limit_violation(constraints):
    report = verify(seg(("LShoulderPitch", (0.5, 1.0), (1.4, 3.0))), constraints)
    [v] = report.entries
    assert v.kind is ViolationKind.AngleLimit
    assert (v.observed, v.bound, v.time) == (3.0, 2.0857, 1.0)
    assert "LShoulderPitch exceeds max 2.0857 rad" in v.describe()


def test_velocity_violation_observed_speed():
    c = ConstraintSet({"HeadYaw": JointLimits("HeadYaw", -3.0, 3.0, 8.0)})
    [v] = verify(seg(("HeadYaw", (0.1, 0.2), (0.0, 2.0))), c).entries
    assert v.kind is ViolationKind.Velocity
    assert v.observed == pytest.approx(20.0)
    assert v.bound == 8.0


def test_default_velocity_cap_applies_without_table_value():
    c = ConstraintSet({"HeadYaw": JointLimits("HeadYaw", -9.0, 9.0)}, max_velocity_default=6.0)
    assert c.velocity_cap("HeadYaw") == 6.0
    assert not verify(seg(("HeadYaw", (0.0, 1.0), (0.0, 5.9))), c)
    assert verify(seg(("HeadYaw", (0.0, 1.0), (0.0, 6.1))), c)


def test_forbidden_joint_continuity_and_budget_all_reported(constraints):
    s = seg(("LKneePitch", (0.2,), (0.0,)), ("HeadYaw", (0.1, 1.0), (0.4, 0.0)))
    report = verify(s, constraints, prev_pose={"HeadYaw": 0.0}, duration_budget=0.5)
    kinds = [v.kind for v in report]
    assert kinds == [ViolationKind.Continuity, ViolationKind.ForbiddenJoint, ViolationKind.DurationBudget]
    assert [v.time for v in report] == sorted(v.time for v in report)


def test_continuity_within_tolerance_passes(constraints):
    s = seg(("HeadYaw", (0.1, 1.0), (0.04, 0.0)))
    assert verify(s, constraints, prev_pose={"HeadYaw": 0.0, "HeadPitch": 0.3}).ok


def test_relaxing_a_bound_removes_violations(constraints):
    s = seg(("LShoulderPitch", (0.5, 1.0), (1.4, 2.5)))
    assert len(verify(s, constraints)) == 1
    loose = dict(constraints.limits)
    loose["LShoulderPitch"] = JointLimits("LShoulderPitch", -3.0, 3.0, 7.1941)
    assert verify(s, replace(constraints, limits=loose)).ok


def test_digest_matches_golden_file(constraints):
    golden = (FIXTURES / "default_digest.txt").read_text()
    assert render_constraints_digest(constraints) == golden


def test_digest_has_one_forbidden_line_per_joint():
    c = ConstraintSet({}, forbidden_joints={"LKneePitch"}, style_guidelines=())
    text = render_constraints_digest(c)
    assert sum(line.startswith("forbidden") for line in text.splitlines()) == 1
    assert "Style" not in text


def test_digest_lists_exclusions(constraints):
    c = replace(constraints, exclusions=("LElbowRoll velocity cap 9.2276 rad/s",))
    assert "LElbowRoll velocity cap 9.2276 rad/s" in render_constraints_digest(c)


def test_load_constraints_overrides(tmp_path, constraints):
    p = tmp_path / "c.json"
    p.write_text('{"forbidden_joints": ["LHipRoll"], "joints": [{"name": "HeadYaw", "max_angle": 1.0}]}')
    c = load_constraints(str(p))
    assert c.forbidden_joints == {"LHipRoll"}
    assert c.limits["HeadYaw"].max_angle == 1.0
    assert c.limits["HeadYaw"].min_angle == constraints.limits["HeadYaw"].min_angle


def test_invalid_constraint_sets_rejected():
    with pytest.raises(ValueError):
        ConstraintSet({}, continuity_tolerance=0.0)
    with pytest.raises(ValueError):
        ConstraintSet({}, forbidden_joints={"Tail"})


@given(
    st.lists(st.floats(-2.5, 2.5, allow_nan=False), min_size=2, max_size=6),
    st.floats(0.0, 1.0),
)
def test_verify_is_deterministic_and_monotone(keys, slack):
    from gesturesync.constraints import default_constraints

    c = default_constraints()
    times = tuple(round(0.2 * (i + 1), 4) for i in range(len(keys)))
    s = seg(("LShoulderPitch", times, tuple(keys)))
    first = verify(s, c)
    assert verify(s, c) == first
    lim = c.limits["LShoulderPitch"]
    wider = dict(c.limits)
    wider["LShoulderPitch"] = JointLimits(
        "LShoulderPitch", lim.min_angle - slack, lim.max_angle + slack, lim.max_velocity + slack
    )
    relaxed = verify(s, replace(c, limits=wider))
    sites = lambda r: {(v.kind, v.time) for v in r}  # noqa: E731
    assert sites(relaxed) <= sites(first)
