from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gesturesync.alignment import Trajectory
from gesturesync.metrics import (
    SCHEMA_VERSION,
    LatencyMeter,
    angular_jerk,
    mean_angular_jerk,
    measure_latency,
    metrics_report,
    tsa,
)
from oracles import cubic_jerk
from oracles import tsa_ms as oracle_tsa

# frozen from the oracle
MIXED_TSA_MS = 100.0


def traj(times, **cols):
    return Trajectory(np.asarray(times), tuple(cols), np.column_stack([cols[c] for c in cols]), 1 / (times[1] - times[0]))


def test_frozen_matches_oracle():
    assert oracle_tsa(["1.1", "2.1"], ["1.0", "2.0"], ["1", "1"]) == Fraction(MIXED_TSA_MS)


def test_tsa_examples():
    assert tsa([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0
    assert tsa([1.1, 2.1], [1.0, 2.0]) == pytest.approx(MIXED_TSA_MS)
    assert tsa([2.0, 4.0], [1.0, 2.0], 2.0) == 0.0
    assert tsa([2.0, 3.0], [1.0, 3.0], [2.0, 1.0]) == 0.0


@pytest.mark.parametrize(
    "g, s",
    [([1.0], [1.0, 2.0]), ([], []), ([-1.0], [1.0])],
)
def test_tsa_rejects(g, s):
    with pytest.raises(ValueError):
        tsa(g, s)


@given(
    st.lists(st.tuples(st.floats(0, 50), st.floats(0, 50)), min_size=1, max_size=12),
    st.floats(0.1, 10),
)
def test_tsa_scales_linearly(pairs, c):
    g, s = zip(*pairs)
    base = tsa(g, s)
    scaled = tsa([c * x for x in g], [c * x for x in s])
    assert scaled == pytest.approx(c * base, rel=1e-9, abs=1e-9)


def test_cubic_jerk_is_six():
    t = np.arange(0, 1.0001, 0.01)
    j = mean_angular_jerk(traj(t, HeadYaw=t**3))
    assert j == pytest.approx(cubic_jerk(), rel=0.01)


def test_jerk_of_constant_and_ramp_is_zero():
    t = np.arange(0, 1.0, 0.02)
    assert mean_angular_jerk(traj(t, HeadYaw=np.full_like(t, 0.4), HeadPitch=2 * t)) == pytest.approx(0, abs=1e-6)
    assert np.allclose(angular_jerk(np.zeros(5), 0.1), 0)


def test_jerk_needs_four_uniform_samples():
    t = np.array([0.0, 0.1, 0.2])
    with pytest.raises(ValueError):
        mean_angular_jerk(traj(t, HeadYaw=t))
    with pytest.raises(ValueError):
        angular_jerk(np.zeros(3), 0.1)
    t = np.array([0.0, 0.1, 0.25, 0.3, 0.4])
    with pytest.raises(ValueError):
        mean_angular_jerk(traj(t, HeadYaw=t))


def test_jerk_joint_subset():
    t = np.arange(0, 1.0001, 0.01)
    tr = traj(t, HeadYaw=t**3, HeadPitch=np.zeros_like(t))
    assert mean_angular_jerk(tr, ["HeadPitch"]) == pytest.approx(0, abs=1e-9)
    assert mean_angular_jerk(tr) == pytest.approx(3.0, rel=0.01)


class FakeClock:
    def __init__(self):
        self.now = 0.0

    def __call__(self):
        return self.now


def test_latency_excludes_provider_time():
    clock = FakeClock()

    def run(u, meter):
        clock.now += 0.002
        with meter.stage("provider"):
            clock.now += 1.5
        with meter.stage("align"):
            clock.now += 0.001

    rep = measure_latency(["a", "b"], run, clock)
    assert rep.per_utterance_ms == pytest.approx((3.0, 3.0))
    assert rep.provider_ms == pytest.approx((1500.0, 1500.0))
    assert rep.to_dict()["n"] == 2


def test_latency_empty_and_meter_add():
    rep = measure_latency([], lambda u, m: None)
    assert rep.mean_ms == 0.0 and rep.max_ms == 0.0
    m = LatencyMeter(FakeClock())
    m.add("provider", 0.0)
    m.add("plan", 0.25)
    assert m.total() == 0.25
    assert m.total(["provider"]) == 0.0


def test_report_has_schema_version():
    out = metrics_report(12.34, {"happy": 1.0})
    assert out["schema_version"] == SCHEMA_VERSION
    assert out["tsa_ms"] == 12.3
    assert out["latency_ms"]["n"] == 0
