"""Speech-duration-aware timing of gesture segments and trajectory synthesis.

The gesture for an utterance lasts ``T = beta * T_hat`` (predicted speech
duration scaled by the emotional-rhythm factor). Segment ``i`` starts at
``t_i = T * sum(alpha[:i])`` and within ``[t_i, t_{i+1})`` the joint angles
come from that segment's motion primitive, evaluated on segment-local time.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Literal, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from .emotion_input import BETA_RANGE, EmotionSegment, estimate_beta
from .joint_model import (
    JOINT_NAMES,
    JointTrack,
    MotionSegment,
    Pose,
    quantize_times,
)

Primitive = Literal["linear", "bezier"]
WEIGHT_TOL = 1e-9


# --------------------------------------------------------------------------
# duration scaling and time allocation


def scale_duration(beta: float, predicted: float) -> float:
    lo, hi = BETA_RANGE
    if not lo - 1e-12 <= beta <= hi + 1e-12:
        raise ValueError(f"beta {beta} outside [{lo}, {hi}]")
    if not predicted > 0:
        raise ValueError("predicted duration must be > 0")
    return beta * predicted


def _check_weights(weights: Sequence[float]) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a non-empty 1-d sequence")
    if np.any(w <= 0):
        raise ValueError("every weight must be > 0")
    if abs(w.sum() - 1.0) > WEIGHT_TOL:
        raise ValueError(f"weights sum to {w.sum()!r}, not 1")
    return w


def allocate_keyframe_times(weights: Sequence[float], total: float) -> list[float]:
    """Start time of each segment: ``total`` times the prefix sum of earlier weights."""
    w = _check_weights(weights)
    if not total > 0:
        raise ValueError("total duration must be > 0")
    starts = np.concatenate(([0.0], np.cumsum(w[:-1]))) * total
    return [float(s) for s in starts]


def normalize(values: Sequence[float]) -> list[float]:
    """Scale positive values to sum to one; the last entry absorbs rounding."""
    v = np.asarray(values, dtype=float)
    if v.size == 0 or np.any(v <= 0):
        raise ValueError("values must be non-empty and positive")
    w = v / v.sum()
    out = [float(x) for x in w[:-1]]
    out.append(1.0 - math.fsum(out))
    return out


def default_weights(segments: Sequence[EmotionSegment]) -> list[float]:
    """Duration-proportional stand-in for learned segment weights."""
    if not segments:
        raise ValueError("no segments")
    return normalize([s.predicted_duration for s in segments])


@dataclass(frozen=True)
class AlignmentPlan:
    """Timing contract between speech and motion for one utterance.

    ``betas`` holds the per-segment duration scale; ``beta`` is the effective
    utterance-level factor ``total_duration / predicted_duration``.
    """

    total_duration: float
    weights: tuple[float, ...]
    start_times: tuple[float, ...]
    betas: tuple[float, ...]
    predicted_durations: tuple[float, ...]

    @property
    def predicted_duration(self) -> float:
        return math.fsum(self.predicted_durations)

    @property
    def beta(self) -> float:
        return self.total_duration / self.predicted_duration

    @property
    def end_times(self) -> tuple[float, ...]:
        return self.start_times[1:] + (self.total_duration,)

    @property
    def interval_durations(self) -> tuple[float, ...]:
        return tuple(w * self.total_duration for w in self.weights)

    def __len__(self) -> int:
        return len(self.weights)

    def to_dict(self) -> dict:
        return {
            "total_duration": self.total_duration,
            "weights": list(self.weights),
            "start_times": list(self.start_times),
            "segment_durations": list(self.interval_durations),
            "betas": list(self.betas),
            "beta": self.beta,
            "predicted_durations": list(self.predicted_durations),
        }


def plan_alignment(
    segments: Sequence[EmotionSegment],
    betas: Sequence[float] | None = None,
    weights: Sequence[float] | None = None,
) -> AlignmentPlan:
    """Build the utterance timing plan.

    Each segment's target length is ``beta_i * T_hat_i``; the total is their
    sum and, unless ``weights`` are given, each weight is the segment's share
    of that total.
    """
    if not segments:
        raise ValueError("no segments")
    if betas is None:
        betas = [estimate_beta(s.arousal) for s in segments]
    if len(betas) != len(segments):
        raise ValueError("one beta per segment required")
    scaled = [scale_duration(b, s.predicted_duration) for b, s in zip(betas, segments)]
    total = math.fsum(scaled)
    if weights is None:
        weights = normalize(scaled)
    elif len(weights) != len(segments):
        raise ValueError("one weight per segment required")
    w = tuple(float(x) for x in _check_weights(weights))
    return AlignmentPlan(
        total_duration=total,
        weights=w,
        start_times=tuple(allocate_keyframe_times(w, total)),
        betas=tuple(float(b) for b in betas),
        predicted_durations=tuple(s.predicted_duration for s in segments),
    )


def retime_segment(segment: MotionSegment, new_duration: float) -> MotionSegment:
    """Scale every keyframe time by ``new_duration / duration`` and re-quantize."""
    if not new_duration > 0:
        raise ValueError("new_duration must be > 0")
    if segment.duration == 0:
        raise ValueError("cannot retime a zero-length segment")
    factor = new_duration / segment.duration
    tracks = tuple(
        JointTrack(tr.joint, tuple(t * factor for t in tr.times), tr.keys) for tr in segment.tracks
    )
    return quantize_times(replace(segment, tracks=tracks, duration=new_duration))


# --------------------------------------------------------------------------
# motion primitives


def cubic_bezier(controls: Sequence[float], u: np.ndarray | float) -> np.ndarray:
    """Evaluate a 1-d cubic Bezier with four control angles at ``u`` in [0, 1]."""
    p0, p1, p2, p3 = controls
    u = np.asarray(u, dtype=float)
    v = 1.0 - u
    return v**3 * p0 + 3 * v**2 * u * p1 + 3 * v * u**2 * p2 + u**3 * p3


def bezier_controls(times: Sequence[float], keys: Sequence[float]) -> np.ndarray:
    """Control angles (n-1, 4) of a C1 piecewise-cubic Bezier through the keyframes.

    Tangents are the monotone (Fritsch-Carlson) ones, so every piece stays
    between its two keyframe angles and never overshoots a joint limit.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(keys, dtype=float)
    if t.size < 2:
        return np.empty((0, 4))
    if t.size == 2:
        m = np.full(2, (y[1] - y[0]) / (t[1] - t[0]))
    else:
        m = PchipInterpolator(t, y).derivative()(t)
    h = np.diff(t)
    return np.column_stack([y[:-1], y[:-1] + m[:-1] * h / 3, y[1:] - m[1:] * h / 3, y[1:]])


@dataclass(frozen=True)
class MotionPrimitive:
    """One active piece of a joint trajectory over ``[start, end)``."""

    kind: Primitive
    controls: tuple[float, ...]
    start: float
    end: float

    def __call__(self, t: np.ndarray | float) -> np.ndarray:
        u = np.clip((np.asarray(t, dtype=float) - self.start) / (self.end - self.start), 0.0, 1.0)
        if self.kind == "linear":
            a, b = self.controls
            return a + (b - a) * u
        return cubic_bezier(self.controls, u)


def track_primitives(times: Sequence[float], keys: Sequence[float], kind: Primitive = "linear") -> list[MotionPrimitive]:
    if kind == "linear":
        return [
            MotionPrimitive("linear", (keys[i], keys[i + 1]), times[i], times[i + 1])
            for i in range(len(times) - 1)
        ]
    ctrl = bezier_controls(times, keys)
    return [
        MotionPrimitive("bezier", tuple(ctrl[i]), times[i], times[i + 1]) for i in range(len(times) - 1)
    ]


def evaluate_track(times: Sequence[float], keys: Sequence[float], t: np.ndarray, kind: Primitive = "linear") -> np.ndarray:
    """Evaluate a keyframe track at local times ``t``; values are held outside the keyframe span."""
    t = np.asarray(t, dtype=float)
    times = np.asarray(times, dtype=float)
    keys = np.asarray(keys, dtype=float)
    if kind == "linear" or times.size < 2:
        return np.interp(t, times, keys)
    ctrl = bezier_controls(times, keys)
    tc = np.clip(t, times[0], times[-1])
    idx = np.clip(np.searchsorted(times, tc, side="right") - 1, 0, times.size - 2)
    u = (tc - times[idx]) / (times[idx + 1] - times[idx])
    v = 1.0 - u
    c = ctrl[idx]
    return v**3 * c[:, 0] + 3 * v**2 * u * c[:, 1] + 3 * v * u**2 * c[:, 2] + u**3 * c[:, 3]


# --------------------------------------------------------------------------
# schedules: where each segment sits on the wall clock


@dataclass(frozen=True)
class Placement:
    """A segment placed on the timeline.

    ``source`` is the segment as planned for its interval; ``segment`` is what
    will actually play after any in-flight retiming. ``src_knots``/``cur_knots``
    map source-local time to current-local time (piecewise linear).
    """

    index: int
    start: float
    source: MotionSegment
    segment: MotionSegment
    src_knots: tuple[float, ...]
    cur_knots: tuple[float, ...]
    planned_start: float = 0.0

    @property
    def planned_end(self) -> float:
        return self.planned_start + self.source.duration

    @property
    def end(self) -> float:
        return self.start + self.segment.duration

    def local_time(self, source_time: float) -> float:
        return float(np.interp(source_time, self.src_knots, self.cur_knots))

    def source_time(self, local: float) -> float:
        return float(np.interp(local, self.cur_knots, self.src_knots))


def _mapped_segment(source: MotionSegment, src_knots, cur_knots) -> MotionSegment:
    tracks = tuple(
        JointTrack(tr.joint, tuple(np.interp(tr.times, src_knots, cur_knots)), tr.keys)
        for tr in source.tracks
    )
    duration = float(np.interp(source.duration, src_knots, cur_knots))
    return quantize_times(replace(source, tracks=tracks, duration=duration))


def place(index: int, start: float, source: MotionSegment) -> Placement:
    d = source.duration
    return Placement(index, start, source, source, (0.0, d), (0.0, d), start)


def warp_placement(p: Placement, src_knots: Sequence[float], cur_knots: Sequence[float], start: float | None = None) -> Placement:
    seg = _mapped_segment(p.source, src_knots, cur_knots)
    return replace(
        p,
        start=p.start if start is None else start,
        segment=seg,
        src_knots=tuple(float(x) for x in src_knots),
        cur_knots=tuple(float(x) for x in cur_knots),
    )


@dataclass(frozen=True)
class Schedule:
    placements: tuple[Placement, ...]
    checkpoint_fractions: tuple[float, ...] = (0.0, 0.5)

    def __len__(self) -> int:
        return len(self.placements)

    def __getitem__(self, i: int) -> Placement:
        return self.placements[i]

    @property
    def segments(self) -> list[MotionSegment]:
        return [p.segment for p in self.placements]

    @property
    def end_time(self) -> float:
        return max((p.end for p in self.placements), default=0.0)

    @property
    def start_times(self) -> list[float]:
        return [p.start for p in self.placements]

    @property
    def durations(self) -> list[float]:
        return [p.segment.duration for p in self.placements]

    def wall_time(self, index: int, fraction: float) -> float:
        """Wall-clock time at which segment ``index`` reaches ``fraction`` of its planned course."""
        p = self.placements[index]
        return p.start + p.local_time(fraction * p.source.duration)

    def checkpoint_times(self) -> list[float]:
        """Motion times of the sync checkpoints: each segment's start and midpoint, then the end."""
        out = [self.wall_time(i, f) for i in range(len(self)) for f in self.checkpoint_fractions]
        if self.placements:
            out.append(self.placements[-1].end)
        return out

    def replace_from(self, index: int, placements: Iterable[Placement]) -> "Schedule":
        return replace(self, placements=self.placements[:index] + tuple(placements))

    def active_index(self, t: float) -> int | None:
        """Index of the placement playing at wall time ``t`` (half-open intervals)."""
        idx = None
        for i, p in enumerate(self.placements):
            if p.start <= t:
                idx = i
        return idx


def schedule_from_plan(segments: Sequence[MotionSegment], plan: AlignmentPlan) -> Schedule:
    """Retime each segment to its allotted interval ``[t_i, t_{i+1})``."""
    if len(segments) != len(plan):
        raise ValueError(f"{len(segments)} segments but the plan has {len(plan)} intervals")
    placements = []
    for i, (seg, start, length) in enumerate(zip(segments, plan.start_times, plan.interval_durations)):
        placements.append(place(i, start, retime_segment(seg, length)))
    return Schedule(tuple(placements))


def schedule_back_to_back(segments: Sequence[MotionSegment]) -> Schedule:
    """Play segments at their own durations, one after another."""
    placements, t = [], 0.0
    for i, seg in enumerate(segments):
        placements.append(place(i, t, seg))
        t += seg.duration
    return Schedule(tuple(placements))


# --------------------------------------------------------------------------
# sampled trajectories


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled joint angles, shape ``(len(times), len(joints))``."""

    times: np.ndarray
    joints: tuple[str, ...]
    angles: np.ndarray
    sample_rate: float = 50.0
    boundaries: tuple[float, ...] = field(default=())

    def angle(self, joint: str) -> np.ndarray:
        return self.angles[:, self.joints.index(joint)]

    def at(self, t: float) -> dict[str, float]:
        i = int(np.argmin(np.abs(self.times - t)))
        return {j: float(a) for j, a in zip(self.joints, self.angles[i])}

    def derivatives(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Velocity, acceleration and jerk by repeated central differences."""
        dt = 1.0 / self.sample_rate
        if len(self.times) < 2:
            z = np.zeros_like(self.angles)
            return z, z, z
        vel = np.gradient(self.angles, dt, axis=0)
        acc = np.gradient(vel, dt, axis=0)
        jerk = np.gradient(acc, dt, axis=0)
        return vel, acc, jerk

    def to_csv(self, path) -> None:
        vel, acc, jerk = self.derivatives()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["time_s", "joint", "angle_rad", "velocity_rad_s", "acceleration_rad_s2", "jerk_rad_s3"])
            for i, t in enumerate(self.times):
                for j, name in enumerate(self.joints):
                    w.writerow(
                        [f"{t:.4f}", name, f"{self.angles[i, j]:.6f}", f"{vel[i, j]:.6f}",
                         f"{acc[i, j]:.6f}", f"{jerk[i, j]:.6f}"]
                    )


def sample_times(end: float, sample_rate: float) -> np.ndarray:
    if not sample_rate > 0:
        raise ValueError("sample_rate must be > 0")
    n = int(math.floor(end * sample_rate + 1e-9)) + 1
    return np.arange(n) / sample_rate


def sample_schedule(
    schedule: Schedule,
    sample_rate: float = 50.0,
    primitive: Primitive = "linear",
    initial_pose: Pose | None = None,
    joints: Sequence[str] | None = None,
    end: float | None = None,
    weight_scale: Sequence[float] | None = None,
) -> Trajectory:
    """Sample the commanded joint angles of a schedule.

    Within a placement each track is evaluated on local time, starting from
    the angle held when the placement began (the robot moves from its current
    angle to the first keyframe, as NAOqi does). Joints a placement does not
    move hold their last commanded angle.
    """
    initial_pose = dict(initial_pose or {})
    if joints is None:
        used = set(initial_pose)
        for p in schedule.placements:
            used.update(p.segment.joints)
        joints = [j for j in JOINT_NAMES if j in used]
    joints = tuple(joints)
    end = schedule.end_time if end is None else end
    times = sample_times(end, sample_rate)
    angles = np.full((times.size, len(joints)), np.nan)

    held = dict(initial_pose)
    col = {j: c for c, j in enumerate(joints)}
    starts = [p.start for p in schedule.placements]
    # before the first placement only held values apply
    first = starts[0] if starts else math.inf
    pre = times < first
    for j, c in col.items():
        if j in held:
            angles[pre, c] = held[j]
    for i, p in enumerate(schedule.placements):
        stop = starts[i + 1] if i + 1 < len(starts) else math.inf
        mask = (times >= p.start) & (times < stop)
        local = times[mask] - p.start
        scale = 1.0 if weight_scale is None else weight_scale[i]
        for j, c in col.items():
            tr = p.segment.track(j)
            if tr is None:
                if j in held:
                    angles[mask, c] = held[j]
                continue
            tt, kk = list(tr.times), list(tr.keys)
            if tt[0] > 0 and j in held:
                tt.insert(0, 0.0)
                kk.insert(0, held[j])
            angles[mask, c] = scale * evaluate_track(tt, kk, local, primitive)
        for tr in p.segment.tracks:
            held[tr.joint] = scale * tr.keys[-1]
    # joints never commanded before their first track: back-fill with first value
    for c in range(len(joints)):
        colv = angles[:, c]
        if np.isnan(colv).any():
            valid = np.flatnonzero(~np.isnan(colv))
            if valid.size:
                colv[: valid[0]] = colv[valid[0]]
            colv[np.isnan(colv)] = 0.0
    return Trajectory(times, joints, angles, float(sample_rate), tuple(starts))


def synthesize_trajectory(
    segments: Sequence[MotionSegment],
    plan: AlignmentPlan,
    sample_rate: float = 50.0,
    primitive: Primitive = "linear",
    initial_pose: Pose | None = None,
    literal_weighting: bool = False,
) -> Trajectory:
    """Compose the utterance trajectory from per-segment primitives.

    Each segment is retimed to its interval and evaluated there. The weights
    only set interval lengths; ``literal_weighting=True`` additionally
    multiplies the angles inside interval ``i`` by ``alpha_i``.
    """
    schedule = schedule_from_plan(segments, plan)
    scale = plan.weights if literal_weighting else None
    return sample_schedule(schedule, sample_rate, primitive, initial_pose, weight_scale=scale)

