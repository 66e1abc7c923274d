"""Speech/motion desynchronisation monitoring and degraded-mode recovery.

The monitor compares observed speech checkpoint times with the planned
motion checkpoint times (mean absolute offset over a sliding window). Above
``epsilon_th`` the remaining gesture is retimed to the observed speech pace;
above ``severe_ratio * epsilon_th`` it is also simplified first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np

from .alignment import Placement, Schedule, retime_segment, warp_placement
from .joint_model import JointTrack, MotionSegment


@dataclass(frozen=True)
class MonitorConfig:
    epsilon_th: float = 0.150
    severe_ratio: float = 2.0
    window: int = 3
    max_keyframes: int = 3
    # bounds on how much the in-flight remainder of a segment may be stretched
    stretch_bounds: tuple[float, float] = (0.5, 4.0)

    def __post_init__(self) -> None:
        if not self.epsilon_th > 0:
            raise ValueError("epsilon_th must be > 0")
        if not self.severe_ratio > 1:
            raise ValueError("severe_ratio must be > 1")
        if self.window < 1:
            raise ValueError("window must be >= 1")


@dataclass(frozen=True)
class SyncCheckpoint:
    index: int
    speech_time: float
    motion_time: float

    def __post_init__(self) -> None:
        if self.speech_time < 0 or self.motion_time < 0:
            raise ValueError("checkpoint times must be >= 0")

    @property
    def error(self) -> float:
        return abs(self.speech_time - self.motion_time)


class SyncClass(str, Enum):
    Normal = "Normal"
    DegradedMild = "DegradedMild"
    DegradedSevere = "DegradedSevere"


def compute_sync_error(checkpoints: Sequence[SyncCheckpoint]) -> float:
    """Mean absolute speech/motion offset in seconds."""
    if not checkpoints:
        raise ValueError("no checkpoints")
    return math.fsum(abs(c.speech_time - c.motion_time) for c in checkpoints) / len(checkpoints)


def classify(e_sync: float, config: MonitorConfig = MonitorConfig()) -> SyncClass:
    if e_sync < 0:
        raise ValueError("e_sync must be >= 0")
    if e_sync <= config.epsilon_th:
        return SyncClass.Normal
    if e_sync <= config.severe_ratio * config.epsilon_th:
        return SyncClass.DegradedMild
    return SyncClass.DegradedSevere


def simplify_track(track: JointTrack, max_keyframes: int) -> JointTrack:
    if max_keyframes < 2:
        raise ValueError("max_keyframes must be >= 2")
    n = len(track)
    if n <= 2:
        return track
    t = np.asarray(track.times)
    a = np.asarray(track.keys)
    line = a[0] + (a[-1] - a[0]) * (t - t[0]) / (t[-1] - t[0])
    dev = np.abs(a - line)[1:-1]
    # largest deviation first; equal deviations keep the earlier keyframe
    order = sorted(range(n - 2), key=lambda i: (-dev[i], i))
    keep = [i + 1 for i in order[: max_keyframes - 2] if dev[i] > 1e-12]
    idx = [0] + sorted(keep) + [n - 1]
    return JointTrack(track.joint, tuple(t[idx]), tuple(a[idx]))


def simplify_segment(segment: MotionSegment, max_keyframes: int = 3) -> MotionSegment:
    """Keep each track's endpoints plus its most salient interior keyframes."""
    if max_keyframes < 2:
        raise ValueError("max_keyframes must be >= 2")
    return replace(segment, tracks=tuple(simplify_track(tr, max_keyframes) for tr in segment.tracks))


@dataclass(frozen=True)
class DegradeEvent:
    t: float
    e_sync: float
    sync_class: SyncClass
    action: str
    segments_affected: tuple[int, ...] = ()
    pace: float = 1.0
    e_sync_before: float = 0.0
    e_sync_after: float = 0.0

    def to_dict(self) -> dict:
        return {
            "t": round(self.t, 6),
            "e_sync": round(self.e_sync, 6),
            "class": self.sync_class.value,
            "action": self.action,
            "segments_affected": list(self.segments_affected),
            "pace": round(self.pace, 6),
            "e_sync_before": round(self.e_sync_before, 6),
            "e_sync_after": round(self.e_sync_after, 6),
        }


@dataclass
class _Projection:
    now: float
    speech_progress: float
    pace: float

    def __call__(self, planned: float) -> float:
        return self.now + self.pace * (planned - self.speech_progress)


def _future_error(schedule: Schedule, proj: _Projection, fractions: Sequence[float]) -> float:
    errs = []
    for i, p in enumerate(schedule.placements):
        for f in list(fractions) + ([1.0] if i == len(schedule) - 1 else []):
            planned = p.planned_start + f * p.source.duration
            if planned <= proj.speech_progress:
                continue
            errs.append(abs(proj(planned) - schedule.wall_time(i, f)))
    return math.fsum(errs) / len(errs) if errs else 0.0


def degrade(
    schedule: Schedule,
    severity: SyncClass,
    *,
    now: float,
    speech_progress: float,
    pace: float,
    e_sync: float = 0.0,
    config: MonitorConfig = MonitorConfig(),
) -> tuple[Schedule, DegradeEvent]:
    """Adjust the not-yet-executed part of ``schedule`` to the observed speech pace.

    ``speech_progress`` is how far the speech has advanced, in planned seconds,
    at wall time ``now``; ``pace`` is observed speech seconds per planned
    second. Future segment boundaries are moved to the projected speech times
    and future segments are retimed by ``pace`` (and simplified when severe).
    The segment currently playing keeps its past and has its remainder
    stretched or compressed, within ``config.stretch_bounds``.
    """
    if severity is SyncClass.Normal:
        raise ValueError("degrade called in Normal state")
    proj = _Projection(now, speech_progress, pace)
    lo, hi = config.stretch_bounds
    fractions = schedule.checkpoint_fractions
    before = _future_error(schedule, proj, fractions)

    active = schedule.active_index(now)
    in_progress = active is not None and now < schedule[active].end
    first_future = 0 if active is None else active + 1
    if not in_progress and first_future >= len(schedule):
        ev = DegradeEvent(now, e_sync, severity, "too late to recover", (), pace, before, before)
        return schedule, ev

    placements: list[Placement] = list(schedule.placements)
    affected: list[int] = []
    cursor = now
    if in_progress:
        p = schedule[active]
        u_c = now - p.start
        remaining = p.segment.duration - u_c
        if remaining > 1e-3:
            target = proj(p.planned_end) - now
            new_remaining = min(max(target, remaining * lo), remaining * hi)
            s_c = p.source_time(u_c)
            src, cur = [], []
            for s, c in zip(p.src_knots, p.cur_knots):
                if s < s_c:
                    src.append(s)
                    cur.append(c)
            src.append(s_c)
            cur.append(u_c)
            for s, c in zip(p.src_knots, p.cur_knots):
                if s > s_c:
                    src.append(s)
                    cur.append(u_c + (c - u_c) * new_remaining / remaining)
            placements[active] = warp_placement(p, src, cur)
            affected.append(active)
        cursor = placements[active].end

    pace_c = min(max(pace, lo), hi)
    severe = severity is SyncClass.DegradedSevere
    for k in range(first_future, len(schedule)):
        p = schedule[k]
        source = simplify_segment(p.source, config.max_keyframes) if severe else p.source
        new_dur = pace_c * source.duration
        start = max(cursor, proj(p.planned_start))
        seg = retime_segment(source, new_dur)
        placements[k] = replace(
            p,
            start=start,
            source=source,
            segment=seg,
            src_knots=(0.0, source.duration),
            cur_knots=(0.0, seg.duration),
        )
        affected.append(k)
        cursor = start + seg.duration

    new_schedule = replace(schedule, placements=tuple(placements))
    after = _future_error(new_schedule, proj, fractions)
    action = "simplify+retime" if severe else "retime"
    return new_schedule, DegradeEvent(now, e_sync, severity, action, tuple(affected), pace, before, after)


@dataclass
class SyncMonitor:
    """Sliding-window monitor fed one checkpoint at a time."""

    config: MonitorConfig = field(default_factory=MonitorConfig)
    history: list[SyncCheckpoint] = field(default_factory=list)

    def observe(self, checkpoint: SyncCheckpoint) -> tuple[float, SyncClass]:
        self.history.append(checkpoint)
        e = compute_sync_error(self.history[-self.config.window:])
        return e, classify(e, self.config)

    def windowed_error(self) -> float:
        return compute_sync_error(self.history[-self.config.window:])
