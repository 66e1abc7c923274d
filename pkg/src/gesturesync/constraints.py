"""Biomechanical feasibility checks for generated motion segments."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping

from .joint_model import (
    JOINT_NAMES,
    JointLimits,
    MotionSegment,
    Pose,
    load_joint_table,
)


class ViolationKind(str, Enum):
    ForbiddenJoint = "ForbiddenJoint"
    AngleLimit = "AngleLimit"
    Velocity = "Velocity"
    Continuity = "Continuity"
    DurationBudget = "DurationBudget"
    # provider output that could not be parsed at all
    Malformed = "Malformed"


_KIND_ORDER = {k: i for i, k in enumerate(ViolationKind)}


@dataclass(frozen=True)
class Violation:
    joint: str
    kind: ViolationKind
    observed: float
    bound: float
    time: float
    detail: str = ""

    def describe(self) -> str:
        j = self.joint
        if self.kind is ViolationKind.ForbiddenJoint:
            return f"{j} is a forbidden joint and must not be commanded"
        if self.kind is ViolationKind.AngleLimit:
            side = "max" if self.observed > self.bound else "min"
            verb = "exceeds" if side == "max" else "is below"
            return (
                f"{j} {verb} {side} {self.bound:g} rad "
                f"(observed {self.observed:g} rad at t={self.time:g} s)"
            )
        if self.kind is ViolationKind.Velocity:
            return (
                f"{j} velocity {self.observed:.4g} rad/s exceeds cap {self.bound:g} rad/s "
                f"(interval ending t={self.time:g} s)"
            )
        if self.kind is ViolationKind.Continuity:
            return (
                f"{j} starts at {self.observed:g} rad but the previous pose is "
                f"{self.bound:g} rad"
            )
        if self.kind is ViolationKind.DurationBudget:
            return f"segment lasts {self.observed:g} s, budget is {self.bound:g} s"
        return f"malformed output: {self.detail}"

    def to_dict(self) -> dict:
        return {
            "joint": self.joint,
            "kind": self.kind.value,
            "observed": self.observed,
            "bound": self.bound,
            "time": self.time,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class ViolationReport:
    entries: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.entries

    def __bool__(self) -> bool:
        # truthy when there is something to report
        return bool(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def lines(self) -> list[str]:
        return [v.describe() for v in self.entries]

    def to_dict(self) -> dict:
        return {"entries": [v.to_dict() for v in self.entries]}


@dataclass(frozen=True)
class ConstraintSet:
    limits: Mapping[str, JointLimits]
    forbidden_joints: frozenset[str] = frozenset()
    max_velocity_default: float = 6.0
    style_guidelines: tuple[str, ...] = ()
    continuity_tolerance: float = 0.05
    # (joint, kind, bound) triples a from-scratch prompt asks the generator to avoid
    exclusions: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.max_velocity_default <= 0 or self.continuity_tolerance <= 0:
            raise ValueError("tolerances must be > 0")
        unknown = set(self.forbidden_joints) - set(JOINT_NAMES)
        if unknown:
            raise ValueError(f"unknown forbidden joints: {sorted(unknown)}")
        object.__setattr__(self, "forbidden_joints", frozenset(self.forbidden_joints))
        object.__setattr__(self, "style_guidelines", tuple(self.style_guidelines))

    def velocity_cap(self, joint: str) -> float:
        lim = self.limits.get(joint)
        if lim is not None and lim.max_velocity is not None:
            return lim.max_velocity
        return self.max_velocity_default

    def with_overrides(self, **changes) -> "ConstraintSet":
        return replace(self, **changes)

    @classmethod
    def from_dict(cls, data: Mapping, base: "ConstraintSet | None" = None) -> "ConstraintSet":
        """Build from the joint-table JSON layout; keys missing from ``data`` come from ``base``."""
        base = base or default_constraints()
        limits = dict(base.limits)
        for row in data.get("joints", ()):
            old = limits.get(row["name"])
            limits[row["name"]] = JointLimits(
                row["name"],
                row.get("min_angle", old.min_angle if old else None),
                row.get("max_angle", old.max_angle if old else None),
                row.get("max_velocity", old.max_velocity if old else None),
            )
        return cls(
            limits=limits,
            forbidden_joints=frozenset(data.get("forbidden_joints", base.forbidden_joints)),
            max_velocity_default=float(data.get("max_velocity_default", base.max_velocity_default)),
            style_guidelines=tuple(data.get("style_guidelines", base.style_guidelines)),
            continuity_tolerance=float(data.get("continuity_tolerance", base.continuity_tolerance)),
        )


def default_constraints() -> ConstraintSet:
    table = load_joint_table()
    return ConstraintSet(
        limits=dict(table.limits),
        forbidden_joints=table.forbidden_joints,
        max_velocity_default=table.max_velocity_default,
        style_guidelines=table.style_guidelines,
        continuity_tolerance=table.continuity_tolerance,
    )


def load_constraints(path: str | None) -> ConstraintSet:
    if path is None:
        return default_constraints()
    with open(path, encoding="utf-8") as fh:
        return ConstraintSet.from_dict(json.load(fh))


def verify(
    segment: MotionSegment,
    constraints: ConstraintSet,
    prev_pose: Pose | None = None,
    duration_budget: float | None = None,
) -> ViolationReport:
    """Check a segment against ``constraints`` and report every violation.

    Velocity is checked on keyframe-to-keyframe slopes; with linear
    interpolation on the robot these bound the executed joint speed.
    """
    found: list[Violation] = []
    for tr in segment.tracks:
        if tr.joint in constraints.forbidden_joints:
            found.append(Violation(tr.joint, ViolationKind.ForbiddenJoint, 1.0, 0.0, tr.times[0]))
            continue
        lim = constraints.limits.get(tr.joint)
        if lim is not None:
            for t, a in zip(tr.times, tr.keys):
                if a > lim.max_angle:
                    found.append(Violation(tr.joint, ViolationKind.AngleLimit, a, lim.max_angle, t))
                elif a < lim.min_angle:
                    found.append(Violation(tr.joint, ViolationKind.AngleLimit, a, lim.min_angle, t))
        cap = constraints.velocity_cap(tr.joint)
        for (t0, a0), (t1, a1) in zip(tr.keyframes, tr.keyframes[1:]):
            speed = abs(a1 - a0) / (t1 - t0)
            if speed > cap:
                found.append(Violation(tr.joint, ViolationKind.Velocity, speed, cap, t1))
        if prev_pose and tr.joint in prev_pose:
            ref = prev_pose[tr.joint]
            if abs(tr.keys[0] - ref) > constraints.continuity_tolerance + 1e-12:
                found.append(
                    Violation(tr.joint, ViolationKind.Continuity, tr.keys[0], ref, tr.times[0])
                )
    if duration_budget is not None and segment.duration > duration_budget + 1e-9:
        found.append(
            Violation("", ViolationKind.DurationBudget, segment.duration, duration_budget, segment.duration)
        )
    found.sort(key=lambda v: (v.time, v.joint, _KIND_ORDER[v.kind]))
    return ViolationReport(tuple(found))


def render_constraints_digest(constraints: ConstraintSet) -> str:
    """Deterministic plain-text summary of a constraint set, for prompts."""
    lines = ["Joint limits (rad, rad/s):"]
    for name in JOINT_NAMES:
        if name in constraints.forbidden_joints:
            continue
        lim = constraints.limits.get(name)
        if lim is None:
            continue
        lines.append(
            f"  {name}: [{lim.min_angle:.4f}, {lim.max_angle:.4f}], "
            f"max velocity {constraints.velocity_cap(name):.4f}"
        )
    for name in sorted(constraints.forbidden_joints, key=JOINT_NAMES.index):
        lines.append(f"forbidden: {name}")
    lines.append(f"Default velocity cap: {constraints.max_velocity_default:.4f} rad/s")
    lines.append(
        f"Start each joint within {constraints.continuity_tolerance:.4f} rad of its previous angle"
    )
    if constraints.style_guidelines:
        lines.append("Style: " + ", ".join(constraints.style_guidelines))
    if constraints.exclusions:
        lines.append("Previously violated, avoid:")
        lines.extend(f"  - {e}" for e in constraints.exclusions)
    return "\n".join(lines) + "\n"
