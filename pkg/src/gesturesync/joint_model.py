"""NAO joint space, keyframe motion segments and the keyframe script format.

A motion segment is a set of per-joint keyframe tracks. The text form is the
NAOqi ``names``/``times``/``keys`` triple used by ``ALMotion.angleInterpolation``::

    names.append("HeadPitch")
    times.append([0.3, 0.6, 0.9, 1.2, 1.5062])
    keys.append([-0.1, -0.3, -0.1, -0.2, -0.1])

Serialized segments carry one extra comment line, ``# segment {...}``, holding
the segment metadata as JSON so that parse(serialize(s)) == s.
"""

from __future__ import annotations

import ast
import json
import re
from dataclasses import dataclass, field, replace
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from functools import lru_cache
from importlib import resources
from typing import Iterable, Iterator, Mapping, NamedTuple

TIME_RESOLUTION = 0.0001


class JointId(str, Enum):
    """The 25 controllable NAO joints (H25 body type)."""

    HeadYaw = "HeadYaw"
    HeadPitch = "HeadPitch"
    LShoulderPitch = "LShoulderPitch"
    LShoulderRoll = "LShoulderRoll"
    LElbowYaw = "LElbowYaw"
    LElbowRoll = "LElbowRoll"
    LWristYaw = "LWristYaw"
    LHand = "LHand"
    LHipYawPitch = "LHipYawPitch"
    LHipRoll = "LHipRoll"
    LHipPitch = "LHipPitch"
    LKneePitch = "LKneePitch"
    LAnklePitch = "LAnklePitch"
    LAnkleRoll = "LAnkleRoll"
    RHipRoll = "RHipRoll"
    RHipPitch = "RHipPitch"
    RKneePitch = "RKneePitch"
    RAnklePitch = "RAnklePitch"
    RAnkleRoll = "RAnkleRoll"
    RShoulderPitch = "RShoulderPitch"
    RShoulderRoll = "RShoulderRoll"
    RElbowYaw = "RElbowYaw"
    RElbowRoll = "RElbowRoll"
    RWristYaw = "RWristYaw"
    RHand = "RHand"


JOINT_NAMES: tuple[str, ...] = tuple(j.value for j in JointId)

# Partial: joints absent from a pose are unconstrained, not zero.
Pose = dict[str, float]


class KeyframeOrderError(ValueError):
    """Keyframe times are not strictly increasing (possibly after quantization)."""


class ScriptError(ValueError):
    """Malformed keyframe script.

    ``kind`` is one of ``syntax``, ``unknown_joint``, ``length_mismatch``,
    ``non_increasing``, ``negative_time``, ``duplicate_joint`` or ``incomplete``.
    """

    def __init__(self, kind: str, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.kind = kind
        self.line = line


@dataclass(frozen=True)
class JointLimits:
    joint: str
    min_angle: float
    max_angle: float
    max_velocity: float | None = None

    def __post_init__(self) -> None:
        if self.joint not in JOINT_NAMES:
            raise ValueError(f"unknown joint {self.joint!r}")
        if not self.min_angle < self.max_angle:
            raise ValueError(f"{self.joint}: min_angle must be < max_angle")
        if self.max_velocity is not None and self.max_velocity <= 0:
            raise ValueError(f"{self.joint}: max_velocity must be > 0")


class Keyframe(NamedTuple):
    time: float
    angle: float


def quantize_time(t: float, resolution: float = TIME_RESOLUTION) -> float:
    """Round ``t`` half-up to the nearest multiple of ``resolution``."""
    res = Decimal(repr(resolution))
    steps = (Decimal(repr(float(t))) / res).to_integral_value(rounding=ROUND_HALF_UP)
    return float(steps * res)


def is_quantized(t: float, resolution: float = TIME_RESOLUTION) -> bool:
    return quantize_time(t, resolution) == t


@dataclass(frozen=True)
class JointTrack:
    joint: str
    times: tuple[float, ...]
    keys: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.joint not in JOINT_NAMES:
            raise ValueError(f"unknown joint {self.joint!r}")
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        object.__setattr__(self, "keys", tuple(float(k) for k in self.keys))
        if not self.times:
            raise ValueError(f"{self.joint}: track has no keyframes")
        if len(self.times) != len(self.keys):
            raise ValueError(
                f"{self.joint}: {len(self.times)} times but {len(self.keys)} keys"
            )
        if self.times[0] < 0:
            raise ValueError(f"{self.joint}: negative keyframe time {self.times[0]}")
        for a, b in zip(self.times, self.times[1:]):
            if not b > a:
                raise KeyframeOrderError(
                    f"{self.joint}: keyframe times not strictly increasing ({a} then {b})"
                )

    @property
    def keyframes(self) -> tuple[Keyframe, ...]:
        return tuple(Keyframe(t, k) for t, k in zip(self.times, self.keys))

    @property
    def end_time(self) -> float:
        return self.times[-1]

    def __len__(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class MotionSegment:
    """Per-utterance-segment joint keyframes; the planner's output unit."""

    tracks: tuple[JointTrack, ...] = ()
    duration: float | None = None
    id: int = 0
    emotion_tag: str = ""
    valence: int = 0
    arousal: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "tracks", tuple(self.tracks))
        last = max((tr.end_time for tr in self.tracks), default=0.0)
        if self.duration is None:
            object.__setattr__(self, "duration", last)
        if self.duration < 0:
            raise ValueError("duration must be >= 0")
        if last > self.duration + 1e-12:
            raise ValueError(
                f"keyframe at {last} s lies beyond segment duration {self.duration} s"
            )
        seen = set()
        for tr in self.tracks:
            if tr.joint in seen:
                raise ValueError(f"duplicate track for joint {tr.joint}")
            seen.add(tr.joint)

    @property
    def joints(self) -> tuple[str, ...]:
        return tuple(tr.joint for tr in self.tracks)

    def track(self, joint: str) -> JointTrack | None:
        for tr in self.tracks:
            if tr.joint == joint:
                return tr
        return None

    def __iter__(self) -> Iterator[JointTrack]:
        return iter(self.tracks)

    def first_pose(self) -> Pose:
        return {tr.joint: tr.keys[0] for tr in self.tracks}

    def with_tracks(self, tracks: Iterable[JointTrack], duration: float | None = None) -> "MotionSegment":
        tracks = tuple(tracks)
        if duration is None:
            duration = max((tr.end_time for tr in tracks), default=0.0)
        return replace(self, tracks=tracks, duration=duration)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "duration": self.duration,
            "emotion_tag": self.emotion_tag,
            "valence": self.valence,
            "arousal": self.arousal,
            "tracks": [
                {"joint": tr.joint, "times": list(tr.times), "keys": list(tr.keys)}
                for tr in self.tracks
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "MotionSegment":
        tracks = tuple(
            JointTrack(t["joint"], tuple(t["times"]), tuple(t["keys"]))
            for t in data.get("tracks", ())
        )
        return cls(
            tracks=tracks,
            duration=data.get("duration"),
            id=int(data.get("id", 0)),
            emotion_tag=str(data.get("emotion_tag", "")),
            valence=int(data.get("valence", 0)),
            arousal=int(data.get("arousal", 0)),
        )


# --------------------------------------------------------------------------
# script format

_NAMES_RE = re.compile(r"""^names\.append\(\s*(["'])([^"']*)\1\s*\)\s*;?$""")
_ARRAY_RE = re.compile(r"^(times|keys)\.append\(\s*(\[.*\])\s*\)\s*;?$")
_DECL_RE = re.compile(r"^(names|times|keys)\s*=\s*(list\(\s*\)|\[\s*\])\s*;?$")
_HEADER = "# segment "


def _parse_numbers(src: str, lineno: int) -> list[float]:
    try:
        value = ast.literal_eval(src)
    except (ValueError, SyntaxError) as exc:
        raise ScriptError("syntax", lineno, f"cannot read array {src!r}") from exc
    if not isinstance(value, (list, tuple)):
        raise ScriptError("syntax", lineno, "expected a list")
    out = []
    for item in value:
        # Choregraphe exports keys as [angle, handle, handle]; keep the angle.
        if isinstance(item, (list, tuple)) and item:
            item = item[0]
        if isinstance(item, bool) or not isinstance(item, (int, float)):
            raise ScriptError("syntax", lineno, f"non-numeric entry {item!r}")
        out.append(float(item))
    return out


def parse_keyframe_script(text: str) -> MotionSegment:
    """Parse a ``names``/``times``/``keys`` script into a :class:`MotionSegment`.

    Comment lines (``#``), ``...`` continuation markers, blank lines and
    ``names = list()`` style declarations are skipped. Times are taken as
    written; call :func:`quantize_times` to snap them to the 0.1 ms grid.
    """
    meta: dict = {}
    tracks: list[JointTrack] = []
    seen: set[str] = set()
    current: str | None = None
    current_line = 0
    arrays: dict[str, tuple[list[float], int]] = {}

    def flush() -> None:
        if current is None:
            return
        missing = [k for k in ("times", "keys") if k not in arrays]
        if missing:
            raise ScriptError(
                "incomplete", current_line, f"{current}: missing {' and '.join(missing)}.append"
            )
        times, tline = arrays["times"]
        keys, kline = arrays["keys"]
        if len(times) != len(keys):
            raise ScriptError(
                "length_mismatch",
                max(tline, kline),
                f"{current}: {len(times)} times but {len(keys)} keys",
            )
        if not times:
            raise ScriptError("incomplete", tline, f"{current}: empty keyframe list")
        if times[0] < 0:
            raise ScriptError("negative_time", tline, f"{current}: negative time {times[0]}")
        for a, b in zip(times, times[1:]):
            if not b > a:
                raise ScriptError(
                    "non_increasing", tline, f"{current}: times not increasing ({a} then {b})"
                )
        tracks.append(JointTrack(current, tuple(times), tuple(keys)))

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith(_HEADER):
            try:
                meta = json.loads(line[len(_HEADER):])
            except json.JSONDecodeError as exc:
                raise ScriptError("syntax", lineno, "bad segment header") from exc
            continue
        if not line or line.startswith("#") or line == "..." or _DECL_RE.match(line):
            continue
        m = _NAMES_RE.match(line)
        if m:
            flush()
            name = m.group(2)
            if name not in JOINT_NAMES:
                raise ScriptError("unknown_joint", lineno, f"unknown joint name {name!r}")
            if name in seen:
                raise ScriptError("duplicate_joint", lineno, f"joint {name} appears twice")
            seen.add(name)
            current, current_line, arrays = name, lineno, {}
            continue
        m = _ARRAY_RE.match(line)
        if m:
            kind = m.group(1)
            if current is None:
                raise ScriptError("syntax", lineno, f"{kind}.append before any names.append")
            if kind in arrays:
                raise ScriptError("syntax", lineno, f"second {kind}.append for {current}")
            arrays[kind] = (_parse_numbers(m.group(2), lineno), lineno)
            continue
        raise ScriptError("syntax", lineno, f"unrecognised statement {line!r}")
    flush()

    return MotionSegment(
        tracks=tuple(tracks),
        duration=meta.get("duration"),
        id=int(meta.get("id", 0)),
        emotion_tag=str(meta.get("emotion_tag", "")),
        valence=int(meta.get("valence", 0)),
        arousal=int(meta.get("arousal", 0)),
    )


def _format_time(t: float) -> str:
    s = f"{t:.4f}".rstrip("0")
    return s + "0" if s.endswith(".") else s


def serialize_keyframe_script(segment: MotionSegment) -> str:
    """Render a segment as a keyframe script.

    Raises ValueError if any keyframe time (or the duration) is off the
    0.1 ms grid; quantize first.
    """
    if not segment.tracks:
        return ""
    for tr in segment.tracks:
        for t in tr.times:
            if not is_quantized(t):
                raise ValueError(f"{tr.joint}: time {t!r} is not quantized to 0.0001 s")
    if not is_quantized(segment.duration):
        raise ValueError(f"duration {segment.duration!r} is not quantized to 0.0001 s")
    header = {
        "id": segment.id,
        "duration": segment.duration,
        "emotion_tag": segment.emotion_tag,
        "valence": segment.valence,
        "arousal": segment.arousal,
    }
    # plain scripts (default metadata, duration = last keyframe) carry no header
    last = max(tr.end_time for tr in segment.tracks)
    plain = header == {"id": 0, "duration": last, "emotion_tag": "", "valence": 0, "arousal": 0}
    lines = [] if plain else [_HEADER + json.dumps(header)]
    for tr in segment.tracks:
        lines.append(f'names.append("{tr.joint}")')
        lines.append("times.append([" + ", ".join(_format_time(t) for t in tr.times) + "])")
        lines.append("keys.append([" + ", ".join(repr(k) for k in tr.keys) + "])")
    return "\n".join(lines) + "\n"


def quantize_times(segment: MotionSegment, resolution: float = TIME_RESOLUTION) -> MotionSegment:
    """Snap every keyframe time (and the duration) to the resolution grid.

    Raises KeyframeOrderError when rounding merges two keyframes of a track.
    """
    if resolution <= 0:
        raise ValueError("resolution must be > 0")
    tracks = []
    for tr in segment.tracks:
        times = tuple(quantize_time(t, resolution) for t in tr.times)
        for a, b in zip(times, times[1:]):
            if not b > a:
                raise KeyframeOrderError(
                    f"{tr.joint}: quantization collapses keyframes onto {a} s"
                )
        tracks.append(JointTrack(tr.joint, times, tr.keys))
    last = max((t.end_time for t in tracks), default=0.0)
    duration = max(quantize_time(segment.duration, resolution), last)
    return replace(segment, tracks=tuple(tracks), duration=duration)


def final_pose(segment: MotionSegment) -> Pose:
    """Angle of each track's last keyframe."""
    if not segment.tracks:
        raise ValueError("segment has no tracks")
    return {tr.joint: tr.keys[-1] for tr in segment.tracks}


# --------------------------------------------------------------------------
# default joint table


@dataclass(frozen=True)
class JointTable:
    limits: dict[str, JointLimits]
    rest_pose: Pose
    forbidden_joints: frozenset[str]
    max_velocity_default: float
    continuity_tolerance: float
    style_guidelines: tuple[str, ...] = field(default=())

    @classmethod
    def from_dict(cls, data: Mapping) -> "JointTable":
        limits = {
            row["name"]: JointLimits(
                row["name"], row["min_angle"], row["max_angle"], row.get("max_velocity")
            )
            for row in data["joints"]
        }
        return cls(
            limits=limits,
            rest_pose=dict(data.get("rest_pose", {})),
            forbidden_joints=frozenset(data.get("forbidden_joints", ())),
            max_velocity_default=float(data.get("max_velocity_default", 6.0)),
            continuity_tolerance=float(data.get("continuity_tolerance", 0.05)),
            style_guidelines=tuple(data.get("style_guidelines", ())),
        )


@lru_cache(maxsize=None)
def _default_table_text() -> str:
    return resources.files("gesturesync").joinpath("data/nao_joints.json").read_text()


def load_joint_table(path: str | None = None) -> JointTable:
    """Load the joint limits table; the packaged NAO table when ``path`` is None."""
    if path is None:
        text = _default_table_text()
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return JointTable.from_dict(json.loads(text))


def rest_pose() -> Pose:
    return dict(load_joint_table().rest_pose)
