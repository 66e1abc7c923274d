"""Retrieval-augmented, constraint-checked gesture planning.

For every emotion segment the planner retrieves library examples, renders a
prompt, asks a generation provider for a keyframe script, then parses,
quantizes and verifies it. A violating answer triggers recovery: first a
Backtrack (same examples, failure diagnostics, last valid pose), then
From-Scratch regeneration (fresh retrieval with a larger k and an explicit
list of bounds to avoid).
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
import urllib.error
import urllib.request
import zlib
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Mapping, Protocol, Sequence

import numpy as np

from .constraints import (
    ConstraintSet,
    Violation,
    ViolationKind,
    ViolationReport,
    default_constraints,
    render_constraints_digest,
    verify,
)
from .emotion_input import EmotionSegment
from .joint_model import (
    JOINT_NAMES,
    JointTrack,
    MotionSegment,
    Pose,
    ScriptError,
    final_pose,
    parse_keyframe_script,
    quantize_time,
    quantize_times,
    serialize_keyframe_script,
)
from .motion_library import GestureExample, LibraryIndex, duration_search, semantic_search

log = logging.getLogger(__name__)

DEFAULT_K = 3
MAX_RETRIES = 3


class RecoveryMode(str, Enum):
    Backtrack = "Backtrack"
    FromScratch = "FromScratch"


class PlanningError(RuntimeError):
    """A segment could not be planned within the retry budget."""

    def __init__(self, state: "RecoveryState", log_so_far: Sequence["RecoveryState"] = ()):
        modes = ", ".join(m.value for m in state.mode_history)
        super().__init__(
            f"segment {state.segment_index}: no valid motion after {state.retries} "
            f"retries (modes: {modes})"
        )
        self.state = state
        self.recovery_log = list(log_so_far)


class ProviderError(RuntimeError):
    """The generation backend could not be reached or answered garbage."""

    def __init__(self, message: str, attempts: int = 1):
        super().__init__(message)
        self.attempts = attempts


# --------------------------------------------------------------------------
# prompts


@dataclass(frozen=True)
class PromptSpec:
    """Everything the generator sees for one segment.

    The five prompt elements are: phrase and text (with its affect), the
    retrieved examples, the physical constraints digest, the style
    guidelines, and the transition pose. ``failure_diagnostics`` appears only
    on Backtrack prompts.
    """

    segment_index: int
    phrase: str
    response_text: str
    retrieved_examples: tuple[tuple[str, str], ...]
    constraints_digest: str
    style_guidelines: tuple[str, ...]
    transition_pose: Mapping[str, float] | None
    duration_budget: float | None
    valence: int | None = None
    arousal: int | None = None
    emotion_labels: tuple[str, ...] = ()
    failure_diagnostics: tuple[str, ...] | None = None
    mode: str = "initial"

    def render(self) -> str:
        out = ["## Emotional phrase and text segment"]
        out.append(f"Phrase: {self.phrase}")
        out.append(f"Text: {self.response_text}")
        if self.valence is not None and self.arousal is not None:
            labels = ", ".join(self.emotion_labels) or "unlabelled"
            out.append(f"Affect: valence {self.valence:+d}, arousal {self.arousal:+d} ({labels})")
        out.append("")
        out.append("## Retrieved gesture examples")
        for i, (phrase, script) in enumerate(self.retrieved_examples, start=1):
            out.append(f"Example {i}: {phrase}")
            out.append(script.rstrip("\n"))
        out.append("")
        out.append("## Physical constraints")
        out.append(self.constraints_digest.rstrip("\n"))
        out.append("")
        out.append("## Style guidelines")
        out.extend(f"- {s}" for s in self.style_guidelines) if self.style_guidelines else out.append("- none")
        out.append("")
        out.append("## Transition constraints")
        if self.transition_pose:
            for joint in JOINT_NAMES:
                if joint in self.transition_pose:
                    out.append(f"{joint} must start at {self.transition_pose[joint]:.4f} rad")
        else:
            out.append("none")
        out.append("")
        out.append("## Timing")
        if self.duration_budget is not None:
            out.append(f"Segment must end by {self.duration_budget:.4f} s; time resolution 0.0001 s")
        else:
            out.append("No duration constraint; time resolution 0.0001 s")
        if self.failure_diagnostics:
            out.append("")
            out.append("## Failure diagnostics (previous attempt)")
            out.extend(f"- {d}" for d in self.failure_diagnostics)
            out.append("Keep the motion up to the last valid pose and correct the continuation.")
        out.append("")
        out.append("## Output format")
        out.append('Reply only with names.append("<Joint>") / times.append([...]) / keys.append([...]) lines.')
        return "\n".join(out) + "\n"


def _example_pairs(examples) -> tuple[tuple[str, str], ...]:
    pairs = []
    for item in examples:
        ex = item[0] if isinstance(item, tuple) else item
        pairs.append((ex.key_phrase, serialize_keyframe_script(ex.motion)))
    return tuple(pairs)


def build_prompt(
    segment: EmotionSegment,
    examples: Sequence[GestureExample | tuple[GestureExample, float]],
    constraints: ConstraintSet,
    prev_pose: Pose | None,
    duration: float | None,
    *,
    index: int = 0,
    affect: bool = True,
) -> PromptSpec:
    """Assemble the generation prompt for one segment.

    ``duration=None`` leaves the segment length to the generator; with
    ``affect=False`` the valence/arousal element is left out.
    """
    if not examples:
        raise ValueError("at least one retrieved example is required")
    if duration is not None and not duration > 0:
        raise ValueError("duration must be > 0")
    return PromptSpec(
        segment_index=index,
        phrase=segment.phrase,
        response_text=segment.response_text,
        retrieved_examples=_example_pairs(examples),
        constraints_digest=render_constraints_digest(constraints),
        style_guidelines=constraints.style_guidelines,
        transition_pose=dict(prev_pose) if prev_pose else None,
        duration_budget=duration,
        valence=segment.valence if affect else None,
        arousal=segment.arousal if affect else None,
        emotion_labels=segment.emotion_labels if affect else (),
    )


# --------------------------------------------------------------------------
# recovery


@dataclass
class RecoveryState:
    segment_index: int
    retries: int = 0
    violation_log: list[ViolationReport] = field(default_factory=list)
    mode_history: list[RecoveryMode] = field(default_factory=list)
    k: int = DEFAULT_K

    def record(self, mode: RecoveryMode) -> None:
        self.mode_history.append(mode)
        self.retries += 1

    def to_dict(self) -> dict:
        return {
            "segment_index": self.segment_index,
            "retries": self.retries,
            "k": self.k,
            "mode_history": [m.value for m in self.mode_history],
            "violation_log": [r.to_dict() for r in self.violation_log],
        }


def select_recovery_mode(state: RecoveryState) -> RecoveryMode:
    """Backtrack on the first failure of a segment, regenerate from scratch after that."""
    if not state.violation_log:
        raise ValueError("no violation logged")
    return RecoveryMode.Backtrack if state.retries == 0 else RecoveryMode.FromScratch


def recover_backtrack(prompt: PromptSpec, violations: ViolationReport, last_valid_pose: Pose | None) -> PromptSpec:
    if not violations.entries:
        raise ValueError("backtrack needs at least one violation")
    return replace(
        prompt,
        failure_diagnostics=tuple(violations.lines()),
        transition_pose=dict(last_valid_pose) if last_valid_pose else None,
        mode="backtrack",
    )


def exclusion_lines(state: RecoveryState) -> tuple[str, ...]:
    seen: dict[tuple, str] = {}
    for report in state.violation_log:
        for v in report.entries:
            key = (v.joint, v.kind.value, round(v.bound, 6))
            if key in seen:
                continue
            if v.kind is ViolationKind.AngleLimit:
                text = f"{v.joint} angle limit {v.bound:g} rad"
            elif v.kind is ViolationKind.Velocity:
                text = f"{v.joint} velocity cap {v.bound:g} rad/s"
            elif v.kind is ViolationKind.ForbiddenJoint:
                text = f"{v.joint} is forbidden"
            elif v.kind is ViolationKind.Continuity:
                text = f"{v.joint} must start at {v.bound:g} rad"
            elif v.kind is ViolationKind.DurationBudget:
                text = f"duration budget {v.bound:g} s"
            else:
                text = "output must follow the keyframe script format"
            seen[key] = text
    return tuple(seen[k] for k in sorted(seen))


Retriever = Callable[[EmotionSegment, int], list]


def semantic_retriever(index: LibraryIndex) -> Retriever:
    return lambda seg, k: semantic_search(index, seg.phrase, k)


def duration_retriever(index: LibraryIndex, durations: Sequence[float] | None = None) -> Retriever:
    """Retrieval by native gesture length; ``durations`` overrides the target per call order."""

    def retrieve(seg: EmotionSegment, k: int) -> list:
        return duration_search(index, seg.predicted_duration, k)

    return retrieve


def recover_from_scratch(
    segment: EmotionSegment,
    library: LibraryIndex,
    state: RecoveryState,
    constraints: ConstraintSet,
    duration: float | None,
    *,
    affect: bool = True,
    retriever: Retriever | None = None,
) -> PromptSpec:
    if state.retries < 1:
        raise ValueError("from-scratch regeneration needs at least one prior retry")
    state.k = min(state.k + 1, len(library))
    retriever = retriever or semantic_retriever(library)
    revised = replace(constraints, exclusions=exclusion_lines(state))
    prompt = build_prompt(
        segment,
        retriever(segment, state.k),
        revised,
        None,
        duration,
        index=state.segment_index,
        affect=affect,
    )
    return replace(prompt, mode="from_scratch")


# --------------------------------------------------------------------------
# providers


class GenerationProvider(Protocol):
    remote: bool

    def generate(self, prompt: PromptSpec) -> str: ...


class ScriptedMock:
    """Deterministic in-process stand-in for the language model.

    It adapts the top retrieved example: retimes it to the duration budget
    (landing a little short, as a real model does), scales its amplitude
    with arousal, blends its start into the transition pose and keeps it
    inside the joint limits and velocity caps it was built with.

    ``fixture`` maps a segment index to ``{"script": text}`` (returned
    verbatim) or ``{"violations": n, "kind": k}``: the first ``n`` answers
    for that segment then break a constraint of kind ``angle_limit``,
    ``velocity``, ``forbidden`` or ``malformed``.
    """

    remote = False

    def __init__(
        self,
        seed: int = 0,
        constraints: ConstraintSet | None = None,
        fixture: Mapping[int, Mapping] | None = None,
        duration_shortfall: float = 0.12,
        angle_jitter: float = 0.02,
        affect_gain: float = 0.04,
    ):
        self.seed = seed
        self.constraints = constraints or default_constraints()
        self.fixture = {int(k): dict(v) for k, v in (fixture or {}).items()}
        self.duration_shortfall = duration_shortfall
        self.angle_jitter = angle_jitter
        self.affect_gain = affect_gain
        self.calls: dict[int, int] = {}
        self._lock = threading.Lock()

    @classmethod
    def from_fixture(cls, path: str, **kwargs) -> "ScriptedMock":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        kwargs.setdefault("seed", int(data.get("seed", 0)))
        return cls(fixture=data.get("segments", {}), **kwargs)

    def reset(self) -> None:
        with self._lock:
            self.calls.clear()

    def generate(self, prompt: PromptSpec) -> str:
        with self._lock:
            n = self.calls.get(prompt.segment_index, 0)
            self.calls[prompt.segment_index] = n + 1
        entry = self.fixture.get(prompt.segment_index, {})
        if "script" in entry:
            return entry["script"]
        motion = self._compose(prompt)
        if n < int(entry.get("violations", entry.get("scripted_violation", 0))):
            kind = entry.get("kind", "angle_limit")
            if kind == "malformed":
                return 'names.append("HeadPitch")\ntimes.append([0.1, oops])\n'
            motion = self._inject(motion, kind)
        return serialize_keyframe_script(motion)

    # -- internals

    def _rng(self, prompt: PromptSpec) -> np.random.Generator:
        tag = zlib.crc32(f"{prompt.segment_index}|{prompt.phrase}|{prompt.response_text}".encode())
        return np.random.default_rng([self.seed, tag])

    def _compose(self, prompt: PromptSpec) -> MotionSegment:
        base = quantize_times(parse_keyframe_script(prompt.retrieved_examples[0][1]))
        rng = self._rng(prompt)
        if prompt.duration_budget is not None:
            duration = prompt.duration_budget * (1.0 - self.duration_shortfall * rng.random())
        else:
            duration = base.duration
        duration = max(quantize_time(duration), 0.05)
        if duration > (prompt.duration_budget or np.inf):
            duration -= 0.0001
        gain = 1.0
        if prompt.arousal is not None:
            gain = float(np.clip(1.0 + self.affect_gain * prompt.arousal, 0.6, 1.4))
        c = self.constraints
        pose = prompt.transition_pose or {}
        tracks = []
        for tr in base.tracks:
            if tr.joint in c.forbidden_joints:
                continue
            t = np.array(tr.times) * (duration / base.duration)
            k = np.array(tr.keys)
            k = k[0] + gain * (k - k[0])
            if len(k) > 2:
                k[1:-1] += rng.normal(0.0, self.angle_jitter, len(k) - 2)
            if tr.joint in pose and len(t) > 1:
                fade = 1.0 - (t - t[0]) / (t[-1] - t[0])
                k = k + (pose[tr.joint] - k[0]) * fade
            elif tr.joint in pose:
                k[:] = pose[tr.joint]
            lim = c.limits.get(tr.joint)
            if lim is not None:
                k = np.clip(k, lim.min_angle + 1e-3, lim.max_angle - 1e-3)
            k = self._cap_velocity(t, k, 0.95 * c.velocity_cap(tr.joint))
            times = tuple(quantize_time(x) for x in t)
            tracks.append(JointTrack(tr.joint, times, tuple(round(float(x), 4) for x in k)))
        last = max((tr.end_time for tr in tracks), default=0.0)
        return MotionSegment(tuple(tracks), duration=max(duration, last))

    @staticmethod
    def _cap_velocity(t: np.ndarray, k: np.ndarray, cap: float) -> np.ndarray:
        if len(k) < 2:
            return k
        line = k[0] + (k[-1] - k[0]) * (t - t[0]) / (t[-1] - t[0])
        dev = k - line
        for _ in range(40):
            cand = line + dev
            if np.max(np.abs(np.diff(cand)) / np.diff(t)) <= cap:
                return cand
            dev = dev * 0.8
        return line

    def _inject(self, motion: MotionSegment, kind: str) -> MotionSegment:
        c = self.constraints
        tracks = list(motion.tracks)
        if kind == "forbidden":
            joint = sorted(c.forbidden_joints, key=JOINT_NAMES.index)[0]
            tracks.append(JointTrack(joint, (motion.duration,), (c.limits[joint].min_angle,)))
            return motion.with_tracks(tracks, motion.duration)
        i = max(range(len(tracks)), key=lambda j: len(tracks[j]))
        tr = tracks[i]
        keys, times = list(tr.keys), list(tr.times)
        pos = len(keys) // 2
        if kind == "velocity":
            lim = c.limits[tr.joint]
            keys[pos] = lim.max_angle - 1e-3 if keys[pos - 1] < 0.5 * (lim.min_angle + lim.max_angle) else lim.min_angle + 1e-3
            times[pos] = quantize_time(times[pos - 1] + 0.01)
        else:
            keys[pos] = c.limits[tr.joint].max_angle + 0.3
        tracks[i] = JointTrack(tr.joint, tuple(times), tuple(keys))
        return motion.with_tracks(tracks, motion.duration)


class HttpProvider:
    """Remote generation endpoint.

    Request: ``POST {"prompt_text", "max_duration_s", "joint_vocabulary"}``;
    response: ``{"keyframe_script": "..."}``. A bearer token is read from the
    environment variable named by ``token_env`` when set.
    """

    remote = True

    def __init__(
        self,
        url: str,
        token_env: str = "GESTURESYNC_PROVIDER_TOKEN",
        timeout: float = 30.0,
        attempts: int = 1,
    ):
        self.url = url
        self.token_env = token_env
        self.timeout = timeout
        self.attempts = max(1, attempts)

    def request_body(self, prompt: PromptSpec) -> dict:
        return {
            "prompt_text": prompt.render(),
            "max_duration_s": prompt.duration_budget,
            "joint_vocabulary": list(JOINT_NAMES),
        }

    def generate(self, prompt: PromptSpec) -> str:
        data = json.dumps(self.request_body(prompt)).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        last: Exception | None = None
        for attempt in range(1, self.attempts + 1):
            req = urllib.request.Request(self.url, data=data, headers=headers, method="POST")
            try:
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    payload = json.loads(resp.read().decode("utf-8"))
            except (urllib.error.URLError, TimeoutError, OSError) as exc:
                last = exc
                log.warning("provider attempt %d/%d failed: %s", attempt, self.attempts, exc)
                continue
            except json.JSONDecodeError as exc:
                raise ProviderError(f"provider returned invalid JSON: {exc}", attempt) from exc
            script = payload.get("keyframe_script") if isinstance(payload, dict) else None
            if not isinstance(script, str):
                raise ProviderError("provider response lacks a keyframe_script string", attempt)
            return script
        raise ProviderError(f"provider unreachable after {self.attempts} attempt(s): {last}", self.attempts)


# --------------------------------------------------------------------------
# planning loop


@dataclass
class PlanResult:
    segments: list[MotionSegment]
    recovery_log: list[RecoveryState]
    prompts: list[PromptSpec] = field(default_factory=list)
    provider_seconds: float = 0.0
    planning_seconds: float = 0.0

    @property
    def recovery_events(self) -> int:
        return sum(len(s.mode_history) for s in self.recovery_log)


def _malformed(exc: Exception) -> ViolationReport:
    return ViolationReport((Violation("", ViolationKind.Malformed, 0.0, 0.0, 0.0, str(exc)),))


def plan_sequence(
    segments: Sequence[EmotionSegment],
    library: LibraryIndex,
    constraints: ConstraintSet,
    provider: GenerationProvider,
    *,
    durations: Sequence[float | None] | None = None,
    initial_pose: Pose | None = None,
    k: int = DEFAULT_K,
    max_retries: int = MAX_RETRIES,
    affect: bool = True,
    retriever: Retriever | None = None,
    clock: Callable[[], float] = time.perf_counter,
) -> PlanResult:
    """Plan one verified motion segment per emotion segment.

    ``durations`` are the per-segment duration budgets (default: predicted
    speech durations; ``None`` entries leave the length open). Each segment
    must start where the previous ones left the joints (``initial_pose``
    seeds this for the first segment).
    """
    retriever = retriever or semantic_retriever(library)
    if durations is None:
        durations = [s.predicted_duration for s in segments]
    if len(durations) != len(segments):
        raise ValueError("one duration budget per segment required")
    pose: Pose = dict(initial_pose or {})
    out: list[MotionSegment] = []
    states: list[RecoveryState] = []
    prompts: list[PromptSpec] = []
    provider_time = 0.0
    t_start = clock()
    for i, (seg, budget) in enumerate(zip(segments, durations)):
        state = RecoveryState(i, k=min(k, len(library)))
        prompt = build_prompt(
            seg, retriever(seg, state.k), constraints, pose or None, budget, index=i, affect=affect
        )
        while True:
            t0 = clock()
            script = provider.generate(prompt)
            if getattr(provider, "remote", False):
                provider_time += clock() - t0
            try:
                motion = quantize_times(parse_keyframe_script(script))
                report = verify(motion, constraints, pose or None, budget)
            except (ScriptError, ValueError) as exc:
                motion, report = None, _malformed(exc)
            if report.ok:
                break
            state.violation_log.append(report)
            mode = select_recovery_mode(state)
            state.record(mode)
            log.info("segment %d: %d violation(s), %s", i, len(report), mode.value)
            if state.retries >= max_retries:
                raise PlanningError(state, states + [state])
            if mode is RecoveryMode.Backtrack:
                prompt = recover_backtrack(prompt, report, pose)
            else:
                prompt = recover_from_scratch(
                    seg, library, state, constraints, budget, affect=affect, retriever=retriever
                )
        motion = replace(
            motion,
            id=i,
            emotion_tag=seg.emotion_labels[0] if seg.emotion_labels else "",
            valence=seg.valence,
            arousal=seg.arousal,
        )
        out.append(motion)
        states.append(state)
        prompts.append(prompt)
        pose.update(final_pose(motion) if motion.tracks else {})
    planning = clock() - t_start - provider_time
    return PlanResult(out, states, prompts, provider_time, planning)
