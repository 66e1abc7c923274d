"""Simulated executor, speech clock and ablation runner.

Simulated time drives everything: the speech clock produces checkpoint
timestamps (segment starts, midpoints and the utterance end), the motion
schedule produces the matching motion timestamps, and the sync monitor is
consulted at every speech checkpoint. No wall-clock sleeping happens.
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .alignment import (
    AlignmentPlan,
    Primitive,
    Schedule,
    Trajectory,
    plan_alignment,
    sample_schedule,
    schedule_back_to_back,
    schedule_from_plan,
)
from .constraints import ConstraintSet, default_constraints, verify
from .emotion_input import EmotionSegment, Scenario, estimate_beta
from .joint_model import JointTrack, MotionSegment, Pose, rest_pose
from .metrics import LatencyMeter, LatencyReport, mean_angular_jerk, metrics_report, tsa
from .motion_library import (
    GestureExample,
    LibraryIndex,
    build_index,
    load_library,
    load_predefined,
)
from .planner import (
    GenerationProvider,
    RecoveryState,
    ScriptedMock,
    duration_retriever,
    plan_sequence,
    semantic_retriever,
)
from .sync_monitor import DegradeEvent, MonitorConfig, SyncCheckpoint, SyncClass, SyncMonitor, degrade

# joints whose jerk is reported
KEY_JOINTS = (
    "HeadYaw",
    "HeadPitch",
    "LShoulderPitch",
    "LShoulderRoll",
    "LElbowYaw",
    "LElbowRoll",
    "RShoulderPitch",
    "RShoulderRoll",
    "RElbowYaw",
    "RElbowRoll",
)


def interpolate(track: JointTrack, t: float) -> float:
    """Piecewise-linear angle at ``t``; outside the keyframe span the nearest end is held."""
    return float(np.interp(t, track.times, track.keys))


# --------------------------------------------------------------------------
# speech clock


@dataclass(frozen=True)
class DeviationModel:
    """How real speech departs from its predicted timing.

    ``drift``: every segment lasts ``rate`` times longer (rate > 1 is slower
    speech). ``jitter``: each segment length gets zero-mean Gaussian noise
    with standard deviation ``stddev`` seconds.
    """

    kind: str = "none"
    rate: float = 1.0
    stddev: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("none", "drift", "jitter"):
            raise ValueError(f"unknown deviation kind {self.kind!r}")
        if not 0.5 < self.rate < 2.0:
            raise ValueError("drift rate must lie in (0.5, 2.0)")
        if self.stddev < 0:
            raise ValueError("jitter stddev must be >= 0")

    @classmethod
    def none(cls) -> "DeviationModel":
        return cls()

    @classmethod
    def drift(cls, rate: float) -> "DeviationModel":
        return cls("drift", rate=rate)

    @classmethod
    def jitter(cls, stddev: float, seed: int = 0) -> "DeviationModel":
        return cls("jitter", stddev=stddev, seed=seed)

    def apply(self, durations: Sequence[float]) -> np.ndarray:
        d = np.asarray(durations, dtype=float)
        if self.kind == "drift":
            return d * self.rate
        if self.kind == "jitter":
            noise = np.random.default_rng(self.seed).normal(0.0, self.stddev, d.size)
            return np.maximum(d + noise, 0.05 * d)
        return d.copy()

    def to_dict(self) -> dict:
        return {"kind": self.kind, "rate": self.rate, "stddev": self.stddev, "seed": self.seed}


def checkpoint_times(durations: Sequence[float], fractions: Sequence[float] = (0.0, 0.5)) -> list[float]:
    """Start/midpoint of each consecutive interval, then the overall end."""
    out, t = [], 0.0
    for d in durations:
        out.extend(t + f * d for f in fractions)
        t += d
    out.append(t)
    return out


# --------------------------------------------------------------------------
# closed loop


@dataclass
class ExecutionTrace:
    trajectory: Trajectory
    schedule: Schedule
    speech_times: list[float]
    motion_times: list[float]
    observations: list[SyncCheckpoint]
    e_sync: list[float]
    classes: list[SyncClass]
    events: list[DegradeEvent]
    latencies_ms: dict[str, float] = field(default_factory=dict)

    @property
    def checkpoints(self) -> list[SyncCheckpoint]:
        """Executed motion vs speech checkpoint times after all adjustments."""
        return [SyncCheckpoint(i, s, m) for i, (s, m) in enumerate(zip(self.speech_times, self.motion_times))]

    def tsa_ms(self) -> float:
        return tsa(self.motion_times, self.speech_times)

    def events_jsonl(self) -> str:
        return "".join(json.dumps(e.to_dict(), sort_keys=True) + "\n" for e in self.events)


def _pace(obs: Sequence[SyncCheckpoint], planned: Sequence[float], window: int) -> float:
    j = len(obs) - 1
    i = max(0, j - window + 1)
    if j > i and planned[j] > planned[i]:
        return (obs[j].speech_time - obs[i].speech_time) / (planned[j] - planned[i])
    return obs[j].speech_time / planned[j] if planned[j] > 0 else 1.0


def run_schedule(
    schedule: Schedule,
    nominal_speech: Sequence[float],
    actual_speech: Sequence[float],
    monitor_config: MonitorConfig = MonitorConfig(),
    *,
    recover: bool = True,
    sample_rate: float = 50.0,
    primitive: Primitive = "linear",
    initial_pose: Pose | None = None,
) -> ExecutionTrace:
    """Play ``schedule`` against a speech track.

    ``nominal_speech`` are the per-segment speech durations the schedule was
    planned for; ``actual_speech`` what the speech clock really does. With
    ``recover`` off the monitor still observes but never intervenes.
    """
    if len(nominal_speech) != len(schedule) or len(actual_speech) != len(schedule):
        raise ValueError("one speech duration per scheduled segment required")
    fractions = schedule.checkpoint_fractions
    planned = checkpoint_times(nominal_speech, fractions)
    speech = checkpoint_times(actual_speech, fractions)
    monitor = SyncMonitor(monitor_config)
    obs: list[SyncCheckpoint] = []
    errors, classes, events = [], [], []
    for j, (tau, s) in enumerate(zip(planned, speech)):
        m = schedule.checkpoint_times()[j]
        cp = SyncCheckpoint(j, s, m)
        obs.append(cp)
        e, cls = monitor.observe(cp)
        errors.append(e)
        classes.append(cls)
        if recover and cls is not SyncClass.Normal and j < len(planned) - 1:
            pace = _pace(obs, planned, monitor_config.window)
            schedule, ev = degrade(
                schedule, cls, now=s, speech_progress=tau, pace=pace, e_sync=e, config=monitor_config
            )
            events.append(ev)
    traj = sample_schedule(schedule, sample_rate, primitive, initial_pose)
    return ExecutionTrace(traj, schedule, speech, schedule.checkpoint_times(), obs, errors, classes, events)


def run_closed_loop(
    segments: Sequence[MotionSegment],
    plan: AlignmentPlan,
    deviation: DeviationModel = DeviationModel(),
    monitor_config: MonitorConfig = MonitorConfig(),
    *,
    recover: bool = True,
    speech_durations: Sequence[float] | None = None,
    sample_rate: float = 50.0,
    primitive: Primitive = "linear",
    initial_pose: Pose | None = None,
) -> ExecutionTrace:
    """Execute planned segments on their alignment intervals while speech plays.

    Speech follows the plan's intervals (or ``speech_durations``) distorted
    by ``deviation``.
    """
    schedule = schedule_from_plan(segments, plan)
    nominal = list(plan.interval_durations)
    base = nominal if speech_durations is None else list(speech_durations)
    actual = deviation.apply(base)
    return run_schedule(
        schedule,
        nominal,
        actual,
        monitor_config,
        recover=recover,
        sample_rate=sample_rate,
        primitive=primitive,
        initial_pose=initial_pose,
    )


# --------------------------------------------------------------------------
# ablations

MODES = ("PreDefined", "SpeechOnly", "TextOnly", "NoSync", "NoEmotion", "Full")
# lower TSA first
REFERENCE_RANKING = ("SpeechOnly", "Full", "NoEmotion", "NoSync", "TextOnly", "PreDefined")

EMOTION_SYNONYMS = {
    "happy": "happy",
    "joy": "happy",
    "joyful": "happy",
    "excited": "happy",
    "grateful": "happy",
    "curious": "happy",
    "surprised": "happy",
    "sad": "sad",
    "sorry": "sad",
    "empathetic": "sad",
    "disappointed": "sad",
    "angry": "angry",
    "frustrated": "angry",
    "annoyed": "angry",
    "irritated": "angry",
}


def predefined_label(segment: EmotionSegment) -> str:
    """Pick the canned gesture: first recognised label, else the affect quadrant."""
    for label in segment.emotion_labels:
        tag = EMOTION_SYNONYMS.get(label.lower())
        if tag:
            return tag
    if segment.valence >= 0:
        return "happy"
    return "angry" if segment.arousal >= 0 else "sad"


def speech_truth(
    segments: Sequence[EmotionSegment],
    seed: int = 0,
    deviation: DeviationModel = DeviationModel(),
    noise: float = 0.04,
) -> np.ndarray:
    """Actual spoken segment lengths: emotional rhythm, prediction noise, then deviation."""
    rng = np.random.default_rng([seed, 7919])
    base = np.array([s.predicted_duration * (1.0 + s.arousal / 100.0) for s in segments])
    noisy = base * np.clip(1.0 + rng.normal(0.0, noise, base.size), 0.5, 1.5)
    return deviation.apply(noisy)


@dataclass
class AblationResult:
    mode: str
    scenario: str
    trace: ExecutionTrace
    motions: list[MotionSegment]
    plan: AlignmentPlan | None
    recovery_log: list[RecoveryState]
    latency_ms: float
    provider_ms: float

    @property
    def tsa_ms(self) -> float:
        return self.trace.tsa_ms()

    def jerk(self, joints: Sequence[str] = KEY_JOINTS) -> float:
        names = [j for j in joints if j in self.trace.trajectory.joints]
        return mean_angular_jerk(self.trace.trajectory, names)

    def metrics(self, emotion: str | None = None) -> dict:
        jerk = {emotion: self.jerk()} if emotion else {}
        lat = LatencyReport((self.latency_ms,), (self.provider_ms,))
        return metrics_report(
            self.tsa_ms,
            jerk,
            lat,
            mode=self.mode,
            scenario=self.scenario,
            degrade_events=len(self.trace.events),
            recovery_events=sum(len(s.mode_history) for s in self.recovery_log),
        )


_DEFAULT_INDEX: LibraryIndex | None = None


def default_index() -> LibraryIndex:
    global _DEFAULT_INDEX
    if _DEFAULT_INDEX is None:
        _DEFAULT_INDEX = build_index(load_library())
    return _DEFAULT_INDEX


@dataclass
class ModePlan:
    """Planned motions and how a configuration executes them."""

    mode: str
    motions: list[MotionSegment]
    plan: AlignmentPlan | None
    schedule: Schedule
    nominal_speech: list[float]
    recover: bool
    primitive: Primitive
    recovery_log: list[RecoveryState]
    meter: LatencyMeter
    provider_seconds: float = 0.0


def plan_mode(
    scenario: Scenario,
    mode: str,
    *,
    seed: int = 0,
    library: LibraryIndex | None = None,
    constraints: ConstraintSet | None = None,
    provider: GenerationProvider | None = None,
    initial_pose: Pose | None = None,
) -> ModePlan:
    """Plan a scenario the way configuration ``mode`` does.

    PreDefined: canned gesture per emotion label, native length, no monitor.
    SpeechOnly: speech-timing plan, retrieval by duration, no affect.
    TextOnly: semantic retrieval, native gesture lengths, no alignment.
    NoSync: full planner, but no alignment retime and no monitor.
    NoEmotion: beta fixed at 1 and no affect in the prompt.
    Full: everything on, Bezier primitives.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {', '.join(MODES)}")
    segments = list(scenario.segments)
    if not segments:
        raise ValueError("scenario has no segments")
    library = library or default_index()
    constraints = constraints or default_constraints()
    provider = provider or ScriptedMock(seed, constraints)
    pose = dict(rest_pose() if initial_pose is None else initial_pose)
    meter = LatencyMeter()

    if mode == "PreDefined":
        canned = load_predefined()
        with meter.stage("plan"):
            motions = [canned[predefined_label(s)] for s in segments]
            for m in motions:
                verify(m, constraints)
        with meter.stage("align"):
            schedule = schedule_back_to_back(motions)
        nominal = [s.predicted_duration for s in segments]
        return ModePlan(mode, motions, None, schedule, nominal, False, "linear", [], meter)

    aligned = mode in ("Full", "SpeechOnly", "NoEmotion")
    affect = mode in ("Full", "NoSync")
    betas = [1.0 if mode == "NoEmotion" else estimate_beta(s.arousal) for s in segments]
    with meter.stage("align"):
        plan = plan_alignment(segments, betas)
    budgets = [None] * len(segments) if mode == "TextOnly" else list(plan.interval_durations)
    retriever = duration_retriever(library) if mode == "SpeechOnly" else semantic_retriever(library)
    result = plan_sequence(
        segments,
        library,
        constraints,
        provider,
        durations=budgets,
        initial_pose=pose,
        affect=affect,
        retriever=retriever,
    )
    meter.add("plan", result.planning_seconds)
    with meter.stage("align"):
        schedule = schedule_from_plan(result.segments, plan) if aligned else schedule_back_to_back(result.segments)
    nominal = list(plan.interval_durations) if aligned else [s.predicted_duration for s in segments]
    primitive = "bezier" if mode in ("Full", "NoEmotion") else "linear"
    return ModePlan(
        mode, result.segments, plan, schedule, nominal, aligned, primitive,
        result.recovery_log, meter, result.provider_seconds,
    )


def run_ablation(
    scenario: Scenario,
    mode: str,
    *,
    seed: int = 0,
    deviation: DeviationModel = DeviationModel(),
    library: LibraryIndex | None = None,
    constraints: ConstraintSet | None = None,
    provider: GenerationProvider | None = None,
    monitor_config: MonitorConfig = MonitorConfig(),
    sample_rate: float = 50.0,
    speech_noise: float = 0.0,
    initial_pose: Pose | None = None,
) -> AblationResult:
    """Run one configuration (see :func:`plan_mode`) against the scenario's speech truth.

    The speech truth depends only on the scenario, ``seed``, ``deviation``
    and ``speech_noise``, so runs of different modes are paired.
    """
    pose = dict(rest_pose() if initial_pose is None else initial_pose)
    mp = plan_mode(
        scenario, mode, seed=seed, library=library, constraints=constraints,
        provider=provider, initial_pose=pose,
    )
    actual = speech_truth(scenario.segments, seed, deviation, speech_noise)
    trace = run_schedule(
        mp.schedule,
        mp.nominal_speech,
        actual,
        monitor_config,
        recover=mp.recover,
        sample_rate=sample_rate,
        primitive=mp.primitive,
        initial_pose=pose,
    )
    trace.latencies_ms = {k: 1000.0 * math.fsum(v) for k, v in mp.meter.stages.items()}
    trace.latencies_ms["provider"] = 1000.0 * mp.provider_seconds
    latency = 1000.0 * mp.meter.total(["plan", "align"])
    return AblationResult(
        mode, scenario.name, trace, list(mp.motions), mp.plan, mp.recovery_log,
        latency, 1000.0 * mp.provider_seconds,
    )


# --------------------------------------------------------------------------
# scenario sets

_AFFECT_BY_TAG = {
    "happy": ((4, 9), (2, 8)),
    "curious": ((2, 6), (1, 5)),
    "surprised": ((1, 6), (5, 9)),
    "sad": ((-9, -4), (-8, -2)),
    "angry": ((-9, -4), (4, 9)),
    "neutral": ((-2, 2), (-2, 2)),
}


def _segment_for(example: GestureExample, rng: np.random.Generator, lo: float, hi: float) -> EmotionSegment:
    (v0, v1), (a0, a1) = _AFFECT_BY_TAG.get(example.emotion_tag, ((-2, 2), (-2, 2)))
    return EmotionSegment(
        phrase=example.key_phrase,
        response_text=example.key_phrase.capitalize() + ".",
        valence=int(rng.integers(v0, v1 + 1)),
        arousal=int(rng.integers(a0, a1 + 1)),
        predicted_duration=round(float(rng.uniform(lo, hi)), 2),
        emotion_labels=(example.emotion_tag,),
    )


def make_eval_scenarios(
    n: int = 10,
    seed: int = 0,
    library: Sequence[GestureExample] | None = None,
    segments_range: tuple[int, int] = (2, 4),
    duration_range: tuple[float, float] = (1.2, 2.6),
    drift_range: tuple[float, float] = (0.85, 1.25),
) -> list[tuple[Scenario, DeviationModel]]:
    """Seeded evaluation set: phrases from the library, random affect, lengths and drift."""
    examples = list(library or load_library())
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        count = int(rng.integers(segments_range[0], segments_range[1] + 1))
        picks = rng.choice(len(examples), size=count, replace=False)
        segs = tuple(_segment_for(examples[k], rng, *duration_range) for k in picks)
        rate = round(float(rng.uniform(*drift_range)), 3)
        out.append((Scenario(segs, {}, f"eval-{seed}-{i:02d}"), DeviationModel.drift(rate)))
    return out


def scenario_seed(scenario: Scenario, seed: int) -> int:
    """Stable per-scenario seed so paired runs share speech truth."""
    return (seed * 1_000_003 + zlib.crc32(scenario.name.encode())) % (2**32)


EMOTION_FIXTURES = ("happy", "sad", "angry")


def load_fixture_scenario(name: str) -> Scenario:
    """One of the packaged scenarios: ``two_segment``, ``happy``, ``sad`` or ``angry``."""
    from importlib import resources

    from .emotion_input import parse_scenario

    text = resources.files("gesturesync").joinpath(f"data/scenarios/{name}.json").read_text()
    return parse_scenario(json.loads(text), name=name)


@dataclass
class EvalReport:
    tsa_by_mode: dict[str, list[float]]
    latency_by_mode: dict[str, list[float]]
    jerk_by_mode: dict[str, dict[str, float]]
    scenarios: list[str]
    seed: int

    def mean_tsa(self) -> dict[str, float]:
        return {m: float(np.mean(v)) for m, v in self.tsa_by_mode.items()}

    def spearman(self, reference: Sequence[str] = REFERENCE_RANKING) -> float:
        from scipy.stats import spearmanr

        modes = [m for m in reference if m in self.tsa_by_mode]
        means = self.mean_tsa()
        rho = spearmanr([means[m] for m in modes], list(range(len(modes)))).statistic
        return float(rho)

    def paired_better(self, a: str = "Full", b: str = "NoSync") -> list[bool]:
        return [x < y for x, y in zip(self.tsa_by_mode[a], self.tsa_by_mode[b])]

    def rows(self) -> list[dict]:
        out = []
        for m in MODES:
            if m not in self.tsa_by_mode:
                continue
            t = np.asarray(self.tsa_by_mode[m])
            lat = np.asarray(self.latency_by_mode[m])
            out.append(
                {
                    "mode": m,
                    "tsa_ms_mean": round(float(t.mean()), 1),
                    "tsa_ms_sd": round(float(t.std(ddof=1)) if t.size > 1 else 0.0, 1),
                    "jerk_by_emotion": {k: round(v, 3) for k, v in self.jerk_by_mode.get(m, {}).items()},
                    "latency_ms": {"mean": round(float(lat.mean()), 3), "max": round(float(lat.max()), 3)},
                }
            )
        return out

    def to_dict(self) -> dict:
        from .metrics import SCHEMA_VERSION

        d = {
            "schema_version": SCHEMA_VERSION,
            "seed": self.seed,
            "scenarios": list(self.scenarios),
            "rows": self.rows(),
            "tsa_ms_by_scenario": {m: [round(x, 3) for x in v] for m, v in self.tsa_by_mode.items()},
        }
        if len(self.tsa_by_mode) > 2:
            d["reference_ranking"] = list(REFERENCE_RANKING)
            d["spearman_vs_reference"] = round(self.spearman(), 4)
        if "Full" in self.tsa_by_mode and "NoSync" in self.tsa_by_mode:
            d["full_beats_nosync_every_scenario"] = all(self.paired_better())
        return d


def run_eval(
    scenarios: Sequence[tuple[Scenario, DeviationModel]],
    modes: Sequence[str] = MODES,
    *,
    seed: int = 0,
    speech_noise: float = 0.04,
    monitor_config: MonitorConfig = MonitorConfig(),
    sample_rate: float = 50.0,
    provider_factory=None,
    workers: int = 1,
    jerk_fixtures: Sequence[str] = EMOTION_FIXTURES,
    library: LibraryIndex | None = None,
    constraints: ConstraintSet | None = None,
) -> EvalReport:
    """Paired ablation over a scenario set plus jerk on the emotion fixtures.

    ``provider_factory(seed)`` builds a fresh provider per run (default: the
    scripted mock). Runs may go through a thread pool; results are gathered
    by (mode, scenario) so the report does not depend on completion order.
    """
    from concurrent.futures import ThreadPoolExecutor

    constraints = constraints or default_constraints()
    library = library or default_index()

    def make_provider(s: int):
        return provider_factory(s) if provider_factory else ScriptedMock(s, constraints)

    def one(job):
        mode, sc, dev = job
        s = scenario_seed(sc, seed)
        return run_ablation(
            sc, mode, seed=s, deviation=dev, library=library, constraints=constraints,
            provider=make_provider(s), monitor_config=monitor_config,
            sample_rate=sample_rate, speech_noise=speech_noise,
        )

    jobs = [(m, sc, dev) for m in modes for sc, dev in scenarios]
    fixtures = [(m, load_fixture_scenario(name), DeviationModel()) for m in modes for name in jerk_fixtures]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, jobs + fixtures))
    else:
        results = [one(j) for j in jobs + fixtures]
    main, fix = results[: len(jobs)], results[len(jobs):]
    tsa_by: dict[str, list[float]] = {m: [] for m in modes}
    lat_by: dict[str, list[float]] = {m: [] for m in modes}
    for r in main:
        tsa_by[r.mode].append(r.tsa_ms)
        lat_by[r.mode].append(r.latency_ms)
    jerk_by: dict[str, dict[str, float]] = {m: {} for m in modes}
    for (m, sc, _), r in zip(fixtures, fix):
        jerk_by[m][sc.name] = r.jerk()
    return EvalReport(tsa_by, lat_by, jerk_by, [sc.name for sc, _ in scenarios], seed)
