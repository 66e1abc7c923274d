"""Synchronization accuracy, angular jerk and planning latency."""

from __future__ import annotations

import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .alignment import Trajectory

SCHEMA_VERSION = "1.0"


def tsa(
    gesture_times: Sequence[float],
    speech_times: Sequence[float],
    lambdas: float | Sequence[float] | None = None,
) -> float:
    """Mean ``|t_gesture - lambda * t_speech|`` over checkpoints, in milliseconds.

    ``lambdas`` may be a scalar, one value per checkpoint, or None (all 1).
    """
    g = np.asarray(gesture_times, dtype=float)
    s = np.asarray(speech_times, dtype=float)
    if g.ndim != 1 or g.shape != s.shape:
        raise ValueError(f"length mismatch: {g.shape} gesture vs {s.shape} speech times")
    if g.size == 0:
        raise ValueError("no checkpoints")
    if np.any(g < 0) or np.any(s < 0):
        raise ValueError("checkpoint times must be >= 0")
    if lambdas is None:
        lam = np.ones_like(s)
    else:
        lam = np.broadcast_to(np.asarray(lambdas, dtype=float), s.shape)
    return 1000.0 * math.fsum(np.abs(g - lam * s)) / g.size


def angular_jerk(angles: np.ndarray, dt: float) -> np.ndarray:
    """Third forward difference over ``dt**3``; one value per interior window."""
    a = np.asarray(angles, dtype=float)
    if a.shape[0] < 4:
        raise ValueError(f"need >= 4 samples for jerk, got {a.shape[0]}")
    return np.diff(a, n=3, axis=0) / dt**3


def mean_angular_jerk(traj: Trajectory, joints: Iterable[str] | None = None) -> float:
    """Mean absolute jerk (rad/s^3), averaged over ``joints`` (default: all sampled)."""
    t = traj.times
    if len(t) < 4:
        raise ValueError(f"need >= 4 samples for jerk, got {len(t)}")
    steps = np.diff(t)
    dt = float(steps.mean())
    if not np.allclose(steps, dt, rtol=1e-6, atol=1e-9):
        raise ValueError("trajectory samples are not uniformly spaced")
    names = list(traj.joints) if joints is None else list(joints)
    if not names:
        raise ValueError("no joints requested")
    per_joint = [float(np.mean(np.abs(angular_jerk(traj.angle(j), dt)))) for j in names]
    return math.fsum(per_joint) / len(per_joint)


Clock = Callable[[], float]


@dataclass
class LatencyMeter:
    """Accumulates stage durations (seconds) from an injected monotonic clock."""

    clock: Clock = time.perf_counter
    stages: dict[str, list[float]] = field(default_factory=dict)

    @contextmanager
    def stage(self, name: str):
        t0 = self.clock()
        try:
            yield
        finally:
            self.stages.setdefault(name, []).append(self.clock() - t0)

    def add(self, name: str, seconds: float) -> None:
        self.stages.setdefault(name, []).append(seconds)

    def total(self, names: Iterable[str] | None = None) -> float:
        keys = self.stages if names is None else names
        return math.fsum(math.fsum(self.stages.get(k, [])) for k in keys)


@dataclass(frozen=True)
class LatencyReport:
    per_utterance_ms: tuple[float, ...]
    provider_ms: tuple[float, ...]

    @property
    def mean_ms(self) -> float:
        return float(np.mean(self.per_utterance_ms)) if self.per_utterance_ms else 0.0

    @property
    def max_ms(self) -> float:
        return float(np.max(self.per_utterance_ms)) if self.per_utterance_ms else 0.0

    def to_dict(self) -> dict:
        return {
            "mean": round(self.mean_ms, 3),
            "max": round(self.max_ms, 3),
            "n": len(self.per_utterance_ms),
            "provider_mean": round(float(np.mean(self.provider_ms)), 3) if self.provider_ms else 0.0,
        }


def measure_latency(utterances: Sequence, run: Callable[[object, LatencyMeter], None], clock: Clock = time.perf_counter) -> LatencyReport:
    """Time ``run`` on each utterance; the ``provider`` stage is reported apart.

    ``run(utterance, meter)`` does plan+align+verify and wraps provider calls
    in ``meter.stage("provider")`` (or ``meter.add``).
    """
    per, prov = [], []
    for u in utterances:
        meter = LatencyMeter(clock)
        t0 = clock()
        run(u, meter)
        elapsed = clock() - t0
        p = meter.total(["provider"])
        per.append(1000.0 * (elapsed - p))
        prov.append(1000.0 * p)
    return LatencyReport(tuple(per), tuple(prov))


def metrics_report(
    tsa_ms: float,
    jerk_by_emotion: Mapping[str, float] | None = None,
    latency: LatencyReport | None = None,
    **extra,
) -> dict:
    out = {
        "schema_version": SCHEMA_VERSION,
        "tsa_ms": round(tsa_ms, 1),
        "jerk_by_emotion": {k: round(v, 6) for k, v in sorted((jerk_by_emotion or {}).items())},
        "latency_ms": (latency or LatencyReport((), ())).to_dict(),
    }
    out.update(extra)
    return out
