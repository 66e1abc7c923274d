"""Structured speech-emotion input and the affect-to-timing/prosody maps.

The speech emotion recognizer is outside this package. Its output is supplied
as a scenario JSON file::

    {"segments": [{"phrase": "...", "response_text": "...", "valence": 7,
                   "arousal": 5, "predicted_duration": 1.51,
                   "emotion_labels": ["happy", "curious"]}],
     "config": {...}}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from os import PathLike
from typing import Any, Mapping

AFFECT_RANGE = (-10, 10)
BETA_RANGE = (0.9, 1.1)


class ScenarioError(ValueError):
    """Scenario input does not match the schema."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def _check_affect(name: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(name, f"must be an integer, got {value!r}")
    lo, hi = AFFECT_RANGE
    if not lo <= value <= hi:
        raise ScenarioError(name, f"{value} outside [{lo}, {hi}]")
    return value


@dataclass(frozen=True)
class EmotionSegment:
    phrase: str
    response_text: str
    valence: int
    arousal: int
    predicted_duration: float
    emotion_labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        _check_affect("valence", self.valence)
        _check_affect("arousal", self.arousal)
        if not self.predicted_duration > 0:
            raise ScenarioError("predicted_duration", "must be > 0")
        object.__setattr__(self, "emotion_labels", tuple(self.emotion_labels))

    def to_dict(self) -> dict:
        return {
            "phrase": self.phrase,
            "response_text": self.response_text,
            "valence": self.valence,
            "arousal": self.arousal,
            "predicted_duration": self.predicted_duration,
            "emotion_labels": list(self.emotion_labels),
        }


@dataclass(frozen=True)
class Scenario:
    segments: tuple[EmotionSegment, ...]
    config: Mapping[str, Any] = field(default_factory=dict)
    name: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "segments": [s.to_dict() for s in self.segments],
            "config": dict(self.config),
        }


def parse_scenario(data: Mapping[str, Any], name: str = "") -> Scenario:
    if not isinstance(data, Mapping):
        raise ScenarioError("<root>", "scenario must be a JSON object")
    raw = data.get("segments")
    if not isinstance(raw, list):
        raise ScenarioError("segments", "missing or not a list")
    if not raw:
        raise ScenarioError("segments", "scenario has no segments")
    segments = []
    for i, item in enumerate(raw):
        where = f"segments[{i}]"
        if not isinstance(item, Mapping):
            raise ScenarioError(where, "must be an object")
        for key in ("phrase", "response_text", "valence", "arousal", "predicted_duration"):
            if key not in item:
                raise ScenarioError(f"{where}.{key}", "missing")
        for key in ("phrase", "response_text"):
            if not isinstance(item[key], str):
                raise ScenarioError(f"{where}.{key}", "must be a string")
        dur = item["predicted_duration"]
        if isinstance(dur, bool) or not isinstance(dur, (int, float)) or not dur > 0:
            raise ScenarioError(f"{where}.predicted_duration", f"must be a number > 0, got {dur!r}")
        labels = item.get("emotion_labels", [])
        if not isinstance(labels, list) or not all(isinstance(x, str) for x in labels):
            raise ScenarioError(f"{where}.emotion_labels", "must be a list of strings")
        valence = _check_affect(f"{where}.valence", item["valence"])
        arousal = _check_affect(f"{where}.arousal", item["arousal"])
        segments.append(
            EmotionSegment(
                phrase=item["phrase"],
                response_text=item["response_text"],
                valence=valence,
                arousal=arousal,
                predicted_duration=float(dur),
                emotion_labels=tuple(labels),
            )
        )
    config = data.get("config", {})
    if not isinstance(config, Mapping):
        raise ScenarioError("config", "must be an object")
    return Scenario(tuple(segments), dict(config), name or str(data.get("name", "")))


def read_scenario(path: str | PathLike) -> Scenario:
    """Load a scenario file with its config overrides."""
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError("<root>", f"invalid JSON: {exc}") from exc
    return parse_scenario(data, name=str(data.get("name", "")) or str(path))


def load_scenario(path: str | PathLike) -> list[EmotionSegment]:
    return list(read_scenario(path).segments)


@dataclass(frozen=True)
class AffectMap:
    """Linear affect maps with clamps. All coefficients are configuration."""

    beta_slope: float = 0.01
    pitch_slope: float = 0.05
    volume_base: float = 0.5
    volume_slope: float = 0.05
    pitch_range: tuple[float, float] = (0.5, 2.0)
    volume_range: tuple[float, float] = (0.05, 1.0)


DEFAULT_AFFECT = AffectMap()


def _clamp(x: float, lo: float, hi: float) -> float:
    return min(max(x, lo), hi)


def estimate_beta(arousal: int, affect: AffectMap = DEFAULT_AFFECT) -> float:
    """Emotional-rhythm duration scale in [0.9, 1.1]."""
    _check_affect("arousal", arousal)
    return _clamp(1.0 + affect.beta_slope * arousal, *BETA_RANGE)


@dataclass(frozen=True)
class SpeechParams:
    pitch_modifier: float
    volume_modifier: float


def speech_params(valence: int, arousal: int, affect: AffectMap = DEFAULT_AFFECT) -> SpeechParams:
    _check_affect("valence", valence)
    _check_affect("arousal", arousal)
    pitch = _clamp(1.0 + affect.pitch_slope * arousal, *affect.pitch_range)
    volume = _clamp(affect.volume_base + affect.volume_slope * valence, *affect.volume_range)
    # float noise from the slopes (0.05 * 5) is rounded away
    return SpeechParams(round(pitch, 12), round(volume, 12))
