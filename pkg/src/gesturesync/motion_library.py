"""Gesture example library and top-k phrase retrieval."""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from os import PathLike
from typing import Mapping, Protocol, Sequence

import numpy as np

from .joint_model import MotionSegment, parse_keyframe_script, quantize_times

_TOKEN_RE = re.compile(r"[a-z0-9']+")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class GestureExample:
    key_phrase: str
    motion: MotionSegment
    emotion_tag: str = ""

    def __post_init__(self) -> None:
        if not self.key_phrase.strip():
            raise ValueError("key_phrase must be non-empty")


class Embedder(Protocol):
    """Maps texts to L2-normalised vectors. ``fit`` sees the library phrases once."""

    def fit(self, phrases: Sequence[str]) -> np.ndarray: ...

    def transform(self, texts: Sequence[str]) -> np.ndarray: ...


class TfidfEmbedder:
    """Smoothed TF-IDF over lowercase word tokens, L2-normalised."""

    def __init__(self) -> None:
        self.vocab: dict[str, int] = {}
        self.idf = np.zeros(0)

    def fit(self, phrases: Sequence[str]) -> np.ndarray:
        docs = [tokenize(p) for p in phrases]
        vocab = sorted({tok for doc in docs for tok in doc})
        self.vocab = {tok: i for i, tok in enumerate(vocab)}
        df = np.zeros(len(vocab))
        for doc in docs:
            for tok in set(doc):
                df[self.vocab[tok]] += 1
        n = len(docs)
        self.idf = np.log((1.0 + n) / (1.0 + df)) + 1.0
        return self.transform(phrases)

    def transform(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), len(self.vocab)))
        for row, text in enumerate(texts):
            for tok, count in Counter(tokenize(text)).items():
                col = self.vocab.get(tok)
                if col is not None:
                    out[row, col] = count * self.idf[col]
        norms = np.linalg.norm(out, axis=1, keepdims=True)
        np.divide(out, norms, out=out, where=norms > 0)
        return out


@dataclass(frozen=True)
class LibraryIndex:
    examples: tuple[GestureExample, ...]
    vectors: np.ndarray
    embedder: Embedder

    def __len__(self) -> int:
        return len(self.examples)


def build_index(examples: Sequence[GestureExample], embedder: Embedder | None = None) -> LibraryIndex:
    if not examples:
        raise ValueError("gesture library is empty")
    for ex in examples:
        if not ex.key_phrase.strip():
            raise ValueError("gesture example with empty key phrase")
    embedder = embedder or TfidfEmbedder()
    vectors = embedder.fit([ex.key_phrase for ex in examples])
    vectors.setflags(write=False)
    return LibraryIndex(tuple(examples), vectors, embedder)


def semantic_search(index: LibraryIndex, query: str, k: int = 3) -> list[tuple[GestureExample, float]]:
    """Top-``k`` examples by cosine similarity; ties keep library order."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not tokenize(query):
        raise ValueError(f"query {query!r} has no tokens")
    q = index.embedder.transform([query])[0]
    scores = np.clip(index.vectors @ q, 0.0, 1.0)
    # stable sort on -score keeps insertion order among ties
    order = np.argsort(-scores, kind="stable")[: min(k, len(index))]
    return [(index.examples[i], float(scores[i])) for i in order]


def duration_search(index: LibraryIndex, target: float, k: int = 3) -> list[tuple[GestureExample, float]]:
    """Top-``k`` examples by closeness of native duration to ``target`` seconds.

    The score is ``1 / (1 + |duration - target|)``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    gaps = np.array([abs(ex.motion.duration - target) for ex in index.examples])
    order = np.argsort(gaps, kind="stable")[: min(k, len(index))]
    return [(index.examples[i], 1.0 / (1.0 + float(gaps[i]))) for i in order]


def _motion_from_entry(entry: Mapping) -> MotionSegment:
    motion = entry["motion"]
    if isinstance(motion, str):
        seg = parse_keyframe_script(motion)
    else:
        seg = MotionSegment.from_dict(motion)
    return quantize_times(seg)


def examples_from_json(data: Sequence[Mapping]) -> list[GestureExample]:
    out = []
    for i, entry in enumerate(data):
        try:
            out.append(
                GestureExample(
                    key_phrase=entry["key_phrase"],
                    motion=_motion_from_entry(entry),
                    emotion_tag=entry.get("emotion_tag", ""),
                )
            )
        except (KeyError, ValueError) as exc:
            raise ValueError(f"library entry {i}: {exc}") from exc
    return out


def load_library(path: str | PathLike | None = None) -> list[GestureExample]:
    """Read a library JSON array; the packaged NAO gesture set when ``path`` is None."""
    if path is None:
        text = resources.files("gesturesync").joinpath("data/gesture_library.json").read_text()
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    data = json.loads(text)
    if isinstance(data, Mapping):
        data = data.get("examples", [])
    return examples_from_json(data)


def load_predefined() -> dict[str, MotionSegment]:
    """The fixed per-emotion gestures used by the rule-based baseline."""
    text = resources.files("gesturesync").joinpath("data/predefined_gestures.json").read_text()
    return {e["emotion_tag"]: _motion_from_entry(e) for e in json.loads(text)}
