"""Independent reference computations for derived test values.

Nothing here imports gesturesync. Arithmetic is done with exact rationals or
plain loops so a shared bug cannot make both sides agree.
"""

from __future__ import annotations

import math
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction


def quantize(t: float, res: str = "0.0001") -> Fraction:
    q = Decimal(repr(t)).quantize(Decimal(res), rounding=ROUND_HALF_UP)
    return Fraction(q)


def weights(durations: list[str]) -> list[Fraction]:
    d = [Fraction(x) for x in durations]
    total = sum(d)
    return [x / total for x in d]


def start_times(alphas: list[Fraction], total: Fraction) -> list[Fraction]:
    out, acc = [], Fraction(0)
    for a in alphas:
        out.append(total * acc)
        acc += a
    return out


def sync_error(speech: list[str], motion: list[str]) -> Fraction:
    pairs = [(Fraction(s), Fraction(m)) for s, m in zip(speech, motion)]
    return sum(abs(s - m) for s, m in pairs) / len(pairs)


def tsa_ms(gesture: list[str], speech: list[str], lam: list[str]) -> Fraction:
    terms = [abs(Fraction(g) - Fraction(l) * Fraction(s)) for g, s, l in zip(gesture, speech, lam)]
    return 1000 * sum(terms) / len(terms)


def final_pose(tracks: dict[str, list[tuple[float, float]]]) -> dict[str, float]:
    out = {}
    for joint, frames in tracks.items():
        best = None
        for t, a in frames:
            if best is None or t > best[0]:
                best = (t, a)
        out[joint] = best[1]
    return out


def _tokens(text: str) -> list[str]:
    word, out = "", []
    for ch in text.lower():
        if ch.isalnum() or ch == "'":
            word += ch
        elif word:
            out.append(word)
            word = ""
    if word:
        out.append(word)
    return out


def tfidf_cosines(phrases: list[str], query: str) -> list[float]:
    """Smoothed TF-IDF cosine of ``query`` against each phrase, by explicit loops."""
    docs = [_tokens(p) for p in phrases]
    n = len(docs)
    idf = {}
    for doc in docs:
        for w in set(doc):
            idf[w] = idf.get(w, 0) + 1
    idf = {w: math.log((1 + n) / (1 + df)) + 1 for w, df in idf.items()}

    def vec(words):
        v = {}
        for w in words:
            if w in idf:
                v[w] = v.get(w, 0.0) + idf[w]
        norm = math.sqrt(sum(x * x for x in v.values()))
        return {w: x / norm for w, x in v.items()} if norm else {}

    q = vec(_tokens(query))
    return [sum(q.get(w, 0.0) * x for w, x in vec(d).items()) for d in docs]


def simplify(times: list[float], keys: list[float], max_keyframes: int) -> list[int]:
    """Indices kept: endpoints plus the interior keys farthest from the endpoint chord."""
    n = len(times)
    if n <= 2:
        return list(range(n))
    t0, t1, a0, a1 = times[0], times[-1], keys[0], keys[-1]
    devs = []
    for i in range(1, n - 1):
        chord = a0 + (a1 - a0) * (times[i] - t0) / (t1 - t0)
        devs.append((abs(keys[i] - chord), i))
    # sort by deviation descending, index ascending
    devs.sort(key=lambda p: (-p[0], p[1]))
    keep = [i for d, i in devs[: max_keyframes - 2] if d > 1e-12]
    return [0] + sorted(keep) + [n - 1]


def cubic_jerk() -> float:
    """d^3/dt^3 of t^3."""
    return 6.0


def spearman(xs: list[float], ys: list[float]) -> float:
    """Spearman rho with average ranks for ties."""

    def ranks(v):
        order = sorted(range(len(v)), key=lambda i: v[i])
        r = [0.0] * len(v)
        i = 0
        while i < len(order):
            j = i
            while j + 1 < len(order) and v[order[j + 1]] == v[order[i]]:
                j += 1
            for k in range(i, j + 1):
                r[order[k]] = (i + j) / 2 + 1
            i = j + 1
        return r

    rx, ry = ranks(xs), ranks(ys)
    mx, my = sum(rx) / len(rx), sum(ry) / len(ry)
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    sx = math.sqrt(sum((a - mx) ** 2 for a in rx))
    sy = math.sqrt(sum((b - my) ** 2 for b in ry))
    return cov / (sx * sy)
