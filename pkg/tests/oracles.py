"""Independent reference implementations used as test oracles.

These stay deliberately separate from the production code paths they
check: finite differences for gradients, a run-grouping span decoder for
the IOB2 codec, and exhaustive search for the span matcher.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from trigkit.labels import LabelSet, TriggerSpan


def finite_difference(f: Callable[[], float], x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` w.r.t. ``x``, mutating one
    component at a time; ``f`` must read ``x`` afresh on each call."""
    grad = np.zeros_like(x)
    flat = x.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + h
        up = f()
        flat[i] = keep - h
        down = f()
        flat[i] = keep
        gflat[i] = (up - down) / (2.0 * h)
    return grad


def assert_gradients_close(analytic: np.ndarray, numeric: np.ndarray,
                           rtol: float = 1e-4, atol: float = 1e-8) -> None:
    gap = np.abs(analytic - numeric)
    bound = rtol * np.maximum(np.abs(analytic), np.abs(numeric)) + atol
    worst = float((gap - bound).max())
    assert (gap <= bound).all(), f"gradient mismatch, worst excess {worst:.3e}"


def reference_decode(tag_ids: list[int], label_set: LabelSet) -> list[TriggerSpan]:
    """Decode by grouping runs of equal-type tags, splitting before each
    explicit B tag. Same repair policy as production, different structure."""
    labels = [label_set.tag_label(t) for t in tag_ids]
    begins = [label_set.is_begin(t) for t in tag_ids]
    spans = []
    i = 0
    n = len(tag_ids)
    while i < n:
        if labels[i] is None:
            i += 1
            continue
        j = i + 1
        while j < n and labels[j] == labels[i] and not begins[j]:
            j += 1
        spans.append(TriggerSpan(i, j, labels[i]))
        i = j
    return spans


def brute_force_match_count(
    pred: list[TriggerSpan],
    gold: list[TriggerSpan],
    match: Callable[[TriggerSpan, TriggerSpan], bool],
) -> int:
    """Maximum 1:1 matching size by exhaustive search (small inputs only)."""
    best = 0

    def recurse(i: int, used: frozenset[int], count: int) -> None:
        nonlocal best
        best = max(best, count)
        if i == len(pred):
            return
        recurse(i + 1, used, count)
        for j, g in enumerate(gold):
            if j not in used and match(pred[i], g):
                recurse(i + 1, used | {j}, count + 1)

    recurse(0, frozenset(), 0)
    return best


def match_classification(a: TriggerSpan, b: TriggerSpan) -> bool:
    return (a.start, a.end, a.label) == (b.start, b.end, b.label)


def match_identification(a: TriggerSpan, b: TriggerSpan) -> bool:
    return (a.start, a.end) == (b.start, b.end)


def random_span_set(
    rng: np.random.Generator, n_tokens: int, labels: list[str], max_spans: int = 3
) -> list[TriggerSpan]:
    """A random valid (non-overlapping, in-range) span set."""
    spans = []
    occupied = np.zeros(n_tokens, dtype=bool)
    for _ in range(int(rng.integers(0, max_spans + 1))):
        width = int(rng.integers(1, min(3, n_tokens) + 1))
        starts = [
            s for s in range(n_tokens - width + 1) if not occupied[s : s + width].any()
        ]
        if not starts:
            break
        start = int(rng.choice(starts))
        occupied[start : start + width] = True
        spans.append(
            TriggerSpan(start, start + width, labels[int(rng.integers(0, len(labels)))])
        )
    spans.sort()
    return spans
