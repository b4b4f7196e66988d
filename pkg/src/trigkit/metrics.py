"""Trigger scoring and run comparison.

Scoring is exact-match and micro-averaged over the corpus: a predicted
span counts as correct only when its offsets and its full type label
match a gold span of the same sentence, and each gold span can absorb at
most one prediction (duplicates beyond the first are false positives).
Because matching is by exact equality, greedy multiset matching is
optimal; the test suite cross-checks this against brute-force search.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import AlignmentError
from .labels import TriggerSpan

CLASSIFICATION = "classification"  # offsets + full label must match
IDENTIFICATION = "identification"  # offsets only

SpanMap = Mapping[str, Sequence[TriggerSpan]]


def gold_fingerprint(gold: SpanMap) -> str:
    """Content hash of the gold spans, used to guard run comparisons."""
    canon = {
        sid: sorted((s.start, s.end, s.label) for s in spans)
        for sid, spans in gold.items()
    }
    payload = json.dumps(canon, sort_keys=True).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


@dataclass
class EvalReport:
    """Micro-averaged trigger scores plus sentence-level diagnostics."""

    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    sentence_event_accuracy: float | None
    n_pred_event_sentences: int
    misclassified_event_fraction: float
    confusion: dict[tuple[str, str], int] = field(default_factory=dict)
    gold_fingerprint: str = ""
    criterion: str = CLASSIFICATION

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int, **extra) -> "EvalReport":
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = (
            2.0 * precision * recall / (precision + recall)
            if precision + recall
            else 0.0
        )
        defaults = dict(
            sentence_event_accuracy=None,
            n_pred_event_sentences=0,
            misclassified_event_fraction=0.0,
        )
        defaults.update(extra)
        return cls(tp=tp, fp=fp, fn=fn, precision=precision, recall=recall, f1=f1,
                   **defaults)

    def to_json(self) -> dict:
        return {
            "criterion": self.criterion,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "prf_percent": {
                "precision": round(100.0 * self.precision, 1),
                "recall": round(100.0 * self.recall, 1),
                "f1": round(100.0 * self.f1, 1),
            },
            "sentence_event_accuracy": self.sentence_event_accuracy,
            "n_pred_event_sentences": self.n_pred_event_sentences,
            "misclassified_event_fraction": self.misclassified_event_fraction,
            "confusion": [
                {"gold": g, "pred": p, "count": n}
                for (g, p), n in sorted(self.confusion.items())
            ],
            "gold_fingerprint": self.gold_fingerprint,
        }


def _check_alignment(pred: SpanMap, gold: SpanMap) -> None:
    if set(pred) != set(gold):
        only_pred = sorted(set(pred) - set(gold))[:3]
        only_gold = sorted(set(gold) - set(pred))[:3]
        raise AlignmentError(
            f"prediction/gold sentence ids differ "
            f"(pred-only {only_pred}, gold-only {only_gold})"
        )


def _offset_pairs(
    pred: Sequence[TriggerSpan], gold: Sequence[TriggerSpan]
) -> list[tuple[str, str]]:
    """(gold_label, pred_label) pairs matched by offsets, preferring
    label-correct pairings so the diagonal equals the exact-match count."""
    pairs: list[tuple[str, str]] = []
    gold_left = Counter((s.start, s.end, s.label) for s in gold)
    pred_left: list[TriggerSpan] = []
    for span in sorted(pred):
        key = (span.start, span.end, span.label)
        if gold_left[key] > 0:
            gold_left[key] -= 1
            pairs.append((span.label, span.label))
        else:
            pred_left.append(span)
    remaining: dict[tuple[int, int], list[str]] = {}
    for (start, end, label), n in sorted(gold_left.items()):
        for _ in range(n):
            remaining.setdefault((start, end), []).append(label)
    for span in pred_left:
        labels = remaining.get((span.start, span.end))
        if labels:
            pairs.append((labels.pop(0), span.label))
    return pairs


def score_triggers(
    pred: SpanMap, gold: SpanMap, criterion: str = CLASSIFICATION
) -> EvalReport:
    """Micro-averaged exact-match scoring of predicted trigger spans.

    ``pred`` and ``gold`` map sent_id to span lists and must cover the
    same ids. ``criterion`` selects whether the label takes part in the
    match; the headline metric is classification.
    """
    if criterion not in (CLASSIFICATION, IDENTIFICATION):
        raise ValueError(f"unknown criterion {criterion!r}")
    _check_alignment(pred, gold)
    tp = fp = fn = 0
    confusion: Counter[tuple[str, str]] = Counter()
    for sid in gold:
        p, g = list(pred[sid]), list(gold[sid])
        if criterion == CLASSIFICATION:
            pc = Counter((s.start, s.end, s.label) for s in p)
            gc = Counter((s.start, s.end, s.label) for s in g)
        else:
            pc = Counter((s.start, s.end) for s in p)
            gc = Counter((s.start, s.end) for s in g)
        matched = sum((pc & gc).values())
        tp += matched
        fp += len(p) - matched
        fn += len(g) - matched
        confusion.update(_offset_pairs(p, g))
    n_offset_matched = sum(confusion.values())
    n_mislabeled = sum(n for (g, l), n in confusion.items() if g != l)
    report = EvalReport.from_counts(
        tp,
        fp,
        fn,
        sentence_event_accuracy=sentence_event_accuracy(pred, gold),
        n_pred_event_sentences=sum(1 for sid in pred if pred[sid]),
        misclassified_event_fraction=(
            n_mislabeled / n_offset_matched if n_offset_matched else 0.0
        ),
        confusion=dict(confusion),
        gold_fingerprint=gold_fingerprint(gold),
        criterion=criterion,
    )
    return report


def sentence_event_accuracy(pred: SpanMap, gold: SpanMap) -> float | None:
    """Of the sentences where the system predicts at least one trigger, the
    fraction whose gold annotation also has one. None when the system
    predicts no triggers anywhere (flagged, not zero)."""
    _check_alignment(pred, gold)
    predicted = [sid for sid in pred if pred[sid]]
    if not predicted:
        return None
    correct = sum(1 for sid in predicted if gold[sid])
    return correct / len(predicted)


def misclassification_fraction(pred: SpanMap, gold: SpanMap) -> float:
    """Among offset-matched predictions, the fraction carrying the wrong
    label; 0.0 when nothing offset-matches."""
    _check_alignment(pred, gold)
    pairs: list[tuple[str, str]] = []
    for sid in gold:
        pairs.extend(_offset_pairs(list(pred[sid]), list(gold[sid])))
    if not pairs:
        return 0.0
    return sum(1 for g, p in pairs if g != p) / len(pairs)


@dataclass
class RunComparison:
    """Field-by-field diff of two reports over identical gold."""

    fp_a: int
    fp_b: int
    fp_ratio: float | None  # fp_a / fp_b; None when undefined (fp_b == 0 < fp_a)
    precision_delta: float
    recall_delta: float
    f1_delta: float
    sentence_event_accuracy_delta: float | None
    gold_fingerprint: str

    def to_json(self) -> dict:
        return {
            "fp_a": self.fp_a,
            "fp_b": self.fp_b,
            "fp_ratio": self.fp_ratio,
            "precision_delta": self.precision_delta,
            "recall_delta": self.recall_delta,
            "f1_delta": self.f1_delta,
            "sentence_event_accuracy_delta": self.sentence_event_accuracy_delta,
            "gold_fingerprint": self.gold_fingerprint,
        }


def compare_runs(report_a: EvalReport, report_b: EvalReport) -> RunComparison:
    """Diff two reports; refuses to compare runs over different gold."""
    if report_a.gold_fingerprint != report_b.gold_fingerprint:
        raise AlignmentError("reports were computed over different gold corpora")
    if report_a.criterion != report_b.criterion:
        raise AlignmentError("reports use different matching criteria")
    if report_a.fp == report_b.fp:
        fp_ratio: float | None = 1.0
    elif report_b.fp == 0:
        fp_ratio = None
    else:
        fp_ratio = report_a.fp / report_b.fp
    if (
        report_a.sentence_event_accuracy is None
        or report_b.sentence_event_accuracy is None
    ):
        acc_delta: float | None = None
    else:
        acc_delta = report_a.sentence_event_accuracy - report_b.sentence_event_accuracy
    return RunComparison(
        fp_a=report_a.fp,
        fp_b=report_b.fp,
        fp_ratio=fp_ratio,
        precision_delta=report_a.precision - report_b.precision,
        recall_delta=report_a.recall - report_b.recall,
        f1_delta=report_a.f1 - report_b.f1,
        sentence_event_accuracy_delta=acc_delta,
        gold_fingerprint=report_a.gold_fingerprint,
    )
