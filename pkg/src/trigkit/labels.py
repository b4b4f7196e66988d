"""Trigger spans and the IOB2 tag codec.

Tag ids are fully determined by the ordered list of trigger type names:
id 0 is O, and type ``t`` at position ``k`` owns ids ``2k+1`` (B-t) and
``2k+2`` (I-t).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import ValidationError

O_TAG = 0


@dataclass(frozen=True, order=True)
class TriggerSpan:
    """A trigger mention: token interval [start, end) plus its type label."""

    start: int
    end: int
    label: str

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise ValidationError(
                f"invalid span boundaries ({self.start}, {self.end})"
            )


def check_spans(n_tokens: int, spans: Sequence[TriggerSpan], where: str = "") -> None:
    """Reject spans that leave the sentence or overlap each other."""
    ctx = f" in {where}" if where else ""
    for span in spans:
        if span.end > n_tokens:
            raise ValidationError(
                f"span ({span.start}, {span.end}) exceeds {n_tokens} tokens{ctx}"
            )
    ordered = sorted(spans, key=lambda s: (s.start, s.end))
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.start < prev.end:
            raise ValidationError(
                f"overlapping spans ({prev.start}, {prev.end}) and "
                f"({cur.start}, {cur.end}){ctx}"
            )


class LabelSet:
    """Bijection between trigger type names and IOB2 tag ids."""

    def __init__(self, trigger_types: Iterable[str]):
        self.trigger_types = list(trigger_types)
        if len(set(self.trigger_types)) != len(self.trigger_types):
            raise ValidationError("trigger types must be distinct")
        self._b_id = {t: 2 * k + 1 for k, t in enumerate(self.trigger_types)}
        self._i_id = {t: 2 * k + 2 for k, t in enumerate(self.trigger_types)}

    @classmethod
    def from_labels(cls, labels: Iterable[str]) -> "LabelSet":
        """Build from any label collection; order is lexicographic, which
        pins tag-id assignment across runs."""
        return cls(sorted(set(labels)))

    @property
    def n_types(self) -> int:
        return len(self.trigger_types)

    @property
    def n_tags(self) -> int:
        return 2 * self.n_types + 1

    def b_id(self, label: str) -> int:
        return self._b_id[label]

    def i_id(self, label: str) -> int:
        return self._i_id[label]

    def tag_name(self, tag_id: int) -> str:
        self._check(tag_id)
        if tag_id == O_TAG:
            return "O"
        prefix = "B" if tag_id % 2 == 1 else "I"
        return f"{prefix}-{self.trigger_types[(tag_id - 1) // 2]}"

    def tag_label(self, tag_id: int) -> str | None:
        """The trigger type carried by a tag id, or None for O."""
        self._check(tag_id)
        if tag_id == O_TAG:
            return None
        return self.trigger_types[(tag_id - 1) // 2]

    def is_begin(self, tag_id: int) -> bool:
        self._check(tag_id)
        return tag_id != O_TAG and tag_id % 2 == 1

    def _check(self, tag_id: int) -> None:
        if not 0 <= tag_id < self.n_tags:
            raise ValidationError(f"unknown tag id {tag_id} for {self.n_tags} tags")

    def __eq__(self, other) -> bool:
        return isinstance(other, LabelSet) and self.trigger_types == other.trigger_types

    def __repr__(self) -> str:
        return f"LabelSet({self.trigger_types!r})"


def encode_iob2(
    n_tokens: int, spans: Sequence[TriggerSpan], label_set: LabelSet
) -> list[int]:
    """Tag ids for a sentence: B on each span's first token, I after, O elsewhere."""
    check_spans(n_tokens, spans)
    tags = [O_TAG] * n_tokens
    for span in spans:
        tags[span.start] = label_set.b_id(span.label)
        for i in range(span.start + 1, span.end):
            tags[i] = label_set.i_id(span.label)
    return tags


def decode_iob2(tag_ids: Sequence[int], label_set: LabelSet) -> list[TriggerSpan]:
    """Recover maximal spans from any tag sequence, including ill-formed ones.

    Repair policy: a stray I (after O, at the start, or after a tag of a
    different type) opens a new span, as if it were B. Total on every
    input; the result never overlaps.
    """
    spans: list[TriggerSpan] = []
    open_label: str | None = None
    open_start = 0

    def close(end: int) -> None:
        nonlocal open_label
        if open_label is not None:
            spans.append(TriggerSpan(open_start, end, open_label))
            open_label = None

    for i, tag_id in enumerate(tag_ids):
        label = label_set.tag_label(tag_id)
        if label is None:
            close(i)
        elif label_set.is_begin(tag_id) or label != open_label:
            close(i)
            open_label = label
            open_start = i
    close(len(tag_ids))
    return spans
