"""Input validation helpers for the estimator API."""

from __future__ import annotations

from typing import Sequence

from .corpus import Sentence
from .errors import ValidationError
from .labels import TriggerSpan


def check_token_sequences(X) -> list[list[str]]:
    """Coerce X to a list of token lists; strings are rejected to catch the
    classic untokenized-input mistake."""
    if isinstance(X, str):
        raise ValidationError("X must be a sequence of token sequences, not a string")
    out = []
    for i, tokens in enumerate(X):
        if isinstance(tokens, str):
            raise ValidationError(
                f"X[{i}] is a string; pass tokenized sentences (lists of tokens)"
            )
        toks = list(tokens)
        if not all(isinstance(t, str) for t in toks):
            raise ValidationError(f"X[{i}] contains non-string tokens")
        out.append(toks)
    return out


def normalize_spans(spans) -> list[TriggerSpan]:
    """Accept TriggerSpan objects or (start, end, label) triples."""
    out = []
    for span in spans:
        if isinstance(span, TriggerSpan):
            out.append(span)
        else:
            start, end, label = span
            out.append(TriggerSpan(int(start), int(end), str(label)))
    return out


def as_sentences(X, y, prefix: str) -> list[Sentence]:
    """Pair token lists with span annotations as corpus sentences.

    Span range and overlap checks happen in the Sentence constructor.
    """
    tokens = check_token_sequences(X)
    if y is None:
        annotations: Sequence = [[] for _ in tokens]
    else:
        annotations = list(y)
    if len(annotations) != len(tokens):
        raise ValidationError(
            f"X and y disagree in length: {len(tokens)} vs {len(annotations)}"
        )
    return [
        Sentence(
            doc_id=f"{prefix}-doc",
            sent_id=f"{prefix}-{i:05d}",
            tokens=toks,
            triggers=normalize_spans(spans),
        )
        for i, (toks, spans) in enumerate(zip(tokens, annotations))
    ]
