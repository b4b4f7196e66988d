"""Corpus data model, JSONL ingestion, vocabulary, batching, synthesis.

Corpus files are UTF-8 JSONL, one sentence per line:

    {"doc_id": str, "sent_id": str, "split": "train"|"dev"|"test",
     "tokens": [str], "triggers": [{"start": int, "end": int, "label": str}]}

``end`` is exclusive. Unknown fields are ignored on read, never written.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, LengthError, ParseError, ValidationError
from .labels import LabelSet, TriggerSpan, check_spans, encode_iob2

SPLITS = ("train", "dev", "test")

PAD_ID = 0
UNK_ID = 1
CLS_ID = 2
N_SPECIALS = 3


@dataclass
class Sentence:
    """Tokens plus gold trigger spans; the unit of labeling and scoring."""

    doc_id: str
    sent_id: str
    tokens: list[str]
    triggers: list[TriggerSpan] = field(default_factory=list)

    def __post_init__(self):
        check_spans(len(self.tokens), self.triggers, where=f"sentence {self.sent_id!r}")

    @property
    def has_event(self) -> bool:
        return bool(self.triggers)


@dataclass
class Corpus:
    train: list[Sentence]
    dev: list[Sentence]
    test: list[Sentence]
    label_set: LabelSet

    def split(self, name: str) -> list[Sentence]:
        if name not in SPLITS:
            raise ConfigError(f"unknown split {name!r}")
        return getattr(self, name)

    @property
    def sentences(self) -> list[Sentence]:
        return self.train + self.dev + self.test

    @classmethod
    def from_splits(
        cls, train: Sequence[Sentence], dev: Sequence[Sentence], test: Sequence[Sentence]
    ) -> "Corpus":
        """Assemble and validate; the label set comes from train triggers only."""
        label_set = LabelSet.from_labels(
            span.label for sent in train for span in sent.triggers
        )
        seen_ids: set[str] = set()
        for sent in (*train, *dev, *test):
            if sent.sent_id in seen_ids:
                raise ValidationError(f"duplicate sent_id {sent.sent_id!r}")
            seen_ids.add(sent.sent_id)
        known = set(label_set.trigger_types)
        for name, sents in (("dev", dev), ("test", test)):
            for sent in sents:
                for span in sent.triggers:
                    if span.label not in known:
                        raise ValidationError(
                            f"{name} sentence {sent.sent_id!r} uses label "
                            f"{span.label!r} absent from the train label set"
                        )
        return cls(list(train), list(dev), list(test), label_set)


def _sentence_from_record(record: Mapping, lineno: int) -> tuple[Sentence, str]:
    try:
        doc_id = record["doc_id"]
        sent_id = record["sent_id"]
        split = record["split"]
        tokens = record["tokens"]
        triggers = record["triggers"]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"line {lineno}: missing field {exc}") from exc
    if split not in SPLITS:
        raise ParseError(f"line {lineno}: unknown split {split!r}")
    if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
        raise ParseError(f"line {lineno}: tokens must be a list of strings")
    try:
        spans = [
            TriggerSpan(int(t["start"]), int(t["end"]), str(t["label"]))
            for t in triggers
        ]
        sentence = Sentence(str(doc_id), str(sent_id), list(tokens), spans)
    except (KeyError, TypeError) as exc:
        raise ParseError(f"line {lineno}: malformed trigger entry: {exc}") from exc
    except ValidationError as exc:
        raise ValidationError(f"line {lineno} (sent_id {sent_id!r}): {exc}") from exc
    return sentence, split


def load_corpus(path: str | Path, allow_empty: bool = False) -> Corpus:
    """Read and validate a JSONL corpus file."""
    path = Path(path)
    by_split: dict[str, list[Sentence]] = {name: [] for name in SPLITS}
    n_lines = 0
    try:
        handle = path.open("r", encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read corpus file {path}: {exc}") from exc
    with handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            n_lines += 1
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"line {lineno}: invalid JSON: {exc.msg}") from exc
            sentence, split = _sentence_from_record(record, lineno)
            by_split[split].append(sentence)
    if n_lines == 0 and not allow_empty:
        raise ValidationError(f"empty corpus file: {path}")
    return Corpus.from_splits(by_split["train"], by_split["dev"], by_split["test"])


def sentence_to_record(sentence: Sentence, split: str) -> dict:
    return {
        "doc_id": sentence.doc_id,
        "sent_id": sentence.sent_id,
        "split": split,
        "tokens": sentence.tokens,
        "triggers": [
            {"start": s.start, "end": s.end, "label": s.label}
            for s in sentence.triggers
        ],
    }


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for split in SPLITS:
            for sentence in corpus.split(split):
                handle.write(json.dumps(sentence_to_record(sentence, split)) + "\n")


# -- vocabulary ---------------------------------------------------------------


class Vocab:
    """Token-to-id map with [PAD]=0, [UNK]=1, [CLS]=2; ids dense from 0.

    Built from train tokens only; tokens below ``min_count`` fall back to
    [UNK], and dev/test never extend the map.
    """

    def __init__(self, tokens_in_id_order: Sequence[str]):
        self.id_to_token = ["[PAD]", "[UNK]", "[CLS]", *tokens_in_id_order]
        self.token_to_id = {tok: i + N_SPECIALS for i, tok in enumerate(tokens_in_id_order)}
        if len(self.token_to_id) != len(tokens_in_id_order):
            raise ValidationError("vocabulary tokens must be distinct")

    def __len__(self) -> int:
        return len(self.id_to_token)

    def lookup(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self.lookup(t) for t in tokens]

    def to_json(self) -> list[str]:
        return self.id_to_token[N_SPECIALS:]

    @classmethod
    def from_json(cls, tokens: Sequence[str]) -> "Vocab":
        return cls(list(tokens))


def build_vocab(train_sentences: Iterable[Sentence], min_count: int = 1) -> Vocab:
    if min_count < 1:
        raise ConfigError(f"min_count must be >= 1, got {min_count}")
    counts: dict[str, int] = {}
    for sentence in train_sentences:
        for token in sentence.tokens:
            counts[token] = counts.get(token, 0) + 1
    kept = sorted(tok for tok, n in counts.items() if n >= min_count)
    return Vocab(kept)


# -- batching -----------------------------------------------------------------


@dataclass
class Batch:
    """Padded id matrices for one batch of sentences.

    ``token_ids`` has a [CLS] column 0 and [PAD] filler; ``attn_keep``
    marks positions attention may look at (CLS and real tokens);
    ``gold_tags``/``token_mask`` cover the token positions only, i.e.
    columns 1.. of the encoder output. ``y`` is derived from the gold
    spans at assembly and is 1 exactly when a sentence has a trigger.
    """

    sentences: list[Sentence]
    token_ids: np.ndarray
    attn_keep: np.ndarray
    gold_tags: np.ndarray
    token_mask: np.ndarray
    y: np.ndarray

    def __len__(self) -> int:
        return len(self.sentences)


def make_batch(
    sentences: Sequence[Sentence],
    vocab: Vocab,
    label_set: LabelSet,
    max_len: int | None = None,
) -> Batch:
    longest = max((len(s.tokens) for s in sentences), default=0)
    if max_len is not None and longest + 1 > max_len:
        culprit = next(s for s in sentences if len(s.tokens) + 1 > max_len)
        raise LengthError(
            f"sentence {culprit.sent_id!r} has {len(culprit.tokens)} tokens; "
            f"limit is {max_len - 1} (truncation is refused)"
        )
    n = len(sentences)
    token_ids = np.full((n, longest + 1), PAD_ID, dtype=np.intp)
    token_ids[:, 0] = CLS_ID
    attn_keep = np.zeros((n, longest + 1), dtype=bool)
    attn_keep[:, 0] = True
    gold_tags = np.zeros((n, longest), dtype=np.intp)
    token_mask = np.zeros((n, longest), dtype=bool)
    y = np.zeros(n, dtype=np.intp)
    for i, sentence in enumerate(sentences):
        k = len(sentence.tokens)
        token_ids[i, 1 : k + 1] = vocab.encode(sentence.tokens)
        attn_keep[i, 1 : k + 1] = True
        gold_tags[i, :k] = encode_iob2(k, sentence.triggers, label_set)
        token_mask[i, :k] = True
        y[i] = 1 if sentence.has_event else 0
    return Batch(list(sentences), token_ids, attn_keep, gold_tags, token_mask, y)


def make_batches(
    sentences: Sequence[Sentence],
    batch_size: int,
    vocab: Vocab,
    label_set: LabelSet,
    rng: np.random.Generator | None = None,
    max_len: int | None = None,
) -> list[Batch]:
    """Chunk sentences into padded batches, optionally shuffling first."""
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
    order = list(sentences)
    if rng is not None:
        order = [order[i] for i in rng.permutation(len(order))]
    return [
        make_batch(order[i : i + batch_size], vocab, label_set, max_len)
        for i in range(0, len(order), batch_size)
    ]


# -- synthetic corpora --------------------------------------------------------

Phrase = tuple[str, ...]

DEFAULT_LABELS = (
    "Conflict.Attack",
    "Movement.Transport",
    "Transaction.Transfer-Ownership",
)


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a synthetic trigger-detection corpus.

    Event sentences embed one or more trigger phrases from a per-label
    lexicon; filler tokens come from a disjoint pool, so event-free
    sentences never contain a lexicon word.
    """

    n_train: int = 100
    n_dev: int = 20
    n_test: int = 20
    event_fraction: float = 0.3
    labels: tuple[str, ...] = DEFAULT_LABELS
    phrases_per_label: int = 2
    multi_word_fraction: float = 0.25
    filler_vocab_size: int = 40
    min_tokens: int = 4
    max_tokens: int = 12
    max_triggers_per_sentence: int = 2

    def validate(self) -> None:
        if not 0.0 <= self.event_fraction <= 1.0:
            raise ConfigError(
                f"event_fraction must be in [0, 1], got {self.event_fraction}"
            )
        if not 0.0 <= self.multi_word_fraction <= 1.0:
            raise ConfigError(
                f"multi_word_fraction must be in [0, 1], got {self.multi_word_fraction}"
            )
        if min(self.n_train, self.n_dev, self.n_test) < 0:
            raise ConfigError("split sizes must be non-negative")
        if self.n_train < 1:
            raise ConfigError("need at least one train sentence")
        if not 1 <= self.min_tokens <= self.max_tokens:
            raise ConfigError(
                f"need 1 <= min_tokens <= max_tokens, got "
                f"{self.min_tokens}..{self.max_tokens}"
            )
        if self.filler_vocab_size < 1 or self.phrases_per_label < 1:
            raise ConfigError("filler_vocab_size and phrases_per_label must be >= 1")
        if self.max_triggers_per_sentence < 1:
            raise ConfigError("max_triggers_per_sentence must be >= 1")
        if not self.labels or len(set(self.labels)) != len(self.labels):
            raise ConfigError("labels must be non-empty and distinct")
        longest = max(len(p) for ps in self.lexicon().values() for p in ps)
        if longest > self.max_tokens:
            raise ConfigError(
                f"a trigger phrase of {longest} words cannot fit in "
                f"{self.max_tokens}-token sentences"
            )

    def lexicon(self) -> dict[str, list[Phrase]]:
        """Per-label trigger phrases; one two-word phrase per label when
        multi-word triggers are requested."""
        lex: dict[str, list[Phrase]] = {}
        for i, label in enumerate(self.labels):
            phrases: list[Phrase] = [
                (f"ev{i}w{j}",) for j in range(self.phrases_per_label)
            ]
            if self.multi_word_fraction > 0.0:
                phrases.append((f"ev{i}m0", f"ev{i}m1"))
            lex[label] = phrases
        return lex


def _synth_sentence(
    spec: SynthSpec,
    lexicon: dict[str, list[Phrase]],
    fillers: list[str],
    with_event: bool,
    rng: np.random.Generator,
) -> tuple[list[str], list[TriggerSpan]]:
    longest = max(len(p) for ps in lexicon.values() for p in ps)
    low = max(spec.min_tokens, longest) if with_event else spec.min_tokens
    length = int(rng.integers(low, spec.max_tokens + 1))
    tokens = [fillers[i] for i in rng.integers(0, len(fillers), size=length)]
    spans: list[TriggerSpan] = []
    if not with_event:
        return tokens, spans
    occupied = np.zeros(length, dtype=bool)
    n_spans = int(rng.integers(1, spec.max_triggers_per_sentence + 1))
    for _ in range(n_spans):
        label = spec.labels[int(rng.integers(0, len(spec.labels)))]
        phrases = lexicon[label]
        multi = [p for p in phrases if len(p) > 1]
        single = [p for p in phrases if len(p) == 1]
        if multi and (not single or rng.random() < spec.multi_word_fraction):
            phrase = multi[int(rng.integers(0, len(multi)))]
        else:
            phrase = single[int(rng.integers(0, len(single)))]
        starts = [
            s
            for s in range(length - len(phrase) + 1)
            if not occupied[s : s + len(phrase)].any()
        ]
        if not starts:
            continue  # sentence is full; earlier spans already make it an event
        start = starts[int(rng.integers(0, len(starts)))]
        tokens[start : start + len(phrase)] = list(phrase)
        occupied[start : start + len(phrase)] = True
        spans.append(TriggerSpan(start, start + len(phrase), label))
    spans.sort(key=lambda s: s.start)
    return tokens, spans


def generate_synthetic(spec: SynthSpec, rng: np.random.Generator | int) -> Corpus:
    """Build a deterministic synthetic corpus from the spec and rng."""
    spec.validate()
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    lexicon = spec.lexicon()
    fillers = [f"w{j:03d}" for j in range(spec.filler_vocab_size)]
    splits: dict[str, list[Sentence]] = {}
    for split, count in (("train", spec.n_train), ("dev", spec.n_dev), ("test", spec.n_test)):
        n_events = int(round(spec.event_fraction * count))
        flags = np.zeros(count, dtype=bool)
        flags[rng.permutation(count)[:n_events]] = True
        sentences = []
        for i in range(count):
            tokens, spans = _synth_sentence(spec, lexicon, fillers, bool(flags[i]), rng)
            sentences.append(
                Sentence(
                    doc_id=f"{split}-doc{i // 10:04d}",
                    sent_id=f"{split}-{i:05d}",
                    tokens=tokens,
                    triggers=spans,
                )
            )
        splits[split] = sentences
    return Corpus.from_splits(splits["train"], splits["dev"], splits["test"])
