import json

import numpy as np
import pytest

from trigkit.corpus import (
    CLS_ID,
    PAD_ID,
    UNK_ID,
    Corpus,
    Sentence,
    SynthSpec,
    Vocab,
    build_vocab,
    generate_synthetic,
    load_corpus,
    make_batches,
    save_corpus,
)
from trigkit.errors import ConfigError, LengthError, ParseError, ValidationError
from trigkit.labels import TriggerSpan

FIGURE_LINE = {
    "doc_id": "doc-1",
    "sent_id": "s-1",
    "split": "train",
    "tokens": ["The", "company", "has", "agreed", "to", "pay", "Yukos", "..."],
    "triggers": [{"start": 5, "end": 6, "label": "Transaction.Transfer-Ownership"}],
}


def write_lines(tmp_path, lines, name="corpus.jsonl"):
    path = tmp_path / name
    path.write_text("".join(json.dumps(l) + "\n" for l in lines), encoding="utf-8")
    return path


def test_load_figure_style_sentence_round_trips(tmp_path):
    path = write_lines(tmp_path, [FIGURE_LINE])
    corpus = load_corpus(path)
    assert corpus.train[0].tokens[5] == "pay"
    assert corpus.train[0].triggers == [
        TriggerSpan(5, 6, "Transaction.Transfer-Ownership")
    ]
    out = tmp_path / "roundtrip.jsonl"
    save_corpus(corpus, out)
    assert json.loads(out.read_text().splitlines()[0]) == FIGURE_LINE


def test_empty_file_is_an_error(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    with pytest.raises(ValidationError, match="empty"):
        load_corpus(path)
    corpus = load_corpus(path, allow_empty=True)
    assert corpus.sentences == []


def test_malformed_line_reports_line_number(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps(FIGURE_LINE) + "\nnot json\n")
    with pytest.raises(ParseError, match="line 2"):
        load_corpus(path)


def test_missing_field_reports_line_number(tmp_path):
    line = dict(FIGURE_LINE)
    del line["tokens"]
    path = write_lines(tmp_path, [line])
    with pytest.raises(ParseError, match="line 1"):
        load_corpus(path)


def test_out_of_range_span_cites_sent_id(tmp_path):
    line = dict(FIGURE_LINE)
    line["triggers"] = [{"start": 7, "end": 9, "label": "X.Y"}]
    path = write_lines(tmp_path, [line])
    with pytest.raises(ValidationError, match="s-1"):
        load_corpus(path)


def test_overlapping_triggers_rejected(tmp_path):
    line = dict(FIGURE_LINE)
    line["triggers"] = [
        {"start": 1, "end": 3, "label": "A.B"},
        {"start": 2, "end": 4, "label": "A.B"},
    ]
    path = write_lines(tmp_path, [line])
    with pytest.raises(ValidationError, match="overlap"):
        load_corpus(path)


def test_dev_label_missing_from_train_rejected(tmp_path):
    dev_line = dict(FIGURE_LINE)
    dev_line["sent_id"] = "s-2"
    dev_line["split"] = "dev"
    dev_line["triggers"] = [{"start": 0, "end": 1, "label": "Justice.Fine"}]
    path = write_lines(tmp_path, [FIGURE_LINE, dev_line])
    with pytest.raises(ValidationError, match="Justice.Fine"):
        load_corpus(path)


def test_duplicate_sent_ids_rejected(tmp_path):
    path = write_lines(tmp_path, [FIGURE_LINE, FIGURE_LINE])
    with pytest.raises(ValidationError, match="duplicate"):
        load_corpus(path)


def test_unknown_extra_fields_are_ignored(tmp_path):
    line = dict(FIGURE_LINE)
    line["pred"] = True
    line["event_probability"] = 0.9
    corpus = load_corpus(write_lines(tmp_path, [line]))
    assert len(corpus.train) == 1


def test_label_set_from_train_only_sorted():
    train = [
        Sentence("d", "t0", ["a", "b"], [TriggerSpan(0, 1, "Z.z")]),
        Sentence("d", "t1", ["a", "b"], [TriggerSpan(1, 2, "A.a")]),
    ]
    corpus = Corpus.from_splits(train, [], [])
    assert corpus.label_set.trigger_types == ["A.a", "Z.z"]


# -- vocab ---------------------------------------------------------------------


def test_vocab_specials_and_unk():
    sents = [Sentence("d", "s0", ["b", "a", "b"], [])]
    vocab = build_vocab(sents, min_count=1)
    assert len(vocab) == 5
    assert vocab.encode(["a", "b", "unseen"]) == [3, 4, UNK_ID]
    assert (PAD_ID, UNK_ID, CLS_ID) == (0, 1, 2)


def test_vocab_min_count_filters():
    sents = [Sentence("d", "s0", ["rare", "common", "common"], [])]
    vocab = build_vocab(sents, min_count=2)
    assert vocab.lookup("rare") == UNK_ID
    assert vocab.lookup("common") > UNK_ID
    with pytest.raises(ConfigError):
        build_vocab(sents, min_count=0)


def test_vocab_deterministic_and_json_round_trip():
    sents = [Sentence("d", "s0", list("edcba"), [])]
    v1 = build_vocab(sents)
    v2 = build_vocab(sents)
    assert v1.id_to_token == v2.id_to_token
    assert Vocab.from_json(v1.to_json()).id_to_token == v1.id_to_token


# -- batching --------------------------------------------------------------------


def make_sents(lengths, label=None):
    out = []
    for i, n in enumerate(lengths):
        spans = [TriggerSpan(0, 1, label)] if label and i % 2 == 0 else []
        out.append(Sentence("d", f"s{i}", [f"tok{j}" for j in range(n)], spans))
    return out


def test_batch_sizes_and_padding(vocab, label_set):
    sents = make_sents([3, 5, 2, 4, 1, 2, 3, 5, 2, 1])
    batches = make_batches(sents, 3, vocab, label_set)
    assert [len(b) for b in batches] == [3, 3, 3, 1]
    first = batches[0]
    assert first.token_ids.shape == (3, 6)  # longest 5 tokens + [CLS]
    assert (first.token_ids[:, 0] == CLS_ID).all()
    assert not first.attn_keep[2, 3:].any()  # 2-token sentence padded out


def test_batch_y_matches_trigger_indicator(vocab, label_set):
    sents = make_sents([3, 3, 3, 3], label=label_set.trigger_types[0])
    batch = make_batches(sents, 4, vocab, label_set)[0]
    np.testing.assert_array_equal(batch.y, [1, 0, 1, 0])


def test_batch_shuffle_is_seeded(vocab, label_set):
    sents = make_sents([2] * 20)
    a = make_batches(sents, 4, vocab, label_set, rng=np.random.default_rng(5))
    b = make_batches(sents, 4, vocab, label_set, rng=np.random.default_rng(5))
    assert [[s.sent_id for s in x.sentences] for x in a] == [
        [s.sent_id for s in x.sentences] for x in b
    ]


def test_overlong_sentence_refused(vocab, label_set):
    sents = make_sents([9])
    with pytest.raises(LengthError, match="s0"):
        make_batches(sents, 1, vocab, label_set, max_len=8)


# -- synthetic corpora ------------------------------------------------------------


def test_synth_event_fraction_zero_all_negative():
    spec = SynthSpec(n_train=30, n_dev=5, n_test=5, event_fraction=0.0)
    corpus = generate_synthetic(spec, 1)
    assert all(not s.has_event for s in corpus.sentences)


def test_synth_event_fraction_one_all_positive():
    spec = SynthSpec(n_train=30, n_dev=5, n_test=5, event_fraction=1.0)
    corpus = generate_synthetic(spec, 2)
    assert all(s.has_event for s in corpus.sentences)


def test_synth_deterministic_under_seed():
    spec = SynthSpec(n_train=25, n_dev=5, n_test=5)
    a = generate_synthetic(spec, 7)
    b = generate_synthetic(spec, 7)
    assert [s.tokens for s in a.sentences] == [s.tokens for s in b.sentences]
    assert [s.triggers for s in a.sentences] == [s.triggers for s in b.sentences]


def test_synth_event_free_sentences_avoid_lexicon():
    spec = SynthSpec(n_train=60, n_dev=10, n_test=10, event_fraction=0.4)
    corpus = generate_synthetic(spec, 3)
    lexicon_words = {
        w for phrases in spec.lexicon().values() for p in phrases for w in p
    }
    for s in corpus.sentences:
        if not s.has_event:
            assert not lexicon_words & set(s.tokens)


def test_synth_gold_spans_are_exact():
    spec = SynthSpec(n_train=60, n_dev=10, n_test=10, event_fraction=0.5)
    corpus = generate_synthetic(spec, 4)
    lexicon = spec.lexicon()
    for s in corpus.sentences:
        for span in s.triggers:
            phrase = tuple(s.tokens[span.start : span.end])
            assert phrase in lexicon[span.label]


def test_synth_round_trips_through_loader(tmp_path):
    spec = SynthSpec(n_train=20, n_dev=5, n_test=5)
    corpus = generate_synthetic(spec, 5)
    path = tmp_path / "synth.jsonl"
    save_corpus(corpus, path)
    loaded = load_corpus(path)
    assert [s.tokens for s in loaded.sentences] == [s.tokens for s in corpus.sentences]
    assert [s.triggers for s in loaded.sentences] == [
        s.triggers for s in corpus.sentences
    ]
    assert loaded.label_set.trigger_types == corpus.label_set.trigger_types


def test_synth_infeasible_phrase_length_rejected():
    spec = SynthSpec(n_train=5, n_dev=1, n_test=1, min_tokens=1, max_tokens=1)
    with pytest.raises(ConfigError, match="phrase"):
        generate_synthetic(spec, 0)


def test_synth_bad_event_fraction_rejected():
    with pytest.raises(ConfigError):
        generate_synthetic(SynthSpec(event_fraction=1.5), 0)
