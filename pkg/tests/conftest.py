import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make `oracles` importable

from trigkit.corpus import Sentence, Vocab, make_batch
from trigkit.encoder import EncoderConfig
from trigkit.labels import LabelSet, TriggerSpan
from trigkit.model import TriggerModel


@pytest.fixture
def label_set() -> LabelSet:
    return LabelSet(["Conflict.Attack", "Movement.Transport"])


@pytest.fixture
def vocab() -> Vocab:
    return Vocab(["alpha", "beta", "gamma", "delta", "zeta"])


@pytest.fixture
def two_sentences(label_set) -> list[Sentence]:
    return [
        Sentence(
            "d0", "s0",
            ["alpha", "beta", "gamma", "delta"],
            [TriggerSpan(1, 3, label_set.trigger_types[0])],
        ),
        Sentence("d0", "s1", ["beta", "alpha", "zeta"], []),
    ]


def build_model(
    vocab: Vocab,
    label_set: LabelSet,
    seed: int = 0,
    d_model: int = 16,
    n_heads: int = 2,
    n_layers: int = 2,
    d_ff: int = 32,
    dropout_p: float = 0.0,
    max_len: int = 16,
) -> TriggerModel:
    cfg = EncoderConfig(
        vocab_size=len(vocab),
        d_model=d_model,
        n_heads=n_heads,
        n_layers=n_layers,
        d_ff=d_ff,
        max_len=max_len,
        dropout_p=dropout_p,
    )
    return TriggerModel(cfg, vocab, label_set, np.random.default_rng(seed))


@pytest.fixture
def tiny_model(vocab, label_set) -> TriggerModel:
    return build_model(vocab, label_set)


@pytest.fixture
def tiny_batch(two_sentences, vocab, label_set):
    return make_batch(two_sentences, vocab, label_set, max_len=16)
