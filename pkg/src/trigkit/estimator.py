"""Scikit-learn style estimator wrapping the trigger tagging model.

X is a sequence of tokenized sentences (lists of strings); y is a
sequence of span annotations, each span a TriggerSpan or a
(start, end, label) triple with an exclusive end. The estimator follows
the sklearn parameter contract, so it composes with ``clone`` and grid
utilities out of the box.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .corpus import Corpus, Sentence
from .harness import TrainConfig, train
from .labels import TriggerSpan
from .metrics import score_triggers
from .model import predict_sentences
from .validation import as_sentences


class TriggerTagger(BaseEstimator):
    """Transformer sequence labeler for event trigger spans.

    Trains a joint objective: a token-level IOB2 tagging loss plus, when
    ``sep_weight`` is nonzero, an auxiliary sentence-level event-presence
    loss computed from the [CLS] vector. The auxiliary head never filters
    predictions; it only shapes training and reports a per-sentence event
    probability.
    """

    def __init__(
        self,
        d_model: int = 64,
        n_heads: int = 4,
        n_layers: int = 2,
        d_ff: int = 128,
        max_len: int = 64,
        dropout: float = 0.1,
        sep_weight: float = 1.0,
        epochs: int = 50,
        learning_rate: float = 1e-3,
        batch_size: int = 8,
        min_count: int = 1,
        grad_clip: float | None = None,
        seed: int = 0,
    ):
        self.d_model = d_model
        self.n_heads = n_heads
        self.n_layers = n_layers
        self.d_ff = d_ff
        self.max_len = max_len
        self.dropout = dropout
        self.sep_weight = sep_weight
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.min_count = min_count
        self.grad_clip = grad_clip
        self.seed = seed

    def _config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            seeds=(self.seed,),
            learning_rates=(self.learning_rate,),
            batch_size=self.batch_size,
            dropout_p=self.dropout,
            sep_weight=self.sep_weight,
            d_model=self.d_model,
            n_heads=self.n_heads,
            n_layers=self.n_layers,
            d_ff=self.d_ff,
            max_len=self.max_len,
            min_count=self.min_count,
            grad_clip=self.grad_clip,
        )

    def fit(self, X, y, dev=None):
        """Train on (X, y); ``dev`` is an optional (X_dev, y_dev) pair used
        for best-epoch selection. Without it, selection runs on a mirror of
        the training data, i.e. the last best-training-F1 epoch wins."""
        train_sents = as_sentences(X, y, "train")
        if dev is not None:
            dev_sents = as_sentences(dev[0], dev[1], "dev")
        else:
            dev_sents = [
                Sentence(s.doc_id, f"dev-{i:05d}", list(s.tokens), list(s.triggers))
                for i, s in enumerate(train_sents)
            ]
        corpus = Corpus.from_splits(train_sents, dev_sents, [])
        record = train(corpus, self._config(), seed=self.seed, lr=self.learning_rate)
        self.model_ = record.model
        self.label_set_ = record.model.label_set
        self.vocab_ = record.model.vocab
        self.best_epoch_ = record.best_epoch
        self.best_dev_f1_ = record.best_dev_f1
        self.history_ = record.epoch_metrics
        return self

    def predict(self, X) -> list[list[TriggerSpan]]:
        """Decoded trigger spans for each sentence."""
        return [p.spans for p in self._predict(X)]

    def predict_tags(self, X) -> list[list[str]]:
        """IOB2 tag strings for each token of each sentence."""
        return [
            [self.label_set_.tag_name(t) for t in p.tag_ids] for p in self._predict(X)
        ]

    def predict_event_proba(self, X) -> np.ndarray:
        """Sentence-level event probability from the auxiliary head
        (diagnostic; not used to produce spans)."""
        return np.array([p.event_probability for p in self._predict(X)])

    def score(self, X, y) -> float:
        """Micro-averaged trigger classification F1 against gold spans."""
        check_is_fitted(self, "model_")
        gold = {
            s.sent_id: s.triggers for s in as_sentences(X, y, "score")
        }
        pred = {
            f"score-{i:05d}": spans for i, spans in enumerate(self.predict(X))
        }
        return score_triggers(pred, gold).f1

    def _predict(self, X):
        check_is_fitted(self, "model_")
        sentences = as_sentences(X, None, "pred")
        return predict_sentences(self.model_, sentences)
