"""Trigger tagging model: encoder, the two classification heads, losses.

The training objective is a token-level tagging loss summed over real
tokens plus, when enabled, a sentence-level event-presence loss computed
from the [CLS] vector. Both are sums, so the joint loss over a batch is
literally (sum of token losses) + (sum of sentence losses).

The sentence head is diagnostic at inference time: it reports an event
probability but never gates or filters the decoded spans.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import _sigmoid
from .corpus import Batch, Sentence, Vocab, make_batch
from .encoder import EncoderConfig, Linear, TransformerEncoder
from .errors import CheckpointError, ConfigError
from .labels import LabelSet, TriggerSpan, decode_iob2

CHECKPOINT_FORMAT = "trigkit-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class SentencePrediction:
    """Per-sentence inference result; spans always equal the decoded tags."""

    sent_id: str
    tag_ids: list[int]
    spans: list[TriggerSpan]
    event_probability: float


@dataclass
class LossBreakdown:
    """Joint loss tensor plus its two components as plain floats."""

    total: ad.Tensor
    token_sum: float
    sep_sum: float | None  # None when the sentence objective was skipped


class TriggerModel:
    """Encoder plus a shared token classification head and a sentence head."""

    def __init__(
        self,
        cfg: EncoderConfig,
        vocab: Vocab,
        label_set: LabelSet,
        rng: np.random.Generator,
    ):
        if cfg.vocab_size != len(vocab):
            raise CheckpointError(
                f"encoder vocab_size {cfg.vocab_size} != vocabulary size {len(vocab)}"
            )
        self.cfg = cfg
        self.vocab = vocab
        self.label_set = label_set
        self.encoder = TransformerEncoder(cfg, rng)
        self.token_head = Linear(cfg.d_model, label_set.n_tags, "token_head", rng)
        self.sep_head = Linear(cfg.d_model, 1, "sep_head", rng)

    def parameters(self) -> dict[str, ad.Parameter]:
        params: dict[str, ad.Parameter] = {}
        for p in (
            *self.encoder.parameters(),
            *self.token_head.parameters(),
            *self.sep_head.parameters(),
        ):
            if p.name in params:
                raise ValueError(f"duplicate parameter name {p.name!r}")
            params[p.name] = p
        return params

    def sep_parameters(self) -> list[ad.Parameter]:
        return list(self.sep_head.parameters())

    # -- forward -----------------------------------------------------------

    def forward_batch(
        self,
        batch: Batch,
        training: bool = False,
        rng: np.random.Generator | None = None,
        with_sep: bool = True,
        attn_sink: list | None = None,
    ) -> tuple[ad.Tensor, ad.Tensor | None]:
        """Token logits (n, seq-1, n_tags) and sentence logits (n, 1).

        Dropout draws come from rng children in a fixed order (encoder,
        token head, sentence head), so skipping the sentence head never
        perturbs the token path's masks.
        """
        if training and self.cfg.dropout_p > 0.0 and rng is None:
            raise ConfigError("training-mode forward with dropout needs an rng")
        if rng is not None:
            enc_rng, tok_rng, sep_rng = rng.spawn(3)
        else:
            enc_rng = tok_rng = sep_rng = None
        hidden = self.encoder.forward(
            batch.token_ids, batch.attn_keep, training, enc_rng, attn_sink
        )
        n, s = batch.token_ids.shape
        token_vecs = ad.index_select(hidden, 1, np.arange(1, s))
        token_logits = self.token_head(
            ad.dropout(token_vecs, self.cfg.dropout_p, tok_rng, training)
        )
        sep_logits = None
        if with_sep:
            cls_vecs = ad.reshape(
                ad.index_select(hidden, 1, [0]), (n, self.cfg.d_model)
            )
            sep_logits = self.sep_head(
                ad.dropout(cls_vecs, self.cfg.dropout_p, sep_rng, training)
            )
        return token_logits, sep_logits


def token_loss(
    token_logits: ad.Tensor, gold_tags: np.ndarray, token_mask: np.ndarray
) -> ad.Tensor:
    """Sum of per-token negative log-likelihoods over real (unpadded) tokens."""
    n, s, k = token_logits.shape
    flat = ad.reshape(token_logits, (n * s, k))
    return ad.nll_loss(
        ad.log_softmax(flat),
        np.asarray(gold_tags).ravel(),
        np.asarray(token_mask, dtype=bool).ravel(),
    )


def sep_loss(sep_logits: ad.Tensor, y: np.ndarray) -> ad.Tensor:
    """Sum over sentences of the binary event-presence cross-entropy."""
    target = np.asarray(y, dtype=np.float64).reshape(sep_logits.shape)
    return ad.sum_all(ad.bce_with_logit(sep_logits, target))


def joint_loss(
    model: TriggerModel,
    batch: Batch,
    sep_weight: float = 1.0,
    training: bool = True,
    rng: np.random.Generator | None = None,
) -> LossBreakdown:
    """Batch objective: token loss plus ``sep_weight`` times the sentence loss.

    ``sep_weight == 0`` skips the sentence head entirely, so the returned
    total is bit-for-bit the token loss and the sentence head's parameters
    stay out of the graph.
    """
    with_sep = sep_weight != 0.0
    token_logits, sep_logits = model.forward_batch(
        batch, training=training, rng=rng, with_sep=with_sep
    )
    tok = token_loss(token_logits, batch.gold_tags, batch.token_mask)
    if not with_sep:
        return LossBreakdown(total=tok, token_sum=tok.item(), sep_sum=None)
    sep = sep_loss(sep_logits, batch.y)
    total = tok + sep if sep_weight == 1.0 else tok + sep_weight * sep
    return LossBreakdown(total=total, token_sum=tok.item(), sep_sum=sep.item())


def predict_batch(model: TriggerModel, batch: Batch) -> list[SentencePrediction]:
    """Greedy decoding: per-token argmax (ties resolve to the lowest tag id,
    i.e. toward O), then IOB2 span recovery; deterministic, no dropout."""
    token_logits, sep_logits = model.forward_batch(batch, training=False)
    probs = _sigmoid(sep_logits.data.reshape(-1))
    tag_matrix = np.argmax(token_logits.data, axis=-1)
    out = []
    for i, sentence in enumerate(batch.sentences):
        tags = [int(t) for t in tag_matrix[i, : len(sentence.tokens)]]
        out.append(
            SentencePrediction(
                sent_id=sentence.sent_id,
                tag_ids=tags,
                spans=decode_iob2(tags, model.label_set),
                event_probability=float(probs[i]),
            )
        )
    return out


def predict(
    model: TriggerModel, sentence: Sentence, threshold: float = 0.5
) -> SentencePrediction:
    """Single-sentence inference. ``threshold`` is only a default for
    downstream diagnostics; spans are never filtered by the sentence head."""
    del threshold
    batch = make_batch([sentence], model.vocab, model.label_set, model.cfg.max_len)
    return predict_batch(model, batch)[0]


def predict_sentences(
    model: TriggerModel, sentences: Sequence[Sentence], batch_size: int = 32
) -> list[SentencePrediction]:
    out: list[SentencePrediction] = []
    for i in range(0, len(sentences), batch_size):
        chunk = make_batch(
            sentences[i : i + batch_size], model.vocab, model.label_set, model.cfg.max_len
        )
        out.extend(predict_batch(model, chunk))
    return out


# -- checkpoints ----------------------------------------------------------------


def save_checkpoint(model: TriggerModel, path: str | Path) -> None:
    """Write the model as versioned JSON; float64 values are hex-encoded so
    the round trip is bit-exact."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "encoder": model.cfg.to_json(),
        "label_types": model.label_set.trigger_types,
        "vocab": model.vocab.to_json(),
        "params": {
            name: {
                "shape": list(p.shape),
                "hex": [float(v).hex() for v in p.data.ravel()],
            }
            for name, p in model.parameters().items()
        },
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_checkpoint(path: str | Path) -> TriggerModel:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"not a {CHECKPOINT_FORMAT} file: {path}")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {payload.get('version')!r}"
        )
    try:
        cfg = EncoderConfig.from_json(payload["encoder"])
        vocab = Vocab.from_json(payload["vocab"])
        label_set = LabelSet(payload["label_types"])
        stored = payload["params"]
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"malformed checkpoint {path}: {exc}") from exc
    model = TriggerModel(cfg, vocab, label_set, np.random.default_rng(0))
    params = model.parameters()
    if set(params) != set(stored):
        missing = set(params) ^ set(stored)
        raise CheckpointError(f"checkpoint parameter names mismatch: {sorted(missing)}")
    for name, p in params.items():
        entry = stored[name]
        values = np.array([float.fromhex(h) for h in entry["hex"]], dtype=np.float64)
        if tuple(entry["shape"]) != p.shape or values.size != p.size:
            raise CheckpointError(
                f"checkpoint shape mismatch for {name}: {entry['shape']} vs {p.shape}"
            )
        p.data = values.reshape(p.shape)
    return model
