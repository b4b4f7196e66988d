"""From-scratch transformer encoder over padded batches.

Produces one vector per token plus a leading [CLS] sentence vector.
Weights are randomly initialized (normal, std 0.02); there is no
pre-training and no subword segmentation, so the encoder stays small
enough to train on a CPU in seconds.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterator

import numpy as np

from . import autodiff as ad
from .corpus import CLS_ID
from .errors import ConfigError, LengthError, ValidationError

ATTN_MASK_VALUE = -1e9  # additive score for padded keys; exp() underflows to 0


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 128
    max_len: int = 64
    dropout_p: float = 0.1

    def __post_init__(self):
        if min(self.vocab_size, self.d_model, self.n_heads, self.n_layers, self.d_ff, self.max_len) < 1:
            raise ConfigError("all encoder dimensions must be positive")
        if self.d_model % self.n_heads != 0:
            raise ConfigError(
                f"d_model ({self.d_model}) must be a multiple of n_heads ({self.n_heads})"
            )
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError(f"dropout_p must be in [0, 1), got {self.dropout_p}")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "EncoderConfig":
        return cls(**data)


@dataclass
class EncoderOutput:
    """Single-sentence encoder result: sentence vector plus token vectors."""

    cls_vector: ad.Tensor
    token_vectors: ad.Tensor


class Linear:
    """Affine map with weights drawn N(0, std) and zero bias."""

    def __init__(self, d_in: int, d_out: int, name: str, rng: np.random.Generator,
                 std: float = 0.02):
        self.weight = ad.Parameter(rng.normal(0.0, std, size=(d_in, d_out)), f"{name}.weight")
        self.bias = ad.Parameter(np.zeros(d_out), f"{name}.bias")

    def __call__(self, x: ad.Tensor) -> ad.Tensor:
        return ad.matmul(x, self.weight) + self.bias

    def parameters(self) -> Iterator[ad.Parameter]:
        yield self.weight
        yield self.bias


class _LayerNormParams:
    def __init__(self, d: int, name: str):
        self.gain = ad.Parameter(np.ones(d), f"{name}.gain")
        self.bias = ad.Parameter(np.zeros(d), f"{name}.bias")

    def __call__(self, x: ad.Tensor) -> ad.Tensor:
        return ad.layer_norm(x, self.gain, self.bias)

    def parameters(self) -> Iterator[ad.Parameter]:
        yield self.gain
        yield self.bias


class _EncoderLayer:
    """One block: masked multi-head self-attention and a feed-forward net,
    each followed by dropout, a residual connection, and layer norm."""

    def __init__(self, cfg: EncoderConfig, name: str, rng: np.random.Generator):
        d = cfg.d_model
        self.cfg = cfg
        self.wq = Linear(d, d, f"{name}.attn.q", rng)
        self.wk = Linear(d, d, f"{name}.attn.k", rng)
        self.wv = Linear(d, d, f"{name}.attn.v", rng)
        self.wo = Linear(d, d, f"{name}.attn.out", rng)
        self.ln_attn = _LayerNormParams(d, f"{name}.ln_attn")
        self.ff1 = Linear(d, cfg.d_ff, f"{name}.ff.in", rng)
        self.ff2 = Linear(cfg.d_ff, d, f"{name}.ff.out", rng)
        self.ln_ff = _LayerNormParams(d, f"{name}.ln_ff")

    def parameters(self) -> Iterator[ad.Parameter]:
        for block in (self.wq, self.wk, self.wv, self.wo, self.ln_attn,
                      self.ff1, self.ff2, self.ln_ff):
            yield from block.parameters()

    def _split_heads(self, x: ad.Tensor, n: int, s: int) -> ad.Tensor:
        h = self.cfg.n_heads
        dh = self.cfg.d_model // h
        return ad.transpose(ad.reshape(x, (n, s, h, dh)), (0, 2, 1, 3))

    def __call__(
        self,
        x: ad.Tensor,
        mask_add: np.ndarray,
        training: bool,
        rng: np.random.Generator,
        attn_sink: list | None = None,
    ) -> ad.Tensor:
        n, s, d = x.shape
        h = self.cfg.n_heads
        dh = d // h
        q = self._split_heads(self.wq(x), n, s)
        k = self._split_heads(self.wk(x), n, s)
        v = self._split_heads(self.wv(x), n, s)
        scores = ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))) * (1.0 / math.sqrt(dh))
        scores = scores + ad.Tensor(mask_add)
        attn = ad.softmax(scores)
        if attn_sink is not None:
            attn_sink.append(attn.data.copy())
        ctx = ad.reshape(ad.transpose(ad.matmul(attn, v), (0, 2, 1, 3)), (n, s, d))
        ctx = ad.dropout(self.wo(ctx), self.cfg.dropout_p, rng, training)
        x = self.ln_attn(x + ctx)
        ff = self.ff2(ad.gelu(self.ff1(x)))
        ff = ad.dropout(ff, self.cfg.dropout_p, rng, training)
        return self.ln_ff(x + ff)


class TransformerEncoder:
    """Token + position embeddings followed by ``n_layers`` encoder blocks.

    Inputs are id matrices whose column 0 is the [CLS] id; ``attn_keep``
    marks the positions attention may attend to, so padded keys receive
    exactly zero attention weight.
    """

    def __init__(self, cfg: EncoderConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.tok_emb = ad.Parameter(
            rng.normal(0.0, 0.02, size=(cfg.vocab_size, cfg.d_model)), "encoder.tok_emb"
        )
        self.pos_emb = ad.Parameter(
            rng.normal(0.0, 0.02, size=(cfg.max_len, cfg.d_model)), "encoder.pos_emb"
        )
        self.layers = [
            _EncoderLayer(cfg, f"encoder.layer{i}", rng) for i in range(cfg.n_layers)
        ]

    def parameters(self) -> Iterator[ad.Parameter]:
        yield self.tok_emb
        yield self.pos_emb
        for layer in self.layers:
            yield from layer.parameters()

    def embed(self, token_ids: np.ndarray) -> ad.Tensor:
        """Learned token + position embeddings for an (n, seq) id matrix."""
        ids = np.asarray(token_ids, dtype=np.intp)
        if ids.ndim != 2:
            raise ValidationError(f"token ids must be 2-d, got shape {ids.shape}")
        n, s = ids.shape
        if s > self.cfg.max_len:
            raise LengthError(
                f"input of length {s} exceeds max_len {self.cfg.max_len}"
            )
        if ids.size and (ids.min() < 0 or ids.max() >= self.cfg.vocab_size):
            raise ValidationError(
                f"token id outside vocabulary of size {self.cfg.vocab_size}"
            )
        tok = ad.reshape(
            ad.index_select(self.tok_emb, 0, ids.ravel()), (n, s, self.cfg.d_model)
        )
        pos = ad.index_select(self.pos_emb, 0, np.arange(s))
        return tok + pos

    def forward(
        self,
        token_ids: np.ndarray,
        attn_keep: np.ndarray,
        training: bool = False,
        rng: np.random.Generator | None = None,
        attn_sink: list | None = None,
    ) -> ad.Tensor:
        """Encode a padded batch; returns an (n, seq, d_model) tensor."""
        keep = np.asarray(attn_keep, dtype=bool)
        ids = np.asarray(token_ids, dtype=np.intp)
        if keep.shape != ids.shape:
            raise ValidationError(
                f"attn_keep shape {keep.shape} does not match ids {ids.shape}"
            )
        if training and self.cfg.dropout_p > 0.0 and rng is None:
            raise ConfigError("training-mode forward with dropout needs an rng")
        if rng is None:
            rng = np.random.default_rng(0)  # never drawn from in eval mode
        x = self.embed(ids)
        n, s = ids.shape
        mask_add = np.where(keep, 0.0, ATTN_MASK_VALUE).reshape(n, 1, 1, s)
        for layer in self.layers:
            x = layer(x, mask_add, training, rng, attn_sink)
        return x

    def encode(
        self,
        token_ids: list[int],
        training: bool = False,
        rng: np.random.Generator | None = None,
    ) -> EncoderOutput:
        """Single-sentence convenience wrapper around ``forward``.

        ``token_ids`` excludes [CLS]; it is prepended here.
        """
        ids = np.asarray([[CLS_ID, *token_ids]], dtype=np.intp)
        keep = np.ones_like(ids, dtype=bool)
        out = self.forward(ids, keep, training=training, rng=rng)
        cls_vector = ad.reshape(
            ad.index_select(out, 1, [0]), (self.cfg.d_model,)
        )
        n_tokens = ids.shape[1] - 1
        token_vectors = ad.reshape(
            ad.index_select(out, 1, np.arange(1, ids.shape[1])),
            (n_tokens, self.cfg.d_model),
        )
        return EncoderOutput(cls_vector, token_vectors)
