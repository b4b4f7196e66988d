import numpy as np
import pytest

import trigkit.autodiff as ad
from trigkit.corpus import CLS_ID, PAD_ID
from trigkit.encoder import EncoderConfig, TransformerEncoder
from trigkit.errors import ConfigError, LengthError, ValidationError

from oracles import assert_gradients_close, finite_difference


def make_encoder(seed=0, **overrides) -> TransformerEncoder:
    cfg = dict(vocab_size=10, d_model=16, n_heads=2, n_layers=2, d_ff=32,
               max_len=12, dropout_p=0.0)
    cfg.update(overrides)
    return TransformerEncoder(EncoderConfig(**cfg), np.random.default_rng(seed))


def ids_with_cls(tokens: list[int]) -> np.ndarray:
    return np.asarray([[CLS_ID, *tokens]], dtype=np.intp)


def test_config_validation():
    with pytest.raises(ConfigError):
        EncoderConfig(vocab_size=10, d_model=10, n_heads=4)
    with pytest.raises(ConfigError):
        EncoderConfig(vocab_size=10, dropout_p=1.0)
    with pytest.raises(ConfigError):
        EncoderConfig(vocab_size=0)


def test_embed_shape_contract():
    enc = make_encoder()
    out = enc.embed(ids_with_cls([3, 4, 5, 6, 7, 8, 9]))
    assert out.shape == (1, 8, 16)


def test_embed_empty_sentence_is_just_cls():
    enc = make_encoder()
    out = enc.encode([])
    assert out.cls_vector.shape == (16,)
    assert out.token_vectors.shape == (0, 16)


def test_embed_same_token_two_positions_differs():
    enc = make_encoder()
    out = enc.embed(ids_with_cls([5, 5]))
    assert not np.allclose(out.data[0, 1], out.data[0, 2])


def test_embed_rejects_bad_ids_and_overlong_input():
    enc = make_encoder()
    with pytest.raises(ValidationError):
        enc.embed(ids_with_cls([10]))
    with pytest.raises(LengthError):
        enc.embed(ids_with_cls(list(range(3, 9)) * 2))


def test_single_token_attention_weight_is_one():
    for n_heads in (1, 2, 4):
        enc = make_encoder(n_heads=n_heads, n_layers=1)
        sink: list[np.ndarray] = []
        ids = np.asarray([[CLS_ID]], dtype=np.intp)
        enc.forward(ids, np.ones_like(ids, dtype=bool), attn_sink=sink)
        np.testing.assert_allclose(sink[0], np.ones((1, n_heads, 1, 1)), atol=0)


def test_attention_rows_sum_to_one():
    enc = make_encoder()
    sink: list[np.ndarray] = []
    ids = ids_with_cls([3, 4, 5, 6])
    keep = np.ones_like(ids, dtype=bool)
    keep[0, -1] = False  # pad one position
    enc.forward(ids, keep, attn_sink=sink)
    for attn in sink:
        np.testing.assert_allclose(attn.sum(axis=-1), np.ones(attn.shape[:-1]), atol=1e-9)


def test_masked_keys_get_zero_attention():
    enc = make_encoder()
    sink: list[np.ndarray] = []
    ids = ids_with_cls([3, 4, PAD_ID, PAD_ID])
    keep = np.asarray([[True, True, True, False, False]])
    enc.forward(ids, keep, attn_sink=sink)
    for attn in sink:
        assert (attn[..., 3:] == 0.0).all()


def test_padding_invariance():
    enc = make_encoder()
    tokens = [3, 4, 5]
    base = enc.encode(tokens)
    for extra in (1, 3, 6):
        ids = ids_with_cls(tokens + [PAD_ID] * extra)
        keep = np.asarray([[True] * (len(tokens) + 1) + [False] * extra])
        out = enc.forward(ids, keep)
        np.testing.assert_allclose(
            out.data[0, 0], base.cls_vector.data, atol=1e-9
        )
        np.testing.assert_allclose(
            out.data[0, 1 : len(tokens) + 1], base.token_vectors.data, atol=1e-9
        )


def test_perturbing_padded_positions_leaves_real_outputs_unchanged():
    enc = make_encoder()
    ids_a = ids_with_cls([3, 4, PAD_ID, PAD_ID])
    ids_b = ids_with_cls([3, 4, 7, 9])  # padded slots carry arbitrary ids
    keep = np.asarray([[True, True, True, False, False]])
    out_a = enc.forward(ids_a, keep)
    out_b = enc.forward(ids_b, keep)
    np.testing.assert_allclose(out_a.data[0, :3], out_b.data[0, :3], atol=1e-9)


def test_two_sentences_identical_up_to_padding():
    enc = make_encoder()
    ids = np.asarray(
        [[CLS_ID, 3, 4, 5, PAD_ID], [CLS_ID, 3, 4, 5, 6]], dtype=np.intp
    )
    keep = np.asarray([[True, True, True, True, False], [True] * 5])
    out = enc.forward(ids, keep)
    short = enc.encode([3, 4, 5])
    np.testing.assert_allclose(out.data[0, 0], short.cls_vector.data, atol=1e-9)
    np.testing.assert_allclose(out.data[0, 1:4], short.token_vectors.data, atol=1e-9)


def test_eval_mode_is_bitwise_deterministic():
    enc = make_encoder(dropout_p=0.3)
    a = enc.encode([3, 4, 5]).token_vectors.data
    b = enc.encode([3, 4, 5]).token_vectors.data
    np.testing.assert_array_equal(a, b)


def test_training_mode_requires_rng_when_dropout_active():
    enc = make_encoder(dropout_p=0.3)
    ids = ids_with_cls([3, 4])
    with pytest.raises(ConfigError):
        enc.forward(ids, np.ones_like(ids, dtype=bool), training=True)


def test_permutation_sensitivity():
    changed = 0
    for seed in range(5):
        enc = make_encoder(seed=seed)
        a = enc.encode([3, 4, 5, 6]).token_vectors.data
        b = enc.encode([4, 3, 5, 6]).token_vectors.data
        if not np.allclose(a, b, atol=1e-9):
            changed += 1
    assert changed == 5


def test_encoder_gradients_match_finite_differences():
    enc = make_encoder(n_layers=1, d_model=8, n_heads=2, d_ff=12, vocab_size=6)
    ids = ids_with_cls([3, 4, 5])
    keep = np.ones_like(ids, dtype=bool)
    rng = np.random.default_rng(2)
    c = ad.Tensor(rng.normal(size=(1, 4, 8)))

    def loss():
        return ad.sum_all(ad.mul(enc.forward(ids, keep), c)).item()

    params = list(enc.parameters())
    ad.sum_all(ad.mul(enc.forward(ids, keep), c)).backward()
    for p in params:
        assert p.grad is not None, p.name
        assert_gradients_close(p.grad, finite_difference(loss, p.data), rtol=1e-4)
