"""Finite-difference verification of the full model gradient.

Builds a tiny model and a two-sentence batch, computes the joint loss
gradient analytically, then re-derives every component by central
differences. The loss closure reseeds its rng per call, so dropout masks
are identical across perturbed evaluations and the check exercises the
dropout backward as well.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import seeding
from .corpus import Sentence, Vocab, make_batch
from .encoder import EncoderConfig
from .errors import ConfigError
from .labels import LabelSet, TriggerSpan
from .model import TriggerModel, joint_loss

# Relative error uses max(|analytic|, |numeric|, FLOOR) as denominator so
# near-zero components (e.g. dropped connections) do not blow up the ratio.
REL_FLOOR = 1e-6


@dataclass
class ParamCheck:
    name: str
    rel_error: float


@dataclass
class GradCheckResult:
    passed: bool
    tolerance: float
    step: float
    n_params: int
    n_components: int
    worst: ParamCheck
    per_param: list[ParamCheck]

    def to_json(self) -> dict:
        return {
            "pass": self.passed,
            "tolerance": self.tolerance,
            "step": self.step,
            "n_params": self.n_params,
            "n_components": self.n_components,
            "worst_param": self.worst.name,
            "worst_rel_error": self.worst.rel_error,
            "per_param": [
                {"param": c.name, "rel_error": c.rel_error} for c in self.per_param
            ],
        }


def relative_errors(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), REL_FLOOR)
    return np.abs(analytic - numeric) / denom


def _tiny_batch(label_set: LabelSet, vocab: Vocab, max_len: int):
    sentences = [
        Sentence(
            "d0", "s0",
            ["alpha", "beta", "gamma", "delta"],
            [TriggerSpan(1, 3, label_set.trigger_types[0])],
        ),
        Sentence("d0", "s1", ["beta", "alpha", "zeta"], []),
    ]
    return make_batch(sentences, vocab, label_set, max_len)


def run_gradient_check(
    seed: int = 0,
    d_model: int = 16,
    n_heads: int = 2,
    n_layers: int = 2,
    d_ff: int = 32,
    dropout_p: float = 0.1,
    sep_weight: float = 1.0,
    tolerance: float = 1e-3,
    step: float = 1e-5,
    inject_error: bool = False,
) -> GradCheckResult:
    """Check every parameter of a small random model against central
    differences of the joint loss. ``inject_error`` corrupts one analytic
    gradient as a negative control and must make the check fail."""
    if tolerance <= 0 or step <= 0:
        raise ConfigError("tolerance and step must be positive")
    label_set = LabelSet(["Conflict.Attack", "Movement.Transport"])
    vocab = Vocab(["alpha", "beta", "gamma", "delta", "zeta"])
    cfg = EncoderConfig(
        vocab_size=len(vocab),
        d_model=d_model,
        n_heads=n_heads,
        n_layers=n_layers,
        d_ff=d_ff,
        max_len=16,
        dropout_p=dropout_p,
    )
    model = TriggerModel(cfg, vocab, label_set, seeding.derive_rng(seed, seeding.INIT))
    batch = _tiny_batch(label_set, vocab, cfg.max_len)
    params = model.parameters()

    def loss_value() -> float:
        # fresh rng with fixed keys: identical dropout masks on every call
        rng = seeding.derive_rng(seed, seeding.GRADCHECK)
        return joint_loss(
            model, batch, sep_weight=sep_weight, training=True, rng=rng
        ).total.item()

    for p in params.values():
        p.zero_grad()
    rng = seeding.derive_rng(seed, seeding.GRADCHECK)
    joint_loss(model, batch, sep_weight=sep_weight, training=True, rng=rng).total.backward()
    analytic = {
        name: (np.zeros_like(p.data) if p.grad is None else p.grad.copy())
        for name, p in params.items()
    }
    if inject_error:
        first = sorted(analytic)[0]
        analytic[first] = analytic[first] + 1.0

    per_param: list[ParamCheck] = []
    n_components = 0
    for name, p in params.items():
        flat = p.data.ravel()
        numeric = np.zeros_like(flat)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + step
            up = loss_value()
            flat[i] = keep - step
            down = loss_value()
            flat[i] = keep
            numeric[i] = (up - down) / (2.0 * step)
        n_components += flat.size
        errs = relative_errors(analytic[name].ravel(), numeric)
        per_param.append(ParamCheck(name, float(errs.max())))
    worst = max(per_param, key=lambda c: c.rel_error)
    return GradCheckResult(
        passed=worst.rel_error <= tolerance,
        tolerance=tolerance,
        step=step,
        n_params=len(per_param),
        n_components=n_components,
        worst=worst,
        per_param=per_param,
    )
