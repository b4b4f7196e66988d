"""Training protocol: seeded runs, dev-based model selection, sweeps, and
the with/without sentence-objective ablation.

Every run is fully determined by (corpus, config, seed, lr): weight init,
epoch shuffles, and dropout masks all derive from the seed through
``seeding.derive_rng``, so repeated runs produce bitwise-identical
checkpoints. The reported test score always comes from the checkpoint
that maximized dev F1, never from the final epoch.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import seeding
from .autodiff import Adam
from .corpus import Corpus, Sentence, build_vocab, make_batches
from .encoder import EncoderConfig
from .errors import ConfigError, DivergenceError, NumericError, ValidationError
from .metrics import EvalReport, RunComparison, compare_runs, score_triggers
from .model import (
    TriggerModel,
    joint_loss,
    predict_sentences,
    save_checkpoint,
)

Logger = Callable[[str], None]


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for one experiment.

    Defaults are the desk-scale profile (CPU-trainable in seconds);
    ``profile("paper")`` switches to the reference setup of 20 epochs,
    5 seeds, dropout 0.3, learning rates 3e-5/5e-5, batch size 30.
    Model selection is always by dev F1 (ties -> earliest epoch).
    """

    epochs: int = 50
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    learning_rates: tuple[float, ...] = (1e-3, 3e-3)
    batch_size: int = 8
    dropout_p: float = 0.1
    sep_weight: float = 1.0
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 128
    max_len: int = 64
    min_count: int = 1
    grad_clip: float | None = None
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be positive")
        if not self.seeds or not self.learning_rates:
            raise ConfigError("need at least one seed and one learning rate")
        if any(lr < 0 for lr in self.learning_rates):
            raise ConfigError("learning rates must be non-negative")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError(f"dropout_p must be in [0, 1), got {self.dropout_p}")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ConfigError("grad_clip must be positive when set")

    def encoder_config(self, vocab_size: int) -> EncoderConfig:
        return EncoderConfig(
            vocab_size=vocab_size,
            d_model=self.d_model,
            n_heads=self.n_heads,
            n_layers=self.n_layers,
            d_ff=self.d_ff,
            max_len=self.max_len,
            dropout_p=self.dropout_p,
        )

    def to_json(self) -> dict:
        return asdict(self)


PROFILES: dict[str, dict] = {
    "desk": {},
    "paper": {
        "epochs": 20,
        "seeds": (0, 1, 2, 3, 4),
        "learning_rates": (3e-5, 5e-5),
        "batch_size": 30,
        "dropout_p": 0.3,
    },
}


def profile(name: str, **overrides) -> TrainConfig:
    if name not in PROFILES:
        raise ConfigError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}")
    return TrainConfig(**{**PROFILES[name], **overrides})


@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    token_loss: float
    sep_loss: float | None
    dev_report: EvalReport


@dataclass
class RunRecord:
    """Bookkeeping for one (seed, lr) training run."""

    seed: int
    lr: float
    sep_weight: float
    epoch_metrics: list[EpochMetrics]
    best_epoch: int
    best_dev_f1: float
    test_report: EvalReport
    sep_head_grad_max_abs: float
    model: TriggerModel
    run_dir: Path | None = None

    def report_json(self) -> dict:
        return {
            "seed": self.seed,
            "lr": self.lr,
            "sep_weight": self.sep_weight,
            "best_epoch": self.best_epoch,
            "best_dev_f1": self.best_dev_f1,
            "sep_head_grad_max_abs": self.sep_head_grad_max_abs,
            "test": self.test_report.to_json(),
        }


def evaluate(model: TriggerModel, sentences: list[Sentence]) -> EvalReport:
    preds = predict_sentences(model, sentences)
    return score_triggers(
        {p.sent_id: p.spans for p in preds},
        {s.sent_id: s.triggers for s in sentences},
    )


def _clip_gradients(params, max_norm: float) -> None:
    total = 0.0
    grads = [p.grad for p in params if p.grad is not None]
    for g in grads:
        total += float((g * g).sum())
    norm = math.sqrt(total)
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads:
            g *= scale


def train(
    corpus: Corpus,
    config: TrainConfig,
    seed: int,
    lr: float,
    out_dir: str | Path | None = None,
    log: Logger | None = None,
) -> RunRecord:
    """One seeded run: shuffle/batch/step per epoch, evaluate dev after each
    epoch, keep the best-dev checkpoint, and score test with it."""
    if not corpus.train or not corpus.dev:
        raise ValidationError("training requires non-empty train and dev splits")
    vocab = build_vocab(corpus.train, config.min_count)
    enc_cfg = config.encoder_config(len(vocab))
    model = TriggerModel(
        enc_cfg, vocab, corpus.label_set, seeding.derive_rng(seed, seeding.INIT)
    )
    params = model.parameters()
    optimizer = Adam(params.values(), lr, config.adam_betas, config.adam_eps)
    sep_params = model.sep_parameters()

    best_state: dict[str, np.ndarray] | None = None
    best_epoch = -1
    best_f1 = -1.0
    sep_grad_max = 0.0
    history: list[EpochMetrics] = []

    for epoch in range(config.epochs):
        batches = make_batches(
            corpus.train,
            config.batch_size,
            vocab,
            corpus.label_set,
            rng=seeding.derive_rng(seed, seeding.SHUFFLE, epoch),
            max_len=config.max_len,
        )
        loss_sum = 0.0
        token_sum = 0.0
        sep_sum = 0.0
        for index, batch in enumerate(batches):
            try:
                breakdown = joint_loss(
                    model,
                    batch,
                    sep_weight=config.sep_weight,
                    training=True,
                    rng=seeding.derive_rng(seed, seeding.DROPOUT, epoch, index),
                )
            except NumericError as exc:
                raise DivergenceError(
                    f"non-finite activations at epoch {epoch}, batch {index} "
                    f"(seed {seed}, lr {lr}): {exc}"
                ) from exc
            value = breakdown.total.item()
            if not math.isfinite(value):
                raise DivergenceError(
                    f"non-finite loss {value} at epoch {epoch}, batch {index} "
                    f"(seed {seed}, lr {lr})"
                )
            loss_sum += value
            token_sum += breakdown.token_sum
            sep_sum += breakdown.sep_sum or 0.0
            optimizer.zero_grad()
            breakdown.total.backward()
            for p in sep_params:
                if p.grad is not None:
                    sep_grad_max = max(sep_grad_max, float(np.abs(p.grad).max()))
            if config.grad_clip is not None:
                _clip_gradients(params.values(), config.grad_clip)
            optimizer.step()
        dev_report = evaluate(model, corpus.dev)
        history.append(
            EpochMetrics(
                epoch=epoch,
                train_loss=loss_sum,
                token_loss=token_sum,
                sep_loss=sep_sum if config.sep_weight != 0.0 else None,
                dev_report=dev_report,
            )
        )
        if log:
            log(
                f"seed={seed} lr={lr:g} epoch={epoch} "
                f"loss={loss_sum:.4f} dev_f1={dev_report.f1:.4f}"
            )
        if dev_report.f1 > best_f1:
            best_f1 = dev_report.f1
            best_epoch = epoch
            best_state = {name: p.data.copy() for name, p in params.items()}

    assert best_state is not None
    for name, p in params.items():
        p.data = best_state[name]
    test_report = evaluate(model, corpus.test)

    record = RunRecord(
        seed=seed,
        lr=lr,
        sep_weight=config.sep_weight,
        epoch_metrics=history,
        best_epoch=best_epoch,
        best_dev_f1=best_f1,
        test_report=test_report,
        sep_head_grad_max_abs=sep_grad_max,
        model=model,
    )
    if out_dir is not None:
        record.run_dir = _write_run_dir(Path(out_dir), config, record)
    return record


def _write_run_dir(base: Path, config: TrainConfig, record: RunRecord) -> Path:
    run_dir = base / f"{record.seed}_{record.lr:g}"
    run_dir.mkdir(parents=True, exist_ok=True)
    resolved = {**config.to_json(), "seed": record.seed, "lr": record.lr}
    (run_dir / "config.json").write_text(json.dumps(resolved), encoding="utf-8")
    with (run_dir / "metrics.jsonl").open("w", encoding="utf-8") as handle:
        for em in record.epoch_metrics:
            handle.write(
                json.dumps(
                    {
                        "epoch": em.epoch,
                        "train_loss": em.train_loss,
                        "token_loss": em.token_loss,
                        "sep_loss": em.sep_loss,
                        "dev": em.dev_report.to_json(),
                    }
                )
                + "\n"
            )
    save_checkpoint(record.model, run_dir / "checkpoint.json")
    (run_dir / "report.json").write_text(
        json.dumps(record.report_json()), encoding="utf-8"
    )
    return run_dir


@dataclass
class SweepResult:
    records: list[RunRecord]
    best: RunRecord

    def summary_json(self) -> dict:
        return {
            "runs": [
                {
                    "seed": r.seed,
                    "lr": r.lr,
                    "best_epoch": r.best_epoch,
                    "best_dev_f1": r.best_dev_f1,
                    "test_f1": r.test_report.f1,
                }
                for r in self.records
            ],
            "selected": self.best.report_json(),
        }


def sweep(
    corpus: Corpus,
    config: TrainConfig,
    out_dir: str | Path | None = None,
    log: Logger | None = None,
) -> SweepResult:
    """Train the full seed x learning-rate grid and select by dev F1.

    Ties break toward the lowest seed, then the lowest learning rate. The
    headline test score is the selected run's only.
    """
    records = [
        train(corpus, config, seed, lr, out_dir=out_dir, log=log)
        for seed in config.seeds
        for lr in config.learning_rates
    ]
    best = min(records, key=lambda r: (-r.best_dev_f1, r.seed, r.lr))
    result = SweepResult(records=records, best=best)
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / "sweep.json").write_text(
            json.dumps(result.summary_json()), encoding="utf-8"
        )
    return result


@dataclass
class PairedRuns:
    """The two arms of one (seed, lr) cell, scored over identical test gold."""

    seed: int
    lr: float
    with_sep: RunRecord
    without_sep: RunRecord

    def deltas_json(self) -> dict:
        a, b = self.with_sep.test_report, self.without_sep.test_report
        if a.sentence_event_accuracy is None or b.sentence_event_accuracy is None:
            acc_delta = None
        else:
            acc_delta = a.sentence_event_accuracy - b.sentence_event_accuracy
        return {
            "seed": self.seed,
            "lr": self.lr,
            "f1_delta": a.f1 - b.f1,
            "precision_delta": a.precision - b.precision,
            "fp_with_sep": a.fp,
            "fp_without_sep": b.fp,
            "sentence_event_accuracy_with_sep": a.sentence_event_accuracy,
            "sentence_event_accuracy_without_sep": b.sentence_event_accuracy,
            "sentence_event_accuracy_delta": acc_delta,
        }


@dataclass
class AblationResult:
    with_sep: SweepResult
    without_sep: SweepResult
    comparison: RunComparison  # without-sep vs with-sep selected test reports
    paired: list[PairedRuns] = field(default_factory=list)

    def summary_json(self) -> dict:
        fp_with = [p.with_sep.test_report.fp for p in self.paired]
        fp_without = [p.without_sep.test_report.fp for p in self.paired]
        return {
            "with_sep": self.with_sep.summary_json(),
            "without_sep": self.without_sep.summary_json(),
            "comparison_without_vs_with": self.comparison.to_json(),
            "paired_deltas": [p.deltas_json() for p in self.paired],
            "mean_fp_with_sep": sum(fp_with) / len(fp_with) if fp_with else None,
            "mean_fp_without_sep": (
                sum(fp_without) / len(fp_without) if fp_without else None
            ),
        }


def ablate(
    corpus: Corpus,
    config: TrainConfig,
    out_dir: str | Path | None = None,
    log: Logger | None = None,
    sep_weights: tuple[float, float] = (0.0, 1.0),
) -> AblationResult:
    """Run the sweep twice, without and with the sentence objective, on
    identical seeds and learning rates, and pair the runs cell by cell."""
    without_w, with_w = sep_weights
    base = Path(out_dir) if out_dir is not None else None
    res_without = sweep(
        corpus,
        replace(config, sep_weight=without_w),
        out_dir=None if base is None else base / "sep_off",
        log=log,
    )
    res_with = sweep(
        corpus,
        replace(config, sep_weight=with_w),
        out_dir=None if base is None else base / "sep_on",
        log=log,
    )
    by_cell = {(r.seed, r.lr): r for r in res_without.records}
    paired = [
        PairedRuns(r.seed, r.lr, with_sep=r, without_sep=by_cell[(r.seed, r.lr)])
        for r in res_with.records
    ]
    comparison = compare_runs(res_without.best.test_report, res_with.best.test_report)
    result = AblationResult(
        with_sep=res_with,
        without_sep=res_without,
        comparison=comparison,
        paired=paired,
    )
    if base is not None:
        base.mkdir(parents=True, exist_ok=True)
        (base / "ablation.json").write_text(
            json.dumps(result.summary_json()), encoding="utf-8"
        )
    return result
