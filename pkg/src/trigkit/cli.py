"""Command-line interface.

Design rules: JSON results on stdout, logs and resolved configs on
stderr, and stable exit codes (0 ok, 1 failed verification, 2 config,
3 data validation, 4 divergence, 5 checkpoint, 6 id alignment). Every
subcommand is deterministic given identical flags and seeds.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .corpus import (
    DEFAULT_LABELS,
    SPLITS,
    SynthSpec,
    generate_synthetic,
    load_corpus,
    save_corpus,
    sentence_to_record,
)
from .errors import (
    AlignmentError,
    CheckpointError,
    ConfigError,
    DivergenceError,
    ParseError,
    TrigkitError,
    ValidationError,
)
from .gradcheck import run_gradient_check
from .harness import PROFILES, ablate, profile, sweep
from .labels import TriggerSpan
from .metrics import score_triggers
from .model import load_checkpoint, predict_sentences
from .seeding import SYNTH, derive_rng

EXIT_OK = 0
EXIT_FAILED_CHECK = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGENCE = 4
EXIT_CHECKPOINT = 5
EXIT_ALIGNMENT = 6


def _echo_config(name: str, resolved: dict) -> None:
    print(f"[trigkit {name}] config: {json.dumps(resolved)}", file=sys.stderr)


def _synth_labels(n: int) -> tuple[str, ...]:
    labels = list(DEFAULT_LABELS)
    while len(labels) < n:
        labels.append(f"Generic.Type-{len(labels)}")
    return tuple(labels[:n])


def cmd_synth(args: argparse.Namespace) -> int:
    spec = SynthSpec(
        n_train=args.sentences,
        n_dev=args.dev_sentences if args.dev_sentences is not None else max(1, args.sentences // 5),
        n_test=args.test_sentences if args.test_sentences is not None else max(1, args.sentences // 5),
        event_fraction=args.event_frac,
        labels=_synth_labels(args.n_labels),
        phrases_per_label=args.phrases_per_label,
        multi_word_fraction=args.multi_word_frac,
        filler_vocab_size=args.filler_vocab,
        min_tokens=args.min_tokens,
        max_tokens=args.max_tokens,
        max_triggers_per_sentence=args.max_triggers,
    )
    spec.validate()
    _echo_config(
        "synth",
        {"spec": dataclasses.asdict(spec), "seed": args.seed, "out": str(args.out)},
    )
    corpus = generate_synthetic(spec, derive_rng(args.seed, SYNTH))
    save_corpus(corpus, args.out)
    print(
        json.dumps(
            {
                "out": str(args.out),
                "train": len(corpus.train),
                "dev": len(corpus.dev),
                "test": len(corpus.test),
                "labels": corpus.label_set.trigger_types,
            }
        )
    )
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    overrides: dict = {}
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if args.batch_size is not None:
        overrides["batch_size"] = args.batch_size
    if args.lr:
        overrides["learning_rates"] = tuple(args.lr)
    if args.seed:
        overrides["seeds"] = tuple(args.seed)
    if args.dropout is not None:
        overrides["dropout_p"] = args.dropout
    if args.d_model is not None:
        overrides["d_model"] = args.d_model
    if args.n_heads is not None:
        overrides["n_heads"] = args.n_heads
    if args.n_layers is not None:
        overrides["n_layers"] = args.n_layers
    if args.d_ff is not None:
        overrides["d_ff"] = args.d_ff
    if args.max_len is not None:
        overrides["max_len"] = args.max_len
    if args.min_count is not None:
        overrides["min_count"] = args.min_count
    if args.grad_clip is not None:
        overrides["grad_clip"] = args.grad_clip
    overrides["sep_weight"] = 1.0 if args.sep == "on" else 0.0
    config = profile(args.profile, **overrides)
    _echo_config(
        "train",
        {"data": str(args.data), "out": str(args.out), "profile": args.profile,
         "ablate": args.ablate, **config.to_json()},
    )
    corpus = load_corpus(args.data)
    log = None if args.quiet else (lambda msg: print(msg, file=sys.stderr))
    if args.ablate:
        result = ablate(corpus, config, out_dir=args.out, log=log)
        print(json.dumps(result.summary_json()))
    else:
        result = sweep(corpus, config, out_dir=args.out, log=log)
        print(json.dumps(result.summary_json()))
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    _echo_config(
        "predict",
        {"model": str(args.model), "data": str(args.data),
         "out": str(args.out) if args.out else "-", "split": args.split},
    )
    model = load_checkpoint(args.model)
    corpus = load_corpus(args.data, allow_empty=True)
    known = set(model.label_set.trigger_types)
    used = {
        span.label for sent in corpus.sentences for span in sent.triggers
    }
    if not used <= known:
        raise CheckpointError(
            f"corpus labels {sorted(used - known)} are not in the checkpoint label set"
        )
    pairs = [(s, split) for split in SPLITS for s in corpus.split(split)]
    if args.split is not None:
        pairs = [(s, split) for s, split in pairs if split == args.split]
    preds = predict_sentences(model, [s for s, _ in pairs])
    lines = []
    for (sentence, split), pred in zip(pairs, preds):
        record = sentence_to_record(sentence, split)
        record["triggers"] = [
            {"start": s.start, "end": s.end, "label": s.label} for s in pred.spans
        ]
        record["event_probability"] = pred.event_probability
        record["pred"] = True
        lines.append(json.dumps(record))
    text = "".join(line + "\n" for line in lines)
    if args.out is None:
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8")
    return EXIT_OK


def _load_predictions(path: Path, split: str | None):
    pred: dict[str, list[TriggerSpan]] = {}
    try:
        handle = path.open("r", encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read predictions file {path}: {exc}") from exc
    with handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                sent_id = record["sent_id"]
                spans = [
                    TriggerSpan(int(t["start"]), int(t["end"]), str(t["label"]))
                    for t in record["triggers"]
                ]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ParseError(f"predictions line {lineno}: {exc}") from exc
            if split is not None:
                line_split = record.get("split")
                if line_split is None:
                    raise ParseError(
                        f"predictions line {lineno}: no split field but --split given"
                    )
                if line_split != split:
                    continue
            if sent_id in pred:
                raise AlignmentError(f"duplicate prediction for sent_id {sent_id!r}")
            pred[sent_id] = spans
    return pred


def cmd_score(args: argparse.Namespace) -> int:
    _echo_config(
        "score",
        {"pred": str(args.pred), "gold": str(args.gold), "split": args.split,
         "criterion": args.criterion},
    )
    pred = _load_predictions(Path(args.pred), args.split)
    corpus = load_corpus(args.gold)
    gold_sentences = (
        corpus.split(args.split) if args.split is not None else corpus.sentences
    )
    gold = {s.sent_id: s.triggers for s in gold_sentences}
    report = score_triggers(pred, gold, criterion=args.criterion)
    pct = report.to_json()["prf_percent"]
    print(
        f"P={pct['precision']:.1f} R={pct['recall']:.1f} F1={pct['f1']:.1f}",
        file=sys.stderr,
    )
    print(json.dumps(report.to_json()))
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    _echo_config(
        "gradcheck",
        {"seed": args.seed, "d_model": args.d_model, "n_heads": args.n_heads,
         "n_layers": args.n_layers, "d_ff": args.d_ff, "dropout": args.dropout,
         "tolerance": args.tolerance, "step": args.step,
         "inject_error": args.inject_error},
    )
    result = run_gradient_check(
        seed=args.seed,
        d_model=args.d_model,
        n_heads=args.n_heads,
        n_layers=args.n_layers,
        d_ff=args.d_ff,
        dropout_p=args.dropout,
        tolerance=args.tolerance,
        step=args.step,
        inject_error=args.inject_error,
    )
    payload = result.to_json()
    del payload["per_param"]  # keep stdout compact; worst offender is included
    print(json.dumps(payload))
    if not result.passed:
        print(
            f"gradient check FAILED: worst offender {result.worst.name} "
            f"(rel error {result.worst.rel_error:.3e} > {result.tolerance:g})",
            file=sys.stderr,
        )
        return EXIT_FAILED_CHECK
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trigkit",
        description="Event trigger detection toolkit: synthesize data, train, "
        "predict, score, and verify gradients.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus JSONL file")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--sentences", type=int, default=100, help="train sentences")
    p.add_argument("--dev-sentences", type=int, default=None)
    p.add_argument("--test-sentences", type=int, default=None)
    p.add_argument("--event-frac", type=float, default=0.3)
    p.add_argument("--n-labels", type=int, default=3)
    p.add_argument("--phrases-per-label", type=int, default=2)
    p.add_argument("--multi-word-frac", type=float, default=0.25)
    p.add_argument("--filler-vocab", type=int, default=40)
    p.add_argument("--min-tokens", type=int, default=4)
    p.add_argument("--max-tokens", type=int, default=12)
    p.add_argument("--max-triggers", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train over a seed x lr grid, or ablate")
    p.add_argument("--data", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--profile", choices=sorted(PROFILES), default="desk")
    p.add_argument("--sep", choices=["on", "off"], default="on",
                   help="train with or without the sentence event-presence objective")
    p.add_argument("--ablate", action="store_true",
                   help="run both --sep arms on identical seeds and compare")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, action="append", default=None)
    p.add_argument("--seed", type=int, action="append", default=None)
    p.add_argument("--dropout", type=float, default=None)
    p.add_argument("--d-model", type=int, default=None)
    p.add_argument("--n-heads", type=int, default=None)
    p.add_argument("--n-layers", type=int, default=None)
    p.add_argument("--d-ff", type=int, default=None)
    p.add_argument("--max-len", type=int, default=None)
    p.add_argument("--min-count", type=int, default=None)
    p.add_argument("--grad-clip", type=float, default=None)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="emit predictions JSONL for a corpus")
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--data", required=True, type=Path)
    p.add_argument("--out", type=Path, default=None, help="default: stdout")
    p.add_argument("--split", choices=SPLITS, default=None)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("score", help="score a predictions file against gold")
    p.add_argument("--pred", required=True, type=Path)
    p.add_argument("--gold", required=True, type=Path)
    p.add_argument("--split", choices=SPLITS, default=None)
    p.add_argument("--criterion", choices=["classification", "identification"],
                   default="classification")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("gradcheck", help="finite-difference check of model gradients")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--d-model", type=int, default=16)
    p.add_argument("--n-heads", type=int, default=2)
    p.add_argument("--n-layers", type=int, default=2)
    p.add_argument("--d-ff", type=int, default=32)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--tolerance", type=float, default=1e-3)
    p.add_argument("--step", type=float, default=1e-5)
    p.add_argument("--inject-error", action="store_true",
                   help="negative-control hook: corrupt one gradient on purpose")
    p.set_defaults(func=cmd_gradcheck)
    return parser


def _exit_code(exc: TrigkitError) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, DivergenceError):
        return EXIT_DIVERGENCE
    if isinstance(exc, CheckpointError):
        return EXIT_CHECKPOINT
    if isinstance(exc, AlignmentError):
        return EXIT_ALIGNMENT
    if isinstance(exc, ValidationError):
        return EXIT_DATA
    return EXIT_FAILED_CHECK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TrigkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
