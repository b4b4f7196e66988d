"""Scratch exploration of the directional ablation (not part of the package)."""
import sys
import time

import trigkit as tk


def run(tag, spec_kw, cfg_kw, corpus_seed=42, seeds=(0, 1, 2, 3, 4)):
    spec = tk.SynthSpec(n_train=500, n_dev=100, n_test=100, event_fraction=0.3, **spec_kw)
    corpus = tk.generate_synthetic(spec, corpus_seed)
    cfg = tk.TrainConfig(seeds=tuple(seeds), learning_rates=(1e-3,), **cfg_kw)
    t0 = time.time()
    result = tk.ablate(corpus, cfg)
    dt = time.time() - t0
    fp_on = [p.with_sep.test_report.fp for p in result.paired]
    fp_off = [p.without_sep.test_report.fp for p in result.paired]
    acc_on = [p.with_sep.test_report.sentence_event_accuracy for p in result.paired]
    acc_off = [p.without_sep.test_report.sentence_event_accuracy for p in result.paired]
    f1_on = [round(p.with_sep.test_report.f1, 3) for p in result.paired]
    f1_off = [round(p.without_sep.test_report.f1, 3) for p in result.paired]
    mean = lambda xs: sum(xs) / len(xs)
    macc = lambda xs: None if any(x is None for x in xs) else round(mean(xs), 4)
    print(f"[{tag}] {dt:.0f}s")
    print(f"  fp  off={fp_off} on={fp_on}  mean_off={mean(fp_off):.1f} mean_on={mean(fp_on):.1f}")
    print(f"  acc off={macc(acc_off)} {acc_off}")
    print(f"  acc on ={macc(acc_on)} {acc_on}")
    print(f"  f1  off={f1_off} on={f1_on}")
    sys.stdout.flush()


if __name__ == "__main__":
    which = sys.argv[1] if len(sys.argv) > 1 else "a"
    if which == "a":
        run("A: harder vocab, mc2, ep10",
            dict(phrases_per_label=16, filler_vocab_size=600, multi_word_fraction=0.35,
                 min_tokens=5, max_tokens=14),
            dict(epochs=10, min_count=2, dropout_p=0.1, max_len=16))
    elif which == "b":
        run("B: same corpus, ep20 dropout .3",
            dict(phrases_per_label=16, filler_vocab_size=600, multi_word_fraction=0.35,
                 min_tokens=5, max_tokens=14),
            dict(epochs=20, min_count=2, dropout_p=0.3, max_len=16))
    elif which == "c":
        run("C: moderate, mc1, ep8",
            dict(phrases_per_label=8, filler_vocab_size=300, multi_word_fraction=0.3),
            dict(epochs=8, min_count=1, dropout_p=0.1, max_len=16))
