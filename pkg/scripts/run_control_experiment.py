#!/usr/bin/env python3
"""Desk-scale keyword-control experiment.

Generates a DailyDialog-format corpus, trains the control-model ladder
(no_kw, kw_context, kw_loss at several gammas), evaluates every model on
the held-out test split, and prints the comparison table. The no_kw model
doubles as the perplexity reference.

Checkpoints and reports land in --out-dir; pass --reuse to skip training
for checkpoints that already exist there.
"""

from __future__ import annotations

import argparse
import json
import time
from pathlib import Path

from kwdialog import datagen
from kwdialog.corpus import build_examples, build_vocab, parse_corpus
from kwdialog.decode import DecodeConfig
from kwdialog.embeddings import load_table
from kwdialog.evaluation import evaluate_model, format_report_table
from kwdialog.keywords import extraction_fn
from kwdialog.model import ModelConfig, load_model
from kwdialog.objective import LossWeights
from kwdialog.trainer import TrainConfig, train


def parse_args():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="runs/control")
    parser.add_argument("--dialogs", type=int, default=2000)
    parser.add_argument("--test-dialogs", type=int, default=300)
    parser.add_argument("--epochs", type=int, default=3)
    parser.add_argument("--batch", type=int, default=32)
    parser.add_argument("--gammas", default="0.005,1")
    parser.add_argument("--eval-limit", type=int, default=400)
    parser.add_argument("--max-new-tokens", type=int, default=24)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--dim", type=int, default=256)
    parser.add_argument("--layers", type=int, default=4)
    parser.add_argument("--heads", type=int, default=4)
    parser.add_argument("--ffn-dim", type=int, default=1024)
    parser.add_argument("--max-len", type=int, default=256)
    parser.add_argument("--reuse", action="store_true")
    return parser.parse_args()


def run(args) -> dict:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t_start = time.time()

    paths = datagen.write_corpus(
        out / "data", n_train=args.dialogs, n_valid=max(100, args.dialogs // 10),
        n_test=args.test_dialogs, seed=args.seed,
    )
    table = load_table(paths["embeddings"])
    extractor = extraction_fn(table, k=3)
    dialogs = {s: parse_corpus(paths[s]) for s in ("train", "valid", "test")}
    vocab = build_vocab(dialogs["train"], min_freq=3)
    examples = {
        s: build_examples(dialogs[s], vocab, extractor, seed=args.seed)
        for s in ("train", "valid", "test")
    }
    print(f"vocab={len(vocab)} examples="
          f"{ {s: len(e) for s, e in examples.items()} }", flush=True)

    model_config = ModelConfig(
        vocab_size=len(vocab), dim=args.dim, layers=args.layers, heads=args.heads,
        ffn_dim=args.ffn_dim, max_len=args.max_len,
    )
    gammas = [float(g) for g in args.gammas.split(",")]
    ladder = [("no_kw", 0.0), ("kw_context", 0.0)] + [("kw_loss", g) for g in gammas]

    models = {}
    for model_class, gamma in ladder:
        tag = model_class if model_class != "kw_loss" else f"kw_loss_g{gamma:g}"
        ckpt = out / f"{tag}.ckpt"
        if args.reuse and ckpt.exists():
            print(f"[{tag}] reusing {ckpt}", flush=True)
            model, _, _ = load_model(ckpt)
        else:
            t0 = time.time()
            config = TrainConfig(
                model_class=model_class, weights=LossWeights(gamma=gamma),
                batch_size=args.batch, epochs=args.epochs, seed=args.seed,
                deterministic=True, val_decode_limit=0,
            )
            model, history = train(
                config, model_config, examples["train"], examples["valid"], vocab,
                checkpoint_path=ckpt, log_path=out / f"{tag}.log.jsonl",
            )
            last = [h for h in history if h["split"] == "valid"][-1]
            print(f"[{tag}] trained in {time.time()-t0:.0f}s  valid L_m={last['L_m']:.3f}",
                  flush=True)
        models[tag] = model

    reference = models["no_kw"]
    decode = DecodeConfig(strategy="nucleus", top_p=0.9, seed=args.seed,
                          max_new_tokens=args.max_new_tokens)
    test_examples = examples["test"][: args.eval_limit]
    reports = {}
    for tag, model in models.items():
        model_class = "kw_loss" if tag.startswith("kw_loss") else tag
        t0 = time.time()
        report = evaluate_model(
            model, model_class, test_examples, vocab, table, reference,
            decode_config=decode, corpus_fingerprint=f"synthetic-{args.dialogs}-{args.seed}",
        )
        report.model_class = tag
        reports[tag] = report
        print(f"[{tag}] evaluated in {time.time()-t0:.0f}s  KIA={report.kia:.3f} "
              f"PPL={report.ppl:.2f}", flush=True)

    print()
    print(format_report_table(list(reports.values())))
    (out / "reports.json").write_text(
        "\n".join(r.to_json() for r in reports.values()) + "\n", encoding="utf-8"
    )
    print(f"\ntotal wall time: {time.time()-t_start:.0f}s")
    return {"reports": reports, "models": models, "vocab": vocab,
            "examples": examples, "table": table, "paths": paths}


if __name__ == "__main__":
    run(parse_args())
