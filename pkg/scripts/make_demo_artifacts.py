#!/usr/bin/env python3
"""Build small demo artifacts for the HTTP service and the web UI: a toy
corpus with embeddings, plus quick response / base / keyword-predictor
checkpoints sharing one vocabulary.

The result is enough to run:

    kwdialog serve --checkpoint <out>/kw_loss.ckpt \
        --base-checkpoint <out>/no_kw.ckpt \
        --kwpred-checkpoint <out>/kwpred.ckpt \
        --embeddings <out>/data/embeddings.txt --deterministic
"""

from __future__ import annotations

import argparse
import json
import time
from pathlib import Path

from kwdialog import datagen
from kwdialog.corpus import build_examples, build_vocab, parse_corpus
from kwdialog.embeddings import load_table
from kwdialog.keywords import build_kwpred_examples, extraction_fn
from kwdialog.model import ModelConfig
from kwdialog.objective import LossWeights
from kwdialog.trainer import TrainConfig, train


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/demo")
    parser.add_argument("--dialogs", type=int, default=400)
    parser.add_argument("--epochs", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    done_marker = out / "demo.json"
    if done_marker.exists():
        print(f"artifacts already present in {out}, nothing to do")
        return 0

    t0 = time.time()
    paths = datagen.write_corpus(out / "data", n_train=args.dialogs,
                                 n_valid=80, n_test=80, seed=args.seed)
    table = load_table(paths["embeddings"])
    extractor = extraction_fn(table, k=3)
    dialogs = {s: parse_corpus(paths[s]) for s in ("train", "valid", "test")}
    vocab = build_vocab(dialogs["train"], min_freq=1)
    examples = {s: build_examples(dialogs[s], vocab, extractor, seed=args.seed)
                for s in ("train", "valid", "test")}

    model_config = ModelConfig(vocab_size=len(vocab), dim=64, layers=2, heads=2,
                               ffn_dim=128, max_len=96)

    def fit(model_class, gamma, ckpt, train_examples, valid_examples):
        config = TrainConfig(model_class=model_class, weights=LossWeights(gamma=gamma),
                             batch_size=16, epochs=args.epochs, lr=1e-3,
                             warmup_steps=20, seed=args.seed, deterministic=True,
                             val_decode_limit=0)
        train(config, model_config, train_examples, valid_examples, vocab,
              checkpoint_path=ckpt)
        print(f"[{model_class}] -> {ckpt}", flush=True)

    fit("kw_loss", 0.005, out / "kw_loss.ckpt", examples["train"], examples["valid"])
    fit("no_kw", 0.0, out / "no_kw.ckpt", examples["train"], examples["valid"])
    kwpred_train = build_kwpred_examples(examples["train"], vocab, seed=args.seed)
    kwpred_valid = build_kwpred_examples(examples["valid"], vocab, seed=args.seed)
    fit("kwpred", 0.0, out / "kwpred.ckpt", kwpred_train, kwpred_valid)

    done_marker.write_text(json.dumps({
        "vocab_size": len(vocab),
        "embeddings": str(paths["embeddings"]),
        "checkpoints": {name: str(out / f"{name}.ckpt")
                        for name in ("kw_loss", "no_kw", "kwpred")},
        "seconds": round(time.time() - t0, 1),
    }, indent=2) + "\n", encoding="utf-8")
    print(f"done in {time.time()-t0:.0f}s -> {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
