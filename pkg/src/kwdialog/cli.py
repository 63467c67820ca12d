"""Command-line entry point covering the full lifecycle: data preparation,
training, gamma sweeps, evaluation, keyword suggestion, generation, an
interactive REPL, and serving the HTTP API.

Every subcommand honors --seed and --deterministic; failures exit non-zero
with one machine-parseable JSON error line on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path


def _set_determinism(seed: int, deterministic: bool) -> None:
    import torch

    torch.manual_seed(seed)
    if deterministic:
        torch.set_num_threads(1)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--deterministic", action="store_true",
                        help="single-threaded, byte-stable outputs")


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--dim", type=int, default=256)
    parser.add_argument("--layers", type=int, default=4)
    parser.add_argument("--heads", type=int, default=4)
    parser.add_argument("--ffn-dim", type=int, default=1024)
    parser.add_argument("--max-len", type=int, default=256)
    parser.add_argument("--dropout", type=float, default=0.1)


def _add_decode_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--top-p", type=float, default=0.9)
    parser.add_argument("--beams", type=int, default=10)
    parser.add_argument("--groups", type=int, default=2)
    parser.add_argument("--diversity-penalty", type=float, default=5.5)
    parser.add_argument("--max-new-tokens", type=int, default=32)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kwdialog")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="corpus files -> vocabulary + example files")
    p.add_argument("--train", required=True)
    p.add_argument("--valid", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-freq", type=int, default=3)
    p.add_argument("--keywords-per-response", type=int, default=3)
    _add_common(p)

    p = sub.add_parser("train", help="train one model class on prepared data")
    p.add_argument("--data", required=True, help="directory written by prepare")
    p.add_argument("--model-class", default="kw_loss",
                   help="no_kw | kw_context | kw_loss | kw_sim_loss_{glove,lexicon}[_1] | "
                        "multi_kw_loss | multi_kw_sim_loss_{glove,lexicon}[_1] | kwpred")
    p.add_argument("--gamma", type=float, default=0.005)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--epochs", type=int, default=3)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--warmup-steps", type=int, default=50)
    p.add_argument("--clip-norm", type=float, default=1.0)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--log", default=None, help="JSON-lines metrics path")
    p.add_argument("--embeddings", default=None)
    p.add_argument("--synonyms", default=None)
    p.add_argument("--pool-size", type=int, default=5)
    p.add_argument("--val-decode-limit", type=int, default=100)
    _add_model_flags(p)
    _add_common(p)

    p = sub.add_parser("sweep-gamma", help="train/evaluate over a gamma list")
    p.add_argument("--data", required=True)
    p.add_argument("--values", required=True, help="comma-separated gammas, e.g. 0,0.005,1")
    p.add_argument("--model-class", default="kw_loss")
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--epochs", type=int, default=3)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--warmup-steps", type=int, default=50)
    p.add_argument("--clip-norm", type=float, default=1.0)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--synonyms", default=None)
    p.add_argument("--reference", default=None,
                   help="no_kw reference checkpoint for PPL (trained if absent)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--eval-limit", type=int, default=300)
    p.add_argument("--pool-size", type=int, default=5)
    p.add_argument("--val-decode-limit", type=int, default=0)
    _add_model_flags(p)
    _add_decode_flags(p)
    _add_common(p)

    p = sub.add_parser("eval", help="metric report for a trained checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--synonyms", default=None)
    p.add_argument("--reference", required=True, help="reference LM checkpoint for PPL")
    p.add_argument("--out", default=None, help="write the JSON report here")
    p.add_argument("--limit", type=int, default=0, help="cap evaluated examples (0 = all)")
    p.add_argument("--pool-size", type=int, default=5)
    _add_decode_flags(p)
    _add_common(p)

    p = sub.add_parser("suggest", help="keyword suggestions for a context")
    p.add_argument("--context-file", required=True, help="one utterance per line")
    p.add_argument("--base-checkpoint", default=None, help="no_kw model (extractive)")
    p.add_argument("--kwpred-checkpoint", default=None, help="keyword predictor (generative)")
    p.add_argument("--embeddings", default=None)
    _add_decode_flags(p)
    _add_common(p)

    p = sub.add_parser("generate", help="keyword-conditioned responses for a context")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--keywords", required=True, help="comma-separated, 1-3 keywords")
    p.add_argument("--context-file", required=True)
    p.add_argument("--num", type=int, default=3)
    p.add_argument("--strategy", default="diverse-beam",
                   choices=["nucleus", "diverse-beam", "greedy"])
    _add_decode_flags(p)
    _add_common(p)

    p = sub.add_parser("interact", help="terminal REPL over the cue/response loop")
    p.add_argument("--checkpoint", required=True, help="response model")
    p.add_argument("--base-checkpoint", default=None)
    p.add_argument("--kwpred-checkpoint", default=None)
    p.add_argument("--embeddings", default=None)
    _add_decode_flags(p)
    _add_common(p)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--checkpoint", required=True, help="response model")
    p.add_argument("--base-checkpoint", default=None)
    p.add_argument("--kwpred-checkpoint", default=None)
    p.add_argument("--multi-checkpoint", default=None)
    p.add_argument("--embeddings", default=None)
    p.add_argument("--port", type=int, default=8040)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--persist", default=None, help="append-only session log path")
    p.add_argument("--static-dir", default=None, help="serve a built UI from here")
    _add_decode_flags(p)
    _add_common(p)

    return parser


def cmd_prepare(args) -> int:
    from .corpus import build_examples, build_vocab, parse_corpus, save_examples, BuildStats, ParseStats
    from .embeddings import load_table
    from .keywords import extraction_fn

    _set_determinism(args.seed, args.deterministic)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table = load_table(args.embeddings)
    extractor = extraction_fn(table, k=args.keywords_per_response)

    parse_stats = ParseStats()
    splits = {}
    for name, path in (("train", args.train), ("valid", args.valid), ("test", args.test)):
        splits[name] = parse_corpus(path, parse_stats)
    vocab = build_vocab(splits["train"], min_freq=args.min_freq)
    (out / "vocab.json").write_text(vocab.to_json(), encoding="utf-8")

    summary = {"vocab_size": len(vocab), "skipped_lines": parse_stats.skipped}
    for name, dialogs in splits.items():
        stats = BuildStats()
        examples = build_examples(dialogs, vocab, extractor, seed=args.seed, stats=stats)
        save_examples(examples, vocab, out / f"{name}.jsonl")
        summary[name] = {"dialogs": len(dialogs), "examples": stats.examples,
                         "keywordless": stats.keywordless}
    (out / "prepare.json").write_text(
        json.dumps(summary, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )
    print(json.dumps(summary, ensure_ascii=False))
    return 0


def _load_data(data_dir: str, splits=("train", "valid", "test")):
    from .corpus import Vocabulary, load_examples

    data = Path(data_dir)
    vocab = Vocabulary.from_json((data / "vocab.json").read_text(encoding="utf-8"))
    out = {}
    for split in splits:
        path = data / f"{split}.jsonl"
        out[split] = load_examples(path, vocab) if path.exists() else []
    return vocab, out


def _make_pools(args, model_class, examples, vocab):
    from .classes import MODEL_CLASSES
    from .embeddings import load_synonyms, load_table
    from .trainer import build_pools

    source = MODEL_CLASSES[model_class].pool_source
    if source == "none":
        return None
    table = load_table(args.embeddings) if args.embeddings else None
    lexicon = load_synonyms(args.synonyms) if args.synonyms else None
    return build_pools(examples, source, table=table, lexicon=lexicon, n=args.pool_size)


def cmd_train(args) -> int:
    from .keywords import build_kwpred_examples
    from .model import ModelConfig
    from .objective import LossWeights
    from .trainer import TrainConfig, train

    _set_determinism(args.seed, args.deterministic)
    vocab, data = _load_data(args.data)
    train_examples, valid_examples = data["train"], data["valid"]
    if args.model_class == "kwpred":
        train_examples = build_kwpred_examples(train_examples, vocab, seed=args.seed)
        valid_examples = build_kwpred_examples(valid_examples, vocab, seed=args.seed) if valid_examples else []
    pools = _make_pools(args, args.model_class, train_examples, vocab)
    config = TrainConfig(
        model_class=args.model_class,
        weights=LossWeights(alpha=args.alpha, beta=args.beta, gamma=args.gamma),
        batch_size=args.batch, epochs=args.epochs, lr=args.lr,
        warmup_steps=args.warmup_steps, clip_norm=args.clip_norm, seed=args.seed,
        deterministic=args.deterministic, val_decode_limit=args.val_decode_limit,
        pool_size=args.pool_size,
    )
    model_config = ModelConfig(
        vocab_size=len(vocab), dim=args.dim, layers=args.layers, heads=args.heads,
        ffn_dim=args.ffn_dim, max_len=args.max_len, dropout=args.dropout,
    )
    _, history = train(
        config, model_config, train_examples, valid_examples, vocab,
        pools=pools, checkpoint_path=args.checkpoint, log_path=args.log,
    )
    final = [h for h in history if h["split"] == "valid"] or history
    print(json.dumps({"checkpoint": args.checkpoint, "last": final[-1]}, ensure_ascii=False))
    return 0


def _evaluate_checkpoint(args, checkpoint: str, reference: str, limit: int):
    from .decode import DecodeConfig
    from .embeddings import load_synonyms, load_table
    from .evaluation import evaluate_model
    from .model import load_model
    from .classes import MODEL_CLASSES
    from .trainer import build_pools

    model, vocab, meta = load_model(checkpoint)
    reference_model, _, _ = load_model(reference)
    _, data = _load_data(args.data, splits=("test",))
    examples = data["test"]
    if limit:
        examples = examples[:limit]
    table = load_table(args.embeddings)
    model_class = meta.get("model_class", "kw_loss")
    source = MODEL_CLASSES[model_class].pool_source
    pools = None
    if source != "none":
        lexicon = load_synonyms(args.synonyms) if args.synonyms else None
        pools = build_pools(
            examples, source,
            table=table if source == "embedding" else None,
            lexicon=lexicon, n=args.pool_size,
        )
    decode = DecodeConfig(
        strategy="nucleus", top_p=args.top_p, seed=args.seed,
        max_new_tokens=args.max_new_tokens,
    )
    return evaluate_model(
        model, model_class, examples, vocab, table, reference_model,
        decode_config=decode, pools=pools,
        corpus_fingerprint=Path(args.data).name,
    )


def cmd_eval(args) -> int:
    from .evaluation import format_report_table

    _set_determinism(args.seed, args.deterministic)
    report = _evaluate_checkpoint(args, args.checkpoint, args.reference, args.limit)
    print(format_report_table([report]))
    if args.out:
        Path(args.out).write_text(report.to_json() + "\n", encoding="utf-8")
    return 0


def cmd_sweep_gamma(args) -> int:
    from .evaluation import format_report_table
    from .model import ModelConfig
    from .objective import LossWeights
    from .trainer import TrainConfig, train

    _set_determinism(args.seed, args.deterministic)
    values = [float(v) for v in args.values.split(",") if v.strip() != ""]
    if not values:
        raise ValueError("no gamma values given")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    vocab, data = _load_data(args.data)
    model_config = ModelConfig(
        vocab_size=len(vocab), dim=args.dim, layers=args.layers, heads=args.heads,
        ffn_dim=args.ffn_dim, max_len=args.max_len, dropout=args.dropout,
    )

    reference = args.reference
    if reference is None:
        reference = str(out_dir / "reference_no_kw.ckpt")
        config = TrainConfig(
            model_class="no_kw", weights=LossWeights(gamma=0.0),
            batch_size=args.batch, epochs=args.epochs, lr=args.lr,
            warmup_steps=args.warmup_steps, clip_norm=args.clip_norm,
            seed=args.seed, deterministic=args.deterministic,
            val_decode_limit=args.val_decode_limit,
        )
        train(config, model_config, data["train"], data["valid"], vocab,
              checkpoint_path=reference)

    pools = _make_pools(args, args.model_class, data["train"], vocab)
    rows = []
    for gamma in values:
        checkpoint = str(out_dir / f"{args.model_class}_gamma{gamma:g}.ckpt")
        config = TrainConfig(
            model_class=args.model_class,
            weights=LossWeights(gamma=gamma),
            batch_size=args.batch, epochs=args.epochs, lr=args.lr,
            warmup_steps=args.warmup_steps, clip_norm=args.clip_norm,
            seed=args.seed, deterministic=args.deterministic,
            val_decode_limit=args.val_decode_limit,
        )
        train(config, model_config, data["train"], data["valid"], vocab,
              pools=pools, checkpoint_path=checkpoint,
              log_path=str(out_dir / f"train_gamma{gamma:g}.log.jsonl"))
        report = _evaluate_checkpoint(args, checkpoint, reference, args.eval_limit)
        report.model_class = f"gamma={gamma:g}"
        rows.append(report)
    print(format_report_table(rows))
    (out_dir / "sweep.json").write_text(
        "\n".join(r.to_json() for r in rows) + "\n", encoding="utf-8"
    )
    return 0


def _read_context(path: str):
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [line.strip() for line in lines if line.strip()]


def cmd_suggest(args) -> int:
    from .corpus import tokenize
    from .decode import DecodeConfig
    from .embeddings import load_table
    from .keywords import extractive_suggest, generative_suggest
    from .model import load_model

    _set_determinism(args.seed, args.deterministic)
    if not args.base_checkpoint and not args.kwpred_checkpoint:
        raise ValueError("need --base-checkpoint and/or --kwpred-checkpoint")
    decode = DecodeConfig(
        strategy="diverse-beam", beams=args.beams, groups=args.groups,
        diversity_penalty=args.diversity_penalty, seed=args.seed,
        max_new_tokens=args.max_new_tokens,
    )
    suggestions = []
    vocab = None
    if args.base_checkpoint:
        if not args.embeddings:
            raise ValueError("extractive suggestions need --embeddings")
        base, vocab, _ = load_model(args.base_checkpoint)
        table = load_table(args.embeddings)
        context = [tokenize(u, vocab) for u in _read_context(args.context_file)[-5:]]
        suggestions += extractive_suggest(context, base, vocab, table, decode)
    if args.kwpred_checkpoint:
        kwpred, vocab, _ = load_model(args.kwpred_checkpoint)
        context = [tokenize(u, vocab) for u in _read_context(args.context_file)[-5:]]
        suggestions += generative_suggest(context, kwpred, vocab, decode)
    for s in suggestions:
        print(f"{s.source}\t{s.score:.4f}\t{s.text}")
    return 0


def cmd_generate(args) -> int:
    from .corpus import detokenize, tokenize
    from .decode import DecodeConfig, diverse_beam_search, greedy_decode, nucleus_sample
    from .model import load_model

    _set_determinism(args.seed, args.deterministic)
    model, vocab, _ = load_model(args.checkpoint)
    keywords = [k.strip().lower() for k in args.keywords.split(",") if k.strip()]
    if not 1 <= len(keywords) <= 3:
        raise ValueError("need between 1 and 3 keywords")
    context = [tokenize(u, vocab) for u in _read_context(args.context_file)[-5:]]
    config = DecodeConfig(
        strategy=args.strategy, top_p=args.top_p, beams=args.beams, groups=args.groups,
        diversity_penalty=args.diversity_penalty, max_new_tokens=args.max_new_tokens,
        seed=args.seed,
    )
    if args.strategy == "diverse-beam":
        seen = set()
        printed = 0
        for hyp in diverse_beam_search(model, context, keywords, vocab, config):
            text = detokenize(hyp.tokens, vocab)
            if text in seen:
                continue
            seen.add(text)
            print(f"{hyp.normalized_score:.4f}\t{text}")
            printed += 1
            if printed >= args.num:
                break
    else:
        for i in range(args.num):
            decode = DecodeConfig(
                strategy=args.strategy, top_p=args.top_p, seed=args.seed + i,
                max_new_tokens=args.max_new_tokens,
            )
            if args.strategy == "greedy":
                ids = greedy_decode(model, context, keywords, vocab, decode)
            else:
                ids = nucleus_sample(model, context, keywords, vocab, decode)
            print(f"{0.0:.4f}\t{detokenize(ids, vocab)}")
    return 0


def cmd_interact(args) -> int:
    from .service import Engine, EngineConfig

    _set_determinism(args.seed, args.deterministic)
    engine = Engine(EngineConfig(
        response_checkpoint=args.checkpoint,
        base_checkpoint=args.base_checkpoint,
        kwpred_checkpoint=args.kwpred_checkpoint,
        embeddings_path=args.embeddings,
        seed=args.seed, deterministic=args.deterministic,
        beams=args.beams, groups=args.groups,
        diversity_penalty=args.diversity_penalty,
        max_new_tokens=args.max_new_tokens,
    ))
    engine.load()
    session = engine.create_session()
    print("# type a partner utterance; 'q' quits")
    while True:
        try:
            utterance = input("partner> ").strip()
        except EOFError:
            break
        if utterance in {"q", "quit", "exit"}:
            break
        if not utterance:
            continue
        suggestions = engine.suggest_keywords(session, utterance)
        for i, s in enumerate(suggestions):
            print(f"  [{i}] {s.text} ({s.source})")
        choice = input("keyword (index or word)> ").strip()
        if not choice:
            continue
        if choice.isdigit() and suggestions and int(choice) < len(suggestions):
            keyword = suggestions[int(choice)].text
        else:
            keyword = choice.lower()
        responses, _ = engine.generate_responses(session, [keyword], 3)
        for i, r in enumerate(responses):
            print(f"  [{i}] {r['text']}")
        picked = input("response (index, or free text)> ").strip()
        if picked.isdigit() and responses and int(picked) < len(responses):
            text = responses[int(picked)]["text"]
        elif picked:
            text = picked
        else:
            continue
        engine.commit(session, text)
        print(f"user> {text}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import Engine, EngineConfig, create_app

    _set_determinism(args.seed, args.deterministic)
    engine = Engine(EngineConfig(
        response_checkpoint=args.checkpoint,
        base_checkpoint=args.base_checkpoint,
        kwpred_checkpoint=args.kwpred_checkpoint,
        multi_checkpoint=args.multi_checkpoint,
        embeddings_path=args.embeddings,
        seed=args.seed, deterministic=args.deterministic,
        beams=args.beams, groups=args.groups,
        diversity_penalty=args.diversity_penalty,
        max_new_tokens=args.max_new_tokens,
        persist_path=args.persist,
    ))
    engine.load()
    app = create_app(engine)
    if args.static_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=args.static_dir, html=True), name="ui")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


COMMANDS = {
    "prepare": cmd_prepare,
    "train": cmd_train,
    "sweep-gamma": cmd_sweep_gamma,
    "eval": cmd_eval,
    "suggest": cmd_suggest,
    "generate": cmd_generate,
    "interact": cmd_interact,
    "serve": cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except Exception as exc:  # one-line machine-parseable failure
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
