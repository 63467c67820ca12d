"""Minibatch training of the model classes with the combined objective,
JSON-lines metric logging, validation, and best-checkpoint retention."""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path

import torch

from .classes import MODEL_CLASSES, ModelClass, example_keywords
from .corpus import DialogExample, Vocabulary
from .embeddings import SimilarityPool
from .model import (
    DialogModel,
    EncodedInput,
    IGNORE_TARGET,
    ModelConfig,
    build_model,
    encode_example,
    save_checkpoint,
)
from .objective import (
    KeywordSpec,
    LossWeights,
    cls_loss,
    keyword_loss,
    lm_loss,
    total_loss,
)

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    model_class: str = "kw_loss"
    weights: LossWeights = field(default_factory=LossWeights)
    batch_size: int = 32
    epochs: int = 3
    lr: float = 1e-3
    warmup_steps: int = 50
    clip_norm: float = 1.0
    seed: int = 0
    checkpoint_every: int = 0
    deterministic: bool = True
    val_decode_limit: int = 100
    pool_size: int = 5

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch size and epochs must be >= 1")
        if self.lr <= 0:
            raise ValueError("learning rate must be > 0")
        if self.model_class not in MODEL_CLASSES:
            raise ValueError(f"unknown model class {self.model_class!r}")


def build_pools(
    examples: list[DialogExample],
    source: str,
    table=None,
    lexicon=None,
    n: int = 5,
) -> dict[str, SimilarityPool] | None:
    """Similarity pools for every distinct keyword in the corpus.

    `source` selects embedding nearest neighbors or the synonym lexicon;
    "none" returns None (classes without a pooled loss).
    """
    from .embeddings import nearest_neighbors, synonym_pool

    if source == "none":
        return None
    keywords = sorted({kw for ex in examples for kw in ex.keywords})
    if source == "embedding":
        if table is None:
            raise ValueError("embedding pools need a loaded table")
        return {kw: nearest_neighbors(kw, n, table) for kw in keywords}
    if source == "lexicon":
        if lexicon is None:
            raise ValueError("lexicon pools need a loaded synonym lexicon")
        return {kw: synonym_pool(kw, lexicon, n) for kw in keywords}
    raise ValueError(f"unknown pool source {source!r}")


def sample_distractor(
    examples: list[DialogExample], index: int, rng: random.Random
) -> list[int]:
    """Uniform response from a different dialog than examples[index]."""
    own = examples[index]
    candidates = [
        i
        for i, ex in enumerate(examples)
        if ex.dialog_index != own.dialog_index and ex.response != own.response
    ]
    if not candidates:
        raise ValueError("corpus too degenerate to sample a distractor")
    return examples[rng.choice(candidates)].response


def _keyword_mode(model_class: ModelClass) -> str | None:
    return model_class.loss_mode


def build_spec(
    example: DialogExample,
    model_class: ModelClass,
    pools: dict[str, SimilarityPool] | None,
) -> KeywordSpec | None:
    """Keyword-loss spec for one example under a class, or None when the
    class has no keyword term or the example has no keywords."""
    mode = _keyword_mode(model_class)
    if mode is None or not example.keywords:
        return None
    words = example.keywords[:1] if not mode.startswith("multi") else example.keywords[:3]
    pairs: list[tuple[str, SimilarityPool | None]] = []
    for word in words:
        pool = (pools or {}).get(word)
        pairs.append((word, pool))
    return KeywordSpec(keywords=pairs, mode=mode)


def encode_for_class(
    example: DialogExample,
    model_class: ModelClass,
    vocab: Vocabulary,
    max_len: int,
    response: list[int] | None = None,
) -> EncodedInput:
    """Class-dependent encoding of one example (true or distractor row)."""
    keywords = example_keywords(model_class, example.keywords)
    return encode_example(
        example.context,
        example.response if response is None else response,
        keywords,
        vocab,
        max_len=max_len,
        complete=True,
        kwpred=model_class.kwpred,
    )


def _pad_batch(rows: list[EncodedInput], pad_id: int, device) -> dict[str, torch.Tensor]:
    width = max(len(r) for r in rows)
    tokens = torch.full((len(rows), width), pad_id, dtype=torch.long, device=device)
    positions = torch.zeros((len(rows), width), dtype=torch.long, device=device)
    states = torch.zeros((len(rows), width), dtype=torch.long, device=device)
    targets = torch.full((len(rows), width), IGNORE_TARGET, dtype=torch.long, device=device)
    anchors = torch.zeros(len(rows), dtype=torch.long, device=device)
    for i, row in enumerate(rows):
        n = len(row)
        tokens[i, :n] = torch.tensor(row.token_ids, dtype=torch.long)
        positions[i, :n] = torch.tensor(row.position_ids, dtype=torch.long)
        states[i, :n] = torch.tensor(row.state_ids, dtype=torch.long)
        targets[i, :n] = torch.tensor(row.lm_targets, dtype=torch.long)
        anchors[i] = row.cls_anchor
    return {
        "tokens": tokens,
        "positions": positions,
        "states": states,
        "targets": targets,
        "anchors": anchors,
    }


class _BatchLoss:
    """Eq.-combined loss over one minibatch.

    LM loss is the token mean over all response positions of the true rows;
    classification is the example mean over (true, distractor) score pairs;
    the keyword term is the example mean over examples carrying a live
    keyword (skipped examples contribute nothing).
    """

    def __init__(self, model: DialogModel, vocab: Vocabulary, weights: LossWeights):
        self.model = model
        self.vocab = vocab
        self.weights = weights
        self.skipped_keywords = 0

    def __call__(
        self,
        batch: list[DialogExample],
        model_class: ModelClass,
        pools: dict[str, SimilarityPool] | None,
    ):
        max_len = self.model.config.max_len
        true_rows = [encode_for_class(ex, model_class, self.vocab, max_len) for ex in batch]
        dis_rows = [
            encode_for_class(ex, model_class, self.vocab, max_len, response=ex.distractor)
            for ex in batch
        ]
        device = self.model.tok_emb.weight.device
        packed = _pad_batch(true_rows + dis_rows, self.vocab.pad_id, device)
        logits, cls_rows = self.model(packed["tokens"], packed["positions"], packed["states"])
        B = len(batch)

        true_logits = logits[:B]
        targets = packed["targets"][:B]
        mask = targets != IGNORE_TARGET
        lm = lm_loss(true_logits.reshape(-1, true_logits.shape[-1]), targets.reshape(-1), mask.reshape(-1))

        scores = cls_rows.gather(1, packed["anchors"].unsqueeze(1)).squeeze(1)
        cls_terms = [cls_loss(torch.stack([scores[i], scores[B + i]]), 0) for i in range(B)]
        cls = torch.stack(cls_terms).mean()

        kw = true_logits.new_zeros(())
        live = 0
        gamma = self.weights.gamma
        if gamma > 0 and model_class.loss_mode is not None:
            for i, ex in enumerate(batch):
                spec = build_spec(ex, model_class, pools)
                if spec is None:
                    continue
                value, diagnostics = keyword_loss(true_logits[i], mask[i], spec, self.vocab)
                if all(d.skipped for d in diagnostics):
                    self.skipped_keywords += 1
                    continue
                kw = kw + value
                live += 1
            if live:
                kw = kw / live
        total = self.weights.alpha * lm + self.weights.beta * cls + gamma * kw
        breakdown = total_loss(
            float(lm.detach()), float(cls.detach()), float(kw.detach()), self.weights
        )
        return total, breakdown


def _clip_grad(model: DialogModel, clip_norm: float) -> float:
    return float(torch.nn.utils.clip_grad_norm_(model.parameters(), clip_norm))


def validation_kia(
    model: DialogModel,
    model_class: ModelClass,
    examples: list[DialogExample],
    vocab: Vocabulary,
    limit: int,
) -> float | None:
    """Greedy-decode KIA over the first `limit` keyworded examples."""
    from .decode import DecodeConfig, greedy_decode
    from .evaluation import kia

    subset = [ex for ex in examples if ex.keywords][:limit]
    if not subset:
        return None
    responses, keyword_sets = [], []
    config = DecodeConfig(strategy="greedy", max_new_tokens=32)
    for ex in subset:
        keywords = example_keywords(model_class, ex.keywords)
        generated = greedy_decode(model, ex.context, keywords, vocab, config)
        responses.append(" ".join(vocab.decode(generated)))
        keyword_sets.append(ex.keywords[:1] if model_class.encode_keywords != "multi" else ex.keywords[:3])
    rate, _ = kia(responses, keyword_sets)
    return rate


def train(
    config: TrainConfig,
    model_config: ModelConfig,
    train_examples: list[DialogExample],
    valid_examples: list[DialogExample],
    vocab: Vocabulary,
    pools: dict[str, SimilarityPool] | None = None,
    checkpoint_path: str | Path | None = None,
    log_path: str | Path | None = None,
    step_trace: list | None = None,
    grad_norm_trace: list | None = None,
) -> tuple[DialogModel, list[dict]]:
    """Train one model class; returns the best-validation model and the
    per-epoch metrics history (also written as JSON lines when `log_path`).

    Deterministic mode pins torch to one thread so repeated runs with the
    same seed produce bitwise-identical parameters. `step_trace` collects
    the per-batch total loss; `grad_norm_trace` the post-clip global norm.
    """
    if not train_examples:
        raise ValueError("no training examples")
    model_class = MODEL_CLASSES[config.model_class]
    weights = config.weights
    if model_class.loss_mode is None and weights.gamma != 0.0:
        weights = LossWeights(weights.alpha, weights.beta, 0.0)
    if config.deterministic:
        torch.set_num_threads(1)
    torch.manual_seed(config.seed)
    model = build_model(model_config, seed=config.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.lr)
    schedule = torch.optim.lr_scheduler.LambdaLR(
        optimizer, lambda step: min(1.0, (step + 1) / max(1, config.warmup_steps))
    )
    rng = random.Random(config.seed)
    batcher = _BatchLoss(model, vocab, weights)

    history: list[dict] = []
    log_fh = Path(log_path).open("w", encoding="utf-8") if log_path else None

    def emit(record: dict) -> None:
        history.append(record)
        if log_fh:
            log_fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            log_fh.flush()

    best_state = None
    best_total = float("inf")
    best_epoch = config.epochs
    step = 0
    try:
        order = list(range(len(train_examples)))
        for epoch in range(1, config.epochs + 1):
            model.train()
            rng.shuffle(order)
            sums = {"L_m": 0.0, "L_n": 0.0, "L_k": 0.0, "total": 0.0}
            batches = 0
            for start in range(0, len(order), config.batch_size):
                batch = [train_examples[i] for i in order[start:start + config.batch_size]]
                optimizer.zero_grad()
                try:
                    total, breakdown = batcher(batch, model_class, pools)
                except ValueError as exc:
                    raise RuntimeError(
                        f"aborting at epoch {epoch} step {step} "
                        f"(batch of {len(batch)} starting at {start}): {exc}"
                    ) from exc
                if not torch.isfinite(total):
                    raise RuntimeError(
                        f"non-finite loss at epoch {epoch} step {step}: "
                        f"L_m={breakdown.lm} L_n={breakdown.cls} L_k={breakdown.kw}"
                    )
                total.backward()
                _clip_grad(model, config.clip_norm)
                if step_trace is not None:
                    step_trace.append(float(total.detach()))
                if grad_norm_trace is not None:
                    post = torch.sqrt(sum(
                        p.grad.detach().pow(2).sum()
                        for p in model.parameters() if p.grad is not None
                    ))
                    grad_norm_trace.append(float(post))
                optimizer.step()
                schedule.step()
                step += 1
                for key, value in (("L_m", breakdown.lm), ("L_n", breakdown.cls),
                                   ("L_k", breakdown.kw), ("total", breakdown.total)):
                    sums[key] += value
                batches += 1
            emit({"epoch": epoch, "split": "train",
                  **{k: sums[k] / max(1, batches) for k in sums}})

            model.eval()
            if valid_examples:
                val = _evaluate_split(batcher, valid_examples, model_class, pools, config.batch_size)
                val_kia = None
                if config.val_decode_limit > 0 and model_class.encode_keywords != "none":
                    val_kia = validation_kia(
                        model, model_class, valid_examples, vocab, config.val_decode_limit
                    )
                emit({"epoch": epoch, "split": "valid", **val, "KIA": val_kia})
                if val["total"] < best_total:
                    best_total = val["total"]
                    best_epoch = epoch
                    best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
            if (
                checkpoint_path
                and config.checkpoint_every
                and epoch % config.checkpoint_every == 0
            ):
                epoch_path = Path(checkpoint_path).with_suffix(f".epoch{epoch}.ckpt")
                _save(model, vocab, config, model_config, epoch, epoch_path)
    finally:
        if log_fh:
            log_fh.close()

    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    if checkpoint_path:
        _save(model, vocab, config, model_config, best_epoch, checkpoint_path)
    return model, history


def _evaluate_split(
    batcher: _BatchLoss,
    examples: list[DialogExample],
    model_class: ModelClass,
    pools,
    batch_size: int,
) -> dict:
    if not examples:
        return {"L_m": 0.0, "L_n": 0.0, "L_k": 0.0, "total": 0.0}
    sums = {"L_m": 0.0, "L_n": 0.0, "L_k": 0.0, "total": 0.0}
    batches = 0
    with torch.no_grad():
        for start in range(0, len(examples), batch_size):
            batch = examples[start:start + batch_size]
            _, breakdown = batcher(batch, model_class, pools)
            for key, value in (("L_m", breakdown.lm), ("L_n", breakdown.cls),
                               ("L_k", breakdown.kw), ("total", breakdown.total)):
                sums[key] += value
            batches += 1
    return {k: sums[k] / batches for k in sums}


def _save(model, vocab, config: TrainConfig, model_config: ModelConfig, epoch: int, path) -> None:
    meta = {
        "model_class": config.model_class,
        "epoch": epoch,
        "seed": config.seed,
        "weights": {"alpha": config.weights.alpha, "beta": config.weights.beta,
                    "gamma": config.weights.gamma},
    }
    save_checkpoint(model, vocab, meta, path)
