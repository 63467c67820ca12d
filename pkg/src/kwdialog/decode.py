"""Response decoding over a trained model: seeded nucleus sampling, grouped
diverse beam search with a Hamming diversity penalty, and greedy decoding.

All decoders are pure functions of (model parameters, inputs, config, seed)
and run the model in eval mode under no_grad.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import torch
from torch import Tensor

from .corpus import Vocabulary
from .model import DialogModel, EncodedInput, SPK2_STATE, encode_example

STRATEGIES = ("nucleus", "diverse-beam", "greedy")


@dataclass
class DecodeConfig:
    strategy: str = "nucleus"
    top_p: float = 0.9
    beams: int = 10
    groups: int = 2
    diversity_penalty: float = 5.5
    max_new_tokens: int = 40
    temperature: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError("top_p must be in (0, 1]")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")
        if self.beams < 1 or self.groups < 1 or self.beams % self.groups != 0:
            raise ValueError("group count must divide beam count")
        if self.diversity_penalty < 0:
            raise ValueError("diversity penalty must be >= 0")
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")


@dataclass
class BeamHypothesis:
    tokens: list[int]
    score: float
    group: int

    @property
    def normalized_score(self) -> float:
        return self.score / max(1, len(self.tokens))


class _Prefix:
    """Shared encoded prefix; decoding appends responder-state positions."""

    def __init__(self, model: DialogModel, enc: EncodedInput):
        self.model = model
        self.tokens = list(enc.token_ids)
        self.states = list(enc.state_ids)
        self.length = len(enc.token_ids)
        if self.length + 1 > model.config.max_len:
            raise ValueError("no room to generate after the encoded context")

    def budget(self, max_new_tokens: int) -> int:
        return min(max_new_tokens, self.model.config.max_len - self.length + 1)

    def batch_logits(self, suffixes: list[list[int]]) -> Tensor:
        """Next-token logits for prefix+suffix rows (equal suffix lengths)."""
        rows = [self.tokens + s for s in suffixes]
        T = len(rows[0])
        if T > self.model.config.max_len:
            raise ValueError(f"decode length {T} exceeds max_len")
        device = self.model.tok_emb.weight.device
        tokens = torch.tensor(rows, dtype=torch.long, device=device)
        positions = torch.arange(T, device=device).expand(len(rows), T)
        states = torch.tensor(
            [self.states + [SPK2_STATE] * len(s) for s in suffixes],
            dtype=torch.long,
            device=device,
        )
        logits, _ = self.model(tokens, positions, states)
        return logits[:, -1, :]


def _prepare(
    model: DialogModel,
    context: list[list[int]],
    keywords: list[str],
    vocab: Vocabulary,
    kwpred: bool = False,
) -> _Prefix:
    enc = encode_example(
        context, [], keywords, vocab, max_len=model.config.max_len - 1,
        complete=False, kwpred=kwpred,
    )
    return _Prefix(model, enc)


def nucleus_cutoff(probs: Tensor, top_p: float) -> Tensor:
    """Indices of the smallest probability-sorted prefix with mass >= top_p."""
    sorted_probs, sorted_idx = torch.sort(probs, descending=True, stable=True)
    cumulative = torch.cumsum(sorted_probs, dim=0)
    keep = int(torch.searchsorted(cumulative, torch.tensor(top_p, dtype=cumulative.dtype)).item())
    keep = min(keep, probs.numel() - 1)
    return sorted_idx[: keep + 1]


def nucleus_sample(
    model: DialogModel,
    context: list[list[int]],
    keywords: list[str],
    vocab: Vocabulary,
    config: DecodeConfig,
    kwpred: bool = False,
    trace: list | None = None,
) -> list[int]:
    """Sample a response: at each step restrict to the top-p nucleus,
    renormalize, draw, stop at <eos> or the token budget.

    `trace` (when given) records the nucleus index set per step for
    instrumented checks.
    """
    was_training = model.training
    model.eval()
    generator = torch.Generator().manual_seed(config.seed)
    prefix = _prepare(model, context, keywords, vocab, kwpred=kwpred)
    generated: list[int] = []
    try:
        with torch.no_grad():
            for _ in range(prefix.budget(config.max_new_tokens)):
                logits = prefix.batch_logits([generated])[0]
                probs = torch.softmax(logits / config.temperature, dim=-1)
                nucleus = nucleus_cutoff(probs, config.top_p)
                kept = probs[nucleus]
                choice = torch.multinomial(kept / kept.sum(), 1, generator=generator)
                token = int(nucleus[choice].item())
                if trace is not None:
                    trace.append((set(nucleus.tolist()), token))
                if token == vocab.eos_id:
                    break
                generated.append(token)
    finally:
        if was_training:
            model.train()
    return generated


def greedy_decode(
    model: DialogModel,
    context: list[list[int]],
    keywords: list[str],
    vocab: Vocabulary,
    config: DecodeConfig,
    kwpred: bool = False,
) -> list[int]:
    """Argmax decoding; the limit case of nucleus sampling as top_p -> 0."""
    was_training = model.training
    model.eval()
    prefix = _prepare(model, context, keywords, vocab, kwpred=kwpred)
    generated: list[int] = []
    try:
        with torch.no_grad():
            for _ in range(prefix.budget(config.max_new_tokens)):
                logits = prefix.batch_logits([generated])[0]
                token = int(torch.argmax(logits).item())
                if token == vocab.eos_id:
                    break
                generated.append(token)
    finally:
        if was_training:
            model.train()
    return generated


def diverse_beam_search(
    model: DialogModel,
    context: list[list[int]],
    keywords: list[str],
    vocab: Vocabulary,
    config: DecodeConfig,
    kwpred: bool = False,
) -> list[BeamHypothesis]:
    """Grouped beam search with a Hamming diversity penalty.

    Groups take turns in fixed order at every step; a candidate token in
    group g is penalized by `diversity_penalty x (number of beams in groups
    < g that chose that token at this step)`. Within a group the update is
    standard beam search. Results come back sorted by length-normalized
    score, best first, with their group ids; hypothesis token lists exclude
    the closing <eos>.
    """
    was_training = model.training
    model.eval()
    width = config.beams // config.groups
    prefix = _prepare(model, context, keywords, vocab, kwpred=kwpred)

    alive: list[list[tuple[list[int], float]]] = [[([], 0.0)] for _ in range(config.groups)]
    finished: list[BeamHypothesis] = []
    try:
        with torch.no_grad():
            for step in range(prefix.budget(config.max_new_tokens)):
                step_counts: Counter[int] = Counter()
                for g in range(config.groups):
                    hyps = alive[g]
                    if not hyps:
                        continue
                    logits = prefix.batch_logits([tokens for tokens, _ in hyps])
                    log_probs = torch.log_softmax(logits / config.temperature, dim=-1)
                    if config.diversity_penalty > 0 and step_counts:
                        penalty = torch.zeros_like(log_probs[0])
                        for token, count in step_counts.items():
                            penalty[token] = config.diversity_penalty * count
                        log_probs = log_probs - penalty
                    candidates = []
                    for i, (tokens, score) in enumerate(hyps):
                        row = log_probs[i]
                        for token in torch.topk(row, min(2 * width, row.numel())).indices.tolist():
                            candidates.append((score + float(row[token]), i, token))
                    candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
                    new_hyps: list[tuple[list[int], float]] = []
                    selected: list[int] = []
                    for cand_score, i, token in candidates:
                        if len(new_hyps) >= width:
                            break
                        base_tokens, _ = hyps[i]
                        if token == vocab.eos_id:
                            finished.append(
                                BeamHypothesis(tokens=list(base_tokens), score=cand_score, group=g)
                            )
                        else:
                            new_hyps.append((base_tokens + [token], cand_score))
                        selected.append(token)
                    alive[g] = new_hyps
                    step_counts.update(selected)
                if all(not hyps for hyps in alive):
                    break
        for g in range(config.groups):
            for tokens, score in alive[g]:
                finished.append(BeamHypothesis(tokens=tokens, score=score, group=g))
    finally:
        if was_training:
            model.train()
    finished.sort(key=lambda h: (-h.normalized_score, h.group, h.tokens))
    return finished
