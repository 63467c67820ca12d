"""The training objective: LM loss, next-utterance classification loss, and
the keyword-loss family (single keyword, similarity-weighted pool, multi).

All loss functions take a per-position logits matrix (T x V) plus a boolean
mask marking the prediction steps that belong to the response, and return
scalar torch tensors so gradients flow through the selected elements only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch
from torch import Tensor

from .corpus import Vocabulary, normalize
from .embeddings import SimilarityPool

MODES = ("plain", "sim", "sim_unit", "multi", "multi_sim", "multi_sim_unit")


@dataclass
class LossWeights:
    """Coefficients of the combined objective; LM and classification default
    to 1, the keyword term to 0.005 (the best-performing setting)."""

    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 0.005

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass
class KeywordSpec:
    """Control input: keywords with optional similarity pools, plus the loss
    mode. Single-keyword modes carry exactly one keyword; multi modes N >= 1."""

    keywords: list[tuple[str, SimilarityPool | None]]
    mode: str = "plain"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        n = len(self.keywords)
        if self.mode.startswith("multi"):
            if n < 1:
                raise ValueError("multi mode needs at least one keyword")
        elif n != 1:
            raise ValueError(f"mode {self.mode!r} takes exactly one keyword, got {n}")

    @property
    def words(self) -> list[str]:
        return [kw for kw, _ in self.keywords]


@dataclass
class KeywordDiagnostic:
    """Which pool word won, at which prediction step, and at what NLL."""

    keyword: str
    chosen: str | None
    timestep: int | None
    nll: float
    skipped: bool = False


@dataclass
class LossBreakdown:
    lm: float
    cls: float
    kw: float
    total: float
    diagnostics: list[KeywordDiagnostic] = field(default_factory=list)


def lm_loss(logits: Tensor, targets: Tensor, mask: Tensor) -> Tensor:
    """Mean token-level NLL over the masked prediction steps."""
    if not bool(mask.any()):
        raise ValueError("empty LM mask")
    rows = torch.log_softmax(logits[mask], dim=-1)
    picked = rows.gather(1, targets[mask].unsqueeze(1)).squeeze(1)
    return -picked.mean()


def cls_loss(scores: Tensor, true_index: int) -> Tensor:
    """Cross-entropy of the softmax over candidate scores."""
    if scores.numel() < 2:
        raise ValueError("need at least 2 candidates")
    if not 0 <= true_index < scores.numel():
        raise ValueError(f"true index {true_index} out of range")
    return -torch.log_softmax(scores, dim=-1)[true_index]


def _token_nll(logits: Tensor, mask: Tensor, token_id: int) -> tuple[Tensor, Tensor]:
    """Per-masked-step NLL of one token, plus the absolute step indices."""
    steps = mask.nonzero(as_tuple=True)[0]
    log_p = torch.log_softmax(logits[steps], dim=-1)[:, token_id]
    return -log_p, steps


def keyword_min_nll(logits: Tensor, mask: Tensor, kw_id: int) -> tuple[Tensor, int]:
    """Minimum over response steps of -log p(keyword); earliest step on ties.

    The gradient flows only through the selected step's logits row.
    """
    if not bool(mask.any()):
        raise ValueError("empty mask")
    if not 0 <= kw_id < logits.shape[-1]:
        raise ValueError(f"keyword id {kw_id} outside vocabulary")
    nll, steps = _token_nll(logits, mask, kw_id)
    best = int(torch.argmin(nll).item())  # torch.argmin returns the first minimum
    return nll[best], int(steps[best].item())


def keyword_sim_loss(
    logits: Tensor,
    mask: Tensor,
    pool: list[tuple[str, int, float]],
    unit_sim: bool = False,
) -> tuple[Tensor, str, int]:
    """Similarity-weighted pooled keyword loss.

    `pool` holds (word, token id, similarity) with the keyword itself first.
    The winning word is the pool argmin of the single-keyword loss; the loss
    is its min-NLL scaled by its similarity (or by 1 when `unit_sim`). Ties
    go to the keyword itself, then lexicographically first.
    """
    if not pool:
        raise ValueError("empty pool after vocabulary filtering")
    entries = []
    for word, token_id, sim in pool:
        value, step = keyword_min_nll(logits, mask, token_id)
        entries.append((word, token_id, sim, value, step))
    lowest = min(float(e[3].detach()) for e in entries)
    tied = [e for e in entries if float(e[3].detach()) == lowest]
    keyword = pool[0][0]
    winner = next((e for e in tied if e[0] == keyword), min(tied, key=lambda e: e[0]))
    word, _, sim, value, step = winner
    weight = 1.0 if unit_sim else sim
    return weight * value, word, step


def multi_keyword_loss(
    logits: Tensor,
    mask: Tensor,
    keywords: list[tuple[str, int, list[tuple[str, int, float]] | None]],
    unit_sim: bool = False,
) -> tuple[Tensor, list[KeywordDiagnostic]]:
    """Sum of per-keyword losses over N control inputs.

    Each entry is (keyword, token id, optional resolved pool); entries with a
    pool use the similarity-weighted form, the rest the plain form.
    """
    if not keywords:
        raise ValueError("multi-keyword loss needs at least one keyword")
    total = logits.new_zeros(())
    diagnostics = []
    for word, token_id, pool in keywords:
        if pool:
            value, chosen, step = keyword_sim_loss(logits, mask, pool, unit_sim)
        else:
            value, step = keyword_min_nll(logits, mask, token_id)
            chosen = word
        total = total + value
        diagnostics.append(KeywordDiagnostic(word, chosen, step, float(value.detach())))
    return total, diagnostics


def resolve_keyword(word: str, vocab: Vocabulary) -> int | None:
    """Token id of a 1-gram keyword; multi-word strings reduce to their first
    token; returns None when out of vocabulary."""
    ids = vocab.encode(normalize(word))
    if not ids or ids[0] == vocab.unk_id:
        return None
    return ids[0]


def resolve_pool(
    pool: SimilarityPool | None, keyword: str, vocab: Vocabulary
) -> list[tuple[str, int, float]]:
    """Map a SimilarityPool onto vocabulary ids, keyword first, OOV dropped."""
    kw_id = resolve_keyword(keyword, vocab)
    resolved: list[tuple[str, int, float]] = []
    if kw_id is not None:
        resolved.append((keyword, kw_id, 1.0))
    if pool is not None:
        for word, sim in pool.members:
            if word == keyword:
                continue
            token_id = resolve_keyword(word, vocab)
            if token_id is not None:
                resolved.append((word, token_id, sim))
    return resolved


def keyword_loss(
    logits: Tensor,
    mask: Tensor,
    spec: KeywordSpec,
    vocab: Vocabulary,
) -> tuple[Tensor, list[KeywordDiagnostic]]:
    """Dispatch to the right member of the loss family for one example.

    Vocabulary-skipped keywords (and pools that empty out) contribute 0 and
    show up in the diagnostics with `skipped=True`.
    """
    zero = logits.new_zeros(())
    diagnostics: list[KeywordDiagnostic] = []
    use_pools = "sim" in spec.mode
    unit_sim = spec.mode.endswith("_unit")

    total = zero
    for word, pool in spec.keywords:
        kw_id = resolve_keyword(word, vocab)
        resolved = resolve_pool(pool, word, vocab) if use_pools else None
        if use_pools:
            if not resolved:
                diagnostics.append(KeywordDiagnostic(word, None, None, 0.0, skipped=True))
                continue
            if len(resolved) == 1 or (pool is not None and pool.empty):
                # pool degenerated to the keyword alone: plain single-keyword loss
                value, step = keyword_min_nll(logits, mask, resolved[0][1])
                chosen = resolved[0][0]
            else:
                value, chosen, step = keyword_sim_loss(logits, mask, resolved, unit_sim)
        else:
            if kw_id is None:
                diagnostics.append(KeywordDiagnostic(word, None, None, 0.0, skipped=True))
                continue
            value, step = keyword_min_nll(logits, mask, kw_id)
            chosen = word
        total = total + value
        diagnostics.append(KeywordDiagnostic(word, chosen, step, float(value.detach())))
    return total, diagnostics


def total_loss(lm: float, cls: float, kw: float, weights: LossWeights) -> LossBreakdown:
    """Weighted combination; rejects non-finite components by name."""
    for name, value in (("L_m", lm), ("L_n", cls), ("L_k", kw)):
        if not math.isfinite(value):
            raise ValueError(f"non-finite loss component {name}: {value}")
    total = weights.alpha * lm + weights.beta * cls + weights.gamma * kw
    return LossBreakdown(lm=lm, cls=cls, kw=kw, total=total)
