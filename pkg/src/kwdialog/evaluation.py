"""Automatic evaluation: keyword-insertion accuracy (exact and pool-relaxed),
keyword diversity, response similarity, distinct-n, perplexity under a
reference LM, and the per-model report that mirrors the comparison tables.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import torch

from .classes import MODEL_CLASSES, example_keywords
from .corpus import DialogExample, Vocabulary, detokenize, normalize
from .decode import DecodeConfig, nucleus_sample
from .embeddings import EmbeddingTable, SimilarityPool, cosine, text_centroid
from .model import DialogModel, IGNORE_TARGET, encode_example
from .objective import lm_loss


@dataclass
class EvalReport:
    model_class: str
    kia: float
    sim_kia: float
    similarity: float
    distinct_1: float
    distinct_2: float
    ppl: float
    keyword_diversity: float | None = None
    excluded: int = 0
    config: dict = field(default_factory=dict)
    corpus_fingerprint: str = ""

    def __post_init__(self):
        for name in ("kia", "sim_kia", "similarity", "distinct_1", "distinct_2"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name}={value} outside [0, 1]")
        if self.ppl < 1.0:
            raise ValueError(f"perplexity {self.ppl} below 1")

    def to_json(self) -> str:
        return json.dumps(self.__dict__, ensure_ascii=False)


def _tokens(text: str) -> set[str]:
    return set(normalize(text))


def kia(
    responses: list[str],
    keyword_sets: list[list[str]],
    pools: dict[str, SimilarityPool] | None = None,
) -> tuple[float, float]:
    """(exact, pool-relaxed) keyword-insertion accuracy.

    A pair counts as a hit when every target keyword appears as a normalized
    token of the response; sim-KIA additionally accepts any pool member.
    Items with an empty keyword set are excluded.
    """
    if len(responses) != len(keyword_sets):
        raise ValueError("responses and keyword sets must align")
    hits = sim_hits = counted = 0
    for response, keywords in zip(responses, keyword_sets):
        if not keywords:
            continue
        counted += 1
        tokens = _tokens(response)
        exact = all(kw.lower() in tokens for kw in keywords)
        relaxed = True
        for kw in keywords:
            accepted = {kw.lower()}
            pool = (pools or {}).get(kw)
            if pool is not None:
                accepted.update(word.lower() for word, _ in pool.members)
            if not accepted & tokens:
                relaxed = False
                break
        hits += exact
        sim_hits += relaxed
    if counted == 0:
        raise ValueError("no items with keywords to score")
    return hits / counted, sim_hits / counted


def keyword_diversity(suggestion_sets: list[list[str]], table: EmbeddingTable) -> float:
    """Mean over lists of mean pairwise cosine between suggested keywords.

    Lower means more diverse. Lists with fewer than two in-table keywords
    are excluded; pairwise cosines are clamped to [0, 1].
    """
    values = []
    for keywords in suggestion_sets:
        vecs = [table[k] for k in keywords if k in table]
        if len(vecs) < 2:
            continue
        total, pairs = 0.0, 0
        for i in range(len(vecs)):
            for j in range(i + 1, len(vecs)):
                total += min(max(cosine(vecs[i], vecs[j]), 0.0), 1.0)
                pairs += 1
        values.append(total / pairs)
    if not values:
        raise ValueError("no keyword lists with >= 2 in-table keywords")
    return sum(values) / len(values)


def response_similarity(generated: str, reference: str, table: EmbeddingTable) -> float:
    """Centroid-cosine similarity between two texts, clamped to [0, 1]."""
    value = cosine(
        text_centroid(normalize(generated), table),
        text_centroid(normalize(reference), table),
    )
    return min(max(value, 0.0), 1.0)


def distinct_n(responses: list[str], n: int) -> float:
    """Distinct n-grams over total n-grams across the response corpus."""
    if n < 1:
        raise ValueError("n must be >= 1")
    seen: set[tuple[str, ...]] = set()
    total = 0
    for response in responses:
        tokens = normalize(response)
        for i in range(len(tokens) - n + 1):
            seen.add(tuple(tokens[i:i + n]))
            total += 1
    if total == 0:
        raise ValueError(f"no response long enough for {n}-grams")
    return len(seen) / total


def response_nll(
    model: DialogModel, vocab: Vocabulary, response_ids: list[int]
) -> tuple[float, int]:
    """(total NLL, token count) of a bare response under a reference LM.

    The response is scored context-free: encoded as an empty-keyword,
    empty-context example, so the NLL covers the response tokens and the
    closing <eos>.
    """
    enc = encode_example([], response_ids, [], vocab, max_len=model.config.max_len)
    logits, _ = model.forward_example(enc)
    targets = torch.tensor(enc.lm_targets, dtype=torch.long)
    mask = targets != IGNORE_TARGET
    count = int(mask.sum())
    loss = lm_loss(logits, targets, mask)
    return float(loss) * count, count


def perplexity(
    responses: list[list[int]], reference: DialogModel, vocab: Vocabulary
) -> float:
    """exp(mean token NLL) of the responses under the reference LM."""
    if not responses:
        raise ValueError("no responses to score")
    reference.eval()
    total, count = 0.0, 0
    with torch.no_grad():
        for ids in responses:
            nll, n = response_nll(reference, vocab, ids)
            total += nll
            count += n
    return math.exp(total / count)


def evaluate_model(
    model: DialogModel,
    model_class_name: str,
    examples: list[DialogExample],
    vocab: Vocabulary,
    table: EmbeddingTable,
    reference: DialogModel,
    decode_config: DecodeConfig | None = None,
    pools: dict[str, SimilarityPool] | None = None,
    corpus_fingerprint: str = "",
) -> EvalReport:
    """Decode one response per example (seeded nucleus sampling) and compute
    the full metric row."""
    if not examples:
        raise ValueError("no evaluation examples")
    model_class = MODEL_CLASSES[model_class_name]
    config = decode_config or DecodeConfig(strategy="nucleus", top_p=0.9)
    model.eval()

    generated_texts: list[str] = []
    generated_ids: list[list[int]] = []
    keyword_sets: list[list[str]] = []
    similarities: list[float] = []
    excluded = 0
    for i, ex in enumerate(examples):
        keywords = example_keywords(model_class, ex.keywords)
        per_example = DecodeConfig(
            strategy="nucleus", top_p=config.top_p, temperature=config.temperature,
            max_new_tokens=config.max_new_tokens, seed=config.seed + i,
            beams=config.beams, groups=config.groups,
            diversity_penalty=config.diversity_penalty,
        )
        ids = nucleus_sample(model, ex.context, keywords, vocab, per_example)
        text = detokenize(ids, vocab)
        generated_ids.append(ids)
        generated_texts.append(text)
        if model_class.encode_keywords == "multi":
            keyword_sets.append(ex.keywords[:3])
        else:
            keyword_sets.append(ex.keywords[:1])
        if not ex.keywords:
            excluded += 1
        similarities.append(response_similarity(text, detokenize(ex.response, vocab), table))

    exact, relaxed = kia(generated_texts, keyword_sets, pools)
    return EvalReport(
        model_class=model_class_name,
        kia=exact,
        sim_kia=relaxed,
        similarity=sum(similarities) / len(similarities),
        distinct_1=distinct_n(generated_texts, 1),
        distinct_2=distinct_n(generated_texts, 2),
        ppl=perplexity(generated_ids, reference, vocab),
        excluded=excluded,
        config={"top_p": config.top_p, "seed": config.seed,
                "max_new_tokens": config.max_new_tokens},
        corpus_fingerprint=corpus_fingerprint,
    )


REPORT_COLUMNS = ("model", "KIA", "sim-KIA", "Similarity", "Distinct-1", "Distinct-2", "PPL")


def format_report_table(reports: list[EvalReport]) -> str:
    """Aligned plain-text table, one row per evaluated model."""
    rows = [
        (
            r.model_class,
            f"{r.kia:.3f}",
            f"{r.sim_kia:.3f}",
            f"{r.similarity:.3f}",
            f"{r.distinct_1:.3f}",
            f"{r.distinct_2:.3f}",
            f"{r.ppl:.3f}",
        )
        for r in reports
    ]
    widths = [
        max(len(REPORT_COLUMNS[c]), *(len(row[c]) for row in rows)) if rows else len(REPORT_COLUMNS[c])
        for c in range(len(REPORT_COLUMNS))
    ]
    lines = ["  ".join(h.ljust(widths[c]) for c, h in enumerate(REPORT_COLUMNS))]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(v.ljust(widths[c]) for c, v in enumerate(row)))
    return "\n".join(lines)
