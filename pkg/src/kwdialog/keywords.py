"""Cue/keyword prediction.

Training-time extraction scores a response's content words by cosine
similarity to the response centroid in the static embedding space. At
inference the extractive predictor mines diverse beam outputs of a base
(keyword-free) model, and the generative predictor decodes a dedicated
keyword-prediction model directly.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .corpus import DialogExample, Vocabulary, detokenize, normalize
from .decode import DecodeConfig, diverse_beam_search
from .embeddings import STOPWORDS, EmbeddingTable, cosine, text_centroid
from .model import DialogModel

SOURCES = ("extractive", "generative", "human")


def _wordlike(token: str) -> bool:
    return any(ch.isalnum() for ch in token)


@dataclass
class KeywordSuggestion:
    """A single 1-gram cue: lowercase, never a stopword."""

    text: str
    source: str
    score: float

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        if len(self.text.split()) != 1 or self.text != self.text.lower():
            raise ValueError(f"suggestion {self.text!r} is not a lowercase 1-gram")
        if self.text in STOPWORDS:
            raise ValueError(f"suggestion {self.text!r} is a stopword")


def extract_keywords(text: str, table: EmbeddingTable, k: int = 3) -> list[KeywordSuggestion]:
    """Top-k content words of `text` by cosine to the text centroid.

    Candidates are the distinct in-table non-stopword tokens; ties break
    lexicographically. Empty when nothing qualifies.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    tokens = normalize(text)
    candidates = sorted(
        {t for t in tokens if t not in STOPWORDS and t in table and _wordlike(t)}
    )
    if not candidates:
        return []
    centroid = text_centroid(tokens, table)
    scored = [(c, cosine(table[c], centroid)) for c in candidates]
    scored.sort(key=lambda cs: (-cs[1], cs[0]))
    return [
        KeywordSuggestion(text=word, source="extractive", score=score)
        for word, score in scored[:k]
    ]


def extraction_fn(table: EmbeddingTable, k: int = 3):
    """String -> keyword list closure for corpus example building."""

    def extract(text: str) -> list[str]:
        return [s.text for s in extract_keywords(text, table, k)]

    return extract


def extractive_suggest(
    context: list[list[int]],
    base_model: DialogModel,
    vocab: Vocabulary,
    table: EmbeddingTable,
    config: DecodeConfig | None = None,
    k: int = 3,
) -> list[KeywordSuggestion]:
    """Mine keyword suggestions from diverse beam outputs of the base model.

    Every beam text is run through extraction; suggestions merge by maximum
    score and come back deduplicated, top-k.
    """
    config = config or DecodeConfig(strategy="diverse-beam")
    hypotheses = diverse_beam_search(base_model, context, [], vocab, config)
    best: dict[str, float] = {}
    for hyp in hypotheses:
        text = detokenize(hyp.tokens, vocab)
        for suggestion in extract_keywords(text, table, k):
            if suggestion.score > best.get(suggestion.text, float("-inf")):
                best[suggestion.text] = suggestion.score
    ranked = sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))
    return [
        KeywordSuggestion(text=word, source="extractive", score=score)
        for word, score in ranked[:k]
    ]


def kwpred_target(keywords: list[str], vocab: Vocabulary) -> list[int]:
    """Token-id target for the generative predictor: `k1 , k2 , k3`.

    The encoder adds the <kwpred> opener and closing <eos>; commas separate
    keywords and must exist in the vocabulary.
    """
    comma = vocab.id_of(",")
    if comma == vocab.unk_id:
        raise ValueError("vocabulary lacks ',', cannot build predictor targets")
    ids: list[int] = []
    for i, word in enumerate(keywords):
        if i:
            ids.append(comma)
        toks = normalize(word)
        ids.append(vocab.id_of(toks[0]) if toks else vocab.unk_id)
    return ids


def build_kwpred_examples(examples, vocab: Vocabulary, seed: int = 0):
    """Derive keyword-prediction training examples: same contexts, responses
    replaced by the keyword-list target, fresh distractor targets."""
    keyworded = [ex for ex in examples if ex.keywords]
    if len(keyworded) < 2:
        raise ValueError("need at least 2 keyworded examples")
    rng = random.Random(seed)
    targets = [kwpred_target(ex.keywords, vocab) for ex in keyworded]
    derived = []
    for i, ex in enumerate(keyworded):
        for _ in range(1000):
            j = rng.randrange(len(keyworded))
            if j != i and targets[j] != targets[i]:
                break
        else:
            raise ValueError("keyword targets too uniform to sample distractors")
        derived.append(
            DialogExample(
                context=ex.context,
                response=targets[i],
                keywords=[],
                distractor=targets[j],
                distractor_index=j,
                dialog_index=ex.dialog_index,
            )
        )
    return derived


def parse_kwpred_output(tokens: list[int], vocab: Vocabulary) -> list[str]:
    """Comma-separated 1-grams out of a decoded keyword-prediction sequence;
    stopwords, reserved tokens and empty segments are dropped."""
    words = []
    segment: list[str] = []
    for tok in vocab.decode(tokens) + [","]:
        if tok == ",":
            if len(segment) == 1 and segment[0] not in STOPWORDS and _wordlike(segment[0]):
                words.append(segment[0])
            segment = []
        elif tok.startswith("<") and tok.endswith(">"):
            continue
        else:
            segment.append(tok)
    return words


def generative_suggest(
    context: list[list[int]],
    kwpred_model: DialogModel,
    vocab: Vocabulary,
    config: DecodeConfig | None = None,
    k: int = 3,
) -> list[KeywordSuggestion]:
    """Decode the keyword-prediction model with diverse beams and parse the
    comma-separated outputs; unparseable beams are skipped. Top-k by beam
    score, deduplicated."""
    config = config or DecodeConfig(strategy="diverse-beam")
    hypotheses = diverse_beam_search(kwpred_model, context, [], vocab, config, kwpred=True)
    best: dict[str, float] = {}
    for hyp in hypotheses:
        for word in parse_kwpred_output(hyp.tokens, vocab):
            score = hyp.normalized_score
            if score > best.get(word, float("-inf")):
                best[word] = score
    ranked = sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))
    return [
        KeywordSuggestion(text=word, source="generative", score=score)
        for word, score in ranked[:k]
    ]


def suggestion_diversity(suggestions: list[KeywordSuggestion], table: EmbeddingTable) -> float | None:
    """Mean pairwise cosine (clamped to [0,1]) over a suggestion list; None
    when fewer than two suggestions are in-table."""
    vecs = [table[s.text] for s in suggestions if s.text in table]
    if len(vecs) < 2:
        return None
    total, pairs = 0.0, 0
    for i in range(len(vecs)):
        for j in range(i + 1, len(vecs)):
            total += min(max(cosine(vecs[i], vecs[j]), 0.0), 1.0)
            pairs += 1
    return total / pairs
