"""Static word embeddings: GloVe-format loading, similarity pools, centroids.

One table powers keyword extraction, the similar-word pools feeding the
similarity-weighted keyword loss, keyword-diversity scoring, and the
response-similarity metric.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

# Fixed English stopword list, versioned in-repo so extraction is reproducible.
STOPWORDS = frozenset("""
i me my myself we our ours ourselves you your yours yourself yourselves he him
his himself she her hers herself it its itself they them their theirs
themselves what which who whom this that these those am is are was were be
been being have has had having do does did doing a an the and but if or
because as until while of at by for with about against between into through
during before after above below to from up down in out on off over under
again further then once here there when where why how all any both each few
more most other some such no nor not only own same so than too very s t can
will just don should now
""".split())


class EmbeddingTable:
    """Immutable word -> dense vector map (float32, fixed dimension)."""

    def __init__(self, words: list[str], vectors: np.ndarray):
        if vectors.ndim != 2 or len(words) != vectors.shape[0]:
            raise ValueError("words/vectors shape mismatch")
        if len(set(words)) != len(words):
            raise ValueError("duplicate words in embedding table")
        self._index = {w: i for i, w in enumerate(words)}
        self._vectors = np.asarray(vectors, dtype=np.float32)
        self._vectors.setflags(write=False)

    @property
    def dim(self) -> int:
        return self._vectors.shape[1]

    def __len__(self) -> int:
        return len(self._index)

    def __contains__(self, word: str) -> bool:
        return word in self._index

    def __getitem__(self, word: str) -> np.ndarray:
        return self._vectors[self._index[word]]

    @property
    def words(self) -> list[str]:
        return list(self._index)

    @property
    def matrix(self) -> np.ndarray:
        return self._vectors


@dataclass
class SimilarityPool:
    """A keyword plus its similar words, each with similarity in [0, 1].

    The keyword itself is always a member with similarity 1.0. An empty
    `members` list signals the keyword was not found anywhere; the keyword
    loss then falls back to the plain single-keyword form.
    """

    keyword: str
    members: list[tuple[str, float]]

    def __post_init__(self):
        seen = set()
        for word, sim in self.members:
            if word in seen:
                raise ValueError(f"duplicate pool member {word!r}")
            seen.add(word)
            if not 0.0 <= sim <= 1.0:
                raise ValueError(f"similarity {sim} outside [0, 1]")

    @property
    def empty(self) -> bool:
        return not self.members


def load_table(path: str | Path) -> EmbeddingTable:
    """Parse a GloVe text file: `word v1 v2 ... vd` per line, consistent d."""
    words: list[str] = []
    rows: list[np.ndarray] = []
    dim = None
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                raise ValueError(f"{path}:{lineno}: not a word-vector line")
            word, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise ValueError(
                    f"{path}:{lineno}: expected {dim} values, got {len(values)}"
                )
            try:
                rows.append(np.asarray([float(v) for v in values], dtype=np.float32))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad number ({exc})") from None
            words.append(word)
    if not words:
        raise ValueError(f"{path}: empty embedding file")
    return EmbeddingTable(words, np.stack(rows))


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity in [-1, 1]; zero vectors are defined as 0-similar."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def nearest_neighbors(word: str, n: int, table: EmbeddingTable) -> SimilarityPool:
    """Top-n cosine neighbors of `word`, negative similarities clamped to 0.

    A negative weight in the similarity-weighted loss would reward
    suppressing the word, so pools never carry one. Unknown words yield an
    empty pool.
    """
    if word not in table:
        return SimilarityPool(keyword=word, members=[])
    query = np.asarray(table[word], dtype=np.float64)
    qn = np.linalg.norm(query)
    members: list[tuple[str, float]] = []
    if n > 0 and qn > 0.0:
        matrix = np.asarray(table.matrix, dtype=np.float64)
        norms = np.linalg.norm(matrix, axis=1)
        safe = np.where(norms == 0.0, 1.0, norms)
        sims = matrix @ query / (safe * qn)
        sims[norms == 0.0] = 0.0
        words = table.words
        order = sorted(
            (i for i in range(len(words)) if words[i] != word),
            key=lambda i: (-sims[i], words[i]),
        )
        for i in order[:n]:
            members.append((words[i], float(np.clip(sims[i], 0.0, 1.0))))
    members.append((word, 1.0))
    return SimilarityPool(keyword=word, members=members)


def load_synonyms(path: str | Path) -> dict[str, list[tuple[str, float]]]:
    """TSV lexicon `word<TAB>synonym<TAB>similarity`; last duplicate wins."""
    lexicon: dict[str, dict[str, float]] = {}
    duplicates = 0
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 tab-separated fields")
            word, synonym, raw = parts
            try:
                sim = float(raw)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad similarity {raw!r}") from None
            entry = lexicon.setdefault(word, {})
            if synonym in entry:
                duplicates += 1
                logger.warning("%s:%d: duplicate (%s, %s), last wins", path, lineno, word, synonym)
            entry[synonym] = min(max(sim, 0.0), 1.0)
    return {w: sorted(e.items(), key=lambda kv: (-kv[1], kv[0])) for w, e in lexicon.items()}


def synonym_pool(word: str, lexicon: dict[str, list[tuple[str, float]]], n: int = 5) -> SimilarityPool:
    """Pool from a synonym lexicon, interchangeable with nearest_neighbors."""
    entries = [(s, sim) for s, sim in lexicon.get(word, []) if s != word][:n]
    if word not in lexicon and not entries:
        return SimilarityPool(keyword=word, members=[])
    return SimilarityPool(keyword=word, members=entries + [(word, 1.0)])


def text_centroid(tokens: list[str], table: EmbeddingTable) -> np.ndarray:
    """Mean vector of in-table, non-stopword tokens; zero vector if none."""
    rows = [table[t] for t in tokens if t not in STOPWORDS and t in table]
    if not rows:
        return np.zeros(table.dim, dtype=np.float32)
    return np.mean(np.stack(rows), axis=0, dtype=np.float64).astype(np.float32)
