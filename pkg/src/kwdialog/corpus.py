"""Corpus ingestion: DailyDialog-format parsing, vocabulary, training examples.

The corpus format is one dialog per line, utterances separated by the
literal token ``__eou__`` (UTF-8). Train/valid/test come as three files.
"""

from __future__ import annotations

import json
import logging
import random
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

logger = logging.getLogger(__name__)

EOU = "__eou__"

PAD, UNK, BOS, EOS, SPEAKER1, SPEAKER2, KW_SEP, KWPRED = (
    "<pad>", "<unk>", "<bos>", "<eos>", "<speaker1>", "<speaker2>", "<kw>", "<kwpred>",
)
RESERVED_TOKENS = (PAD, UNK, BOS, EOS, SPEAKER1, SPEAKER2, KW_SEP, KWPRED)

MAX_CONTEXT_TURNS = 5
MAX_KEYWORDS = 3

# reserved markers stay atomic so tokenize(detokenize(ids)) == ids holds
_TOKEN_RE = re.compile(
    r"<(?:pad|unk|bos|eos|speaker1|speaker2|kw|kwpred)>|\w+|[^\w\s]", re.UNICODE
)


@dataclass
class Dialog:
    """One conversation: an ordered list of speaker turns."""

    utterances: list[str]

    def __post_init__(self):
        if len(self.utterances) < 2:
            raise ValueError("a dialog needs at least 2 utterances")
        if any(not u.strip() for u in self.utterances):
            raise ValueError("empty utterance after normalization")


class Vocabulary:
    """Token <-> id bijection with fixed reserved ids 0-7."""

    def __init__(self, tokens: Sequence[str]):
        for i, tok in enumerate(RESERVED_TOKENS):
            if i >= len(tokens) or tokens[i] != tok:
                raise ValueError(f"reserved token {tok!r} must sit at id {i}")
        self._tokens = list(tokens)
        self._ids = {t: i for i, t in enumerate(self._tokens)}
        if len(self._ids) != len(self._tokens):
            raise ValueError("duplicate token in vocabulary")

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    @property
    def pad_id(self) -> int:
        return 0

    @property
    def unk_id(self) -> int:
        return 1

    @property
    def bos_id(self) -> int:
        return 2

    @property
    def eos_id(self) -> int:
        return 3

    @property
    def speaker1_id(self) -> int:
        return 4

    @property
    def speaker2_id(self) -> int:
        return 5

    @property
    def kw_sep_id(self) -> int:
        return 6

    @property
    def kwpred_id(self) -> int:
        return 7

    def id_of(self, token: str) -> int:
        return self._ids.get(token, self.unk_id)

    def token_of(self, idx: int) -> str:
        return self._tokens[idx]

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.id_of(t) for t in tokens]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self._tokens[i] for i in ids]

    @property
    def tokens(self) -> list[str]:
        return list(self._tokens)

    def to_json(self) -> str:
        return json.dumps({"tokens": self._tokens}, ensure_ascii=False)

    @classmethod
    def from_json(cls, text: str) -> "Vocabulary":
        return cls(json.loads(text)["tokens"])


@dataclass
class DialogExample:
    """One training unit: context turns, target response, keyword targets.

    `context` holds up to MAX_CONTEXT_TURNS token-id sequences, oldest first.
    `keywords` are 1-gram strings extracted from the response (may be empty
    when nothing was extractable; such examples skip the keyword-loss term).
    `distractor` is the response of another dialog, for the next-utterance
    classification task; `distractor_index` points at the source example.
    """

    context: list[list[int]]
    response: list[int]
    keywords: list[str]
    distractor: list[int]
    distractor_index: int = -1
    dialog_index: int = -1

    def __post_init__(self):
        if len(self.context) > MAX_CONTEXT_TURNS:
            raise ValueError("context longer than 5 utterances")
        if len(self.keywords) > MAX_KEYWORDS:
            raise ValueError("more than 3 keywords")
        if self.distractor == self.response:
            raise ValueError("distractor equals response")


def normalize(text: str) -> list[str]:
    """Lowercase word-level tokens with punctuation split off."""
    return _TOKEN_RE.findall(text.lower())


def tokenize(text: str, vocab: Vocabulary) -> list[int]:
    """Total function: OOV words map to <unk>, empty text to []."""
    return vocab.encode(normalize(text))


def detokenize(ids: Sequence[int], vocab: Vocabulary) -> str:
    """Space-joined surface form; drops nothing, reserved tokens included."""
    return " ".join(vocab.decode(ids))


@dataclass
class ParseStats:
    dialogs: int = 0
    skipped: int = 0


def parse_corpus(path: str | Path, stats: ParseStats | None = None) -> list[Dialog]:
    """Read a DailyDialog-format file: one dialog per line, `__eou__` separated.

    Lines with fewer than two non-empty utterances are skipped and counted.
    """
    path = Path(path)
    dialogs: list[Dialog] = []
    stats = stats if stats is not None else ParseStats()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            utterances = [u.strip() for u in line.split(EOU)]
            utterances = [u for u in utterances if u]
            if len(utterances) < 2:
                stats.skipped += 1
                logger.warning("line %d: fewer than 2 utterances, skipped", lineno)
                continue
            dialogs.append(Dialog(utterances))
            stats.dialogs += 1
    return dialogs


def build_vocab(dialogs: Sequence[Dialog], min_freq: int = 3) -> Vocabulary:
    """Frequency-thresholded vocabulary with deterministic id assignment.

    Ordering after the reserved block: frequency descending, ties broken
    lexicographically, so two builds over the same corpus agree exactly.
    """
    if not dialogs:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    counts: Counter[str] = Counter()
    for dialog in dialogs:
        for utterance in dialog.utterances:
            counts.update(normalize(utterance))
    kept = sorted(
        (t for t, c in counts.items() if c >= min_freq and t not in RESERVED_TOKENS),
        key=lambda t: (-counts[t], t),
    )
    return Vocabulary(list(RESERVED_TOKENS) + kept)


@dataclass
class BuildStats:
    examples: int = 0
    keywordless: int = 0


def build_examples(
    dialogs: Sequence[Dialog],
    vocab: Vocabulary,
    extractor: Callable[[str], list[str]],
    seed: int = 0,
    stats: BuildStats | None = None,
) -> list[DialogExample]:
    """Window every dialog into (context, response) pairs with keyword targets.

    For each turn t >= 1 the context is the up-to-5 preceding turns and the
    response is turn t. Keywords come from `extractor(response_text)` (first
    3 kept). Distractors are sampled uniformly from the responses of *other*
    dialogs under the given seed.
    """
    stats = stats if stats is not None else BuildStats()
    rng = random.Random(seed)

    # (dialog index, response ids) for every candidate distractor source
    flat: list[tuple[int, list[int]]] = []
    for d_idx, dialog in enumerate(dialogs):
        for t in range(1, len(dialog.utterances)):
            flat.append((d_idx, tokenize(dialog.utterances[t], vocab)))

    if len({d for d, _ in flat}) < 2:
        raise ValueError("need responses from at least 2 dialogs for distractors")

    examples: list[DialogExample] = []
    for d_idx, dialog in enumerate(dialogs):
        turn_ids = [tokenize(u, vocab) for u in dialog.utterances]
        for t in range(1, len(dialog.utterances)):
            context = turn_ids[max(0, t - MAX_CONTEXT_TURNS):t]
            response = turn_ids[t]
            keywords = list(extractor(dialog.utterances[t]))[:MAX_KEYWORDS]
            if not keywords:
                stats.keywordless += 1
            # resample until the distractor comes from a different dialog
            for _ in range(1000):
                j = rng.randrange(len(flat))
                if flat[j][0] != d_idx and flat[j][1] != response:
                    break
            else:
                raise ValueError("corpus too degenerate to sample a distractor")
            examples.append(
                DialogExample(
                    context=context,
                    response=response,
                    keywords=keywords,
                    distractor=flat[j][1],
                    distractor_index=j,
                    dialog_index=d_idx,
                )
            )
            stats.examples += 1
    return examples


def save_examples(examples: Sequence[DialogExample], vocab: Vocabulary, path: str | Path) -> None:
    """JSON-lines dump, token strings rather than ids so files are diff-able."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for ex in examples:
            record = {
                "context": [vocab.decode(turn) for turn in ex.context],
                "response": vocab.decode(ex.response),
                "keywords": ex.keywords,
                "distractor": ex.distractor_index,
                "dialog": ex.dialog_index,
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def load_examples(path: str | Path, vocab: Vocabulary) -> list[DialogExample]:
    rows = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rows.append(json.loads(line))
    examples = []
    for row in rows:
        idx = row["distractor"]
        distractor = vocab.encode(rows[idx]["response"]) if 0 <= idx < len(rows) else []
        examples.append(
            DialogExample(
                context=[vocab.encode(t) for t in row["context"]],
                response=vocab.encode(row["response"]),
                keywords=row["keywords"],
                distractor=distractor,
                distractor_index=idx,
                dialog_index=row.get("dialog", -1),
            )
        )
    return examples
