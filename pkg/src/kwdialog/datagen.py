"""Seeded generator for desk-scale corpora in the DailyDialog file format,
plus matching embedding tables and synonym lexicons.

Dialogs are built from stopword-only templates with topical content slots,
so keyword extraction is unambiguous (the content word is the only
non-stopword token) and the keyword-control effect is learnable at small
scale: within a topic the response word is sampled uniformly, which caps
the keyword-insertion rate of an unconditioned model near 1/words-per-topic.

The `planted` variant ties every topic to one fixed response keyword, which
gives the generative keyword predictor a recoverable context -> keyword
mapping.
"""

from __future__ import annotations

import random
from pathlib import Path

import numpy as np

from .corpus import EOU, normalize
from .embeddings import STOPWORDS

TOPICS: dict[str, list[str]] = {
    "food": ["pizza", "pasta", "salad", "bread", "cheese", "soup", "cake", "butter", "rice", "beans"],
    "drinks": ["coffee", "tea", "juice", "wine", "beer", "milk", "cider", "soda", "lemonade", "cocoa"],
    "animals": ["dog", "cat", "horse", "rabbit", "sheep", "duck", "goat", "pig", "crow", "fox"],
    "travel": ["ticket", "train", "plane", "hotel", "map", "passport", "luggage", "taxi", "ferry", "tour"],
    "weather": ["rain", "snow", "wind", "storm", "cloud", "sunshine", "fog", "hail", "frost", "thunder"],
    "sports": ["soccer", "tennis", "golf", "hockey", "rugby", "boxing", "cycling", "rowing", "skating", "chess"],
    "music": ["guitar", "piano", "drums", "violin", "song", "concert", "band", "flute", "opera", "jazz"],
    "movies": ["film", "actor", "comedy", "drama", "scene", "script", "trailer", "cinema", "sequel", "popcorn"],
    "work": ["office", "meeting", "salary", "boss", "report", "desk", "deadline", "contract", "client", "shift"],
    "school": ["teacher", "exam", "lesson", "homework", "class", "notebook", "pencil", "grade", "campus", "lecture"],
    "shopping": ["store", "price", "discount", "receipt", "basket", "cashier", "coupon", "bargain", "mall", "refund"],
    "health": ["doctor", "medicine", "fever", "clinic", "nurse", "vitamin", "allergy", "bandage", "therapy", "dentist"],
    "family": ["mother", "father", "sister", "brother", "cousin", "uncle", "aunt", "nephew", "niece", "grandma"],
    "hobbies": ["painting", "fishing", "knitting", "gardening", "photography", "hiking", "baking", "camping", "puzzle", "origami"],
    "home": ["kitchen", "sofa", "window", "curtain", "carpet", "lamp", "mirror", "pillow", "blanket", "shelf"],
    "garden": ["roses", "tulips", "lawn", "hedge", "shovel", "compost", "seeds", "weeds", "sprinkler", "fence"],
    "technology": ["laptop", "phone", "screen", "keyboard", "printer", "router", "battery", "charger", "webcam", "tablet"],
    "cars": ["engine", "tire", "brake", "garage", "fuel", "wheel", "bumper", "dashboard", "trunk", "clutch"],
    "books": ["novel", "author", "chapter", "library", "poetry", "cover", "bookmark", "preface", "villain", "plot"],
    "art": ["museum", "statue", "canvas", "gallery", "sketch", "portrait", "sculpture", "easel", "mural", "palette"],
    "nature": ["forest", "river", "valley", "meadow", "cliff", "waterfall", "desert", "glacier", "canyon", "lagoon"],
    "city": ["subway", "tower", "bridge", "market", "square", "avenue", "harbor", "plaza", "alley", "fountain"],
    "beach": ["sand", "waves", "shell", "tide", "surf", "towel", "umbrella", "sunset", "dune", "reef"],
    "cooking": ["recipe", "oven", "spice", "flour", "grill", "skillet", "whisk", "ladle", "broth", "garnish"],
}

OPENERS = [
    "what about the {x} ?",
    "do you have any {x} ?",
    "how about some {x} ?",
    "where is the {x} ?",
    "i am here for the {x} .",
    "can we do the {x} now ?",
    "is there a {x} here ?",
]

RESPONSES = [
    "i will have the {y} now .",
    "there is some {y} over there .",
    "we can do the {y} again .",
    "it is the {y} for me .",
    "i had the {y} before .",
    "it will be the {y} then .",
    "the {y} is just here .",
    "we should have the {y} too .",
    "so , it will be the {y} .",
]

RESPONSES_TWO = [
    "it is the {y} or the {z} .",
    "we can have the {y} and the {z} too .",
    "i had the {y} with the {z} before .",
    "the {y} , and then the {z} .",
]

KEYWORDLESS = [
    "can we do that again ?",
    "is it here now ?",
    "you should not do that .",
    "i can do it now .",
]


def _check_templates() -> None:
    for template in OPENERS + RESPONSES + RESPONSES_TWO + KEYWORDLESS:
        for token in normalize(template.replace("{x}", "a").replace("{y}", "a").replace("{z}", "a")):
            if token not in STOPWORDS and token.isalnum():
                raise AssertionError(f"template filler {token!r} is not a stopword")


_check_templates()

_ALL_WORDS = [w for words in TOPICS.values() for w in words]
assert len(set(_ALL_WORDS)) == len(_ALL_WORDS), "topic word lists overlap"
assert not set(_ALL_WORDS) & STOPWORDS, "topic word collides with a stopword"


def generate_dialogs(n: int, seed: int, planted: bool = False) -> list[list[str]]:
    """`n` dialogs of 2-4 alternating turns within one topic each.

    Non-planted: every content slot is a uniform draw from the topic's
    words. Planted: context anchors come from a small fixed slice
    (words[1:4]) and responses always carry words[0], so every anchor ->
    keyword pair is seen in training and context predicts the response
    keyword exactly.
    """
    rng = random.Random(seed)
    topics = sorted(TOPICS)
    dialogs = []
    for _ in range(n):
        topic = rng.choice(topics)
        words = TOPICS[topic]
        turn_count = rng.choices([3, 4, 5], weights=[4, 4, 2])[0]
        turns = [rng.choice(OPENERS).format(x=rng.choice(words if not planted else words[1:4]))]
        for _ in range(turn_count - 1):
            if planted:
                turns.append(rng.choice(RESPONSES).format(y=words[0]))
                continue
            roll = rng.random()
            if roll < 0.08:
                turns.append(rng.choice(KEYWORDLESS))
            elif roll < 0.28:
                y, z = rng.sample(words, 2)
                turns.append(rng.choice(RESPONSES_TWO).format(y=y, z=z))
            else:
                turns.append(rng.choice(RESPONSES).format(y=rng.choice(words)))
        dialogs.append(turns)
    return dialogs


def write_dailydialog(dialogs: list[list[str]], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for turns in dialogs:
            fh.write(f" {EOU} ".join(turns) + f" {EOU}\n")


def topic_vectors(dim: int = 24, seed: int = 7) -> dict[str, np.ndarray]:
    """Clustered content-word vectors: unit noise around one direction per
    topic, so same-topic words are mutual nearest neighbors."""
    rng = np.random.default_rng(seed)
    vectors: dict[str, np.ndarray] = {}
    for topic in sorted(TOPICS):
        center = rng.normal(size=dim)
        center /= np.linalg.norm(center)
        for word in TOPICS[topic]:
            vec = center + 0.35 * rng.normal(size=dim)
            vectors[word] = (vec / np.linalg.norm(vec)).astype(np.float32)
    return vectors


def write_glove(path: str | Path, dim: int = 24, seed: int = 7) -> None:
    vectors = topic_vectors(dim, seed)
    with Path(path).open("w", encoding="utf-8") as fh:
        for word in sorted(vectors):
            values = " ".join(f"{v:.5f}" for v in vectors[word])
            fh.write(f"{word} {values}\n")


def write_lexicon(path: str | Path, per_word: int = 3, dim: int = 24, seed: int = 7) -> None:
    """Synonym TSV derived from the clustered vectors: each word's top
    same-topic neighbors with their cosine similarity."""
    vectors = topic_vectors(dim, seed)
    with Path(path).open("w", encoding="utf-8") as fh:
        for topic in sorted(TOPICS):
            for word in TOPICS[topic]:
                others = [w for w in TOPICS[topic] if w != word]
                sims = sorted(
                    ((float(np.dot(vectors[word], vectors[w])), w) for w in others),
                    reverse=True,
                )
                for sim, other in sims[:per_word]:
                    fh.write(f"{word}\t{other}\t{max(0.0, min(1.0, sim)):.4f}\n")


def write_corpus(
    outdir: str | Path,
    n_train: int = 2000,
    n_valid: int = 300,
    n_test: int = 300,
    seed: int = 0,
    planted: bool = False,
) -> dict[str, Path]:
    """Write train/valid/test corpus files plus embeddings and lexicon."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    prefix = "planted" if planted else "dialogs"
    paths = {}
    for split, count, offset in (("train", n_train, 0), ("valid", n_valid, 1), ("test", n_test, 2)):
        path = outdir / f"{prefix}.{split}.txt"
        write_dailydialog(generate_dialogs(count, seed * 3 + offset, planted=planted), path)
        paths[split] = path
    glove = outdir / "embeddings.txt"
    lexicon = outdir / "synonyms.tsv"
    if not glove.exists():
        write_glove(glove)
    if not lexicon.exists():
        write_lexicon(lexicon)
    paths["embeddings"] = glove
    paths["synonyms"] = lexicon
    return paths
