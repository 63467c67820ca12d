import numpy as np
import pytest
import torch

from kwdialog import datagen
from kwdialog.corpus import build_examples, build_vocab, parse_corpus
from kwdialog.embeddings import load_table
from kwdialog.keywords import extraction_fn


class ToyWorld:
    """Small generated corpus with matching embeddings, shared across tests."""

    def __init__(self, root, n_train=120, n_valid=30, n_test=30, seed=11, planted=False):
        self.root = root
        self.paths = datagen.write_corpus(
            root, n_train=n_train, n_valid=n_valid, n_test=n_test, seed=seed, planted=planted
        )
        self.table = load_table(self.paths["embeddings"])
        self.dialogs = {s: parse_corpus(self.paths[s]) for s in ("train", "valid", "test")}
        self.vocab = build_vocab(self.dialogs["train"], min_freq=1)
        extractor = extraction_fn(self.table, k=3)
        self.examples = {
            s: build_examples(self.dialogs[s], self.vocab, extractor, seed=seed)
            for s in ("train", "valid", "test")
        }


@pytest.fixture(scope="session")
def toy_world(tmp_path_factory):
    return ToyWorld(tmp_path_factory.mktemp("toy_corpus"))


@pytest.fixture(scope="session")
def planted_world(tmp_path_factory):
    return ToyWorld(
        tmp_path_factory.mktemp("planted_corpus"),
        n_train=300, n_valid=40, n_test=60, seed=23, planted=True,
    )


TINY_MODEL = dict(dim=64, layers=2, heads=2, ffn_dim=128, max_len=96, dropout=0.1)


def train_tiny(world, model_class, gamma=0.005, epochs=10, seed=3, examples=None,
               valid=None, checkpoint_path=None, step_trace=None, grad_norm_trace=None,
               **overrides):
    from kwdialog.keywords import build_kwpred_examples
    from kwdialog.model import ModelConfig
    from kwdialog.objective import LossWeights
    from kwdialog.trainer import MODEL_CLASSES, TrainConfig, build_pools, train

    train_examples = examples if examples is not None else world.examples["train"]
    valid_examples = valid if valid is not None else world.examples["valid"]
    if model_class == "kwpred" and valid is None:
        valid_examples = build_kwpred_examples(valid_examples, world.vocab, seed=seed)
    pools = build_pools(
        train_examples, MODEL_CLASSES[model_class].pool_source, table=world.table
    )
    settings = dict(
        batch_size=16, epochs=epochs, seed=seed, warmup_steps=20,
        deterministic=True, val_decode_limit=0,
    )
    settings.update(overrides)
    config = TrainConfig(
        model_class=model_class, weights=LossWeights(gamma=gamma), **settings
    )
    model_config = ModelConfig(vocab_size=len(world.vocab), **TINY_MODEL)
    model, history = train(
        config, model_config, train_examples, valid_examples, world.vocab,
        pools=pools, checkpoint_path=checkpoint_path,
        step_trace=step_trace, grad_norm_trace=grad_norm_trace,
    )
    return model, history


@pytest.fixture(scope="session")
def tiny_kw_model(toy_world):
    model, _ = train_tiny(toy_world, "kw_loss", epochs=12)
    return model


@pytest.fixture(scope="session")
def tiny_base_model(toy_world):
    model, _ = train_tiny(toy_world, "no_kw", gamma=0.0, epochs=12)
    return model


@pytest.fixture(scope="session")
def tiny_kwpred_model(planted_world):
    from kwdialog.keywords import build_kwpred_examples

    derived = build_kwpred_examples(planted_world.examples["train"], planted_world.vocab, seed=5)
    model, _ = train_tiny(planted_world, "kwpred", gamma=0.0, epochs=25, lr=1e-3, examples=derived)
    return model


def random_logits(rng: np.random.Generator, T: int, V: int) -> torch.Tensor:
    return torch.tensor(rng.normal(scale=2.0, size=(T, V)), dtype=torch.float64)
