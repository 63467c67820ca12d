import math

import pytest
import torch
import torch.nn as nn

from kwdialog.corpus import RESERVED_TOKENS, Vocabulary, tokenize
from kwdialog.decode import (
    BeamHypothesis,
    DecodeConfig,
    diverse_beam_search,
    greedy_decode,
    nucleus_cutoff,
    nucleus_sample,
)
from kwdialog.model import ModelConfig, build_model


@pytest.fixture(scope="module")
def vocab():
    return Vocabulary(list(RESERVED_TOKENS) + ["aa", "bb", "cc", "dd"])


class StaticModel(nn.Module):
    """Interface-compatible stand-in emitting one fixed logits row
    everywhere, so decode behavior is hand-computable."""

    def __init__(self, probs: dict[int, float], vocab_size: int, max_len: int = 64):
        super().__init__()
        self.config = ModelConfig(vocab_size=vocab_size, dim=8, layers=1, heads=1,
                                  ffn_dim=8, max_len=max_len, dropout=0.0)
        row = torch.full((vocab_size,), -30.0)
        for idx, p in probs.items():
            row[idx] = math.log(p)
        self.row = row
        self.tok_emb = nn.Embedding(vocab_size, 4)

    def forward(self, tokens, positions, states):
        B, T = tokens.shape
        logits = self.row.expand(B, T, -1).clone()
        return logits, torch.zeros(B, T)


def static_model(vocab, probs_by_word, eos_mass=1e-9):
    probs = {vocab.id_of(w): p for w, p in probs_by_word.items()}
    probs[vocab.eos_id] = eos_mass
    return StaticModel(probs, len(vocab))


class TestNucleus:
    def test_cutoff_frozen_example(self):
        # cumulative 0.5, 0.8, 0.95, 1.0 with top_p=0.9 -> first three kept
        probs = torch.tensor([0.5, 0.3, 0.15, 0.05])
        kept = nucleus_cutoff(probs, 0.9)
        assert set(kept.tolist()) == {0, 1, 2}

    def test_cutoff_exact_boundary(self):
        probs = torch.tensor([0.5, 0.3, 0.2])
        assert set(nucleus_cutoff(probs, 0.8).tolist()) == {0, 1}

    def test_cutoff_top_p_one_keeps_all(self):
        probs = torch.tensor([0.25, 0.25, 0.25, 0.25])
        assert nucleus_cutoff(probs, 1.0).numel() == 4

    def test_sampled_tokens_stay_in_nucleus(self, vocab):
        model = static_model(vocab, {"aa": 0.5, "bb": 0.3, "cc": 0.15, "dd": 0.05})
        outside = {vocab.id_of("dd")}
        for seed in range(20):
            config = DecodeConfig(strategy="nucleus", top_p=0.9, max_new_tokens=8, seed=seed)
            trace = []
            generated = nucleus_sample(model, [], [], vocab, config, trace=trace)
            for nucleus, token in trace:
                assert token in nucleus
            assert not outside & set(generated)

    def test_tiny_top_p_is_greedy(self, vocab):
        model = static_model(vocab, {"aa": 0.5, "bb": 0.3, "cc": 0.2})
        config = DecodeConfig(strategy="nucleus", top_p=1e-9, max_new_tokens=5, seed=0)
        generated = nucleus_sample(model, [], [], vocab, config)
        assert generated == [vocab.id_of("aa")] * 5

    def test_seeded_determinism(self, vocab):
        model = static_model(vocab, {"aa": 0.4, "bb": 0.3, "cc": 0.2, "dd": 0.1})
        config = DecodeConfig(strategy="nucleus", top_p=0.95, max_new_tokens=10, seed=42)
        first = nucleus_sample(model, [], [], vocab, config)
        second = nucleus_sample(model, [], [], vocab, config)
        assert first == second

    def test_stops_at_eos(self, vocab):
        model = static_model(vocab, {"aa": 0.01}, eos_mass=0.99)
        config = DecodeConfig(strategy="nucleus", top_p=0.5, max_new_tokens=10, seed=0)
        assert nucleus_sample(model, [], [], vocab, config) == []


def reference_beam_search(row_logprobs: torch.Tensor, eos_id: int, width: int, steps: int):
    """Textbook beam search over a static per-step distribution (test oracle,
    written independently of the implementation)."""
    beams = [([], 0.0)]
    finished = []
    for _ in range(steps):
        candidates = []
        for tokens, score in beams:
            for token, lp in enumerate(row_logprobs.tolist()):
                candidates.append((tokens + [token], score + lp))
        candidates.sort(key=lambda c: -c[1])
        beams = []
        for tokens, score in candidates:
            if len(beams) == width:
                break
            if tokens[-1] == eos_id:
                finished.append((tokens[:-1], score))
            else:
                beams.append((tokens, score))
        if not beams:
            break
    finished.extend(beams)
    return finished


class TestDiverseBeam:
    def test_single_group_matches_reference(self, vocab):
        model = static_model(vocab, {"aa": 0.4, "bb": 0.3, "cc": 0.2, "dd": 0.1 - 1e-6},
                             eos_mass=1e-6)
        config = DecodeConfig(strategy="diverse-beam", beams=3, groups=1,
                              diversity_penalty=5.5, max_new_tokens=3)
        got = diverse_beam_search(model, [], [], vocab, config)
        row = torch.log_softmax(model.row, dim=-1)
        want = reference_beam_search(row, vocab.eos_id, width=3, steps=3)
        got_set = {(tuple(h.tokens), round(h.score, 6)) for h in got}
        want_set = {(tuple(t), round(s, 6)) for t, s in want}
        assert got_set == want_set

    def test_two_groups_one_beam_frozen_behavior(self, vocab):
        # static p = (0.5, 0.3, 0.2): ln 0.5 - 5.5 < ln 0.3, so group 2
        # avoids group 1's token at every step
        model = static_model(vocab, {"aa": 0.5, "bb": 0.3, "cc": 0.2 - 1e-6})
        config = DecodeConfig(strategy="diverse-beam", beams=2, groups=2,
                              diversity_penalty=5.5, max_new_tokens=4)
        results = diverse_beam_search(model, [], [], vocab, config)
        by_group = {h.group: h for h in results}
        assert by_group[0].tokens == [vocab.id_of("aa")] * 4
        assert by_group[1].tokens == [vocab.id_of("bb")] * 4

    def test_zero_penalty_groups_replicate_standard_beam(self, vocab):
        model = static_model(vocab, {"aa": 0.4, "bb": 0.3, "cc": 0.2, "dd": 0.1 - 1e-6},
                             eos_mass=1e-6)
        config = DecodeConfig(strategy="diverse-beam", beams=4, groups=2,
                              diversity_penalty=0.0, max_new_tokens=3)
        results = diverse_beam_search(model, [], [], vocab, config)
        row = torch.log_softmax(model.row, dim=-1)
        want = {(tuple(t), round(s, 6)) for t, s in
                reference_beam_search(row, vocab.eos_id, width=2, steps=3)}
        for g in (0, 1):
            got = {(tuple(h.tokens), round(h.score, 6)) for h in results if h.group == g}
            assert got == want

    def test_group_count_must_divide(self):
        with pytest.raises(ValueError):
            DecodeConfig(strategy="diverse-beam", beams=10, groups=3)

    def test_results_sorted_by_normalized_score(self, vocab):
        model = static_model(vocab, {"aa": 0.5, "bb": 0.3, "cc": 0.2 - 1e-6})
        config = DecodeConfig(strategy="diverse-beam", beams=4, groups=2,
                              diversity_penalty=1.0, max_new_tokens=3)
        results = diverse_beam_search(model, [], [], vocab, config)
        scores = [h.normalized_score for h in results]
        assert scores == sorted(scores, reverse=True)


@pytest.fixture(scope="module")
def small_real_model(vocab):
    config = ModelConfig(vocab_size=len(vocab), dim=16, layers=1, heads=2,
                         ffn_dim=32, max_len=48, dropout=0.0)
    return build_model(config, seed=5)


class TestRealModelDecoding:
    @pytest.fixture
    def trained(self, small_real_model):
        return small_real_model

    def test_decoders_pure_given_seed(self, vocab, trained):
        context = [tokenize("aa bb", vocab)]
        config = DecodeConfig(strategy="nucleus", top_p=0.9, max_new_tokens=6, seed=9)
        assert nucleus_sample(trained, context, ["cc"], vocab, config) == \
            nucleus_sample(trained, context, ["cc"], vocab, config)
        beam_config = DecodeConfig(strategy="diverse-beam", beams=4, groups=2,
                                   diversity_penalty=2.0, max_new_tokens=5)
        first = diverse_beam_search(trained, context, ["cc"], vocab, beam_config)
        second = diverse_beam_search(trained, context, ["cc"], vocab, beam_config)
        assert [(h.tokens, h.score, h.group) for h in first] == \
            [(h.tokens, h.score, h.group) for h in second]

    def test_greedy_matches_top1_nucleus_limit(self, vocab, trained):
        context = [tokenize("aa", vocab)]
        greedy = greedy_decode(trained, context, [], vocab,
                               DecodeConfig(strategy="greedy", max_new_tokens=6))
        tiny_p = nucleus_sample(trained, context, [], vocab,
                                DecodeConfig(strategy="nucleus", top_p=1e-12,
                                             max_new_tokens=6, seed=0))
        assert greedy == tiny_p

    def test_decode_respects_position_budget(self, vocab):
        config = ModelConfig(vocab_size=len(vocab), dim=16, layers=1, heads=2,
                             ffn_dim=32, max_len=20, dropout=0.0)
        model = build_model(config, seed=5)
        context = [tokenize("aa bb cc", vocab)]
        out = nucleus_sample(model, context, [], vocab,
                             DecodeConfig(strategy="nucleus", max_new_tokens=200, seed=1))
        assert len(context[0]) + len(out) + 4 <= config.max_len + 1
