import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kwdialog.corpus import (
    Dialog,
    DialogExample,
    BuildStats,
    ParseStats,
    RESERVED_TOKENS,
    Vocabulary,
    build_examples,
    build_vocab,
    detokenize,
    load_examples,
    normalize,
    parse_corpus,
    save_examples,
    tokenize,
)


def write(tmp_path, text, name="corpus.txt"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def first_word_extractor(text):
    tokens = [t for t in normalize(text) if t.isalnum()]
    return tokens[:1]


class TestParseCorpus:
    def test_two_turn_minimum(self, tmp_path):
        dialogs = parse_corpus(write(tmp_path, "hi __eou__ hello __eou__\n"))
        assert len(dialogs) == 1
        assert dialogs[0].utterances == ["hi", "hello"]

    def test_single_turn_skipped_and_counted(self, tmp_path):
        stats = ParseStats()
        dialogs = parse_corpus(write(tmp_path, "a __eou__\nx __eou__ y __eou__\n"), stats)
        assert len(dialogs) == 1
        assert stats.skipped == 1

    def test_trailing_empty_segment_dropped(self, tmp_path):
        dialogs = parse_corpus(write(tmp_path, "one __eou__ two __eou__  \n"))
        assert dialogs[0].utterances == ["one", "two"]

    def test_missing_file_raises(self, tmp_path):
        with pytest.raises(OSError):
            parse_corpus(tmp_path / "absent.txt")

    def test_blank_lines_ignored(self, tmp_path):
        dialogs = parse_corpus(write(tmp_path, "\na __eou__ b __eou__\n\n"))
        assert len(dialogs) == 1


class TestTokenize:
    @pytest.fixture
    def vocab(self):
        return Vocabulary(list(RESERVED_TOKENS) + ["hello", ",", "world", "don", "'", "t"])

    def test_punctuation_split_and_lowercase(self, vocab):
        ids = tokenize("Hello, world", vocab)
        assert vocab.decode(ids) == ["hello", ",", "world"]

    def test_empty_text(self, vocab):
        assert tokenize("", vocab) == []

    def test_unknown_word_maps_to_unk(self, vocab):
        assert tokenize("zxqv", vocab) == [vocab.unk_id]

    def test_detokenize_roundtrip(self, vocab):
        ids = tokenize("don't say hello, world", vocab)
        text = detokenize(ids, vocab)
        assert tokenize(text, vocab) == ids


class TestVocabulary:
    def test_reserved_ids_fixed(self):
        vocab = Vocabulary(list(RESERVED_TOKENS) + ["a"])
        assert vocab.pad_id == 0 and vocab.unk_id == 1
        assert vocab.token_of(6) == "<kw>" and vocab.token_of(7) == "<kwpred>"

    def test_reserved_tokens_must_lead(self):
        with pytest.raises(ValueError):
            Vocabulary(["a"] + list(RESERVED_TOKENS))

    def test_min_freq_threshold(self):
        dialogs = [Dialog(["a a b", "a ."])]
        vocab = build_vocab(dialogs, min_freq=2)
        assert "a" in vocab and "b" not in vocab

    def test_min_freq_one_keeps_everything(self):
        dialogs = [Dialog(["x y", "z ."])]
        vocab = build_vocab(dialogs, min_freq=1)
        for token in ("x", "y", "z", "."):
            assert token in vocab

    def test_deterministic_id_assignment(self):
        dialogs = [Dialog(["c b a", "b c ."]), Dialog(["c !", "a b"])]
        first = build_vocab(dialogs, min_freq=1)
        second = build_vocab(dialogs, min_freq=1)
        assert first.tokens == second.tokens

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError):
            build_vocab([], min_freq=1)

    def test_json_roundtrip(self):
        vocab = build_vocab([Dialog(["a b", "c ."])], min_freq=1)
        again = Vocabulary.from_json(vocab.to_json())
        assert again.tokens == vocab.tokens


class TestBuildExamples:
    @pytest.fixture
    def dialogs(self):
        return [
            Dialog(["alpha one", "beta two", "gamma three"]),
            Dialog(["delta four", "epsilon five"]),
            Dialog(["zeta six", "eta seven", "theta eight", "iota nine",
                    "kappa ten", "lambda eleven", "mu twelve"]),
        ]

    @pytest.fixture
    def vocab(self, dialogs):
        return build_vocab(dialogs, min_freq=1)

    def test_three_turn_dialog_yields_two_examples(self, vocab):
        dialogs = [Dialog(["a one", "b two", "c three"]), Dialog(["d four", "e five"])]
        examples = build_examples(dialogs, vocab, first_word_extractor, seed=0)
        from_first = [ex for ex in examples if ex.dialog_index == 0]
        assert len(from_first) == 2

    def test_context_window_caps_at_five(self, dialogs, vocab):
        examples = build_examples(dialogs, vocab, first_word_extractor, seed=0)
        seventh_turn = [
            ex for ex in examples
            if ex.dialog_index == 2 and ex.response == tokenize("mu twelve", vocab)
        ]
        assert len(seventh_turn) == 1
        ex = seventh_turn[0]
        assert len(ex.context) == 5
        assert ex.context[0] == tokenize("eta seven", vocab)

    def test_distractor_from_other_dialog(self, dialogs, vocab):
        examples = build_examples(dialogs, vocab, first_word_extractor, seed=1)
        responses_by_dialog = {}
        for d_idx, dialog in enumerate(dialogs):
            for turn in dialog.utterances[1:]:
                responses_by_dialog.setdefault(d_idx, []).append(tokenize(turn, vocab))
        for ex in examples:
            assert ex.distractor not in responses_by_dialog[ex.dialog_index]

    def test_deterministic_under_seed(self, dialogs, vocab):
        a = build_examples(dialogs, vocab, first_word_extractor, seed=7)
        b = build_examples(dialogs, vocab, first_word_extractor, seed=7)
        assert a == b

    def test_keywordless_counted(self, dialogs, vocab):
        stats = BuildStats()
        build_examples(dialogs, vocab, lambda text: [], seed=0, stats=stats)
        assert stats.keywordless == stats.examples > 0

    def test_examples_satisfy_invariants(self, toy_world):
        for split in ("train", "valid", "test"):
            for ex in toy_world.examples[split]:
                assert len(ex.context) <= 5
                assert 0 <= len(ex.keywords) <= 3
                assert ex.distractor != ex.response
                assert ex.response

    def test_save_load_roundtrip(self, dialogs, vocab, tmp_path):
        examples = build_examples(dialogs, vocab, first_word_extractor, seed=3)
        path = tmp_path / "examples.jsonl"
        save_examples(examples, vocab, path)
        loaded = load_examples(path, vocab)
        assert [ex.response for ex in loaded] == [ex.response for ex in examples]
        assert [ex.keywords for ex in loaded] == [ex.keywords for ex in examples]
        assert [ex.context for ex in loaded] == [ex.context for ex in examples]

    def test_jsonl_is_valid_json_per_line(self, dialogs, vocab, tmp_path):
        examples = build_examples(dialogs, vocab, first_word_extractor, seed=3)
        path = tmp_path / "examples.jsonl"
        save_examples(examples, vocab, path)
        for line in path.read_text(encoding="utf-8").splitlines():
            record = json.loads(line)
            assert set(record) == {"context", "response", "keywords", "distractor", "dialog"}


class TestDialogExampleInvariants:
    def test_context_cap(self):
        with pytest.raises(ValueError):
            DialogExample(context=[[1]] * 6, response=[1], keywords=[], distractor=[2])

    def test_distractor_must_differ(self):
        with pytest.raises(ValueError):
            DialogExample(context=[], response=[1, 2], keywords=[], distractor=[1, 2])


@given(st.text(max_size=80))
@settings(max_examples=200, deadline=None)
def test_property_normalize_detokenize_fixpoint(text):
    tokens = normalize(text)
    assert normalize(" ".join(tokens)) == tokens
