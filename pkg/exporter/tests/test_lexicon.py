import json

import pytest

from embexport import Lexicon, LexiconError, extract_phrases, load_lexicon, tokenize


class TestTokenize:
    def test_lowercases_and_splits_on_punctuation(self):
        assert tokenize("RED, round-ish; lamp!") == ["red", "round", "ish", "lamp"]

    def test_empty(self):
        assert tokenize("...") == []


class TestLoadLexicon:
    def test_default_is_shipped_and_non_empty(self):
        lex = load_lexicon("default")
        assert "red" in lex.colors
        assert "round" in lex.shapes

    def test_from_file(self, tmp_path):
        path = tmp_path / "lex.json"
        path.write_text(json.dumps({"colors": ["mauve"], "shapes": ["helical"]}))
        lex = load_lexicon(path)
        assert lex.colors == ("mauve",)
        assert lex.shapes == ("helical",)

    def test_missing_file(self, tmp_path):
        with pytest.raises(LexiconError):
            load_lexicon(tmp_path / "nope.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(LexiconError):
            load_lexicon(path)

    def test_wrong_keys(self, tmp_path):
        path = tmp_path / "keys.json"
        path.write_text(json.dumps({"colors": ["red"]}))
        with pytest.raises(LexiconError):
            load_lexicon(path)

    def test_empty_family_rejected(self):
        with pytest.raises(LexiconError):
            Lexicon(colors=(), shapes=("round",))
        with pytest.raises(LexiconError):
            Lexicon(colors=("red",), shapes=("...",))


class TestExtractPhrases:
    lex = Lexicon(
        colors=("red", "blue", "navy"),
        shapes=("round", "square", "wide leg"),
    )

    def test_case_insensitive(self):
        assert extract_phrases("make it RED", self.lex) == {"color": "red"}

    def test_both_families(self):
        got = extract_phrases("a blue square box", self.lex)
        assert got == {"color": "blue", "shape": "square"}

    def test_no_match_leaves_family_absent(self):
        assert extract_phrases("shinier please", self.lex) == {}

    def test_token_boundaries(self):
        # "infrared" must not count as "red"
        assert extract_phrases("infrared sensor", self.lex) == {}

    def test_multi_word_term(self):
        assert extract_phrases("Wide LEG trousers", self.lex) == {"shape": "wide leg"}

    def test_order_of_appearance(self):
        got = extract_phrases("navy first then red and blue", self.lex)
        assert got["color"] == "navy red blue"

    def test_pure_function(self):
        text = "a red round thing"
        assert extract_phrases(text, self.lex) == extract_phrases(text, self.lex)
