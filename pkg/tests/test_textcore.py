"""Tokenization, homoglyph substitution and dataset I/O."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from advglyph.errors import DataError, EmptyInputError, SubstitutionError
from advglyph.textcore import (
    Dataset,
    HomoglyphTable,
    Strategy,
    SubstitutionPolicy,
    candidate_positions,
    load_dataset,
    save_dataset,
    splice_token,
    substitute_char,
    tokenize,
)

# Text that tokenizes non-trivially: at least one non-space, non-control char.
_texts = st.text(
    alphabet=st.characters(blacklist_categories=("Cs", "Cc")), min_size=1, max_size=60
).filter(lambda s: s.strip())


class TestTokenize:
    def test_whitespace_split_with_spans(self):
        toks = tokenize("a great movie")
        assert toks.texts() == ["a", "great", "movie"]
        assert [(t.start, t.end) for t in toks.tokens] == [(0, 1), (2, 7), (8, 13)]

    def test_punctuation_peeled(self):
        assert tokenize("good, not bad.").texts() == ["good", ",", "not", "bad", "."]

    def test_empty_input_rejected(self):
        with pytest.raises(EmptyInputError):
            tokenize("")
        with pytest.raises(EmptyInputError):
            tokenize("   \t\n")

    @given(_texts)
    @settings(max_examples=200)
    def test_round_trip(self, text):
        toks = tokenize(text)
        assert all(t.text for t in toks.tokens)
        # Spans strictly increasing, non-overlapping, and faithful to source.
        last = 0
        for t in toks.tokens:
            assert last <= t.start < t.end
            assert text[t.start : t.end] == t.text
            assert text[last : t.start].isspace() or last == t.start
            last = t.end
        assert toks.source == text

    def test_substitution_keeps_token_grid(self, table):
        toks = tokenize("the grand plan")
        new_tok = substitute_char("grand", 2, table, 0)
        spliced = splice_token(toks, 1, new_tok)
        again = tokenize(spliced.source)
        assert len(again) == len(toks)
        assert [(t.start, t.end) for t in again.tokens] == [
            (t.start, t.end) for t in toks.tokens
        ]


class TestSubstituteChar:
    def test_table_lookup(self):
        table = HomoglyphTable({"o": ("о",)})
        assert substitute_char("good", 1, table, 0) == "gоod"

    def test_out_of_range(self, table):
        with pytest.raises(IndexError):
            substitute_char("good", 9, table, 0)

    def test_missing_entry(self):
        table = HomoglyphTable({"o": ("о",)})
        with pytest.raises(SubstitutionError):
            substitute_char("+++", 0, table, 0)

    def test_bad_variant(self):
        table = HomoglyphTable({"o": ("о",)})
        with pytest.raises(SubstitutionError):
            substitute_char("good", 1, table, 5)

    def test_locality(self, table):
        rng = np.random.default_rng(0)
        keys = sorted(table.entries)
        for _ in range(300):
            token = "".join(rng.choice(keys, size=int(rng.integers(1, 9))))
            pos = int(rng.integers(len(token)))
            variants = table.variants(token[pos])
            out = substitute_char(token, pos, table, int(rng.integers(len(variants))))
            assert len(out) == len(token)
            assert sum(a != b for a, b in zip(out, token)) == 1
            assert out[pos] != token[pos]


class TestCandidatePositions:
    def test_middle_char_order(self):
        table = HomoglyphTable({"o": ("о",), "g": ("ɡ",)})
        policy = SubstitutionPolicy(Strategy.MIDDLE_CHAR)
        # Eligible 0, 1, 2; distances from center 1.5 are 1.5, 0.5, 0.5.
        assert candidate_positions("good", table, policy) == [1, 2, 0]

    def test_no_substitutable_chars(self, table):
        assert candidate_positions("+++", table, SubstitutionPolicy()) == []

    def test_first_alphabetic(self):
        table = HomoglyphTable({"a": ("а",), "b": ("Ь",)})
        policy = SubstitutionPolicy(Strategy.FIRST_ALPHABETIC)
        assert candidate_positions("ab", table, policy) == [0, 1]

    def test_scan_best_ascending(self, table):
        got = candidate_positions("sunny", table, SubstitutionPolicy(Strategy.SCAN_BEST))
        assert got == sorted(got)
        assert all("sunny"[i] in table for i in got)

    def test_seeded_random_deterministic(self, table):
        p7 = SubstitutionPolicy(Strategy.SEEDED_RANDOM, seed=7)
        a = candidate_positions("grandstand", table, p7)
        b = candidate_positions("grandstand", table, p7)
        assert a == b
        assert sorted(a) == [
            i for i, ch in enumerate("grandstand") if ch in table
        ]
        others = [
            candidate_positions("grandstand", table, SubstitutionPolicy(Strategy.SEEDED_RANDOM, seed=s))
            for s in range(20)
        ]
        assert any(o != a for o in others)


class TestHomoglyphTable:
    def test_default_table_shape(self, table):
        assert len(table.entries) >= 30
        sources = set(table.entries)
        for src, repls in table.entries.items():
            assert len(src) == 1
            for rep in repls:
                assert len(rep) == 1
                assert rep != src
                assert rep not in sources

    def test_rejects_self_replacement(self):
        with pytest.raises(DataError):
            HomoglyphTable({"a": ("a",)})

    def test_rejects_chains(self):
        with pytest.raises(DataError):
            HomoglyphTable({"a": ("b",), "b": ("c",)})

    def test_from_file(self, tmp_path):
        path = tmp_path / "table.tsv"
        path.write_text("# comment\no\tU+043E\na\tа,U+03B1\n", encoding="utf-8")
        table = HomoglyphTable.from_file(path)
        assert table.variants("o") == ("о",)
        assert table.variants("a") == ("а", "α")

    def test_from_file_bad_line(self, tmp_path):
        path = tmp_path / "table.tsv"
        path.write_text("o no-tab-here\n", encoding="utf-8")
        with pytest.raises(DataError):
            HomoglyphTable.from_file(path)


class TestDataset:
    def test_round_trip(self, tmp_path):
        ds = Dataset((("a fine day", 1), ("a bad, day", 0)), 2, ("neg", "pos"))
        path = tmp_path / "data.csv"
        save_dataset(ds, path)
        back = load_dataset(path)
        assert back.records == ds.records
        assert back.label_count == 2

    def test_quoted_commas_preserved(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text('label,text\n0,"good, not bad"\n1,plain\n', encoding="utf-8")
        ds = load_dataset(path)
        assert ds.records[0] == ("good, not bad", 0)
        assert ds.label_count == 2

    def test_label_space_inference(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("label,text\n0,a\n1,b\n1,c\n0,d\n", encoding="utf-8")
        ds = load_dataset(path)
        assert ds.label_count == 2
        assert len(ds) == 4

    def test_declared_label_space(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("label:3,text\n0,a\n1,b\n", encoding="utf-8")
        assert load_dataset(path).label_count == 3

    def test_label_out_of_declared_range(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("label:2,text\n0,a\n2,b\n", encoding="utf-8")
        with pytest.raises(DataError):
            load_dataset(path)

    def test_malformed_row_reports_line(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("label,text\n0,a\nnot-an-int,b\n", encoding="utf-8")
        with pytest.raises(DataError, match=":3"):
            load_dataset(path)

    def test_single_class_file_rejected(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("label,text\n0,a\n0,b\n", encoding="utf-8")
        with pytest.raises(DataError):
            load_dataset(path)

    def test_invariants(self):
        with pytest.raises(DataError):
            Dataset((("a", 0),), 1)
        with pytest.raises(DataError):
            Dataset((("a", 5),), 2)
