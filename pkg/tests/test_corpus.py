import json
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ragcausal.corpus import (
    INTERVAL_ORDER,
    Chunk,
    Corpus,
    DocumentRecord,
    WhitespaceTokenizer,
    chunk_document,
    load_corpus,
    slice_interval,
    split_sentences,
)
from ragcausal.errors import CorpusLoadError, CorpusValidationError


def make_doc(text, doc_id="d1", year=2003, interval="2000-2005"):
    return DocumentRecord(id=doc_id, title="t", year=year, interval=interval, text=text)


class CharTokenizer:
    """Counts non-space characters; exercises the indivisible-token path."""

    def count(self, text):
        return len(text.replace(" ", ""))


# --- load_corpus -----------------------------------------------------------


def write_corpus(tmp_path, entries, texts):
    text_dir = tmp_path / "texts"
    text_dir.mkdir()
    for name, body in texts.items():
        (text_dir / name).write_text(body, encoding="utf-8")
    manifest = tmp_path / "manifest.json"
    manifest.write_text(json.dumps(entries), encoding="utf-8")
    return manifest, text_dir


def test_load_corpus_preserves_order(tmp_path):
    entries = [
        {"id": "b", "title": "B", "year": 2007, "interval": "2006-2010", "text_file": "b.txt"},
        {"id": "a", "title": "A", "year": 2001, "interval": "2000-2005", "text_file": "a.txt"},
    ]
    manifest, text_dir = write_corpus(tmp_path, entries, {"a.txt": "aaa.", "b.txt": "bbb."})
    corpus = load_corpus(manifest, text_dir)
    assert [d.id for d in corpus] == ["b", "a"]
    assert corpus.documents[0].text == "bbb."


def test_load_corpus_empty_manifest(tmp_path):
    manifest, text_dir = write_corpus(tmp_path, [], {})
    assert len(load_corpus(manifest, text_dir)) == 0


def test_load_corpus_missing_text_names_id(tmp_path):
    entries = [{"id": "ghost", "title": "G", "year": 2001, "interval": "2000-2005",
                "text_file": "nope.txt"}]
    manifest, text_dir = write_corpus(tmp_path, entries, {})
    with pytest.raises(CorpusLoadError, match="ghost"):
        load_corpus(manifest, text_dir)


def test_load_corpus_duplicate_id(tmp_path):
    entry = {"id": "x", "title": "X", "year": 2001, "interval": "2000-2005",
             "text_file": "x.txt"}
    manifest, text_dir = write_corpus(tmp_path, [entry, entry], {"x.txt": "hi."})
    with pytest.raises(CorpusValidationError, match="duplicate"):
        load_corpus(manifest, text_dir)


def test_year_outside_interval_rejected(tmp_path):
    entries = [{"id": "y", "title": "Y", "year": 2003, "interval": "2006-2010",
                "text_file": "y.txt"}]
    manifest, text_dir = write_corpus(tmp_path, entries, {"y.txt": "hi."})
    with pytest.raises(CorpusValidationError):
        load_corpus(manifest, text_dir)


def test_fixture_corpus_loads(fixture_corpus_args):
    corpus = load_corpus(fixture_corpus_args["manifest"], fixture_corpus_args["text_dir"])
    assert len(corpus) == 10
    assert corpus.intervals_present() == INTERVAL_ORDER


# --- slice_interval --------------------------------------------------------


def test_slice_interval_filters():
    docs = [
        make_doc("a.", "a", 2001, "2000-2005"),
        make_doc("b.", "b", 2007, "2006-2010"),
        make_doc("c.", "c", 2012, "2011-2015"),
    ]
    corpus = Corpus(docs)
    sliced = slice_interval(corpus, "2006-2010")
    assert [d.id for d in sliced] == ["b"]


def test_slice_interval_empty():
    corpus = Corpus([make_doc("a.", "a")])
    assert len(slice_interval(corpus, "2021-2025")) == 0


def test_slice_interval_unknown_label():
    with pytest.raises(ValueError):
        slice_interval(Corpus([]), "1990-1995")


def test_slices_partition_corpus():
    docs = [
        make_doc("a.", "a", 2001, "2000-2005"),
        make_doc("b.", "b", 2007, "2006-2010"),
        make_doc("c.", "c", 2007, "2006-2010"),
        make_doc("d.", "d", 2024, "2021-2025"),
    ]
    corpus = Corpus(docs)
    union = []
    for label in INTERVAL_ORDER:
        union.extend(d.id for d in slice_interval(corpus, label))
    assert sorted(union) == sorted(d.id for d in corpus)
    assert len(union) == len(set(union))


# --- split_sentences -------------------------------------------------------


def test_split_retains_terminal_punctuation():
    assert split_sentences("A fact. Another! Really?") == ["A fact.", "Another!", "Really?"]


def test_split_empty():
    assert split_sentences("") == []


def test_split_on_newlines():
    assert split_sentences("line one\nline two") == ["line one", "line two"]


@given(st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=300))
def test_split_preserves_non_whitespace(text):
    joined = "".join(split_sentences(text))
    assert Counter(c for c in joined if not c.isspace()) == Counter(
        c for c in text if not c.isspace()
    )


# --- chunk_document --------------------------------------------------------


def test_short_sentence_is_one_chunk():
    doc = make_doc("one two three four five.")
    chunks = chunk_document(doc, 100, WhitespaceTokenizer())
    assert [c.text for c in chunks] == ["one two three four five."]
    assert chunks[0].seq_index == 0


def test_secondary_delimiter_split():
    doc = make_doc("a b c, d e f")
    chunks = chunk_document(doc, 3, WhitespaceTokenizer())
    assert [c.text for c in chunks] == ["a b c,", "d e f"]


def test_indivisible_token_warns(caplog):
    doc = make_doc("abcdefg")
    with caplog.at_level("WARNING"):
        chunks = chunk_document(doc, 1, CharTokenizer())
    assert [c.text for c in chunks] == ["abcdefg"]
    assert any("exceeds" in r.message for r in caplog.records)


def test_word_packing_respects_limit():
    doc = make_doc("one two three four five six seven eight")
    chunks = chunk_document(doc, 3, WhitespaceTokenizer())
    assert all(c.token_count <= 3 for c in chunks)
    assert " ".join(c.text for c in chunks) == doc.text


def test_chunk_rejects_bad_limit():
    with pytest.raises(ValueError):
        chunk_document(make_doc("x."), 0, WhitespaceTokenizer())


def test_seq_indices_consecutive():
    doc = make_doc("One. Two. Three! Four?")
    chunks = chunk_document(doc, 100, WhitespaceTokenizer())
    assert [c.seq_index for c in chunks] == list(range(len(chunks)))


@settings(max_examples=60)
@given(
    st.lists(
        st.text(alphabet="abc .,!?\n;:", min_size=1, max_size=60),
        min_size=1,
        max_size=5,
    ),
    st.integers(min_value=1, max_value=8),
)
def test_chunk_roundtrip_and_bounds(parts, limit):
    doc = make_doc("".join(parts))
    tokenizer = WhitespaceTokenizer()
    chunks = chunk_document(doc, limit, tokenizer)
    source = Counter(c for c in doc.text if not c.isspace())
    chunked = Counter(c for chunk in chunks for c in chunk.text if not c.isspace())
    assert chunked == source
    for chunk in chunks:
        assert chunk.token_count <= limit or len(chunk.text.split()) == 1
    assert chunks == chunk_document(doc, limit, tokenizer)
