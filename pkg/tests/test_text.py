import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pagesum.corpus import Record, parse_record, read_jsonl, to_sentence_doc, write_jsonl
from pagesum.exceptions import FormatError, InputError
from pagesum.text import (
    BOS_ID,
    EOS_ID,
    PAD_ID,
    SEP,
    SEP_ID,
    UNK,
    UNK_ID,
    Vocabulary,
    join_tokens,
    segment_sentences,
    split_tokens,
)


def test_empty_text_has_no_tokens():
    assert split_tokens("") == []


def test_simple_sentence_tokens_and_ids():
    vocab = Vocabulary(["the", "cat", "sat", "."])
    assert split_tokens("The cat sat.") == ["the", "cat", "sat", "."]
    assert vocab.encode("The cat sat.") == [5, 6, 7, 8]


def test_unknown_word_maps_to_unk():
    vocab = Vocabulary(["cat"])
    assert vocab.encode("dog") == [UNK_ID]
    assert vocab.decode([UNK_ID]) == UNK


def test_reserved_ids():
    vocab = Vocabulary(["x"])
    assert [vocab.token_of(i) for i in range(5)] == ["<pad>", "<s>", "</s>", "<unk>", SEP]
    assert vocab.id_of(SEP) == SEP_ID
    assert vocab.decode([BOS_ID, 5, EOS_ID, PAD_ID]) == "x"


def test_build_orders_by_frequency_then_alphabet():
    vocab = Vocabulary.build(["b a b c", "c b d"], min_freq=2)
    assert vocab.to_json() == ["b", "c"]
    assert Vocabulary.build(["b a"], min_freq=1).to_json() == ["a", "b"]


def test_build_respects_max_size():
    vocab = Vocabulary.build(["a a b b c"], min_freq=1, max_size=6)
    assert len(vocab) == 6


def test_vocab_json_round_trip():
    vocab = Vocabulary.build(["x y z x"], min_freq=1)
    assert Vocabulary.from_json(json.loads(json.dumps(vocab.to_json()))) == vocab


def test_duplicate_tokens_rejected():
    with pytest.raises(ValueError):
        Vocabulary(["a", "a"])


words = st.text(alphabet="abcdefgh", min_size=1, max_size=6)


@given(st.lists(words, min_size=1, max_size=12))
def test_encode_decode_round_trip(tokens):
    text = " ".join(tokens)
    vocab = Vocabulary.build([text], min_freq=1)
    assert vocab.decode(vocab.encode(text)) == text


def test_join_tokens_attaches_punctuation():
    assert join_tokens(["hello", ",", "world", "(", "yes", ")", "."]) == "hello, world (yes)."


def test_segment_terminal_punctuation():
    assert segment_sentences("A. B? C!") == ["A.", "B?", "C!"]


def test_segment_without_terminator():
    assert segment_sentences("no terminal punctuation here") == ["no terminal punctuation here"]


def test_segment_skips_abbreviations():
    assert segment_sentences("Dr. Smith left. He returned.") == ["Dr. Smith left.", "He returned."]


def test_segment_empty():
    assert segment_sentences("   ") == []


# -- corpus records -----------------------------------------------------------------


def test_parse_each_input_kind():
    assert parse_record({"id": "a", "text": "x.", "summary": "s"}).kind == "text"
    rec = parse_record({"id": "b", "sections": [{"name": "intro", "text": "x."}], "summary": "s"})
    assert rec.sections == (("intro", "x."),)
    assert parse_record({"id": "c", "documents": ["x.", "y."], "summary": "s"}).kind == "documents"


@pytest.mark.parametrize(
    "obj",
    [
        [],
        {"id": "a", "summary": "s"},
        {"id": "a", "text": "x", "documents": ["y"]},
        {"text": "x"},
        {"id": "a", "text": 3},
        {"id": "a", "sections": [{"text": "no name"}]},
        {"id": "a", "documents": []},
        {"id": "a", "text": "x", "summary": 5},
    ],
)
def test_malformed_records(obj):
    with pytest.raises(FormatError):
        parse_record(obj)


def test_jsonl_round_trip(tmp_path):
    records = [
        Record("a", "sum a.", text="One. Two."),
        Record("b", "sum b.", sections=(("intro", "Hi."), ("body", "There."))),
        Record("c", "sum c.", documents=("First.", "Second.")),
    ]
    path = tmp_path / "corpus.jsonl"
    write_jsonl(records, path)
    assert read_jsonl(path) == records


def test_jsonl_reports_line_numbers(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"id": "a", "text": "x"}\n{oops\n')
    with pytest.raises(FormatError, match=":2:"):
        read_jsonl(path)


def test_sentence_doc_structure():
    vocab = Vocabulary.build(["intro one . body two . three ."], min_freq=1)
    rec = Record("s", "one.", sections=(("intro", "one."), ("body", "two. three.")))
    doc = to_sentence_doc(rec, vocab)
    assert [(s.name, s.start, s.end) for s in doc.sections] == [("intro", 0, 1), ("body", 1, 3)]
    assert doc.summary_ids == vocab.encode("one.")
    cluster = to_sentence_doc(Record("c", "", documents=("one.", "two. three.")), vocab)
    assert cluster.members == [(0, 1), (1, 3)]


def test_sentence_doc_sections_must_partition():
    from pagesum.corpus import Section, SentenceDoc

    with pytest.raises(InputError):
        SentenceDoc("x", [[5], [6]], [], sections=[Section("a", (), 0, 1)])
