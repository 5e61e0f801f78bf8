"""JSON Lines corpus records and their tokenized form.

Each line holds ``id``, ``summary`` and exactly one of ``text`` (a single
document), ``sections`` (a list of ``{"name", "text"}``) or ``documents``
(a multi-document cluster).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .exceptions import FormatError, InputError
from .text import Vocabulary, segment_sentences

INPUT_FIELDS = ("text", "sections", "documents")


@dataclass(frozen=True)
class Record:
    id: str
    summary: str
    text: Optional[str] = None
    sections: Optional[tuple] = None  # ((name, text), ...)
    documents: Optional[tuple] = None

    @property
    def kind(self) -> str:
        for name in INPUT_FIELDS:
            if getattr(self, name) is not None:
                return name
        raise InputError(f"record {self.id!r} has no input field")

    def source_texts(self) -> list[str]:
        if self.text is not None:
            return [self.text]
        if self.sections is not None:
            return [f"{name} {body}" for name, body in self.sections]
        return list(self.documents)

    def to_json(self) -> dict:
        obj = {"id": self.id}
        if self.text is not None:
            obj["text"] = self.text
        elif self.sections is not None:
            obj["sections"] = [{"name": n, "text": t} for n, t in self.sections]
        else:
            obj["documents"] = list(self.documents)
        obj["summary"] = self.summary
        return obj


def parse_record(obj, where: str = "record") -> Record:
    if not isinstance(obj, dict):
        raise FormatError(f"{where}: expected a JSON object")
    present = [k for k in INPUT_FIELDS if k in obj]
    if len(present) != 1:
        raise FormatError(f"{where}: need exactly one of {INPUT_FIELDS}, found {present}")
    if not isinstance(obj.get("id"), str):
        raise FormatError(f"{where}: missing string field 'id'")
    summary = obj.get("summary", "")
    if not isinstance(summary, str):
        raise FormatError(f"{where}: 'summary' must be a string")
    kind = present[0]
    value = obj[kind]
    try:
        if kind == "text":
            if not isinstance(value, str):
                raise TypeError
            return Record(obj["id"], summary, text=value)
        if kind == "sections":
            sections = tuple((str(s["name"]), str(s["text"])) for s in value)
            return Record(obj["id"], summary, sections=sections)
        if not value or not all(isinstance(d, str) for d in value):
            raise TypeError
        return Record(obj["id"], summary, documents=tuple(value))
    except (TypeError, KeyError) as exc:
        raise FormatError(f"{where}: malformed '{kind}' field") from exc


def read_jsonl(path) -> list[Record]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{line_no}: invalid JSON ({exc.msg})") from exc
            records.append(parse_record(obj, f"{path}:{line_no}"))
    return records


def write_jsonl(records: Iterable[Record], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json(), ensure_ascii=False) + "\n")


def corpus_texts(records: Iterable[Record]):
    """Every source and summary string, for vocabulary building."""
    for rec in records:
        yield from rec.source_texts()
        yield rec.summary


@dataclass(frozen=True)
class Section:
    name: str
    name_ids: tuple
    start: int
    end: int


@dataclass
class SentenceDoc:
    """A record tokenized into sentences of token ids.

    ``sentences`` is always the flat sentence list; ``sections`` and
    ``members`` (cluster documents) index into it with half-open ranges.
    """

    id: str
    sentences: list
    summary: list
    sections: Optional[list] = None
    members: Optional[list] = None  # [(start, end), ...]
    sentence_texts: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.sections is not None:
            pos = 0
            for sec in self.sections:
                if sec.start != pos or sec.end < sec.start:
                    raise InputError(f"{self.id}: sections must partition the sentence list")
                pos = sec.end
            if pos != len(self.sentences):
                raise InputError(f"{self.id}: sections must partition the sentence list")
        if self.members is not None and not self.members:
            raise InputError(f"{self.id}: cluster has no member documents")

    @property
    def cluster(self):
        if self.members is None:
            return None
        return [self.sentences[a:b] for a, b in self.members]

    @property
    def num_tokens(self) -> int:
        return sum(len(s) for s in self.sentences)

    @property
    def summary_ids(self) -> list:
        return [t for s in self.summary for t in s]


def to_sentence_doc(record: Record, vocab: Vocabulary) -> SentenceDoc:
    def encode_all(texts):
        return [vocab.encode(s) for s in texts]

    summary = encode_all(segment_sentences(record.summary))
    if record.text is not None:
        texts = segment_sentences(record.text)
        return SentenceDoc(record.id, encode_all(texts), summary, sentence_texts=texts)
    if record.sections is not None:
        texts, sections = [], []
        for name, body in record.sections:
            start = len(texts)
            texts.extend(segment_sentences(body))
            sections.append(Section(name, tuple(vocab.encode(name)), start, len(texts)))
        return SentenceDoc(record.id, encode_all(texts), summary, sections=sections, sentence_texts=texts)
    texts, members = [], []
    for doc in record.documents:
        start = len(texts)
        texts.extend(segment_sentences(doc))
        members.append((start, len(texts)))
    return SentenceDoc(record.id, encode_all(texts), summary, members=members, sentence_texts=texts)


def load_corpus(path) -> list[Record]:
    path = Path(path)
    if not path.exists():
        raise InputError(f"corpus file not found: {path}")
    return read_jsonl(path)
