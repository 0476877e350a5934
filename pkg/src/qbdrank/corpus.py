"""Document loading, sentence segmentation, and relevance judgments.

Queries and candidate documents arrive as UTF-8 JSONL (one object per
line with "id" and "text"). Everything downstream works on
:class:`SegmentedDocument`: an ordered list of sentences plus paragraph
boundaries. Segmentation is deliberately rule-based and deterministic so
runs are reproducible across platforms.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataError


class DuplicateIdError(DataError):
    """Two documents in one collection share an id."""


class DuplicateJudgmentError(DataError):
    """The same (query, doc) pair is judged twice."""


class CorpusFormatError(DataError):
    """A corpus/qrels file line could not be parsed."""


@dataclass(frozen=True)
class RawDocument:
    id: str
    text: str


@dataclass(frozen=True)
class SegmentedDocument:
    """A document as an ordered list of sentences.

    paragraph_bounds are half-open (start, end) ranges into ``sentences``;
    they are disjoint, sorted, and cover the whole sentence list.
    token_count is the total number of whitespace tokens.
    """

    id: str
    sentences: tuple[str, ...]
    paragraph_bounds: tuple[tuple[int, int], ...]
    token_count: int

    def __post_init__(self):
        cursor = 0
        for lo, hi in self.paragraph_bounds:
            if lo != cursor or hi <= lo:
                raise ValueError(f"bad paragraph bounds for {self.id!r}")
            cursor = hi
        if cursor != len(self.sentences):
            raise ValueError(f"paragraph bounds do not cover sentences of {self.id!r}")


@dataclass
class Qrels:
    """Binary/graded relevance judgments keyed by (query_id, doc_id)."""

    grades: dict[tuple[str, str], int] = field(default_factory=dict)

    def add(self, query_id: str, doc_id: str, grade: int) -> None:
        key = (query_id, doc_id)
        if key in self.grades:
            raise DuplicateJudgmentError(f"duplicate judgment for {key}")
        if grade < 0:
            raise CorpusFormatError(f"negative grade for {key}")
        self.grades[key] = grade

    def relevant_docs(self, query_id: str) -> set[str]:
        return {d for (q, d), g in self.grades.items() if q == query_id and g > 0}

    def query_ids(self) -> list[str]:
        return sorted({q for (q, _d) in self.grades})

    def judged_query_ids(self) -> list[str]:
        """Queries with at least one relevant document."""
        return sorted({q for (q, _d), g in self.grades.items() if g > 0})


def load_corpus(path: str | Path, kind: str = "documents") -> list[RawDocument]:
    """Load a JSONL collection; ids must be unique within the file."""
    if kind not in ("documents", "queries"):
        raise ValueError(f"unknown corpus kind {kind!r}")
    docs: list[RawDocument] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                doc_id, text = obj["id"], obj["text"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorpusFormatError(f"{path}: malformed line {lineno}: {exc}") from exc
            if not isinstance(doc_id, str) or not doc_id:
                raise CorpusFormatError(f"{path}: line {lineno}: id must be a non-empty string")
            if doc_id in seen:
                raise DuplicateIdError(f"{path}: duplicate id {doc_id!r}")
            seen.add(doc_id)
            docs.append(RawDocument(id=doc_id, text=str(text)))
    return docs


def load_qrels(path: str | Path) -> Qrels:
    """Load TREC 4-column qrels: "qid 0 docid grade"."""
    qrels = Qrels()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 4:
                raise CorpusFormatError(f"{path}: malformed qrels line {lineno}")
            qid, _iter, did, grade_s = parts
            try:
                grade = int(grade_s)
            except ValueError as exc:
                raise CorpusFormatError(f"{path}: bad grade on line {lineno}") from exc
            try:
                qrels.add(qid, did, grade)
            except DuplicateJudgmentError as exc:
                raise DuplicateJudgmentError(f"{path}: line {lineno}: {exc}") from exc
    return qrels


# Words after which a period does not end a sentence. Compared lowercase,
# trailing period stripped.
_ABBREVIATIONS = frozenset(
    """mr mrs ms dr prof sr jr st no nos vs v etc al cf pp p fig figs
    eq eqs sec secs ch art para inc ltd co corp dept est approx
    e.g i.e""".split()
)

_PARAGRAPH_SPLIT = re.compile(r"\n[ \t]*\n+")
_BOUNDARY = re.compile(r"[.!?]+(?=\s)")


def _split_sentences(text: str) -> list[str]:
    """Split on terminal . ! ? followed by whitespace and an uppercase
    letter or digit, skipping known abbreviations."""
    sentences: list[str] = []
    start = 0
    for m in _BOUNDARY.finditer(text):
        end = m.end()
        # find the first non-space character after the boundary
        nxt = end
        while nxt < len(text) and text[nxt].isspace():
            nxt += 1
        if nxt >= len(text) or not (text[nxt].isupper() or text[nxt].isdigit()):
            continue
        candidate = text[start:end].strip()
        if not candidate:
            continue
        last_word = candidate.split()[-1].rstrip(".!?").lower()
        if last_word in _ABBREVIATIONS:
            continue
        sentences.append(candidate)
        start = end
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def _chunk_words(sentence: str, max_words: int) -> list[str]:
    words = sentence.split()
    if len(words) <= max_words:
        return [sentence]
    return [" ".join(words[i : i + max_words]) for i in range(0, len(words), max_words)]


def segment(doc: RawDocument, max_sentence_words: int = 25) -> SegmentedDocument:
    """Segment into sentences and paragraphs.

    Paragraphs are delimited by blank lines; sentences longer than
    ``max_sentence_words`` whitespace tokens are chunked into consecutive
    windows of exactly that many words (last chunk may be shorter).
    """
    if max_sentence_words < 1:
        raise ValueError("max_sentence_words must be >= 1")
    sentences: list[str] = []
    bounds: list[tuple[int, int]] = []
    for para in _PARAGRAPH_SPLIT.split(doc.text):
        lo = len(sentences)
        for sent in _split_sentences(para):
            sentences.extend(_chunk_words(sent, max_sentence_words))
        if len(sentences) > lo:
            bounds.append((lo, len(sentences)))
    token_count = sum(len(s.split()) for s in sentences)
    return SegmentedDocument(
        id=doc.id,
        sentences=tuple(sentences),
        paragraph_bounds=tuple(bounds),
        token_count=token_count,
    )


def segment_fixed_length(doc: RawDocument, unit_tokens: int) -> SegmentedDocument:
    """Split into consecutive fixed-length token windows instead of sentences."""
    if unit_tokens < 1:
        raise ValueError("unit_tokens must be >= 1")
    words = doc.text.split()
    units = tuple(
        " ".join(words[i : i + unit_tokens]) for i in range(0, len(words), unit_tokens)
    )
    bounds = ((0, len(units)),) if units else ()
    return SegmentedDocument(
        id=doc.id, sentences=units, paragraph_bounds=bounds, token_count=len(words)
    )


def truncate(doc: SegmentedDocument, max_tokens: int) -> SegmentedDocument:
    """Keep the longest whole-sentence prefix within ``max_tokens`` tokens.

    The first sentence is always kept (word-truncated if necessary) so no
    document becomes empty.
    """
    if max_tokens < 1:
        raise ValueError("max_tokens must be >= 1")
    if doc.token_count <= max_tokens or not doc.sentences:
        return doc
    kept: list[str] = []
    total = 0
    for sent in doc.sentences:
        n = len(sent.split())
        if total + n > max_tokens:
            break
        kept.append(sent)
        total += n
    if not kept:
        words = doc.sentences[0].split()[:max_tokens]
        kept = [" ".join(words)]
        total = len(words)
    bounds: list[tuple[int, int]] = []
    for lo, hi in doc.paragraph_bounds:
        lo_c, hi_c = min(lo, len(kept)), min(hi, len(kept))
        if hi_c > lo_c:
            bounds.append((lo_c, hi_c))
    return SegmentedDocument(
        id=doc.id, sentences=tuple(kept), paragraph_bounds=tuple(bounds), token_count=total
    )
