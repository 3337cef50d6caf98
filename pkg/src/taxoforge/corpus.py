"""Annotated-corpus data model: JSONL loading, validation and count statistics.

A corpus is a sequence of business-model descriptions, each pre-segmented
and annotated with POS tags and dependency heads by an external tool.  This
module owns the wire format and the document/co-document counting primitives
used by the feature and similarity layers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

__all__ = [
    "Token",
    "AnnotatedDocument",
    "Corpus",
    "CorpusFormatError",
    "TAG_SETS",
    "load_corpus",
    "save_corpus",
    "document_counts",
    "cooccurrence_counts",
]


class CorpusFormatError(ValueError):
    """Raised when a corpus file violates the JSONL schema or an invariant."""


# Named POS tag sets.  The default "863" set is the standard Chinese tag
# inventory emitted by common segmentation services; extraction configs pick
# tag subsets out of the active set by name.
TAG_SETS: dict[str, frozenset[str]] = {
    "863": frozenset(
        "a b c d e g h i j k m n nd nh ni nl ns nt nz o p q r u v wp ws x z".split()
    ),
}


@dataclass(frozen=True)
class Token:
    """One annotated word.

    ``head`` is the 0-based index of the dependency head within the same
    sentence, or -1 for the sentence root.  ``deprel`` is the dependency
    relation code of the arc from this token to its head (e.g. "ATT").
    """

    surface: str
    pos: str
    head: int
    deprel: str


@dataclass(frozen=True)
class AnnotatedDocument:
    doc_id: str
    company_id: str
    industry_class: str
    year: int
    sentences: tuple[tuple[Token, ...], ...]

    def iter_tokens(self) -> Iterable[Token]:
        for sentence in self.sentences:
            yield from sentence

    def surface_set(self) -> set[str]:
        return {tok.surface for tok in self.iter_tokens()}


@dataclass(frozen=True)
class Corpus:
    """Immutable document collection; safe for concurrent reads."""

    documents: tuple[AnnotatedDocument, ...]
    class_index: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        expected = tuple(sorted({d.industry_class for d in self.documents}))
        if self.class_index != expected:
            object.__setattr__(self, "class_index", expected)

    @property
    def n_documents(self) -> int:
        return len(self.documents)


def _validate_document(doc: AnnotatedDocument) -> None:
    if not doc.doc_id:
        raise CorpusFormatError("document with empty doc_id")
    nonempty = [s for s in doc.sentences if s]
    if not nonempty:
        raise CorpusFormatError(
            f"doc_id={doc.doc_id}: document has no non-empty sentence"
        )
    for s_idx, sentence in enumerate(doc.sentences):
        n = len(sentence)
        for t_idx, tok in enumerate(sentence):
            if not tok.surface:
                raise CorpusFormatError(
                    f"doc_id={doc.doc_id}, sentence {s_idx}, token {t_idx}: empty surface"
                )
            if not tok.pos:
                raise CorpusFormatError(
                    f"doc_id={doc.doc_id}, sentence {s_idx}, token {t_idx}: empty pos"
                )
            if tok.head != -1 and not (0 <= tok.head < n):
                raise CorpusFormatError(
                    f"doc_id={doc.doc_id}, token {t_idx}: head {tok.head} out of range"
                )
            if tok.head == t_idx:
                raise CorpusFormatError(
                    f"doc_id={doc.doc_id}, token {t_idx}: head points to itself"
                )


def _parse_document(obj: Mapping, line_no: int) -> AnnotatedDocument:
    required = ("doc_id", "company_id", "industry_class", "year", "sentences")
    for key in required:
        if key not in obj:
            doc_id = obj.get("doc_id", f"<line {line_no}>")
            raise CorpusFormatError(f"doc_id={doc_id}: missing field '{key}'")
    if not isinstance(obj["year"], int):
        raise CorpusFormatError(f"doc_id={obj['doc_id']}: field 'year' must be an integer")
    sentences = []
    for sent in obj["sentences"]:
        tokens = []
        for tok in sent:
            for key in ("surface", "pos", "head", "deprel"):
                if key not in tok:
                    raise CorpusFormatError(
                        f"doc_id={obj['doc_id']}: token missing field '{key}'"
                    )
            tokens.append(
                Token(
                    surface=tok["surface"],
                    pos=tok["pos"],
                    head=int(tok["head"]),
                    deprel=tok["deprel"],
                )
            )
        sentences.append(tuple(tokens))
    doc = AnnotatedDocument(
        doc_id=str(obj["doc_id"]),
        company_id=str(obj["company_id"]),
        industry_class=str(obj["industry_class"]),
        year=obj["year"],
        sentences=tuple(sentences),
    )
    _validate_document(doc)
    return doc


def load_corpus(path: str | Path, max_documents: int | None = None) -> Corpus:
    """Load and validate a JSONL corpus.

    Document order is preserved from file order; the class index is the
    sorted set of industry classes seen.  Raises :class:`CorpusFormatError`
    with the offending line number or doc_id on any schema violation.
    """
    documents: list[AnnotatedDocument] = []
    seen_ids: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            if max_documents is not None and len(documents) >= max_documents:
                break
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"line {line_no}: malformed JSON ({exc.msg})") from exc
            doc = _parse_document(obj, line_no)
            if doc.doc_id in seen_ids:
                raise CorpusFormatError(f"line {line_no}: duplicate doc_id={doc.doc_id}")
            seen_ids.add(doc.doc_id)
            documents.append(doc)
    return Corpus(documents=tuple(documents))


def document_to_dict(doc: AnnotatedDocument) -> dict:
    return {
        "doc_id": doc.doc_id,
        "company_id": doc.company_id,
        "industry_class": doc.industry_class,
        "year": doc.year,
        "sentences": [
            [
                {"surface": t.surface, "pos": t.pos, "head": t.head, "deprel": t.deprel}
                for t in sentence
            ]
            for sentence in doc.sentences
        ],
    }


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Serialize to the JSONL wire format; inverse of :func:`load_corpus`."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc in corpus.documents:
            fh.write(json.dumps(document_to_dict(doc), ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def document_counts(corpus: Corpus, words: Iterable[str]) -> dict[str, int]:
    """Number of documents whose surfaces contain each word; absent words map to 0."""
    counts = {w: 0 for w in words}
    if not counts:
        return counts
    for doc in corpus.documents:
        present = doc.surface_set()
        for w in counts:
            if w in present:
                counts[w] += 1
    return counts


def cooccurrence_counts(
    corpus: Corpus, pairs: Iterable[tuple[str, str]]
) -> dict[frozenset[str], int]:
    """Documents containing both words of each unordered pair.

    Keys are frozensets so {w1,w2} and {w2,w1} collapse; a self pair
    {w,w} degenerates to the plain document count of w.
    """
    normalized = {frozenset(p) for p in pairs}
    counts: dict[frozenset[str], int] = {p: 0 for p in normalized}
    if not counts:
        return counts
    for doc in corpus.documents:
        present = doc.surface_set()
        for pair in counts:
            if all(w in present for w in pair):
                counts[pair] += 1
    return counts
