"""Concept-term candidate extraction.

Two templates produce candidates from an annotated document:

* noun runs: maximal contiguous stretches of noun/numeral/verb tokens that
  end in a noun-type token, so verb and numeral modifiers are kept
  ("第三方支付" style phrases) while pure verb runs are discarded;
* attributive spans: contiguous spans whose internal dependency arcs are all
  "ATT" and which have exactly one token attaching outside the span.

Candidates are aggregated corpus-wide into a :class:`CandidateTable`, then
stop-word matching assigns the known-negative labels for PU training.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import TAG_SETS, AnnotatedDocument, Corpus

__all__ = [
    "TemplateConfig",
    "Occurrence",
    "TermCandidate",
    "CandidateTable",
    "extract_noun_candidates",
    "extract_attributive_candidates",
    "collect_candidates",
    "label_negatives",
    "load_stopwords",
    "save_candidates",
    "load_candidates",
]

NEGATIVE = "negative"
UNLABELED = "unlabeled"

DEFAULT_NOUN_TAGS = frozenset({"n", "nh", "ni", "nl", "ns", "nt", "nz", "j"})
DEFAULT_EXTRA_TAGS = frozenset({"m", "v"})
# Predicate words that cue a following concept ("engaged in ...") rather
# than belonging to it; they break noun runs so the cued phrase stands alone.
DEFAULT_EXCLUDED_WORDS = frozenset({"从事"})


@dataclass(frozen=True)
class TemplateConfig:
    noun_tags: frozenset[str] = DEFAULT_NOUN_TAGS
    extra_tags: frozenset[str] = DEFAULT_EXTRA_TAGS
    excluded_words: frozenset[str] = DEFAULT_EXCLUDED_WORDS
    max_len: int = 8
    noun_min_len: int = 1
    attr_min_len: int = 2
    emit_subruns: bool = False
    min_doc_count: int = 3
    tag_set: str = "863"

    def __post_init__(self) -> None:
        if self.max_len < 1:
            raise ValueError("max_len must be >= 1")
        if self.attr_min_len < 2:
            raise ValueError("attributive spans need at least 2 tokens")
        if self.tag_set not in TAG_SETS:
            raise ValueError(f"unknown tag set {self.tag_set!r}")

    @property
    def admissible_tags(self) -> frozenset[str]:
        return self.noun_tags | self.extra_tags


@dataclass(frozen=True)
class Occurrence:
    """One candidate match: token span [start, end) of one sentence."""

    doc_id: str
    sentence: int
    start: int
    end: int
    words: tuple[str, ...]

    @property
    def surface(self) -> str:
        return "".join(self.words)


@dataclass(frozen=True)
class TermCandidate:
    words: tuple[str, ...]
    surface: str
    term_freq: int
    doc_ids: frozenset[str]
    pu_label: str = UNLABELED


@dataclass(frozen=True)
class CandidateTable:
    candidates: tuple[TermCandidate, ...]

    @property
    def n_total(self) -> int:
        return len(self.candidates)

    @property
    def n_negative(self) -> int:
        return sum(1 for c in self.candidates if c.pu_label == NEGATIVE)

    def by_surface(self) -> dict[str, TermCandidate]:
        return {c.surface: c for c in self.candidates}


def extract_noun_candidates(
    doc: AnnotatedDocument, cfg: TemplateConfig
) -> list[Occurrence]:
    """Maximal admissible-POS runs trimmed to end at their last noun-type token.

    Runs containing no noun-type token, or falling outside the configured
    length bounds after trimming, are dropped.  With ``emit_subruns`` every
    sub-span ending in a noun-type token is emitted as well.
    """
    occurrences: list[Occurrence] = []
    admissible = cfg.admissible_tags
    for s_idx, sentence in enumerate(doc.sentences):
        n = len(sentence)
        i = 0
        while i < n:
            tok = sentence[i]
            if tok.pos not in admissible or tok.surface in cfg.excluded_words:
                i += 1
                continue
            j = i
            while (
                j < n
                and sentence[j].pos in admissible
                and sentence[j].surface not in cfg.excluded_words
            ):
                j += 1
            # [i, j) is a maximal admissible run
            if cfg.emit_subruns:
                for a in range(i, j):
                    for b in range(a + 1, j + 1):
                        if sentence[b - 1].pos not in cfg.noun_tags:
                            continue
                        if not (cfg.noun_min_len <= b - a <= cfg.max_len):
                            continue
                        occurrences.append(
                            Occurrence(
                                doc_id=doc.doc_id,
                                sentence=s_idx,
                                start=a,
                                end=b,
                                words=tuple(t.surface for t in sentence[a:b]),
                            )
                        )
            else:
                end = j
                while end > i and sentence[end - 1].pos not in cfg.noun_tags:
                    end -= 1
                if end > i and cfg.noun_min_len <= end - i <= cfg.max_len:
                    occurrences.append(
                        Occurrence(
                            doc_id=doc.doc_id,
                            sentence=s_idx,
                            start=i,
                            end=end,
                            words=tuple(t.surface for t in sentence[i:end]),
                        )
                    )
            i = j
    return occurrences


def extract_attributive_candidates(
    doc: AnnotatedDocument, cfg: TemplateConfig
) -> list[Occurrence]:
    """Spans whose internal arcs are all ATT with a single external head.

    A root head (-1) counts as external.  Spans are bounded by
    ``cfg.max_len`` and must contain at least ``cfg.attr_min_len`` tokens.
    """
    occurrences: list[Occurrence] = []
    for s_idx, sentence in enumerate(doc.sentences):
        n = len(sentence)
        for start in range(n):
            for end in range(start + cfg.attr_min_len, min(n, start + cfg.max_len) + 1):
                external_heads = 0
                ok = True
                for t_idx in range(start, end):
                    tok = sentence[t_idx]
                    if tok.head == -1 or not (start <= tok.head < end):
                        external_heads += 1
                    elif tok.deprel != "ATT":
                        ok = False
                        break
                if ok and external_heads == 1:
                    occurrences.append(
                        Occurrence(
                            doc_id=doc.doc_id,
                            sentence=s_idx,
                            start=start,
                            end=end,
                            words=tuple(t.surface for t in sentence[start:end]),
                        )
                    )
    return occurrences


def collect_candidates(corpus: Corpus, cfg: TemplateConfig) -> CandidateTable:
    """Union both templates over the corpus into a deduplicated table.

    The same token span matched by both templates counts once.  Candidates
    seen in fewer than ``cfg.min_doc_count`` documents are dropped.  Order is
    deterministic: descending term frequency, then surface bytes.
    """
    by_surface: dict[str, dict] = {}
    for doc in corpus.documents:
        spans: set[tuple[int, int, int]] = set()
        occs: list[Occurrence] = []
        for occ in extract_noun_candidates(doc, cfg) + extract_attributive_candidates(
            doc, cfg
        ):
            key = (occ.sentence, occ.start, occ.end)
            if key in spans:
                continue
            spans.add(key)
            occs.append(occ)
        for occ in occs:
            entry = by_surface.setdefault(
                occ.surface, {"words": occ.words, "freq": 0, "docs": set()}
            )
            entry["freq"] += 1
            entry["docs"].add(doc.doc_id)
    kept = [
        TermCandidate(
            words=entry["words"],
            surface=surface,
            term_freq=entry["freq"],
            doc_ids=frozenset(entry["docs"]),
        )
        for surface, entry in by_surface.items()
        if len(entry["docs"]) >= cfg.min_doc_count
    ]
    kept.sort(key=lambda c: (-c.term_freq, c.surface))
    return CandidateTable(candidates=tuple(kept))


def label_negatives(table: CandidateTable, stopwords: Iterable[str]) -> CandidateTable:
    """Mark candidates containing any stop word as known negatives.

    Idempotent; every other candidate is (re)set to unlabeled.
    """
    stopset = set(stopwords)
    if not stopset:
        raise ValueError("stop-word list must be non-empty")
    relabeled = tuple(
        replace(c, pu_label=NEGATIVE if any(w in stopset for w in c.words) else UNLABELED)
        for c in table.candidates
    )
    return CandidateTable(candidates=relabeled)


def load_stopwords(path: str | Path) -> set[str]:
    """One word per line, UTF-8; '#' starts a comment, blank lines ignored."""
    words: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            word = line.split("#", 1)[0].strip()
            if word:
                words.add(word)
    return words


def save_candidates(table: CandidateTable, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for c in table.candidates:
            fh.write(
                json.dumps(
                    {
                        "surface": c.surface,
                        "words": list(c.words),
                        "term_freq": c.term_freq,
                        "doc_count": len(c.doc_ids),
                        "doc_ids": sorted(c.doc_ids),
                        "pu_label": c.pu_label,
                    },
                    ensure_ascii=False,
                    sort_keys=True,
                )
            )
            fh.write("\n")


def load_candidates(path: str | Path) -> CandidateTable:
    candidates = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            candidates.append(
                TermCandidate(
                    words=tuple(obj["words"]),
                    surface=obj["surface"],
                    term_freq=obj["term_freq"],
                    doc_ids=frozenset(obj["doc_ids"]),
                    pu_label=obj["pu_label"],
                )
            )
    return CandidateTable(candidates=tuple(candidates))
