"""Co-occurrence word similarity and best-match term similarity.

Word similarity is co-document count divided by the harmonic mean of the
two document counts, which keeps it in [0,1] with self-similarity exactly 1
(the dimensionally-inflated product form is available behind ``eq2_mode``
for compatibility).  Term similarity averages, over both directions, the
TF-IDF-weighted best word match: s(t1->t2) = sum_i beta_i * max_j s(i,j)
normalized by the word count of t1.
"""

from __future__ import annotations

import json
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Corpus
from .pu import FilteredTerm

__all__ = [
    "UnknownWordError",
    "SimilarityConfig",
    "WordStats",
    "SimilarityMatrix",
    "build_word_stats",
    "word_similarity",
    "word_weight",
    "directed_term_similarity",
    "term_similarity",
    "build_similarity_matrix",
    "save_matrix",
    "load_matrix",
    "save_matrix_csv",
]


class UnknownWordError(ValueError):
    """A term references a word with zero document count."""


@dataclass(frozen=True)
class SimilarityConfig:
    eq2_mode: str = "prose"  # "prose" | "printed"
    eq3_norm: str = "len"  # "len" | "beta_sum"
    lenient: bool = False  # unknown words contribute 0 instead of raising

    def __post_init__(self) -> None:
        if self.eq2_mode not in ("prose", "printed"):
            raise ValueError(f"eq2_mode must be 'prose' or 'printed', got {self.eq2_mode!r}")
        if self.eq3_norm not in ("len", "beta_sum"):
            raise ValueError(f"eq3_norm must be 'len' or 'beta_sum', got {self.eq3_norm!r}")


@dataclass(frozen=True)
class WordStats:
    """Document counts, co-document counts and token counts for a vocabulary."""

    dct: dict[str, int]
    co: dict[frozenset[str], int]
    ct: dict[str, int]
    n_documents: int

    def co_count(self, w1: str, w2: str) -> int:
        return self.co.get(frozenset((w1, w2)), 0)


def build_word_stats(corpus: Corpus, vocabulary: Iterable[str]) -> WordStats:
    """One corpus pass collecting dct, pairwise co-document and token counts."""
    vocab = set(vocabulary)
    dct = {w: 0 for w in vocab}
    ct = {w: 0 for w in vocab}
    co: dict[frozenset[str], int] = {}
    for doc in corpus.documents:
        present: set[str] = set()
        for tok in doc.iter_tokens():
            if tok.surface in vocab:
                ct[tok.surface] += 1
                present.add(tok.surface)
        ordered = sorted(present)
        for i, w1 in enumerate(ordered):
            dct[w1] += 1
            for w2 in ordered[i + 1 :]:
                key = frozenset((w1, w2))
                co[key] = co.get(key, 0) + 1
    for w, c in dct.items():
        if c > 0:
            co[frozenset((w,))] = c
    return WordStats(dct=dct, co=co, ct=ct, n_documents=corpus.n_documents)


def word_similarity(
    w1: str, w2: str, stats: WordStats, cfg: SimilarityConfig | None = None
) -> float:
    cfg = cfg or SimilarityConfig()
    d1 = stats.dct.get(w1, 0)
    d2 = stats.dct.get(w2, 0)
    if d1 == 0 or d2 == 0:
        missing = w1 if d1 == 0 else w2
        raise UnknownWordError(f"word {missing!r} has zero document count")
    co = stats.co_count(w1, w2)
    if cfg.eq2_mode == "printed":
        return 2.0 * co * d1 * d2 / (d1 + d2)
    return co * (d1 + d2) / (2.0 * d1 * d2)


def word_weight(w: str, stats: WordStats) -> float:
    """TF-IDF weight beta = log(ct(w)) * log(N / dct(w))."""
    c = stats.ct.get(w, 0)
    d = stats.dct.get(w, 0)
    if c < 1 or d < 1:
        raise UnknownWordError(f"word {w!r} unknown to the statistics")
    return math.log(c) * math.log(stats.n_documents / d)


def directed_term_similarity(
    t1: Sequence[str],
    t2: Sequence[str],
    stats: WordStats,
    cfg: SimilarityConfig | None = None,
) -> float:
    """Weighted average of each t1 word's best match in t2."""
    cfg = cfg or SimilarityConfig()
    if not t1 or not t2:
        raise ValueError("terms must be non-empty")
    total = 0.0
    beta_sum = 0.0
    for w1 in t1:
        try:
            beta = word_weight(w1, stats)
        except UnknownWordError:
            if cfg.lenient:
                continue
            raise
        best = 0.0
        for w2 in t2:
            try:
                s = word_similarity(w1, w2, stats, cfg)
            except UnknownWordError:
                if cfg.lenient:
                    continue
                raise
            if s > best:
                best = s
        total += beta * best
        beta_sum += beta
    if cfg.eq3_norm == "beta_sum":
        return total / beta_sum if beta_sum > 0.0 else 0.0
    return total / len(t1)


def term_similarity(
    t1: Sequence[str],
    t2: Sequence[str],
    stats: WordStats,
    cfg: SimilarityConfig | None = None,
) -> float:
    """Symmetric term similarity: mean of the two directed values."""
    return 0.5 * (
        directed_term_similarity(t1, t2, stats, cfg)
        + directed_term_similarity(t2, t1, stats, cfg)
    )


@dataclass(frozen=True)
class SimilarityMatrix:
    terms: tuple[str, ...]
    term_words: tuple[tuple[str, ...], ...]
    values: np.ndarray
    mean_offdiag: float

    @property
    def n(self) -> int:
        return len(self.terms)

    def submatrix(self, indices: Sequence[int]) -> "SimilarityMatrix":
        idx = np.asarray(indices, dtype=int)
        sub = self.values[np.ix_(idx, idx)]
        return SimilarityMatrix(
            terms=tuple(self.terms[i] for i in idx),
            term_words=tuple(self.term_words[i] for i in idx),
            values=sub,
            mean_offdiag=_mean_offdiag(sub),
        )


def _mean_offdiag(values: np.ndarray) -> float:
    n = values.shape[0]
    if n < 2:
        return 0.0
    mask = ~np.eye(n, dtype=bool)
    return float(values[mask].mean())


def build_similarity_matrix(
    terms: Sequence[FilteredTerm] | Sequence[tuple[str, tuple[str, ...]]],
    corpus: Corpus,
    cfg: SimilarityConfig | None = None,
    threads: int = 1,
) -> SimilarityMatrix:
    """Full symmetric term-similarity matrix over a term set.

    Rows can be computed concurrently; results are merged by index, so the
    output is bit-identical whatever the thread count.
    """
    cfg = cfg or SimilarityConfig()
    surfaces: list[str] = []
    words: list[tuple[str, ...]] = []
    for t in terms:
        if isinstance(t, FilteredTerm):
            surfaces.append(t.surface)
            words.append(tuple(t.words))
        else:
            surfaces.append(t[0])
            words.append(tuple(t[1]))
    if not surfaces:
        raise ValueError("term set is empty")
    vocab = {w for ws in words for w in ws}
    stats = build_word_stats(corpus, vocab)
    if not cfg.lenient:
        for surface, ws in zip(surfaces, words):
            for w in ws:
                if stats.dct.get(w, 0) == 0:
                    raise UnknownWordError(
                        f"term {surface!r}: word {w!r} does not occur in the corpus"
                    )
    return matrix_from_stats(surfaces, words, stats, cfg, threads=threads)


def matrix_from_stats(
    surfaces: Sequence[str],
    words: Sequence[tuple[str, ...]],
    stats: WordStats,
    cfg: SimilarityConfig | None = None,
    threads: int = 1,
) -> SimilarityMatrix:
    cfg = cfg or SimilarityConfig()
    n = len(surfaces)

    def row(i: int) -> np.ndarray:
        out = np.zeros(n)
        for j in range(i, n):
            out[j] = term_similarity(words[i], words[j], stats, cfg)
        return out

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(row, range(n)))
    else:
        rows = [row(i) for i in range(n)]
    upper = np.vstack(rows)
    values = np.where(np.triu(np.ones((n, n), dtype=bool)), upper, upper.T)
    return SimilarityMatrix(
        terms=tuple(surfaces),
        term_words=tuple(words),
        values=values,
        mean_offdiag=_mean_offdiag(values),
    )


FORMAT_VERSION = 1


def save_matrix(matrix: SimilarityMatrix, path: str | Path) -> None:
    """Header line (JSON) followed by the dense lower triangle as float64 LE."""
    header = {
        "format_version": FORMAT_VERSION,
        "n": matrix.n,
        "terms": list(matrix.terms),
        "term_words": [list(w) for w in matrix.term_words],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, ensure_ascii=False, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        tri = [
            matrix.values[i, j] for i in range(matrix.n) for j in range(i + 1)
        ]
        fh.write(struct.pack(f"<{len(tri)}d", *tri))
    sidecar = Path(str(path) + ".meta.json")
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump({"mean_offdiag": matrix.mean_offdiag, "n": matrix.n}, fh, sort_keys=True)
        fh.write("\n")


def load_matrix(path: str | Path) -> SimilarityMatrix:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        if header["format_version"] != FORMAT_VERSION:
            raise ValueError(f"unsupported matrix format {header['format_version']}")
        n = header["n"]
        count = n * (n + 1) // 2
        tri = struct.unpack(f"<{count}d", fh.read(8 * count))
    values = np.zeros((n, n))
    k = 0
    for i in range(n):
        for j in range(i + 1):
            values[i, j] = tri[k]
            values[j, i] = tri[k]
            k += 1
    return SimilarityMatrix(
        terms=tuple(header["terms"]),
        term_words=tuple(tuple(w) for w in header["term_words"]),
        values=values,
        mean_offdiag=_mean_offdiag(values),
    )


def save_matrix_csv(matrix: SimilarityMatrix, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("term," + ",".join(matrix.terms) + "\n")
        for term, row in zip(matrix.terms, matrix.values):
            fh.write(term + "," + ",".join(repr(v) for v in row) + "\n")
