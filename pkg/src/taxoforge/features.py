"""Per-candidate statistical features for the term classifier.

Concept-level block: mutual information over adjacent constituent words,
left/right boundary entropies, log-scaled TF and IDF, two binary marker
cues, per-industry TF/IDF vectors and the industry concentration entropy.
Word-level block: TF, IDF and both boundary entropies for the first and
last constituent word.  Rows are standardized column-wise and the scaler is
kept for inference.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .candidates import CandidateTable, TermCandidate
from .corpus import Corpus, cooccurrence_counts, document_counts

__all__ = [
    "BOUNDARY",
    "MarkerConfig",
    "FeatureMatrix",
    "Scaler",
    "concept_mutual_information",
    "boundary_entropy",
    "concept_tf_idf",
    "marker_features",
    "industry_features",
    "featurize",
    "save_features_csv",
    "load_features_csv",
]

# Distinguished neighbor symbol for occurrences at a sentence edge.
BOUNDARY = "<BOUNDARY>"

LAYOUT_VERSION = 1


@dataclass(frozen=True)
class MarkerConfig:
    followed_by: frozenset[str] = frozenset({"行业", "业务"})
    following: frozenset[str] = frozenset({"从事"})


class _SeqStats:
    """Occurrence statistics for one word sequence gathered in a corpus scan."""

    __slots__ = ("left", "right", "total", "class_freq", "class_docs")

    def __init__(self) -> None:
        self.left: Counter[str] = Counter()
        self.right: Counter[str] = Counter()
        self.total = 0
        self.class_freq: Counter[str] = Counter()
        self.class_docs: dict[str, set[str]] = {}


def _scan_sequences(
    corpus: Corpus, sequences: Iterable[tuple[str, ...]]
) -> dict[tuple[str, ...], _SeqStats]:
    """Find all surface occurrences of each word sequence in one corpus pass."""
    by_first: dict[str, list[tuple[str, ...]]] = {}
    stats: dict[tuple[str, ...], _SeqStats] = {}
    for seq in sequences:
        if not seq:
            raise ValueError("empty word sequence")
        stats.setdefault(seq, _SeqStats())
        by_first.setdefault(seq[0], []).append(seq)
    if not stats:
        return stats
    for doc in corpus.documents:
        cls = doc.industry_class
        for sentence in doc.sentences:
            surfaces = [t.surface for t in sentence]
            n = len(surfaces)
            for pos, word in enumerate(surfaces):
                for seq in by_first.get(word, ()):
                    end = pos + len(seq)
                    if end > n or tuple(surfaces[pos:end]) != seq:
                        continue
                    st = stats[seq]
                    st.total += 1
                    st.left[surfaces[pos - 1] if pos > 0 else BOUNDARY] += 1
                    st.right[surfaces[end] if end < n else BOUNDARY] += 1
                    st.class_freq[cls] += 1
                    st.class_docs.setdefault(cls, set()).add(doc.doc_id)
    return stats


def _entropy(counts: Counter[str]) -> float:
    total = sum(counts.values())
    if total == 0:
        return 0.0
    h = 0.0
    for c in counts.values():
        if c > 0:
            q = c / total
            h -= q * math.log(q)
    return h


def concept_mutual_information(t: TermCandidate, corpus: Corpus) -> float:
    """Sum of pointwise-MI contributions over adjacent constituent word pairs.

    Probabilities are document-level: p(w) = dct(w)/N and p(w1,w2) is the
    co-document fraction.  Single-word terms score 0.
    """
    if len(t.words) < 2:
        return 0.0
    n = corpus.n_documents
    dct = document_counts(corpus, set(t.words))
    for w, c in dct.items():
        if c == 0:
            raise ValueError(f"word {w!r} of term {t.surface!r} absent from corpus")
    pairs = [(t.words[k], t.words[k + 1]) for k in range(len(t.words) - 1)]
    co = cooccurrence_counts(corpus, set(map(frozenset, pairs)))
    mi = 0.0
    for w1, w2 in pairs:
        p_joint = co[frozenset((w1, w2))] / n
        if p_joint == 0.0:
            continue
        p1 = dct[w1] / n
        p2 = dct[w2] / n
        mi += p_joint * math.log(p_joint / (p1 * p2))
    return mi


def boundary_entropy(t: TermCandidate, corpus: Corpus, side: str) -> float:
    """Entropy of the token adjacent to occurrences of t on the given side.

    Occurrences touching a sentence edge contribute the BOUNDARY symbol.
    """
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    stats = _scan_sequences(corpus, [t.words])[t.words]
    return _entropy(stats.left if side == "left" else stats.right)


def concept_tf_idf(t: TermCandidate, corpus: Corpus) -> tuple[float, float]:
    if not t.doc_ids:
        raise ValueError(f"term {t.surface!r} has no provenance documents")
    tf = math.log1p(t.term_freq)
    idf = math.log(corpus.n_documents / len(t.doc_ids))
    return tf, idf


def marker_features(
    t: TermCandidate, corpus: Corpus, markers: MarkerConfig | None = None
) -> tuple[int, int]:
    """Existential adjacency cues: (followed by a marker, following a marker)."""
    markers = markers or MarkerConfig()
    stats = _scan_sequences(corpus, [t.words])[t.words]
    followed_by = int(any(w in markers.followed_by for w in stats.right))
    following = int(any(w in markers.following for w in stats.left))
    return followed_by, following


def industry_features(
    t: TermCandidate, corpus: Corpus
) -> tuple[np.ndarray, np.ndarray, float]:
    """Per-class log TF and IDF vectors plus the industry concentration entropy.

    Classes where the term never occurs contribute 0 to both vectors and are
    skipped by the entropy sum.
    """
    if not corpus.class_index:
        raise ValueError("corpus has no industry classes")
    stats = _scan_sequences(corpus, [t.words])[t.words]
    return _industry_from_stats(stats, corpus)


def _industry_from_stats(
    stats: _SeqStats, corpus: Corpus
) -> tuple[np.ndarray, np.ndarray, float]:
    classes = corpus.class_index
    docs_per_class = Counter(d.industry_class for d in corpus.documents)
    ind_tf = np.zeros(len(classes))
    ind_idf = np.zeros(len(classes))
    total = sum(stats.class_freq.values())
    entropy = 0.0
    for k, cls in enumerate(classes):
        freq = stats.class_freq.get(cls, 0)
        ind_tf[k] = math.log1p(freq)
        doc_count = len(stats.class_docs.get(cls, ()))
        if doc_count > 0:
            ind_idf[k] = math.log(docs_per_class[cls] / doc_count)
        if freq > 0 and total > 0:
            q = freq / total
            entropy -= q * math.log(q)
    return ind_tf, ind_idf, entropy


@dataclass(frozen=True)
class Scaler:
    """Column-wise standardizer; degenerate (zero-variance) columns map to 0."""

    mean: np.ndarray
    std: np.ndarray

    def transform(self, raw: np.ndarray) -> np.ndarray:
        safe = np.where(self.std > 0.0, self.std, 1.0)
        out = (raw - self.mean) / safe
        out[:, self.std == 0.0] = 0.0
        return out

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, obj: dict) -> "Scaler":
        return cls(mean=np.asarray(obj["mean"]), std=np.asarray(obj["std"]))


@dataclass(frozen=True)
class FeatureMatrix:
    surfaces: tuple[str, ...]
    columns: tuple[str, ...]
    values: np.ndarray  # standardized, rows align with surfaces
    raw: np.ndarray
    scaler: Scaler
    warnings: tuple[str, ...] = ()
    layout_version: int = LAYOUT_VERSION


def feature_columns(class_index: Sequence[str]) -> tuple[str, ...]:
    cols = ["mi", "re", "le", "tf", "idf", "followed_by", "following"]
    cols += [f"ind_tf[{c}]" for c in class_index]
    cols += [f"ind_idf[{c}]" for c in class_index]
    cols.append("ind_entropy")
    for end in ("first", "last"):
        cols += [f"{end}_tf", f"{end}_idf", f"{end}_le", f"{end}_re"]
    return tuple(cols)


def featurize(
    table: CandidateTable, corpus: Corpus, markers: MarkerConfig | None = None
) -> FeatureMatrix:
    """One standardized feature row per candidate, in table order.

    The scan for term and boundary-word occurrences is shared across all
    candidates, so this is a two-pass operation over the corpus regardless
    of table size.
    """
    if not table.candidates:
        raise ValueError("candidate table is empty")
    markers = markers or MarkerConfig()
    n = corpus.n_documents
    classes = corpus.class_index
    columns = feature_columns(classes)

    sequences: set[tuple[str, ...]] = set()
    words: set[str] = set()
    for c in table.candidates:
        sequences.add(c.words)
        words.update((c.words[0], c.words[-1]))
    sequences.update((w,) for w in words)
    stats = _scan_sequences(corpus, sequences)
    dct = document_counts(corpus, words)
    ct = {w: stats[(w,)].total for w in words}

    pairs = set()
    for c in table.candidates:
        for k in range(len(c.words) - 1):
            pairs.add(frozenset((c.words[k], c.words[k + 1])))
    pair_words = {w for p in pairs for w in p}
    pair_dct = document_counts(corpus, pair_words)
    co = cooccurrence_counts(corpus, pairs) if pairs else {}

    rows = np.zeros((len(table.candidates), len(columns)))
    for r, cand in enumerate(table.candidates):
        st = stats[cand.words]
        mi = 0.0
        for k in range(len(cand.words) - 1):
            w1, w2 = cand.words[k], cand.words[k + 1]
            if pair_dct[w1] == 0 or pair_dct[w2] == 0:
                raise ValueError(
                    f"word of term {cand.surface!r} absent from corpus"
                )
            p_joint = co[frozenset((w1, w2))] / n
            if p_joint > 0.0:
                mi += p_joint * math.log(
                    p_joint / ((pair_dct[w1] / n) * (pair_dct[w2] / n))
                )
        tf, idf = concept_tf_idf(cand, corpus)
        followed_by = int(any(w in markers.followed_by for w in st.right))
        following = int(any(w in markers.following for w in st.left))
        ind_tf, ind_idf, ind_entropy = _industry_from_stats(st, corpus)

        row = [mi, _entropy(st.right), _entropy(st.left), tf, idf, followed_by, following]
        row += ind_tf.tolist()
        row += ind_idf.tolist()
        row.append(ind_entropy)
        for w in (cand.words[0], cand.words[-1]):
            wst = stats[(w,)]
            w_idf = math.log(n / dct[w]) if dct[w] > 0 else 0.0
            row += [math.log1p(ct[w]), w_idf, _entropy(wst.left), _entropy(wst.right)]
        rows[r] = row

    mean = rows.mean(axis=0)
    std = rows.std(axis=0)
    scaler = Scaler(mean=mean, std=std)
    warnings = tuple(
        f"degenerate feature column {columns[k]!r} (zero variance), scaled to 0"
        for k in np.flatnonzero(std == 0.0)
    )
    return FeatureMatrix(
        surfaces=tuple(c.surface for c in table.candidates),
        columns=columns,
        values=scaler.transform(rows),
        raw=rows,
        scaler=scaler,
        warnings=warnings,
    )


def save_features_csv(matrix: FeatureMatrix, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# taxoforge-features layout_version={matrix.layout_version}\n")
        fh.write("surface," + ",".join(matrix.columns) + "\n")
        for surface, row in zip(matrix.surfaces, matrix.values):
            fh.write(surface + "," + ",".join(repr(v) for v in row) + "\n")


def save_scaler(matrix: FeatureMatrix, path: str | Path) -> None:
    payload = {
        "layout_version": matrix.layout_version,
        "columns": list(matrix.columns),
        **matrix.scaler.to_dict(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_features_csv(path: str | Path, scaler_path: str | Path) -> FeatureMatrix:
    with open(scaler_path, "r", encoding="utf-8") as fh:
        scaler_obj = json.load(fh)
    scaler = Scaler.from_dict(scaler_obj)
    surfaces: list[str] = []
    rows: list[list[float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        version_line = fh.readline()
        if "layout_version" not in version_line:
            raise ValueError(f"{path}: missing layout header")
        header = fh.readline().rstrip("\n").split(",")
        columns = tuple(header[1:])
        for line in fh:
            if not line.strip():
                continue
            parts = line.rstrip("\n").split(",")
            surfaces.append(parts[0])
            rows.append([float(v) for v in parts[1:]])
    values = np.asarray(rows)
    safe = np.where(scaler.std > 0.0, scaler.std, 1.0)
    raw = values * safe + scaler.mean
    return FeatureMatrix(
        surfaces=tuple(surfaces),
        columns=columns,
        values=values,
        raw=raw,
        scaler=scaler,
    )
