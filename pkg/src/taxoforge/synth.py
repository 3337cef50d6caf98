"""Synthetic annotated-corpus generator with planted industry blocks.

Each industry class gets a private vocabulary of content nouns combined
into two-word phrases; sentences embed those phrases in a handful of
dependency-annotated frames (business statements with marker words, plain
mentions, stop-word statements, generic cross-class chatter).  Words of
different classes never co-occur, so the planted block structure survives
through similarity into clustering, while stop-word frames provide the
labeled negatives PU training needs.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

from .corpus import AnnotatedDocument, Corpus, Token, save_corpus

__all__ = [
    "SynthSpec",
    "generate_synthetic_corpus",
    "write_synthetic_corpus",
    "default_stopwords",
    "write_stopwords",
]

DEFAULT_STOPWORDS = ("公司", "集团", "销售", "盈利", "领先", "趋势")


@dataclass(frozen=True)
class SynthSpec:
    n_classes: int = 3
    docs_per_class: int = 20
    terms_per_class: int = 6
    docs_per_company: int = 2
    generic_words: int = 4
    include_generic: bool = True  # cross-class chatter and stop-word frames
    cross_mention_rate: float = 0.15  # docs citing one other-class term
    base_year: int = 2015

    def class_names(self) -> list[str]:
        return [f"I{60 + k}" for k in range(self.n_classes)]

    def planted_vocabulary(self) -> dict[str, list[str]]:
        """Per-class content nouns; disjoint across classes by construction."""
        return {
            cls: [f"c{k}w{j}" for j in range(2 * self.terms_per_class)]
            for k, cls in enumerate(self.class_names())
        }

    def planted_terms(self) -> dict[str, list[tuple[str, str]]]:
        vocab = self.planted_vocabulary()
        return {
            cls: [(words[2 * j], words[2 * j + 1]) for j in range(self.terms_per_class)]
            for cls, words in vocab.items()
        }


def _business_statement(wa: str, wb: str) -> tuple[Token, ...]:
    # 从事 <phrase> 业务 frame: the phrase is an ATT chain hanging off 业务
    return (
        Token("从事", "v", -1, "HED"),
        Token(wa, "n", 2, "ATT"),
        Token(wb, "n", 3, "ATT"),
        Token("业务", "n", 0, "VOB"),
        Token("。", "wp", 0, "WP"),
    )


def _plain_mention(wa: str, wb: str) -> tuple[Token, ...]:
    return (
        Token("我们", "r", 3, "ATT"),
        Token("的", "u", 0, "RAD"),
        Token(wa, "n", 3, "ATT"),
        Token(wb, "n", -1, "HED"),
        Token("。", "wp", 3, "WP"),
    )


def _stopword_statement(g: str) -> tuple[Token, ...]:
    return (
        Token("公司", "n", 2, "SBV"),
        Token("主要", "d", 2, "ADV"),
        Token("销售", "v", -1, "HED"),
        Token(g, "n", 4, "ATT"),
        Token("产品", "n", 2, "VOB"),
        Token("。", "wp", 2, "WP"),
    )


def _generic_statement(g: str) -> tuple[Token, ...]:
    return (
        Token(g, "n", 1, "ATT"),
        Token("行业", "n", 2, "SBV"),
        Token("发展", "v", -1, "HED"),
        Token("。", "wp", 2, "WP"),
    )


def _generic_company_statement(g: str) -> tuple[Token, ...]:
    # stop-word frame whose candidate starts with a generic word, so the
    # labeled negatives cover the cross-class region of feature space
    return (
        Token(g, "n", 1, "ATT"),
        Token("公司", "n", -1, "HED"),
        Token("发展", "v", 1, "COO"),
        Token("。", "wp", 1, "WP"),
    )


def generate_synthetic_corpus(spec: SynthSpec, seed: int) -> Corpus:
    """Deterministic planted-block corpus for a fixed (spec, seed) pair."""
    rng = random.Random(seed)
    terms = spec.planted_terms()
    generics = [f"g{j}" for j in range(spec.generic_words)]
    documents = []
    for cls in spec.class_names():
        class_terms = terms[cls]
        for d in range(spec.docs_per_class):
            company = f"{cls}-co{d // spec.docs_per_company:03d}"
            year = spec.base_year + (d % spec.docs_per_company)
            picks = [rng.choice(class_terms) for _ in range(3)]
            sentences = [
                _business_statement(*picks[0]),
                _business_statement(*picks[1]),
                _plain_mention(*picks[2]),
                _plain_mention(*picks[0]),
            ]
            if spec.include_generic:
                sentences.append(_stopword_statement(rng.choice(generics)))
                sentences.append(_generic_statement(rng.choice(generics)))
            rng.shuffle(sentences)
            documents.append(
                AnnotatedDocument(
                    doc_id=f"{cls}-d{d:03d}",
                    company_id=company,
                    industry_class=cls,
                    year=year,
                    sentences=tuple(sentences),
                )
            )
    return Corpus(documents=tuple(documents))


def write_synthetic_corpus(spec: SynthSpec, seed: int, path: str | Path) -> Corpus:
    corpus = generate_synthetic_corpus(spec, seed)
    save_corpus(corpus, path)
    return corpus


def default_stopwords() -> tuple[str, ...]:
    return DEFAULT_STOPWORDS


def write_stopwords(path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# domain stop words\n")
        for w in DEFAULT_STOPWORDS:
            fh.write(w + "\n")
