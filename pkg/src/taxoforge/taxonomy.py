"""Company mapping and the final annotated-taxonomy artifact.

Companies attach to leaf terms through extraction provenance: a company is
mapped to a term when the term was extracted from one of its documents, so
one company can sit under many leaves.  Per-hypernym statistics follow the
cluster structure (direct children, descendant leaves, distinct companies,
mean pairwise member similarity) and exports are byte-stable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .candidates import CandidateTable
from .corpus import Corpus
from .ghap import Taxonomy
from .similarity import SimilarityMatrix

__all__ = [
    "CompanyMapping",
    "HypernymStats",
    "map_companies",
    "intra_class_similarity",
    "hypernym_statistics",
    "export_taxonomy",
    "import_taxonomy_json",
    "save_mapping",
    "load_mapping",
]


@dataclass(frozen=True)
class CompanyMapping:
    by_term: dict[str, frozenset[str]]
    by_company: dict[str, frozenset[str]]

    def check_inverse(self) -> None:
        for term, companies in self.by_term.items():
            for c in companies:
                if term not in self.by_company.get(c, frozenset()):
                    raise ValueError(f"mapping not inverse at term {term!r} / {c!r}")
        for company, terms in self.by_company.items():
            for t in terms:
                if company not in self.by_term.get(t, frozenset()):
                    raise ValueError(f"mapping not inverse at company {company!r} / {t!r}")


@dataclass(frozen=True)
class HypernymStats:
    hypernym: str
    intra_class_similarity: float
    n_subconcepts: int
    n_subsubconcepts: int
    n_companies: int


def map_companies(
    taxonomy: Taxonomy, table: CandidateTable, corpus: Corpus
) -> CompanyMapping:
    """Bidirectional company/leaf-term maps from extraction provenance."""
    by_surface = table.by_surface()
    doc_company = {d.doc_id: d.company_id for d in corpus.documents}
    by_term: dict[str, set[str]] = {}
    by_company: dict[str, set[str]] = {}
    for idx in taxonomy.levels[0]:
        term = taxonomy.terms[idx]
        cand = by_surface.get(term)
        if cand is None:
            raise ValueError(f"leaf term {term!r} missing from the candidate table")
        companies = {doc_company[d] for d in cand.doc_ids if d in doc_company}
        if companies:
            by_term[term] = companies
            for c in companies:
                by_company.setdefault(c, set()).add(term)
    return CompanyMapping(
        by_term={t: frozenset(cs) for t, cs in by_term.items()},
        by_company={c: frozenset(ts) for c, ts in by_company.items()},
    )


def intra_class_similarity(
    members: Sequence[int], matrix: SimilarityMatrix | np.ndarray
) -> float:
    """Mean pairwise similarity over the member set; singletons score 1."""
    if len(members) == 0:
        raise ValueError("cluster is empty")
    if len(members) == 1:
        return 1.0
    values = matrix.values if isinstance(matrix, SimilarityMatrix) else np.asarray(matrix)
    total = 0.0
    count = 0
    for a in range(len(members)):
        for b in range(a + 1, len(members)):
            total += float(values[members[a], members[b]])
            count += 1
    return total / count


def _descendant_leaves(taxonomy: Taxonomy, hypernym: int) -> list[int]:
    subs = taxonomy.children(1, hypernym)
    leaves: list[int] = []
    for s in subs:
        leaves.extend(taxonomy.children(0, s))
    return leaves


def hypernym_statistics(
    taxonomy: Taxonomy, mapping: CompanyMapping, matrix: SimilarityMatrix
) -> tuple[HypernymStats, ...]:
    """One row per top-level exemplar, ordered by descending cohesion."""
    if taxonomy.n_levels < 3:
        raise ValueError("hypernym statistics need a three-level taxonomy")
    rows = []
    for h in taxonomy.roots():
        subs = taxonomy.children(1, h)
        leaves = _descendant_leaves(taxonomy, h)
        companies: set[str] = set()
        for leaf in leaves:
            companies.update(mapping.by_term.get(taxonomy.terms[leaf], frozenset()))
        rows.append(
            HypernymStats(
                hypernym=taxonomy.terms[h],
                intra_class_similarity=intra_class_similarity(leaves, matrix),
                n_subconcepts=len(subs),
                n_subsubconcepts=len(leaves),
                n_companies=len(companies),
            )
        )
    rows.sort(key=lambda r: (-r.intra_class_similarity, r.hypernym))
    return tuple(rows)


def _tree_payload(
    taxonomy: Taxonomy,
    mapping: CompanyMapping,
    stats: Sequence[HypernymStats],
) -> list[dict]:
    order = {s.hypernym: k for k, s in enumerate(stats)}
    tree = []
    for h in sorted(taxonomy.roots(), key=lambda i: order[taxonomy.terms[i]]):
        sub_nodes = []
        for s in taxonomy.children(1, h):
            leaf_nodes = [
                {
                    "term": taxonomy.terms[leaf],
                    "companies": sorted(
                        mapping.by_term.get(taxonomy.terms[leaf], frozenset())
                    ),
                }
                for leaf in sorted(
                    taxonomy.children(0, s), key=lambda i: taxonomy.terms[i]
                )
            ]
            sub_nodes.append(
                {"exemplar": taxonomy.terms[s], "children": leaf_nodes}
            )
        sub_nodes.sort(key=lambda n: n["exemplar"])
        tree.append({"exemplar": taxonomy.terms[h], "children": sub_nodes})
    return tree


def _edge_list(taxonomy: Taxonomy) -> list[dict]:
    edges = []
    for level in range(taxonomy.n_levels - 1):
        for child, parent in sorted(taxonomy.parents[level].items()):
            edges.append(
                {
                    "child": taxonomy.terms[child],
                    "parent": taxonomy.terms[parent],
                    "level": level,
                }
            )
    return edges


def _dot_text(taxonomy: Taxonomy) -> str:
    def node_id(level: int, idx: int) -> str:
        return f"L{level}_{idx}"

    def quote(s: str) -> str:
        return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'

    lines = ["digraph taxonomy {", "  rankdir=TB;"]
    for level in range(taxonomy.n_levels - 1, -1, -1):
        names = "; ".join(
            quote(node_id(level, i)) for i in sorted(taxonomy.levels[level])
        )
        lines.append(f"  {{ rank=same; {names}; }}")
    for level in range(taxonomy.n_levels):
        for i in sorted(taxonomy.levels[level]):
            label = quote(taxonomy.terms[i])
            lines.append(f"  {quote(node_id(level, i))} [label={label}];")
    for level in range(taxonomy.n_levels - 1):
        for child, parent in sorted(taxonomy.parents[level].items()):
            lines.append(
                f"  {quote(node_id(level + 1, parent))} -> {quote(node_id(level, child))};"
            )
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_taxonomy(
    taxonomy: Taxonomy,
    mapping: CompanyMapping,
    stats: Sequence[HypernymStats],
    fmt: str,
    path: str | Path,
) -> None:
    """Write one deterministic artifact: json tree, dot graph, or stats csv."""
    if fmt == "json":
        payload = {
            "layout_version": 1,
            "tree": _tree_payload(taxonomy, mapping, stats),
            "edges": _edge_list(taxonomy),
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, ensure_ascii=False, sort_keys=True, indent=2)
            fh.write("\n")
    elif fmt == "dot":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(_dot_text(taxonomy))
    elif fmt == "csv":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(
                "hypernym,intra_class_similarity,n_subconcepts,"
                "n_subsubconcepts,n_companies\n"
            )
            for s in stats:
                fh.write(
                    f"{s.hypernym},{s.intra_class_similarity!r},"
                    f"{s.n_subconcepts},{s.n_subsubconcepts},{s.n_companies}\n"
                )
    else:
        raise ValueError(f"unknown export format {fmt!r}")


def import_taxonomy_json(path: str | Path) -> tuple[list[dict], list[dict]]:
    """Load the tree and edge list back; structural inverse of the json export."""
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    return obj["tree"], obj["edges"]


def save_mapping(mapping: CompanyMapping, path: str | Path) -> None:
    payload = {
        "by_term": {t: sorted(cs) for t, cs in sorted(mapping.by_term.items())},
        "by_company": {c: sorted(ts) for c, ts in sorted(mapping.by_company.items())},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, sort_keys=True)
        fh.write("\n")


def load_mapping(path: str | Path) -> CompanyMapping:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    mapping = CompanyMapping(
        by_term={t: frozenset(cs) for t, cs in obj["by_term"].items()},
        by_company={c: frozenset(ts) for c, ts in obj["by_company"].items()},
    )
    mapping.check_inverse()
    return mapping
