"""Greedy hierarchical affinity propagation.

Exemplars emerge from damped synchronous message passing between terms:
each sweep refreshes the responsibility matrix from the current
availabilities, then the availabilities from the new responsibilities, and
a point becomes an exemplar when its summed self-messages turn positive.
Layers are built greedily: cluster all terms, restrict the similarity
matrix to the winning exemplars, and cluster again, three levels deep by
default.

Two availability update rules are provided.  The default "paper" rule adds
the preference term inside both availability updates and sums positive
responsibilities toward the receiving point; "classical" is the textbook
formulation where preferences enter only through the similarity diagonal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .similarity import SimilarityMatrix

__all__ = [
    "ClusteringNumericsError",
    "APConfig",
    "APState",
    "ClusterResult",
    "Taxonomy",
    "init_preferences",
    "ap_iterate",
    "extract_exemplars",
    "assign_members",
    "cluster_layer",
    "build_hierarchy",
    "net_similarity",
    "save_taxonomy",
    "load_taxonomy",
]


class ClusteringNumericsError(RuntimeError):
    """A message matrix picked up a NaN or infinity."""


@dataclass(frozen=True)
class APConfig:
    damping: float = 0.9
    preference_strategy: str = "median"  # "median" | "min"
    preference_scale: float = 1.0
    stable_window: int = 50
    max_iterations: int = 1000
    update_rule: str = "paper"  # "paper" | "classical"
    layers: int = 3

    def __post_init__(self) -> None:
        if not 0.0 <= self.damping < 1.0:
            raise ValueError("damping must be in [0,1)")
        if self.preference_strategy not in ("median", "min"):
            raise ValueError(f"unknown preference strategy {self.preference_strategy!r}")
        if self.update_rule not in ("paper", "classical"):
            raise ValueError(f"unknown update rule {self.update_rule!r}")
        if self.stable_window < 1 or self.max_iterations < 1:
            raise ValueError("stable_window and max_iterations must be >= 1")
        if self.layers < 1:
            raise ValueError("need at least one layer")


@dataclass(frozen=True)
class APState:
    """Message-passing state; S carries the preferences on its diagonal."""

    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    preferences: np.ndarray
    iteration: int = 0
    damping: float = 0.9
    update_rule: str = "paper"

    @classmethod
    def initial(
        cls,
        similarities: np.ndarray,
        preferences: np.ndarray,
        damping: float = 0.9,
        update_rule: str = "paper",
    ) -> "APState":
        s = np.array(similarities, dtype=float)
        preferences = np.asarray(preferences, dtype=float)
        np.fill_diagonal(s, preferences)
        n = s.shape[0]
        return cls(
            s=s,
            a=np.zeros((n, n)),
            r=np.zeros((n, n)),
            preferences=preferences,
            iteration=0,
            damping=damping,
            update_rule=update_rule,
        )


def init_preferences(
    matrix: SimilarityMatrix | np.ndarray, strategy: str = "median", scale: float = 1.0
) -> np.ndarray:
    """Uniform exemplar preferences from the off-diagonal similarity spread."""
    values = matrix.values if isinstance(matrix, SimilarityMatrix) else np.asarray(matrix)
    n = values.shape[0]
    if n == 0:
        raise ValueError("empty similarity matrix")
    if n == 1:
        base = 0.0
    else:
        off = values[~np.eye(n, dtype=bool)]
        if strategy == "median":
            base = float(np.median(off))
        elif strategy == "min":
            base = float(off.min())
        else:
            raise ValueError(f"unknown preference strategy {strategy!r}")
    return np.full(n, scale * base)


def _check_finite(m: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(m)):
        i, j = np.argwhere(~np.isfinite(m))[0]
        raise ClusteringNumericsError(f"{name}[{i},{j}] = {m[i, j]} is not finite")


def _responsibilities(s: np.ndarray, a: np.ndarray) -> np.ndarray:
    n = s.shape[0]
    if n == 1:
        # empty competitor set: the max contributes nothing
        return s.copy()
    m = a + s
    rows = np.arange(n)
    best_idx = np.argmax(m, axis=1)
    best = m[rows, best_idx]
    m[rows, best_idx] = -np.inf
    second = m.max(axis=1)
    rho = s - best[:, None]
    rho[rows, best_idx] = s[rows, best_idx] - second
    return rho


def _availabilities(rho: np.ndarray, c: np.ndarray, rule: str) -> np.ndarray:
    n = rho.shape[0]
    p = np.maximum(rho, 0.0)
    col_excl_self = p.sum(axis=0) - p.diagonal()  # sum_{k != i} max(0, rho_ki)
    rho_diag = rho.diagonal()
    if rule == "paper":
        off = np.minimum(
            0.0, c[None, :] + rho_diag[None, :] + col_excl_self[:, None] - p.T
        )
        diag = c + col_excl_self
    else:  # classical
        off = np.minimum(0.0, rho_diag[None, :] + col_excl_self[None, :] - p)
        diag = col_excl_self
    alpha = off
    np.fill_diagonal(alpha, diag)
    return alpha


def ap_iterate(state: APState) -> APState:
    """One damped synchronous sweep: responsibilities, then availabilities."""
    lam = state.damping
    rho = _responsibilities(state.s, state.a)
    rho = lam * state.r + (1.0 - lam) * rho
    _check_finite(rho, "responsibility")
    alpha = _availabilities(rho, state.preferences, state.update_rule)
    alpha = lam * state.a + (1.0 - lam) * alpha
    _check_finite(alpha, "availability")
    return replace(state, a=alpha, r=rho, iteration=state.iteration + 1)


def extract_exemplars(state: APState) -> np.ndarray:
    """Points whose summed self-messages are positive; argmax fallback.

    If no diagonal sum is positive, the largest one is promoted so every
    layer yields at least one exemplar.
    """
    if state.iteration < 1:
        raise ValueError("extract_exemplars requires at least one sweep")
    diag = state.a.diagonal() + state.r.diagonal()
    exemplars = diag > 0.0
    if not exemplars.any():
        exemplars = np.zeros(len(diag), dtype=bool)
        exemplars[int(np.argmax(diag))] = True
    return exemplars


def assign_members(
    similarities: np.ndarray, exemplars: Sequence[int] | np.ndarray
) -> np.ndarray:
    """Assign every point to its best exemplar (lowest index wins ties)."""
    values = np.asarray(similarities)
    ex = np.asarray(exemplars)
    if ex.dtype == bool:
        ex = np.flatnonzero(ex)
    else:
        ex = np.sort(ex.astype(int))
    if len(ex) == 0:
        raise ValueError("exemplar set is empty")
    n = values.shape[0]
    # argmax returns the first maximum, so sorted exemplar order gives the
    # lowest-index tie break
    choice = np.argmax(values[:, ex], axis=1)
    assignment = ex[choice]
    assignment[ex] = ex
    return assignment


def net_similarity(
    values: np.ndarray,
    preferences: np.ndarray,
    exemplars: Sequence[int] | np.ndarray,
    assignment: np.ndarray,
) -> float:
    """Sum of exemplar preferences plus member-to-exemplar similarities."""
    ex = np.asarray(exemplars)
    if ex.dtype == bool:
        ex = np.flatnonzero(ex)
    ex_set = set(ex.tolist())
    total = float(preferences[ex].sum())
    for i in range(values.shape[0]):
        if i not in ex_set:
            total += float(values[i, assignment[i]])
    return total


@dataclass(frozen=True)
class ClusterResult:
    exemplars: tuple[int, ...]
    assignment: np.ndarray
    net_similarity: float
    converged: bool
    iterations: int


def cluster_layer(
    matrix: SimilarityMatrix | np.ndarray, cfg: APConfig | None = None
) -> ClusterResult:
    """Run message passing until the exemplar set holds still.

    Convergence means ``cfg.stable_window`` consecutive sweeps with an
    unchanged exemplar set; hitting ``cfg.max_iterations`` first returns the
    current result flagged as not converged.
    """
    cfg = cfg or APConfig()
    values = matrix.values if isinstance(matrix, SimilarityMatrix) else np.asarray(matrix)
    n = values.shape[0]
    if n == 0:
        raise ValueError("cannot cluster an empty matrix")
    prefs = init_preferences(values, cfg.preference_strategy, cfg.preference_scale)
    state = APState.initial(
        values, prefs, damping=cfg.damping, update_rule=cfg.update_rule
    )
    stable = 0
    last: tuple[int, ...] | None = None
    converged = False
    while state.iteration < cfg.max_iterations:
        state = ap_iterate(state)
        current = tuple(np.flatnonzero(extract_exemplars(state)).tolist())
        if current == last:
            stable += 1
            if stable >= cfg.stable_window:
                converged = True
                break
        else:
            stable = 0
            last = current
    exemplars = extract_exemplars(state)
    assignment = assign_members(values, exemplars)
    return ClusterResult(
        exemplars=tuple(np.flatnonzero(exemplars).tolist()),
        assignment=assignment,
        net_similarity=net_similarity(values, prefs, exemplars, assignment),
        converged=converged,
        iterations=state.iteration,
    )


@dataclass(frozen=True)
class Taxonomy:
    """Multi-level exemplar hierarchy over a fixed term list.

    ``levels[0]`` is every term index (the leaves); higher levels hold the
    exemplar indices chosen at each round, so each level is a subset of the
    one below.  ``parents[k]`` maps a node at level k to its exemplar at
    level k+1; top-level nodes are roots.
    """

    terms: tuple[str, ...]
    levels: tuple[tuple[int, ...], ...]
    parents: tuple[dict[int, int], ...]
    converged: tuple[bool, ...] = ()

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def roots(self) -> tuple[int, ...]:
        return self.levels[-1]

    def children(self, level: int, node: int) -> tuple[int, ...]:
        """Nodes at ``level`` whose parent is ``node`` (at ``level+1``)."""
        return tuple(
            child for child, parent in sorted(self.parents[level].items()) if parent == node
        )

    def validate(self) -> None:
        for k in range(self.n_levels - 1):
            level_set = set(self.levels[k])
            upper_set = set(self.levels[k + 1])
            if not upper_set <= level_set:
                raise ValueError(f"level {k + 1} is not nested inside level {k}")
            if set(self.parents[k]) != level_set:
                raise ValueError(f"parent map at level {k} does not cover the level")
            for child, parent in self.parents[k].items():
                if parent not in upper_set:
                    raise ValueError(
                        f"node {child} at level {k} has non-exemplar parent {parent}"
                    )
            for e in self.levels[k + 1]:
                if self.parents[k][e] != e:
                    raise ValueError(f"exemplar {e} is not its own parent at level {k}")


def build_hierarchy(matrix: SimilarityMatrix, cfg: APConfig | None = None) -> Taxonomy:
    """Cluster terms, then the exemplars of each layer, greedily upward."""
    cfg = cfg or APConfig()
    n = matrix.n
    levels: list[tuple[int, ...]] = [tuple(range(n))]
    parents: list[dict[int, int]] = []
    converged: list[bool] = []
    current = matrix
    index_map = list(range(n))  # positions in `current` -> global term indices
    for _ in range(cfg.layers - 1):
        result = cluster_layer(current, cfg)
        converged.append(result.converged)
        parent = {
            index_map[i]: index_map[int(result.assignment[i])]
            for i in range(current.n)
        }
        parents.append(parent)
        index_map = [index_map[i] for i in result.exemplars]
        levels.append(tuple(index_map))
        current = current.submatrix(result.exemplars)
    return Taxonomy(
        terms=matrix.terms,
        levels=tuple(levels),
        parents=tuple(parents),
        converged=tuple(converged),
    )


def save_taxonomy(taxonomy: Taxonomy, path: str | Path) -> None:
    payload = {
        "layout_version": 1,
        "terms": list(taxonomy.terms),
        "levels": [list(level) for level in taxonomy.levels],
        "parents": [
            {str(k): v for k, v in sorted(p.items())} for p in taxonomy.parents
        ],
        "converged": list(taxonomy.converged),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, sort_keys=True)
        fh.write("\n")


def load_taxonomy(path: str | Path) -> Taxonomy:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    return Taxonomy(
        terms=tuple(obj["terms"]),
        levels=tuple(tuple(level) for level in obj["levels"]),
        parents=tuple({int(k): v for k, v in p.items()} for p in obj["parents"]),
        converged=tuple(obj["converged"]),
    )
