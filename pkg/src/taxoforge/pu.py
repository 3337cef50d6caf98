"""Positive-unlabeled term filtering via a cost-sensitive kernel classifier.

Only negatives are labeled (stop-word matches); everything else is an
unlabeled mixture trained as the positive class.  The per-class costs follow
the prior-dependent ratio 2*pi*(1-eta)/eta, applied to the labeled class so
a small labeled sample is amplified to stand in for the unlabeled negatives
it represents.  Decision values are calibrated to probabilities with a
cross-validated sigmoid fit, and candidates pass the filter when their
calibrated probability clears the threshold.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .candidates import NEGATIVE, UNLABELED, CandidateTable
from .features import FeatureMatrix, Scaler
from .svm import SVMModel, auto_gamma, smo_train

__all__ = [
    "CalibrationError",
    "PUConfig",
    "TermClassifier",
    "FilteredTerm",
    "cost_ratio",
    "train",
    "calibrate",
    "fit_sigmoid",
    "filter_terms",
    "save_model",
    "load_model",
    "save_term_set",
    "load_term_set",
]


class CalibrationError(RuntimeError):
    """Sigmoid calibration failed (degenerate scores or folds)."""


def cost_ratio(pi: float, eta: float) -> float:
    """Cost ratio 2*pi*(1-eta)/eta for class prior pi and labeled proportion eta."""
    if not 0.0 < pi < 1.0:
        raise ValueError(f"class prior pi must be in (0,1), got {pi}")
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"labeled proportion eta must be in (0,1], got {eta}")
    return 2.0 * pi * (1.0 - eta) / eta


@dataclass(frozen=True)
class PUConfig:
    pi: float = 0.5
    eta: float | None = None  # None: estimated as |labeled| / |rows|
    base_cost: float = 1.0
    kernel_gamma: float | str = "auto"
    smo_tolerance: float = 1e-3
    max_passes: int | None = None  # None: 10 * n
    threshold: float = 0.5
    weighted: bool = True  # False forces the cost ratio to 1 (ablation)
    calibration_folds: int = 3

    def __post_init__(self) -> None:
        if not 0.0 < self.pi < 1.0:
            raise ValueError("pi must be in (0,1)")
        if self.eta is not None and not 0.0 < self.eta <= 1.0:
            raise ValueError("eta must be in (0,1]")
        if self.base_cost <= 0.0:
            raise ValueError("base_cost must be positive")
        if isinstance(self.kernel_gamma, str):
            if self.kernel_gamma != "auto":
                raise ValueError("kernel_gamma must be positive or 'auto'")
        elif self.kernel_gamma <= 0.0:
            raise ValueError("kernel_gamma must be positive or 'auto'")
        if self.smo_tolerance <= 0.0:
            raise ValueError("smo_tolerance must be positive")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must be in [0,1]")
        if self.calibration_folds < 2:
            raise ValueError("calibration needs at least 2 folds")


@dataclass
class TermClassifier:
    svm: SVMModel
    config: PUConfig
    platt_a: float | None = None
    platt_b: float | None = None
    scaler: Scaler | None = None
    feature_columns: tuple[str, ...] = ()

    def decision_function(self, x: np.ndarray) -> np.ndarray:
        return self.svm.decision_function(x)

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        if self.platt_a is None or self.platt_b is None:
            raise CalibrationError("classifier has not been calibrated")
        return _sigmoid(self.platt_a * self.decision_function(x) + self.platt_b)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _encode_labels(labels: Sequence[str]) -> np.ndarray:
    y = np.empty(len(labels))
    for i, lab in enumerate(labels):
        if lab == UNLABELED:
            y[i] = 1.0
        elif lab == NEGATIVE:
            y[i] = -1.0
        else:
            raise ValueError(f"unknown PU label {lab!r}")
    return y


def _class_costs(y: np.ndarray, cfg: PUConfig) -> np.ndarray:
    n = len(y)
    if cfg.weighted:
        if cfg.eta is not None:
            eta = cfg.eta
        else:
            eta = float(np.sum(y < 0)) / n
            if not 0.0 < eta < 1.0:
                raise ValueError(f"labeled proportion {eta} leaves no unlabeled rows")
        ratio = cost_ratio(cfg.pi, eta)
        if ratio == 0.0:  # eta = 1: everything labeled, no asymmetry needed
            ratio = 1.0
    else:
        ratio = 1.0
    # the labeled (negative) class carries the ratio: each tagged negative
    # stands in for the unlabeled negatives the stop-word list missed
    costs = np.full(n, cfg.base_cost)
    costs[y < 0] *= ratio
    return costs


def train(
    x: np.ndarray | FeatureMatrix,
    labels: Sequence[str],
    cfg: PUConfig,
    track_objective: bool = False,
) -> TermClassifier:
    """Fit the cost-sensitive SVM on standardized feature rows.

    Unlabeled rows train as +1, labeled negatives as -1; requires at least
    one row of each.
    """
    scaler = None
    columns: tuple[str, ...] = ()
    if isinstance(x, FeatureMatrix):
        scaler = x.scaler
        columns = x.columns
        x = x.values
    x = np.asarray(x, dtype=float)
    y = _encode_labels(labels)
    if not (np.any(y > 0) and np.any(y < 0)):
        raise ValueError("training needs at least one negative and one unlabeled row")
    costs = _class_costs(y, cfg)
    gamma = auto_gamma(x) if cfg.kernel_gamma == "auto" else float(cfg.kernel_gamma)
    svm = smo_train(
        x,
        y,
        costs,
        gamma=gamma,
        tolerance=cfg.smo_tolerance,
        max_passes=cfg.max_passes,
        track_objective=track_objective,
    )
    return TermClassifier(
        svm=svm, config=cfg, scaler=scaler, feature_columns=columns
    )


def _stratified_folds(y: np.ndarray, k: int) -> list[np.ndarray]:
    """Deterministic round-robin folds preserving class balance."""
    folds: list[list[int]] = [[] for _ in range(k)]
    for cls in (-1.0, 1.0):
        for slot, idx in enumerate(np.flatnonzero(y == cls)):
            folds[slot % k].append(int(idx))
    return [np.array(sorted(f), dtype=int) for f in folds]


def fit_sigmoid(decisions: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Fit p = sigmoid(a*f + b) by Newton descent on the cross entropy.

    Targets use the standard smoothing (N+1)/(N+2) and 1/(N+2) so perfectly
    separated scores still yield a finite slope.
    """
    decisions = np.asarray(decisions, dtype=float)
    y = np.asarray(y, dtype=float)
    if decisions.max() - decisions.min() < 1e-12:
        raise CalibrationError("decision values are all equal; cannot calibrate")
    n_pos = int(np.sum(y > 0))
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise CalibrationError("calibration requires both classes")
    t = np.where(y > 0, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))

    a = 0.0
    b = math.log((n_pos + 1.0) / (n_neg + 1.0))

    def loss(a_: float, b_: float) -> float:
        z = a_ * decisions + b_
        # -[t*log(p) + (1-t)*log(1-p)] written in a saturation-safe form
        return float(np.sum(np.logaddexp(0.0, -z) + (1.0 - t) * z))

    current = loss(a, b)
    for _ in range(200):
        p = _sigmoid(a * decisions + b)
        grad_a = float(np.dot(p - t, decisions))
        grad_b = float(np.sum(p - t))
        if max(abs(grad_a), abs(grad_b)) < 1e-10:
            break
        w = p * (1.0 - p) + 1e-12
        h_aa = float(np.dot(w, decisions * decisions)) + 1e-12
        h_ab = float(np.dot(w, decisions))
        h_bb = float(np.sum(w)) + 1e-12
        det = h_aa * h_bb - h_ab * h_ab
        if det <= 0.0:
            raise CalibrationError("singular Hessian during sigmoid fit")
        da = -(h_bb * grad_a - h_ab * grad_b) / det
        db = -(h_aa * grad_b - h_ab * grad_a) / det
        step = 1.0
        while step >= 1e-10:
            cand = loss(a + step * da, b + step * db)
            if cand < current + 1e-12:
                a += step * da
                b += step * db
                current = cand
                break
            step *= 0.5
        else:
            break
    if a <= 0.0:
        raise CalibrationError(
            f"fitted slope {a:.3e} is not positive; probabilities would not be "
            "monotone in the decision value"
        )
    return a, b


def calibrate(
    model: TermClassifier, x: np.ndarray | FeatureMatrix, labels: Sequence[str]
) -> TermClassifier:
    """Attach sigmoid calibration fitted on cross-validated decision values."""
    if isinstance(x, FeatureMatrix):
        x = x.values
    x = np.asarray(x, dtype=float)
    y = _encode_labels(labels)
    folds = _stratified_folds(y, model.config.calibration_folds)
    decisions = np.zeros(len(y))
    for heldout in folds:
        mask = np.ones(len(y), dtype=bool)
        mask[heldout] = False
        y_train = y[mask]
        if not (np.any(y_train > 0) and np.any(y_train < 0)):
            raise CalibrationError("degenerate single-class calibration fold")
        cfg = model.config
        sub = smo_train(
            x[mask],
            y_train,
            _class_costs(y_train, cfg),
            gamma=model.svm.gamma,
            tolerance=cfg.smo_tolerance,
            max_passes=cfg.max_passes,
        )
        decisions[heldout] = sub.decision_function(x[heldout])
    a, b = fit_sigmoid(decisions, y)
    return replace(model, platt_a=a, platt_b=b)


@dataclass(frozen=True)
class FilteredTerm:
    surface: str
    words: tuple[str, ...]
    probability: float


def filter_terms(
    table: CandidateTable,
    features: FeatureMatrix,
    model: TermClassifier,
    threshold: float | None = None,
) -> tuple[FilteredTerm, ...]:
    """Unlabeled candidates whose calibrated probability clears the threshold.

    Labeled negatives never pass, whatever their score.  Output is ordered
    by descending probability, then surface bytes.
    """
    if threshold is None:
        threshold = model.config.threshold
    if features.surfaces != tuple(c.surface for c in table.candidates):
        raise ValueError("feature rows are not aligned with the candidate table")
    probs = model.predict_proba(features.values)
    kept = [
        FilteredTerm(surface=c.surface, words=c.words, probability=float(p))
        for c, p in zip(table.candidates, probs)
        if c.pu_label == UNLABELED and p >= threshold
    ]
    kept.sort(key=lambda t: (-t.probability, t.surface))
    return tuple(kept)


def save_model(model: TermClassifier, path: str | Path) -> None:
    payload = {
        "layout_version": 1,
        "gamma": model.svm.gamma,
        "bias": model.svm.bias,
        "support_indices": model.svm.support_indices.tolist(),
        "support_vectors": model.svm.support_vectors.tolist(),
        "dual_coef": model.svm.dual_coef.tolist(),
        "platt_a": model.platt_a,
        "platt_b": model.platt_b,
        "config": {
            "pi": model.config.pi,
            "eta": model.config.eta,
            "base_cost": model.config.base_cost,
            "kernel_gamma": model.config.kernel_gamma,
            "smo_tolerance": model.config.smo_tolerance,
            "max_passes": model.config.max_passes,
            "threshold": model.config.threshold,
            "weighted": model.config.weighted,
            "calibration_folds": model.config.calibration_folds,
        },
        "feature_columns": list(model.feature_columns),
        "scaler": model.scaler.to_dict() if model.scaler is not None else None,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_model(path: str | Path) -> TermClassifier:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    svm = SVMModel(
        support_vectors=np.asarray(obj["support_vectors"], dtype=float),
        support_indices=np.asarray(obj["support_indices"], dtype=int),
        dual_coef=np.asarray(obj["dual_coef"], dtype=float),
        bias=obj["bias"],
        gamma=obj["gamma"],
        alphas=np.zeros(0),
    )
    cfg = PUConfig(**obj["config"])
    scaler = Scaler.from_dict(obj["scaler"]) if obj["scaler"] is not None else None
    return TermClassifier(
        svm=svm,
        config=cfg,
        platt_a=obj["platt_a"],
        platt_b=obj["platt_b"],
        scaler=scaler,
        feature_columns=tuple(obj["feature_columns"]),
    )


def save_term_set(terms: Sequence[FilteredTerm], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in terms:
            fh.write(
                json.dumps(
                    {"surface": t.surface, "probability": t.probability},
                    ensure_ascii=False,
                    sort_keys=True,
                )
            )
            fh.write("\n")


def load_term_set(
    path: str | Path, table: CandidateTable
) -> tuple[FilteredTerm, ...]:
    """Rejoin the exported (surface, probability) pairs with candidate words."""
    by_surface = table.by_surface()
    terms = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            cand = by_surface.get(obj["surface"])
            if cand is None:
                raise ValueError(f"term {obj['surface']!r} missing from candidate table")
            terms.append(
                FilteredTerm(
                    surface=obj["surface"],
                    words=cand.words,
                    probability=obj["probability"],
                )
            )
    return tuple(terms)
