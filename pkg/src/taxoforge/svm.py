"""Soft-margin RBF-kernel SVM trained by sequential minimal optimization.

Supports a per-row box constraint so the two classes can carry different
misclassification costs.  Working sets of size two are chosen by the
maximal-violating-pair rule on the dual gradient, which is deterministic
and keeps the bias out of the optimization loop entirely; the bias is set
from the final optimality interval, so every training point ends within
half the stopping gap of its KKT condition.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["TrainingError", "SVMModel", "rbf_kernel", "auto_gamma", "smo_train"]


class TrainingError(RuntimeError):
    """SMO failed to satisfy the KKT conditions within the step budget."""

    def __init__(self, message: str, kkt_violation: float):
        super().__init__(message)
        self.kkt_violation = kkt_violation


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    sq = (
        np.sum(a * a, axis=1)[:, None]
        + np.sum(b * b, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


def auto_gamma(x: np.ndarray) -> float:
    """1 / (n_features * overall feature variance), with a floor for flat data."""
    x = np.asarray(x, dtype=float)
    var = float(x.var())
    if var <= 0.0:
        var = 1.0
    return 1.0 / (x.shape[1] * var)


@dataclass
class SVMModel:
    """Trained kernel machine; immutable after fit, safe to share for prediction."""

    support_vectors: np.ndarray  # rows of X with alpha > 0
    support_indices: np.ndarray  # their positions in the training set
    dual_coef: np.ndarray  # alpha_i * y_i for the support rows
    bias: float
    gamma: float
    alphas: np.ndarray = field(repr=False)  # full training alpha vector
    objective: float = 0.0
    objective_history: tuple[float, ...] = ()

    def decision_function(self, x: np.ndarray) -> np.ndarray:
        k = rbf_kernel(np.atleast_2d(x), self.support_vectors, self.gamma)
        return k @ self.dual_coef + self.bias


def _dual_objective(alpha: np.ndarray, y: np.ndarray, kernel: np.ndarray) -> float:
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ kernel @ ay)


def kkt_violations(
    alpha: np.ndarray, y: np.ndarray, decision: np.ndarray, c_box: np.ndarray
) -> np.ndarray:
    """Per-point violation of the KKT optimality conditions."""
    margin = y * decision
    at_lower = alpha <= 0.0
    at_upper = alpha >= c_box
    viol = np.abs(margin - 1.0)
    viol[at_lower] = np.maximum(0.0, 1.0 - margin[at_lower])
    viol[at_upper] = np.maximum(0.0, margin[at_upper] - 1.0)
    return viol


def smo_train(
    x: np.ndarray,
    y: np.ndarray,
    c_box: np.ndarray,
    gamma: float,
    tolerance: float = 1e-3,
    max_passes: int | None = None,
    track_objective: bool = False,
) -> SVMModel:
    """Solve the weighted soft-margin dual for labels y in {-1, +1}.

    ``c_box`` is the per-row upper bound on the dual variable.  One "pass"
    is budgeted as n pair updates; raises :class:`TrainingError` carrying
    the residual KKT violation when ``max_passes`` passes run out.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    c_box = np.asarray(c_box, dtype=float)
    n = len(y)
    if x.shape[0] != n or c_box.shape[0] != n:
        raise ValueError("x, y and c_box must agree on the number of rows")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be -1 or +1")
    if np.any(c_box <= 0.0):
        raise ValueError("box constraints must be positive")
    if max_passes is None:
        max_passes = max(100, 10 * n)
    max_steps = max_passes * max(n, 1)

    kernel = rbf_kernel(x, x, gamma)
    alpha = np.zeros(n)
    # f_raw_i = sum_j alpha_j y_j K_ij; the bias never enters the loop
    f_raw = np.zeros(n)
    history: list[float] = [0.0] if track_objective else []
    eps = 1e-12
    pos = y > 0

    def selection() -> tuple[int, int, float, float]:
        """Maximal violating pair on the dual gradient.

        For each point, (y_i - f_raw_i) is the bias that would put it
        exactly on its margin; optimality means every "up" candidate sits at
        or below every "low" candidate.
        """
        c = y - f_raw
        up = (pos & (alpha < c_box)) | (~pos & (alpha > 0.0))
        low = (~pos & (alpha < c_box)) | (pos & (alpha > 0.0))
        m_val = -np.inf
        m_idx = -1
        if up.any():
            cand = np.where(up, c, -np.inf)
            m_idx = int(np.argmax(cand))
            m_val = float(cand[m_idx])
        big_m_val = np.inf
        big_m_idx = -1
        if low.any():
            cand = np.where(low, c, np.inf)
            big_m_idx = int(np.argmin(cand))
            big_m_val = float(cand[big_m_idx])
        return m_idx, big_m_idx, m_val, big_m_val

    def take_step(i1: int, i2: int) -> bool:
        nonlocal f_raw
        a1_old, a2_old = alpha[i1], alpha[i2]
        y1, y2 = y[i1], y[i2]
        c1, c2 = c_box[i1], c_box[i2]
        e1 = f_raw[i1] - y1
        e2 = f_raw[i2] - y2
        s = y1 * y2
        if s > 0:
            low = max(0.0, a1_old + a2_old - c1)
            high = min(c2, a1_old + a2_old)
        else:
            low = max(0.0, a2_old - a1_old)
            high = min(c2, c1 + a2_old - a1_old)
        if high - low < eps:
            return False
        k11 = kernel[i1, i1]
        k12 = kernel[i1, i2]
        k22 = kernel[i2, i2]
        eta = k11 + k22 - 2.0 * k12
        grad = y2 * (e1 - e2)  # d(objective)/d(alpha2) along the constraint
        if eta > 0.0:
            a2 = a2_old + grad / eta
            a2 = min(max(a2, low), high)
        else:
            # flat or degenerate direction: the objective is linear (or
            # convex) along the segment, so the best point is an endpoint
            t_low = low - a2_old
            t_high = high - a2_old
            gain_low = grad * t_low - 0.5 * eta * t_low * t_low
            gain_high = grad * t_high - 0.5 * eta * t_high * t_high
            if gain_low > gain_high + eps:
                a2 = low
            elif gain_high > gain_low + eps:
                a2 = high
            else:
                return False
        if a2 == a2_old:
            return False
        a1 = a1_old + s * (a2_old - a2)
        if a1 < 0.0:
            a1 = 0.0
        elif a1 > c1:
            a1 = c1
        d1 = (a1 - a1_old) * y1
        d2 = (a2 - a2_old) * y2
        alpha[i1] = a1
        alpha[i2] = a2
        f_raw += d1 * kernel[i1] + d2 * kernel[i2]
        if track_objective:
            history.append(_dual_objective(alpha, y, kernel))
        return True

    steps = 0
    while True:
        i_up, i_low, m_val, big_m_val = selection()
        gap = m_val - big_m_val
        if gap <= tolerance or i_up < 0 or i_low < 0:
            # guard against float drift in the incrementally updated f_raw
            f_raw = kernel @ (alpha * y)
            i_up, i_low, m_val, big_m_val = selection()
            gap = m_val - big_m_val
            if gap <= tolerance or i_up < 0 or i_low < 0:
                break
        if steps >= max_steps:
            raise TrainingError(
                f"SMO did not converge within {max_passes} passes "
                f"(KKT violation {gap / 2.0:.3e})",
                kkt_violation=gap / 2.0,
            )
        if not take_step(i_up, i_low):
            raise TrainingError(
                f"SMO stalled with optimality gap {gap:.3e}",
                kkt_violation=gap / 2.0,
            )
        steps += 1

    # optimal bias sits inside [big_m_val, m_val]; the midpoint spreads the
    # residual gap evenly across both sides
    if i_up < 0 and i_low < 0:
        bias = 0.0
    elif i_up < 0:
        bias = big_m_val
    elif i_low < 0:
        bias = m_val
    else:
        bias = 0.5 * (m_val + big_m_val)

    support = np.flatnonzero(alpha > 0.0)
    if len(support) == 0:
        # degenerate but consistent: keep one zero-coefficient row so the
        # decision function stays defined
        support = np.array([0])
    return SVMModel(
        support_vectors=x[support].copy(),
        support_indices=support,
        dual_coef=(alpha * y)[support],
        bias=bias,
        gamma=gamma,
        alphas=alpha,
        objective=_dual_objective(alpha, y, kernel),
        objective_history=tuple(history),
    )
