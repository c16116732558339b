"""Kernel SVM trained by sequential minimal optimization, one-vs-one multiclass.

The binary solver works on the dual

    min_a  1/2 a^T Q a - sum(a)    s.t.  0 <= a_i <= C,  y^T a = 0

with ``Q_ij = y_i y_j K(x_i, x_j)``.  Each step picks the maximal violating
pair (first-order working-set selection) and solves the two-variable
subproblem analytically, so the stopping test is exactly the KKT gap.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import asdict, dataclass
from typing import Sequence, Union

import numpy as np

from ..errors import ValidationError
from .base import (Standardizer, TrainedModel, as_matrix, encode_labels, fit_standardizer,
                   stratified_folds, vote_winner)

logger = logging.getLogger(__name__)

TAU = 1e-12


@dataclass(frozen=True)
class SvmParams:
    kernel: str = "rbf"
    C: float = 1.0
    gamma: Union[float, str] = "auto"
    tol: float = 1e-3
    max_passes: int = 200

    def __post_init__(self):
        if self.kernel not in ("linear", "rbf"):
            raise ValidationError(f"unknown kernel {self.kernel!r}")
        if not self.C > 0:
            raise ValidationError("C must be positive")
        if not self.tol > 0:
            raise ValidationError("tol must be positive")
        if self.gamma != "auto" and not (isinstance(self.gamma, (int, float)) and self.gamma > 0):
            raise ValidationError("gamma must be positive or 'auto'")
        if self.max_passes < 1:
            raise ValidationError("max_passes must be >= 1")


def auto_gamma(X: np.ndarray) -> float:
    """``1 / (n_features * mean feature variance)``."""
    var = float(np.mean(np.var(X, axis=0)))
    return 1.0 / (X.shape[1] * (var if var > 0 else 1.0))


def kernel_matrix(A: np.ndarray, B: np.ndarray, kernel: str, gamma: float) -> np.ndarray:
    if kernel == "linear":
        return A @ B.T
    sq = (np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :] - 2.0 * A @ B.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass
class SmoResult:
    alpha: np.ndarray
    b: float
    iterations: int
    converged: bool
    gap: float


def smo_solve(K: np.ndarray, y: np.ndarray, C: float, tol: float = 1e-3,
              max_iter: int = 100_000) -> SmoResult:
    """Solve the binary soft-margin dual for labels ``y`` in {-1, +1}.

    Stops once ``max_{I_up} -y G - min_{I_low} -y G < tol``, which bounds
    every point's KKT violation by ``tol``.
    """
    y = np.asarray(y, dtype=float)
    n = len(y)
    alpha = np.zeros(n)
    G = -np.ones(n)  # gradient of 1/2 a'Qa - sum(a)
    diag = np.diag(K)
    gap = np.inf
    it = 0
    for it in range(max_iter):
        yg = -y * G
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            gap = 0.0
            break
        i = int(np.argmax(np.where(up, yg, -np.inf)))
        j = int(np.argmin(np.where(low, yg, np.inf)))
        gap = yg[i] - yg[j]
        if gap < tol:
            break
        eta = diag[i] + diag[j] - 2.0 * K[i, j]
        t = gap / max(eta, TAU)
        # keep both multipliers inside the box along a_i += y_i t, a_j -= y_j t
        t = min(t, C - alpha[i] if y[i] > 0 else alpha[i])
        t = min(t, alpha[j] if y[j] > 0 else C - alpha[j])
        alpha[i] += y[i] * t
        alpha[j] -= y[j] * t
        # snap to the bounds to avoid drift like 1e-17 outside [0, C]
        for k in (i, j):
            if alpha[k] < C * 1e-15:
                alpha[k] = 0.0
            elif alpha[k] > C * (1 - 1e-15):
                alpha[k] = C
        G += t * y * (K[:, i] - K[:, j])
    else:
        logger.warning("SMO stopped at max_iter=%d with KKT gap %.3g", max_iter, gap)
        it = max_iter
    converged = bool(gap < tol)

    yg = -y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        b = float(np.mean(yg[free]))
    else:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        hi = yg[up].max() if up.any() else yg.min()
        lo = yg[low].min() if low.any() else yg.max()
        b = float((hi + lo) / 2)
    return SmoResult(alpha, b, it, converged, float(gap))


def dual_objective(alpha: np.ndarray, y: np.ndarray, K: np.ndarray) -> float:
    """``sum(a) - 1/2 a^T Q a`` (the quantity SMO maximizes)."""
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ K @ ay)


def _fit_binary(Xs: np.ndarray, ybin: np.ndarray, params: SvmParams, gamma: float) -> dict:
    K = kernel_matrix(Xs, Xs, params.kernel, gamma)
    res = smo_solve(K, ybin, params.C, params.tol, params.max_passes * max(len(ybin), 1))
    sv = res.alpha > 0
    return {
        "support": Xs[sv],
        "coef": res.alpha[sv] * ybin[sv],
        "b": res.b,
        "alpha": res.alpha,
        "n_support": int(sv.sum()),
        "converged": res.converged,
    }


def train_svm(X, y, params: SvmParams = SvmParams(), seed: int = 0, standardize: bool = True,
              selected_channels: Sequence[str] = (), schema_id: str = "") -> TrainedModel:
    """One-vs-one SVM over every pair of classes present in ``y``.

    The solver itself is deterministic; ``seed`` is recorded for provenance.
    """
    X = as_matrix(X)
    labels, codes = encode_labels(y)
    if len(labels) < 2:
        raise ValidationError("SVM training needs at least two classes")
    std = fit_standardizer(X) if standardize else Standardizer.identity(X.shape[1])
    Xs = std.apply(X)
    gamma = auto_gamma(Xs) if params.gamma == "auto" else float(params.gamma)
    machines = []
    for a, b in itertools.combinations(range(len(labels)), 2):
        mask = (codes == a) | (codes == b)
        ybin = np.where(codes[mask] == a, 1.0, -1.0)
        m = _fit_binary(Xs[mask], ybin, params, gamma)
        m["pair"] = [a, b]
        machines.append(m)
    kind_params = {"svm": asdict(params), "gamma_value": gamma, "machines": machines}
    return TrainedModel("svm", std, labels, kind_params, tuple(selected_channels), schema_id,
                        {"seed": seed})


def decision_values(model: TrainedModel, Xs: np.ndarray) -> list[np.ndarray]:
    p = model.params
    kernel = p["svm"]["kernel"]
    out = []
    for m in p["machines"]:
        support = np.asarray(m["support"], dtype=float).reshape(-1, Xs.shape[1])
        K = kernel_matrix(Xs, support, kernel, p["gamma_value"])
        out.append(K @ np.asarray(m["coef"], dtype=float) + m["b"])
    return out


def predict_svm(model: TrainedModel, Xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Majority vote over pairwise machines.

    Ties go to the larger summed decision value, then command order.  The
    score is the fraction of its pairwise contests the winner won.
    """
    n_cls = len(model.labels)
    votes = np.zeros((len(Xs), n_cls))
    margin = np.zeros((len(Xs), n_cls))
    for m, f in zip(model.params["machines"], decision_values(model, Xs)):
        a, b = m["pair"]
        votes[:, a] += f >= 0
        votes[:, b] += f < 0
        margin[:, a] += f
        margin[:, b] -= f
    win = vote_winner(votes, margin)
    score = votes[np.arange(len(Xs)), win] / max(n_cls - 1, 1)
    return win, score


def grid_search_svm(X, y, Cs=(0.1, 1.0, 10.0), gamma_factors=(0.5, 1.0, 2.0),
                    n_folds: int = 5, seed: int = 0, kernel: str = "rbf") -> SvmParams:
    """Pick ``(C, gamma)`` by stratified k-fold accuracy on the training set.

    ``gamma`` candidates are multiples of the auto value; ties keep the
    earlier grid point.
    """
    X = as_matrix(X)
    labels, codes = encode_labels(y)
    folds = stratified_folds(codes, n_folds, seed)
    base_gamma = auto_gamma(fit_standardizer(X).apply(X))
    best, best_acc = None, -1.0
    for C in Cs:
        for gf in gamma_factors:
            params = SvmParams(kernel=kernel, C=C, gamma=gf * base_gamma)
            correct = 0
            for k, test in enumerate(folds):
                if test.size == 0:
                    continue
                train = np.setdiff1d(np.arange(len(codes)), test)
                model = train_svm(X[train], [labels[c] for c in codes[train]], params, seed)
                Xs = model.standardizer.apply(X[test])
                win, _ = predict_svm(model, Xs)
                pred = [model.labels[w] for w in win]
                correct += sum(p == labels[c] for p, c in zip(pred, codes[test]))
            acc = correct / len(codes)
            if acc > best_acc:
                best, best_acc = params, acc
    return best
