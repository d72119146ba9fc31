"""Soft-margin RBF support vector machine trained by SMO.

The dual problem

    min_a 1/2 a^T Q a - sum(a)   s.t.  0 <= a_i <= C,  sum(y_i a_i) = 0

with ``Q_ij = y_i y_j exp(-gamma |x_i - x_j|^2)`` is solved two variables at
a time. The working pair is the maximal violating index plus the partner
with the best second-order decrease, as in LIBSVM. Training stops when the
KKT violation ``m(a) - M(a)`` drops below ``tol``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConvergenceError, SpecError
from .base import ModelKind, Predictor, as_labels, as_matrix, require_both_classes

TAU = 1e-12


def rbf_kernel(A, B, gamma):
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass
class SVMRBF(Predictor):
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_i * y_i for the support vectors
    rho: float
    gamma: float
    C: float
    alpha: np.ndarray  # full dual vector of the training problem
    kkt_violation: float
    n_iter: int
    kind: ModelKind = ModelKind.SVM_RBF
    threshold: float = 0.0

    def score(self, X):
        X = as_matrix(X)
        if len(self.support_vectors) == 0:
            return np.full(len(X), -self.rho)
        return rbf_kernel(X, self.support_vectors, self.gamma) @ self.dual_coef - self.rho


def kkt_violation(alpha, K, y01, C) -> float:
    """Maximal KKT violation ``m(a) - M(a)`` recomputed from scratch."""
    y = np.where(np.asarray(y01) > 0.5, 1.0, -1.0)
    G = (y[:, None] * y[None, :] * K) @ alpha - 1.0
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    v = -y * G
    return float(max(v[up].max(initial=-np.inf) - v[low].min(initial=np.inf), 0.0))


def solve_dual(K, y, C, tol=1e-3, max_iter=None):
    """Return ``(alpha, rho, violation, iterations)`` for labels ``y`` in {-1, +1}."""
    n = len(y)
    if max_iter is None:
        max_iter = max(100_000, 100 * n)
    Q = (y[:, None] * y[None, :]) * K
    QD = np.diag(Q).copy()
    alpha = np.zeros(n)
    G = -np.ones(n)
    it = 0
    while True:
        minus_yG = -y * G
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            gap = 0.0
            break
        cand_i = np.where(up, minus_yG, -np.inf)
        i = int(np.argmax(cand_i))
        Gmax = cand_i[i]
        Gmin = minus_yG[low].min()
        gap = Gmax - Gmin
        if gap < tol:
            break
        if it >= max_iter:
            raise ConvergenceError(
                f"SMO did not converge in {max_iter} iterations (KKT violation {gap:.3g})",
                violation=gap,
            )
        b = Gmax - minus_yG
        quad = QD[i] + QD - 2.0 * y[i] * y * Q[i]
        quad = np.where(quad > 0, quad, TAU)
        score_j = np.where(low & (b > 0), -(b * b) / quad, np.inf)
        j = int(np.argmin(score_j))
        if not np.isfinite(score_j[j]):
            break
        it += 1
        ai_old, aj_old = alpha[i], alpha[j]
        Qij = Q[i, j]
        if y[i] != y[j]:
            qc = QD[i] + QD[j] + 2.0 * Qij
            qc = qc if qc > 0 else TAU
            delta = (-G[i] - G[j]) / qc
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j], alpha[i] = 0.0, diff
            elif alpha[i] < 0:
                alpha[i], alpha[j] = 0.0, -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i], alpha[j] = C, C - diff
            elif alpha[j] > C:
                alpha[j], alpha[i] = C, C + diff
        else:
            qc = QD[i] + QD[j] - 2.0 * Qij
            qc = qc if qc > 0 else TAU
            delta = (G[i] - G[j]) / qc
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i], alpha[j] = C, total - C
            elif alpha[j] < 0:
                alpha[j], alpha[i] = 0.0, total
            if total > C:
                if alpha[j] > C:
                    alpha[j], alpha[i] = C, total - C
            elif alpha[i] < 0:
                alpha[i], alpha[j] = 0.0, total
        G += Q[i] * (alpha[i] - ai_old) + Q[j] * (alpha[j] - aj_old)

    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = float(yG[free].mean())
    else:
        at_upper, at_lower = alpha >= C, alpha <= 0
        upper_side = ((y < 0) & at_upper) | ((y > 0) & at_lower)
        lower_side = ((y > 0) & at_upper) | ((y < 0) & at_lower)
        ub = yG[upper_side].min(initial=np.inf)
        lb = yG[lower_side].max(initial=-np.inf)
        if np.isfinite(ub) and np.isfinite(lb):
            rho = float((ub + lb) / 2.0)
        else:
            rho = float(ub if np.isfinite(ub) else lb)
    return alpha, rho, float(max(gap, 0.0)), it


def fit_svm_rbf(X, y, C=1.0, gamma=1.0, tol=1e-3, max_iter=None) -> SVMRBF:
    if C <= 0 or gamma <= 0:
        raise SpecError("C and gamma must be > 0")
    X = as_matrix(X)
    y01 = as_labels(y, len(X))
    require_both_classes(y01)
    ys = np.where(y01 > 0.5, 1.0, -1.0)
    K = rbf_kernel(X, X, gamma)
    alpha, rho, gap, it = solve_dual(K, ys, C, tol, max_iter)
    alpha = np.clip(alpha, 0.0, C)
    sv = alpha > 0
    return SVMRBF(
        support_vectors=X[sv].copy(),
        dual_coef=(alpha * ys)[sv],
        rho=rho,
        gamma=float(gamma),
        C=float(C),
        alpha=alpha,
        kkt_violation=gap,
        n_iter=it,
    )


def dual_objective(alpha, K, y01) -> float:
    ys = np.where(np.asarray(y01) > 0.5, 1.0, -1.0)
    v = alpha * ys
    return float(0.5 * v @ K @ v - alpha.sum())
