"""Elastic-net linear and logistic regression by coordinate descent.

Both models penalize the coefficients (never the intercept) with

    lambda * (alpha * ||beta||_2^2 + (1 - alpha) * ||beta||_1)

so ``alpha`` weights the **L2** term: ``alpha=1`` is ridge and
``alpha=0`` is the lasso. Many libraries use the opposite convention.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError, SpecError
from .base import (
    ModelKind,
    Predictor,
    as_labels,
    as_matrix,
    require_both_classes,
    sigmoid,
    soft_threshold,
)

log = logging.getLogger(__name__)


def _check_penalty(alpha, lam):
    if not 0.0 <= alpha <= 1.0:
        raise SpecError(f"alpha must lie in [0, 1], got {alpha}")
    if lam < 0:
        raise SpecError(f"lambda must be >= 0, got {lam}")


def penalty(beta, alpha, lam) -> float:
    return float(lam * (alpha * beta @ beta + (1.0 - alpha) * np.abs(beta).sum()))


def linear_objective(beta, intercept, X, y, alpha, lam) -> float:
    r = y - X @ beta - intercept
    return float(r @ r) + penalty(beta, alpha, lam)


@dataclass
class ElasticLinear(Predictor):
    coef: np.ndarray
    intercept: float
    objective_history: list[float] = field(default_factory=list)
    kind: ModelKind = ModelKind.ELASTIC_LINEAR
    threshold: float = 0.5

    def score(self, X):
        return as_matrix(X) @ self.coef + self.intercept


def fit_elastic_linear(X, y, alpha, lam, fit_intercept=True, tol=1e-10, max_iter=10_000,
                       warm_start=None) -> ElasticLinear:
    """Minimize ||y - X beta - b||^2 + penalty by cyclic coordinate descent.

    ``objective_history`` holds the objective after every full sweep.
    """
    _check_penalty(alpha, lam)
    X = as_matrix(X)
    y = as_labels(y, len(X))
    n, d = X.shape
    beta = np.zeros(d) if warm_start is None else np.array(warm_start[0], dtype=float)
    b = 0.0 if warm_start is None else float(warm_start[1])
    if not fit_intercept:
        b = 0.0
    col_sq = np.einsum("ij,ij->j", X, X)
    l1 = lam * (1.0 - alpha) / 2.0
    l2 = lam * alpha
    r = y - X @ beta - b
    if fit_intercept:
        shift = r.mean()
        b += shift
        r -= shift
    history = [linear_objective(beta, b, X, y, alpha, lam)]
    for _ in range(max_iter):
        max_step = 0.0
        for j in range(d):
            denom = col_sq[j] + l2
            old = beta[j]
            if denom == 0.0:
                new = 0.0
            else:
                rho = X[:, j] @ r + col_sq[j] * old
                new = soft_threshold(rho, l1) / denom
            if new != old:
                r -= X[:, j] * (new - old)
                beta[j] = new
                max_step = max(max_step, abs(new - old))
        if fit_intercept:
            shift = r.mean()
            b += shift
            r -= shift
            max_step = max(max_step, abs(shift))
        history.append(linear_objective(beta, b, X, y, alpha, lam))
        if max_step <= tol:
            break
    else:
        log.warning("elastic linear fit stopped after %d sweeps", max_iter)
    return ElasticLinear(beta, b, history)


def logistic_objective(beta, intercept, X, y, alpha, lam) -> float:
    """Penalized negative log-likelihood (summed, not averaged)."""
    eta = X @ beta + intercept
    return float(np.sum(np.logaddexp(0.0, eta) - y * eta)) + penalty(beta, alpha, lam)


def logistic_gradient(beta, intercept, X, y, alpha, lam):
    """Gradient of the smooth part plus the L2 term; the L1 term contributes
    its subgradient ``sign(beta)`` where beta is non-zero."""
    p = sigmoid(X @ beta + intercept)
    resid = p - y
    g_beta = X.T @ resid + 2.0 * lam * alpha * beta + lam * (1.0 - alpha) * np.sign(beta)
    return g_beta, float(resid.sum())


@dataclass
class ElasticLogistic(Predictor):
    coef: np.ndarray
    intercept: float
    objective_history: list[float] = field(default_factory=list)
    kind: ModelKind = ModelKind.ELASTIC_LOGISTIC
    threshold: float = 0.5

    def score(self, X):
        return sigmoid(as_matrix(X) @ self.coef + self.intercept)


def _weighted_ridge(X, z, w, b, l2, fit_intercept):
    # no L1 term: the subproblem is a weighted ridge regression, solved directly
    n, d = X.shape
    sw = np.sqrt(w)
    cols = [sw[:, None] * X]
    if fit_intercept:
        cols.insert(0, sw[:, None])
        target = sw * z
    else:
        target = sw * (z - b)
    A = np.hstack(cols)
    if l2 > 0:
        pen = np.zeros((d, A.shape[1]))
        pen[:, A.shape[1] - d:] = np.sqrt(2.0 * l2) * np.eye(d)
        A = np.vstack([A, pen])
        target = np.concatenate([target, np.zeros(d)])
    sol = np.linalg.lstsq(A, target, rcond=None)[0]
    if fit_intercept:
        return sol[1:], float(sol[0])
    return sol, b


def _weighted_cd(X, z, w, beta, b, l1, l2, fit_intercept, tol, max_sweeps):
    """Solve min 1/2 sum w (z - b - X beta)^2 + l2 ||beta||^2 + l1 ||beta||_1.

    The intercept is profiled out by weighted centering, so the sweeps run on
    the d x d weighted Gram matrix in plain floats.
    """
    if l1 == 0.0:
        return _weighted_ridge(X, z, w, b, l2, fit_intercept)
    if fit_intercept:
        sw = w.sum()
        x_bar = (w @ X) / sw
        z_bar = float(w @ z) / sw
        Xc, zc = X - x_bar, z - z_bar
    else:
        Xc, zc = X, z - b
    WX = Xc * w[:, None]
    G = (WX.T @ Xc).tolist()
    q = (WX.T @ zc).tolist()
    d = len(q)
    coef = [float(v) for v in beta]
    # grad[j] = q[j] - sum_k G[j][k] coef[k]
    grad = [q[j] - sum(G[j][k] * coef[k] for k in range(d)) for j in range(d)]
    for _ in range(max_sweeps):
        max_step = 0.0
        for j in range(d):
            denom = G[j][j] + 2.0 * l2
            old = coef[j]
            new = soft_threshold(grad[j] + G[j][j] * old, l1) / denom if denom > 0.0 else 0.0
            delta = new - old
            if delta != 0.0:
                coef[j] = new
                row = G[j]
                for k in range(d):
                    grad[k] -= row[k] * delta
                if abs(delta) > max_step:
                    max_step = abs(delta)
        if max_step <= tol:
            break
    coef = np.array(coef)
    if fit_intercept:
        b = z_bar - float(x_bar @ coef)
    return coef, b


def fit_elastic_logistic(X, y, alpha, lam, fit_intercept=True, tol=1e-10, max_iter=200,
                         warm_start=None) -> ElasticLogistic:
    """Proximal Newton: each step solves a weighted elastic-net least-squares
    model of the log-likelihood by coordinate descent, then backtracks until
    the penalized objective decreases."""
    _check_penalty(alpha, lam)
    X = as_matrix(X)
    y = as_labels(y, len(X))
    require_both_classes(y)
    n, d = X.shape
    beta = np.zeros(d) if warm_start is None else np.array(warm_start[0], dtype=float)
    if warm_start is not None and fit_intercept:
        b = float(warm_start[1])
    elif fit_intercept:
        ybar = y.mean()
        b = float(np.log(ybar / (1.0 - ybar)))
    else:
        b = 0.0
    l1, l2 = lam * (1.0 - alpha), lam * alpha
    obj = logistic_objective(beta, b, X, y, alpha, lam)
    history = [obj]
    for _ in range(max_iter):
        eta = X @ beta + b
        p = sigmoid(eta)
        w = np.maximum(p * (1.0 - p), 1e-12)
        z = eta - (p - y) / w
        nb, nb0 = _weighted_cd(X, z, w, beta, b, l1, l2, fit_intercept, tol * 0.1, 10_000)
        db, db0 = nb - beta, nb0 - b
        step, accepted = 1.0, False
        for _ in range(60):
            cand_beta, cand_b = beta + step * db, b + step * db0
            cand = logistic_objective(cand_beta, cand_b, X, y, alpha, lam)
            if cand <= obj:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        moved = step * max(np.abs(db).max(initial=0.0), abs(db0))
        beta, b, obj = cand_beta, cand_b, cand
        history.append(obj)
        if moved <= tol:
            break
    else:
        log.warning("elastic logistic fit stopped after %d Newton steps", max_iter)
    if not np.isfinite(beta).all():
        raise DataError("logistic fit produced non-finite coefficients")
    return ElasticLogistic(beta, b, history)
