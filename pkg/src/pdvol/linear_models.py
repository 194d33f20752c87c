"""L2-regularized binary logistic regression trained by gradient descent.

The objective is the mean negative log-likelihood of the sigmoid model plus
(reg/2)*||w||^2 with the bias unpenalized. Full-batch descent with an Armijo
backtracking line search keeps the objective non-increasing; a
Barzilai-Borwein trial step makes convergence fast without losing that
guarantee. Training stops when the gradient's infinity norm drops below the
tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import LABEL_PD
from .errors import DimensionMismatch, NonFiniteInput

_ARMIJO_C = 1e-4
_MAX_BACKTRACKS = 60


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True, eq=False)
class LogisticModel:
    weights: np.ndarray
    bias: float
    reg_strength: float
    tolerance: float
    iterations_run: int
    converged: bool
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim != 1 or not np.all(np.isfinite(w)) or not np.isfinite(self.bias):
            raise ValueError("model parameters must be a finite vector and scalar")
        if self.iterations_run < 1:
            raise ValueError("iterations_run must be >= 1")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @property
    def n_features(self) -> int:
        return self.weights.shape[0]


def _objective_and_gradient(X, y, w, b, reg):
    """Mean logistic loss + (reg/2)||w||^2, with its exact gradient."""
    s = X.shape[0]
    z = X @ w + b
    # -log sigma(z) = logaddexp(0, -z); loss_i = logaddexp(0, z_i) - y_i z_i
    obj = float(np.mean(np.logaddexp(0.0, z) - y * z)) + 0.5 * reg * float(w @ w)
    r = (sigmoid(z) - y) / s
    gw = X.T @ r + reg * w
    gb = float(np.sum(r))
    return obj, gw, gb


def _objective(X, y, w, b, reg):
    z = X @ w + b
    return float(np.mean(np.logaddexp(0.0, z) - y * z)) + 0.5 * reg * float(w @ w)


def fit_logistic(
    X,
    y,
    reg: float = 1e-4,
    tol: float = 1e-4,
    max_iter: int = 5000,
    feature_names: tuple[str, ...] | None = None,
) -> LogisticModel:
    """Fit weights and bias by monotone full-batch gradient descent.

    y holds 0/1 labels with PD = 1. Convergence means the gradient infinity
    norm fell below tol; hitting max_iter leaves converged False.
    """
    X = np.asarray(X, dtype=np.float64)
    yv = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or yv.shape != (X.shape[0],):
        raise ValueError("X must be (s, n) with one label per row")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(yv))):
        raise NonFiniteInput("X and y must be finite")
    if reg <= 0 or tol <= 0:
        raise ValueError("reg and tol must be positive")

    n = X.shape[1]
    w = np.zeros(n)
    b = 0.0
    obj, gw, gb = _objective_and_gradient(X, yv, w, b, reg)
    step = 1.0
    prev_g = None
    prev_theta = None
    iterations = 0
    converged = False

    for iterations in range(1, max_iter + 1):
        gnorm_inf = max(float(np.max(np.abs(gw))) if n else 0.0, abs(gb))
        if gnorm_inf < tol:
            converged = True
            break

        g_sq = float(gw @ gw) + gb * gb
        # Barzilai-Borwein trial step from the last accepted move, then
        # Armijo backtracking to preserve monotone descent.
        if prev_g is not None:
            d_theta = np.concatenate([w - prev_theta[0], [b - prev_theta[1]]])
            d_g = np.concatenate([gw - prev_g[0], [gb - prev_g[1]]])
            denom = float(d_theta @ d_g)
            if denom > 0:
                step = float(d_theta @ d_theta) / denom
        step = min(max(step, 1e-12), 1e8)

        prev_theta = (w.copy(), b)
        prev_g = (gw.copy(), gb)

        t = step
        accepted = False
        for _ in range(_MAX_BACKTRACKS):
            w_new = w - t * gw
            b_new = b - t * gb
            if _objective(X, yv, w_new, b_new, reg) <= obj - _ARMIJO_C * t * g_sq:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            # No descent direction at float precision; treat as stationary.
            break
        w, b = w_new, b_new
        step = t
        obj, gw, gb = _objective_and_gradient(X, yv, w, b, reg)

    return LogisticModel(
        weights=w,
        bias=b,
        reg_strength=reg,
        tolerance=tol,
        iterations_run=max(iterations, 1),
        converged=converged,
        feature_names=feature_names,
    )


def _check_input(model: LogisticModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != model.n_features:
        got = x.shape[-1] if x.ndim in (1, 2) else -1
        raise DimensionMismatch(model.n_features, got)
    return x


def decision_values(model: LogisticModel, x):
    """Linear scores w.x + b (log-odds of PD)."""
    x = _check_input(model, x)
    return x @ model.weights + model.bias


def predict_proba(model: LogisticModel, x):
    """P(PD | x) = sigmoid(w.x + b); scalar for a single row."""
    z = decision_values(model, x)
    if np.ndim(z) == 0:
        return float(sigmoid(np.array([z]))[0])
    return sigmoid(z)

def predict(model: LogisticModel, x):
    """PD iff the probability is >= 1/2, i.e. the linear score is >= 0."""
    z = decision_values(model, x)
    if np.ndim(z) == 0:
        return int(z >= 0.0) * LABEL_PD
    return (z >= 0.0).astype(np.int8)
