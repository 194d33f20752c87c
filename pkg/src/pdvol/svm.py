"""Soft-margin kernel SVM trained by sequential minimal optimization.

The dual problem (minimize 0.5*a'Qa - sum(a) with 0 <= a <= C and y'a = 0,
Q = yy' * K) is solved by repeatedly updating the maximal-KKT-violating pair:
i maximizes y_i - f_raw(x_i) over the set allowed to move up, j minimizes it
over the set allowed to move down, and the two-variable subproblem is solved
in closed form with box clipping. Selection by first index on ties makes the
solver fully deterministic. The bias is the midpoint of the final violation
interval, so every point satisfies its KKT condition within the stopping
tolerance on convergence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .dataset import LABEL_PD
from .errors import DimensionMismatch, NonFiniteInput, SingleClass

KERNEL_KINDS = ("linear", "rbf", "poly")


@dataclass(frozen=True)
class KernelSpec:
    kind: str
    gamma: float | None = None
    degree: int = 3
    coef0: float = 1.0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"kernel kind must be one of {KERNEL_KINDS}")
        if self.kind in ("rbf", "poly"):
            if self.gamma is None or self.gamma <= 0:
                raise ValueError(f"{self.kind} kernel requires gamma > 0")
        if self.kind == "poly" and self.degree < 1:
            raise ValueError("poly degree must be >= 1")


LINEAR_KERNEL = KernelSpec(kind="linear")


def kernel_matrix(spec: KernelSpec, A, B) -> np.ndarray:
    """Gram matrix K[i, j] = k(A[i], B[j])."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatch(A.shape[1], B.shape[1])
    dot = A @ B.T
    if spec.kind == "linear":
        return dot
    if spec.kind == "rbf":
        sq = (
            (A * A).sum(axis=1)[:, None]
            + (B * B).sum(axis=1)[None, :]
            - 2.0 * dot
        )
        np.maximum(sq, 0.0, out=sq)
        return np.exp(-spec.gamma * sq)
    return (spec.gamma * dot + spec.coef0) ** spec.degree


def kernel_eval(spec: KernelSpec, x, z) -> float:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    z = np.asarray(z, dtype=np.float64).reshape(-1)
    if x.shape[0] != z.shape[0]:
        raise DimensionMismatch(x.shape[0], z.shape[0])
    return float(kernel_matrix(spec, x[None, :], z[None, :])[0, 0])


@dataclass(frozen=True, eq=False)
class SmoResult:
    """Full dual solution over the training set (support and zero alphas)."""

    alpha: np.ndarray
    bias: float
    converged: bool
    iterations: int
    objective_trace: tuple[float, ...] | None


def dual_objective(K: np.ndarray, y_pm: np.ndarray, alpha: np.ndarray) -> float:
    """Maximization-form dual value: sum(a) - 0.5 * a'(yy'*K)a."""
    ay = alpha * y_pm
    return float(alpha.sum() - 0.5 * (ay @ K @ ay))


# _smo_steps status codes.
_BUDGET = 0
_CONVERGED = 1
_STALLED = 2


@numba.njit(cache=True)
def _smo_steps(Q, y, alpha, g, C, tol, max_steps):  # pragma: no cover - compiled
    """Advance the solver by at most max_steps pair updates, in place.

    Returns (steps_taken, status) so the caller can checkpoint between
    chunks; selection depends only on (alpha, g), so chunking never changes
    the update sequence.
    """
    m = y.shape[0]
    steps = 0
    stalled = 0
    while steps < max_steps:
        # Maximal-violating pair: first index wins ties.
        i = -1
        j = -1
        crit_i = -np.inf
        crit_j = np.inf
        for k in range(m):
            ck = -y[k] * g[k]  # equals y_k - f_raw(x_k)
            if ck > crit_i and (
                (y[k] > 0 and alpha[k] < C) or (y[k] < 0 and alpha[k] > 0)
            ):
                crit_i = ck
                i = k
            if ck < crit_j and (
                (y[k] < 0 and alpha[k] < C) or (y[k] > 0 and alpha[k] > 0)
            ):
                crit_j = ck
                j = k
        if i < 0 or j < 0 or crit_i - crit_j <= tol:
            return steps, _CONVERGED

        steps += 1
        old_i = alpha[i]
        old_j = alpha[j]
        if y[i] != y[j]:
            quad = Q[i, i] + Q[j, j] + 2.0 * Q[i, j]
            if quad < 1e-12:
                quad = 1e-12
            delta = (-g[i] - g[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            quad = Q[i, i] + Q[j, j] - 2.0 * Q[i, j]
            if quad < 1e-12:
                quad = 1e-12
            delta = (g[i] - g[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = total
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = total

        d_i = alpha[i] - old_i
        d_j = alpha[j] - old_j
        if d_i == 0.0 and d_j == 0.0:
            stalled += 1
            if stalled > 100:
                return steps, _STALLED
            continue
        stalled = 0
        for k in range(m):
            g[k] += Q[i, k] * d_i + Q[j, k] * d_j
    return steps, _BUDGET


def smo_solve(
    K: np.ndarray,
    y_pm: np.ndarray,
    C: float,
    tol: float,
    max_iter: int,
    trace_every: int | None = None,
) -> SmoResult:
    """Run SMO on a precomputed kernel matrix; y_pm holds +/-1 labels."""
    m = y_pm.shape[0]
    Q = np.ascontiguousarray((y_pm[:, None] * y_pm[None, :]) * K)
    alpha = np.zeros(m)
    g = np.full(m, -1.0)  # gradient of 0.5*a'Qa - sum(a) at a = 0
    trace: list[float] | None = [] if trace_every else None

    converged = False
    iterations = 0
    chunk = trace_every if trace_every else max_iter
    while iterations < max_iter:
        steps, status = _smo_steps(
            Q, y_pm, alpha, g, float(C), float(tol), min(chunk, max_iter - iterations)
        )
        iterations += steps
        if trace is not None and steps > 0:
            trace.append(dual_objective(K, y_pm, alpha))
        if status == _CONVERGED:
            converged = True
            break
        if status == _STALLED:
            break

    pos = y_pm > 0
    crit = -y_pm * g
    up = (pos & (alpha < C)) | (~pos & (alpha > 0))
    low = (~pos & (alpha < C)) | (pos & (alpha > 0))
    hi = float(np.max(np.where(up, crit, -np.inf)))
    lo = float(np.min(np.where(low, crit, np.inf)))
    bias = (hi + lo) / 2.0
    if trace is not None:
        trace.append(dual_objective(K, y_pm, alpha))
    return SmoResult(
        alpha=alpha,
        bias=bias,
        converged=converged,
        iterations=iterations,
        objective_trace=tuple(trace) if trace is not None else None,
    )


@dataclass(frozen=True, eq=False)
class SvmModel:
    support_vectors: np.ndarray
    alphas: np.ndarray  # dual coefficient times label sign, one per support vector
    bias: float
    kernel: KernelSpec
    C: float
    converged: bool = True
    iterations: int = 0
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        sv = np.array(self.support_vectors, dtype=np.float64)
        al = np.array(self.alphas, dtype=np.float64)
        if sv.ndim != 2 or al.shape != (sv.shape[0],):
            raise ValueError("support_vectors must be (n_sv, n) with one alpha each")
        if sv.shape[0] < 1:
            raise ValueError("model needs at least one support vector")
        if np.any(np.abs(al) > self.C * (1 + 1e-9)):
            raise ValueError("|alpha| must not exceed C")
        sv.flags.writeable = False
        al.flags.writeable = False
        object.__setattr__(self, "support_vectors", sv)
        object.__setattr__(self, "alphas", al)

    @property
    def n_features(self) -> int:
        return self.support_vectors.shape[1]


def fit_svm(
    X,
    y,
    C: float,
    kernel: KernelSpec = LINEAR_KERNEL,
    tol: float = 1e-3,
    max_passes: int = 200,
    feature_names: tuple[str, ...] | None = None,
) -> SvmModel:
    """Fit the soft-margin dual and keep the support set.

    y holds 0/1 labels with PD = 1; max_passes bounds the iteration budget at
    max_passes * n_rows pair updates.
    """
    X = np.asarray(X, dtype=np.float64)
    yv = np.asarray(y)
    if X.ndim != 2 or yv.shape != (X.shape[0],):
        raise ValueError("X must be (s, n) with one label per row")
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput("X must be finite")
    if C <= 0:
        raise ValueError("C must be positive")
    y_pm = np.where(yv == LABEL_PD, 1.0, -1.0)
    if np.all(y_pm > 0) or np.all(y_pm < 0):
        raise SingleClass("SVM training needs both classes")

    K = kernel_matrix(kernel, X, X)
    result = smo_solve(K, y_pm, C, tol, max_iter=max_passes * X.shape[0])
    sv = result.alpha > 1e-12
    if not np.any(sv):
        # Unreachable for both-classes input: all-zero alpha violates KKT.
        raise RuntimeError("SMO produced no support vectors")
    return SvmModel(
        support_vectors=X[sv],
        alphas=(result.alpha * y_pm)[sv],
        bias=result.bias,
        kernel=kernel,
        C=C,
        converged=result.converged,
        iterations=result.iterations,
        feature_names=feature_names,
    )


def decision_function(model: SvmModel, x):
    """f(x) = sum_i alpha_i y_i k(sv_i, x) + b; scalar for a single row."""
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X.reshape(1, -1)
    if X.shape[1] != model.n_features:
        raise DimensionMismatch(model.n_features, X.shape[1])
    f = kernel_matrix(model.kernel, X, model.support_vectors) @ model.alphas + model.bias
    return float(f[0]) if single else f


def predict(model: SvmModel, x):
    """PD iff the decision value is >= 0."""
    f = decision_function(model, x)
    if np.ndim(f) == 0:
        return int(f >= 0.0) * LABEL_PD
    return (f >= 0.0).astype(np.int8)
