"""Text serialization for trained models.

One flat key-value header per model, followed by model-specific lines. All
real values are written with 17 significant digits so loading reproduces the
model bit-exactly.
"""

from __future__ import annotations

from pathlib import Path
from typing import Union

import numpy as np

from .dataset import format_value
from .forest import DecisionTree, ForestModel, TreeNode
from .linear_models import LogisticModel
from .svm import KernelSpec, SvmModel

TrainedModel = Union[LogisticModel, ForestModel, SvmModel]


def _names(feature_names, n: int) -> tuple[str, ...]:
    if feature_names is not None:
        return tuple(feature_names)
    return tuple(f"f{i}" for i in range(n))


def _logistic_lines(model: LogisticModel) -> list[str]:
    lines = [
        "model = logistic",
        f"reg_strength = {format_value(model.reg_strength)}",
        f"tolerance = {format_value(model.tolerance)}",
        f"iterations_run = {model.iterations_run}",
        f"converged = {str(model.converged).lower()}",
        f"bias = {format_value(model.bias)}",
        f"n_features = {model.n_features}",
    ]
    for name, w in zip(_names(model.feature_names, model.n_features), model.weights):
        lines.append(f"weight {name} {format_value(w)}")
    return lines


def _forest_lines(model: ForestModel) -> list[str]:
    lines = [
        "model = forest",
        f"n_estimators = {model.n_estimators}",
        f"max_depth = {model.max_depth}",
        f"seed = {model.seed}",
        f"feature_subsample = {model.feature_subsample}",
        f"n_features = {model.n_features}",
        "features = " + " ".join(_names(model.feature_names, model.n_features)),
    ]
    for t, tree in enumerate(model.trees):
        lines.append(f"tree {t} nodes {len(tree.nodes)}")
        for k, node in enumerate(tree.nodes):
            if node.is_leaf:
                lines.append(f"node {k} leaf {node.n_hc} {node.n_pd}")
            else:
                lines.append(
                    f"node {k} split {node.feature} {format_value(node.threshold)} "
                    f"{node.left} {node.right} {node.n_hc} {node.n_pd}"
                )
    return lines


def _svm_lines(model: SvmModel) -> list[str]:
    k = model.kernel
    lines = [
        "model = svm",
        f"kernel = {k.kind}",
    ]
    if k.kind in ("rbf", "poly"):
        lines.append(f"gamma = {format_value(k.gamma)}")
    if k.kind == "poly":
        lines.append(f"degree = {k.degree}")
        lines.append(f"coef0 = {format_value(k.coef0)}")
    lines += [
        f"C = {format_value(model.C)}",
        f"bias = {format_value(model.bias)}",
        f"converged = {str(model.converged).lower()}",
        f"n_support = {model.support_vectors.shape[0]}",
        f"n_features = {model.n_features}",
        "features = " + " ".join(_names(model.feature_names, model.n_features)),
    ]
    for a, row in zip(model.alphas, model.support_vectors):
        vals = " ".join(format_value(v) for v in row)
        lines.append(f"sv {format_value(a)} {vals}")
    return lines


def model_to_text(model: TrainedModel) -> str:
    if isinstance(model, LogisticModel):
        lines = _logistic_lines(model)
    elif isinstance(model, ForestModel):
        lines = _forest_lines(model)
    elif isinstance(model, SvmModel):
        lines = _svm_lines(model)
    else:
        raise TypeError(f"not a trained model: {type(model).__name__}")
    return "\n".join(lines) + "\n"


def save_model(model: TrainedModel, path) -> None:
    Path(path).write_text(model_to_text(model), encoding="utf-8")


class _Reader:
    def __init__(self, text: str):
        self.lines = [ln for ln in text.splitlines() if ln.strip()]
        self.pos = 0

    def peek(self) -> str:
        return self.lines[self.pos]

    def next(self) -> str:
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def kv(self, key: str) -> str:
        line = self.next()
        prefix = f"{key} = "
        if not line.startswith(prefix):
            raise ValueError(f"expected {key!r} line, got {line!r}")
        return line[len(prefix):]


def _load_logistic(r: _Reader) -> LogisticModel:
    reg = float(r.kv("reg_strength"))
    tol = float(r.kv("tolerance"))
    iters = int(r.kv("iterations_run"))
    converged = r.kv("converged") == "true"
    bias = float(r.kv("bias"))
    n = int(r.kv("n_features"))
    names = []
    weights = []
    for _ in range(n):
        _, name, w = r.next().split(" ")
        names.append(name)
        weights.append(float(w))
    return LogisticModel(
        weights=np.array(weights),
        bias=bias,
        reg_strength=reg,
        tolerance=tol,
        iterations_run=iters,
        converged=converged,
        feature_names=tuple(names),
    )


def _load_forest(r: _Reader) -> ForestModel:
    n_estimators = int(r.kv("n_estimators"))
    max_depth = int(r.kv("max_depth"))
    seed = int(r.kv("seed"))
    fs = int(r.kv("feature_subsample"))
    n = int(r.kv("n_features"))
    names = tuple(r.kv("features").split(" "))
    trees = []
    for _ in range(n_estimators):
        head = r.next().split(" ")
        if head[0] != "tree":
            raise ValueError(f"expected tree header, got {head!r}")
        n_nodes = int(head[3])
        nodes = []
        for _ in range(n_nodes):
            parts = r.next().split(" ")
            if parts[2] == "leaf":
                nodes.append(TreeNode(-1, 0.0, -1, -1, int(parts[3]), int(parts[4])))
            else:
                nodes.append(
                    TreeNode(
                        int(parts[3]),
                        float(parts[4]),
                        int(parts[5]),
                        int(parts[6]),
                        int(parts[7]),
                        int(parts[8]),
                    )
                )
        trees.append(DecisionTree(nodes=tuple(nodes), max_depth=max_depth, n_features=n))
    return ForestModel(
        trees=tuple(trees),
        n_estimators=n_estimators,
        max_depth=max_depth,
        seed=seed,
        feature_subsample=fs,
        n_features=n,
        feature_names=names,
    )


def _load_svm(r: _Reader, kind: str) -> SvmModel:
    gamma = None
    degree = 3
    coef0 = 1.0
    if kind in ("rbf", "poly"):
        gamma = float(r.kv("gamma"))
    if kind == "poly":
        degree = int(r.kv("degree"))
        coef0 = float(r.kv("coef0"))
    C = float(r.kv("C"))
    bias = float(r.kv("bias"))
    converged = r.kv("converged") == "true"
    n_sv = int(r.kv("n_support"))
    n = int(r.kv("n_features"))
    names = tuple(r.kv("features").split(" "))
    alphas = np.empty(n_sv)
    sv = np.empty((n_sv, n))
    for k in range(n_sv):
        parts = r.next().split(" ")
        if parts[0] != "sv":
            raise ValueError(f"expected sv line, got {parts!r}")
        alphas[k] = float(parts[1])
        sv[k] = [float(v) for v in parts[2:]]
    return SvmModel(
        support_vectors=sv,
        alphas=alphas,
        bias=bias,
        kernel=KernelSpec(kind=kind, gamma=gamma, degree=degree, coef0=coef0),
        C=C,
        converged=converged,
        feature_names=names,
    )


def model_from_text(text: str) -> TrainedModel:
    r = _Reader(text)
    kind = r.kv("model")
    if kind == "logistic":
        return _load_logistic(r)
    if kind == "forest":
        return _load_forest(r)
    if kind == "svm":
        return _load_svm(r, r.kv("kernel"))
    raise ValueError(f"unknown model kind {kind!r}")


def load_model(path) -> TrainedModel:
    return model_from_text(Path(path).read_text(encoding="utf-8"))
