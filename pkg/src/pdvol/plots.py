"""Figure rendering for reports: per-class histograms, scatters, ROC curves.

Everything is written as SVG with a fixed hash salt and no embedded creation
date, so repeated runs produce byte-identical files the golden tests can
diff.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .dataset import LABEL_HC, LABEL_PD, LabeledDataset
from .errors import UnknownFeature
from .metrics import RocCurve, auc

_CLASS_STYLE = {
    LABEL_PD: {"label": "PD", "color": "#c44e52"},
    LABEL_HC: {"label": "HC", "color": "#4c72b0"},
}


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _new_figure():
    plt.rcParams["svg.hashsalt"] = "pdvol"
    return plt.subplots(figsize=(6.0, 4.5))


def _column(ds: LabeledDataset, name: str) -> np.ndarray:
    try:
        return ds.column(name)
    except KeyError:
        raise UnknownFeature(name, ds.feature_names) from None


def histogram_edges(values: np.ndarray) -> np.ndarray:
    """Freedman-Diaconis bin edges with a 10-bin floor (and a 200-bin cap)."""
    v = np.asarray(values, dtype=np.float64)
    lo, hi = float(v.min()), float(v.max())
    if lo == hi:
        return np.linspace(lo - 0.5, hi + 0.5, 11)
    q75, q25 = np.percentile(v, [75, 25])
    width = 2.0 * (q75 - q25) * v.size ** (-1.0 / 3.0)
    if width <= 0:
        n_bins = 10
    else:
        n_bins = min(200, max(10, int(np.ceil((hi - lo) / width))))
    return np.linspace(lo, hi, n_bins + 1)


def plot_feature_distribution(ds: LabeledDataset, feature: str, path) -> None:
    """Overlaid per-class histograms of one feature."""
    values = _column(ds, feature)
    edges = histogram_edges(values)
    fig, ax = _new_figure()
    for cls in (LABEL_PD, LABEL_HC):
        style = _CLASS_STYLE[cls]
        ax.hist(
            values[np.asarray(ds.labels) == cls],
            bins=edges,
            alpha=0.55,
            color=style["color"],
            label=style["label"],
        )
    ax.set_xlabel(feature)
    ax.set_ylabel("subjects")
    ax.set_title(f"Distribution of {feature} by class")
    ax.legend()
    _save(fig, path)


def plot_pair_scatter(ds: LabeledDataset, feature_x: str, feature_y: str, path) -> None:
    """2-D scatter of two features, one marker per subject, colored by class."""
    xs = _column(ds, feature_x)
    ys = _column(ds, feature_y)
    fig, ax = _new_figure()
    for cls in (LABEL_HC, LABEL_PD):
        style = _CLASS_STYLE[cls]
        mask = np.asarray(ds.labels) == cls
        ax.scatter(
            xs[mask], ys[mask], s=18, alpha=0.7,
            color=style["color"], label=style["label"], linewidths=0,
        )
    ax.set_xlabel(feature_x)
    ax.set_ylabel(feature_y)
    ax.set_title(f"{feature_x} vs {feature_y}")
    ax.legend()
    _save(fig, path)


def plot_roc(curves: dict[str, RocCurve], path, title: str = "ROC") -> None:
    """Step-style ROC curve(s) with per-curve AUC in the legend."""
    fig, ax = _new_figure()
    for name, curve in curves.items():
        xs = [p[0] for p in curve.points]
        ys = [p[1] for p in curve.points]
        ax.plot(xs, ys, drawstyle="steps-post", label=f"{name} (AUC {auc(curve):.3f})")
    ax.plot([0, 1], [0, 1], linestyle="--", color="#999999", linewidth=0.8)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.02, 1.02)
    ax.set_title(title)
    ax.legend(loc="lower right", fontsize=8)
    _save(fig, path)
