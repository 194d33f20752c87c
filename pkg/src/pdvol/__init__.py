"""Volumetric-feature PD/HC classification pipeline.

Parses per-region volume tables and demographics into labeled feature
matrices, applies the negative-class augmentation, and evaluates
from-scratch logistic regression, random forest, and kernel SVM classifiers
with nested cross-validated grid search, reporting accuracy and ROC AUC.
"""

from .dataset import (
    LABEL_HC,
    LABEL_PD,
    FoldAssignment,
    LabeledDataset,
    Standardizer,
    apply_standardizer,
    augment_negatives,
    fit_standardizer,
    read_dataset_csv,
    stratified_kfold,
    write_dataset_csv,
)
from .errors import PipelineError
from .ingest import (
    CohortManifest,
    DemographicRecord,
    RegionVolumeTable,
    assemble_cohort,
    parse_demographics,
    parse_volume_stats,
)
from .metrics import RocCurve, accuracy, auc, auc_score, roc_curve
from .model_selection import (
    CvReport,
    HyperGrid,
    default_grid,
    grid_search,
    nested_cv,
)
from .synth import CohortSpec, analytic_bayes_accuracy, generate_cohort

__version__ = "0.1.0"

__all__ = [
    "LABEL_HC",
    "LABEL_PD",
    "FoldAssignment",
    "LabeledDataset",
    "Standardizer",
    "PipelineError",
    "CohortManifest",
    "DemographicRecord",
    "RegionVolumeTable",
    "RocCurve",
    "CvReport",
    "HyperGrid",
    "CohortSpec",
    "accuracy",
    "analytic_bayes_accuracy",
    "apply_standardizer",
    "assemble_cohort",
    "auc",
    "auc_score",
    "augment_negatives",
    "default_grid",
    "fit_standardizer",
    "generate_cohort",
    "grid_search",
    "nested_cv",
    "parse_demographics",
    "parse_volume_stats",
    "read_dataset_csv",
    "roc_curve",
    "stratified_kfold",
    "write_dataset_csv",
    "__version__",
]
