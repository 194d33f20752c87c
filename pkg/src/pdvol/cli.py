"""Command-line pipeline: ingest, synth, augment, run, plot.

Configuration comes from a plain key-value file (`key = value`, '#'
comments) with command-line flags taking precedence; the default output
directory may also be set through the PDVOL_OUT_DIR environment variable.
Every command is deterministic given (inputs, config, seed), exits nonzero
on any failure, and removes partially written outputs before exiting.
"""

from __future__ import annotations

import argparse
import os
import re
import sys
from pathlib import Path

import numpy as np

from . import plots
from .dataset import (
    AUGMENT_REFLECT,
    AUGMENT_SUBTRACT_MEAN,
    LabeledDataset,
    augment_negatives,
    read_dataset_csv,
    write_dataset_csv,
)
from .errors import ConfigError, PipelineError, UnknownFeature
from .ingest import (
    ASEG_STATS_FORMAT,
    ExclusionReason,
    StatsFormat,
    assemble_cohort,
    manifest_to_csv,
    parse_demographics,
    parse_exclusions,
    parse_volume_stats,
)
from .metrics import read_roc_csv, roc_curve, write_roc_csv
from .model_selection import (
    CLASSIFIERS,
    LEAKAGE_MODES,
    PAPER_ORDER,
    CvReport,
    default_grid,
    nested_cv,
)
from .synth import CohortSpec, generate_cohort

OUT_DIR_ENV = "PDVOL_OUT_DIR"

AUGMENT_NOTE = (
    "augmentation doubles the negative class exactly: 340 PD / 167 HC in "
    "gives 340 PD / 334 HC out; the 341 PD / 332 HC balance sometimes "
    "quoted for this protocol does not follow from the stated rule and is "
    "not reproduced here"
)

_PARAM_COLUMNS = ("reg", "tol", "n_estimators", "max_depth", "kernel", "C", "gamma")


def parse_config_file(path) -> dict[str, str]:
    """`key = value` lines; '#' starts a comment; later keys win."""
    out: dict[str, str] = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{line_no}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        out[key.strip()] = value.strip()
    return out


class _Settings:
    """Flag values override config-file values override defaults."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config = parse_config_file(args.config) if args.config else {}

    def get(self, key: str, default=None, cast=None):
        value = getattr(self.args, key, None)
        if value is None:
            value = self.config.get(key)
        if value is None:
            return default
        if cast is not None and isinstance(value, str):
            try:
                return cast(value)
            except ValueError:
                raise ConfigError(f"bad value for {key}: {value!r}") from None
        return value

    def output_dir(self) -> Path:
        out = self.get("output_dir")
        if out is None:
            out = os.environ.get(OUT_DIR_ENV, ".")
        path = Path(out)
        path.mkdir(parents=True, exist_ok=True)
        return path


class _Outputs:
    """Track written files so a failing command leaves nothing behind."""

    def __init__(self, directory: Path):
        self.directory = directory
        self.written: list[Path] = []

    def path(self, name: str) -> Path:
        p = self.directory / name
        self.written.append(p)
        return p

    def discard_all(self) -> None:
        for p in self.written:
            p.unlink(missing_ok=True)


def _positive_int(name: str, value: int, minimum: int) -> int:
    if value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}")
    return value


def _stats_format(settings: _Settings) -> StatsFormat:
    name_field = settings.get("stats_name_field", ASEG_STATS_FORMAT.name_field, int)
    volume_field = settings.get("stats_volume_field", ASEG_STATS_FORMAT.volume_field, int)
    delim = settings.get("stats_delimiter")
    if delim in (None, "", "whitespace"):
        delim = None
    return StatsFormat(name_field=name_field, volume_field=volume_field, delimiter=delim)


def _load_stats_dir(settings: _Settings):
    stats_dir = Path(settings.get("stats_dir"))
    if not stats_dir.is_dir():
        raise ConfigError(f"stats directory not found: {stats_dir}")
    fmt = _stats_format(settings)
    tables = []
    hard_failures: dict[str, ExclusionReason] = {}
    for path in sorted(p for p in stats_dir.iterdir() if p.is_file()):
        try:
            tables.append(parse_volume_stats(path.read_text(encoding="utf-8"), path.stem, fmt))
        except PipelineError as exc:
            print(f"warning: {path}: {exc}", file=sys.stderr)
            hard_failures[path.stem] = ExclusionReason.HARD_FAILURE
    demo_path = settings.get("demographics")
    if demo_path is None:
        raise ConfigError("ingest needs a demographics CSV (--demographics)")
    demo = parse_demographics(Path(demo_path).read_text(encoding="utf-8"))
    pre_excluded = dict(hard_failures)
    exc_path = settings.get("exclusions")
    if exc_path:
        for sid in parse_exclusions(Path(exc_path).read_text(encoding="utf-8")):
            pre_excluded.setdefault(sid, ExclusionReason.SOFT_FAILURE)
    return tables, demo, pre_excluded


def cmd_ingest(args: argparse.Namespace) -> int:
    settings = _Settings(args)
    include = settings.get("include_age_sex", "false")
    if include not in ("true", "false"):
        raise ConfigError("ingest include_age_sex must be true or false")
    tables, demo, pre_excluded = _load_stats_dir(settings)
    ds, manifest = assemble_cohort(
        tables, demo, include_age_sex=include == "true", pre_excluded=pre_excluded
    )
    outputs = _Outputs(settings.output_dir())
    try:
        write_dataset_csv(ds, outputs.path(settings.get("dataset_name", "dataset.csv")))
        outputs.path("manifest.csv").write_text(manifest_to_csv(manifest), encoding="utf-8")
    except BaseException:
        outputs.discard_all()
        raise
    print(f"admitted {len(manifest.admitted)}, excluded {len(manifest.excluded)}")
    return 0


def _parse_informative(text: str) -> tuple[tuple[int, float], ...]:
    """Format: space-separated index:effect pairs, e.g. '0:1.0 3:0.5'."""
    pairs = []
    for tok in text.split():
        idx, _, eff = tok.partition(":")
        pairs.append((int(idx), float(eff)))
    return tuple(pairs)


def cohort_spec_from_settings(settings: _Settings, default_seed: int = 0) -> CohortSpec:
    kwargs = {}
    weights = settings.get("age_weights")
    if weights is not None:
        kwargs["age_weights"] = tuple(float(w) for w in str(weights).split())
    ratio = settings.get("sex_ratio", None, float)
    if ratio is not None:
        kwargs["sex_ratio"] = ratio
    return CohortSpec(
        n_pd=settings.get("n_pd", 411, int),
        n_hc=settings.get("n_hc", 187, int),
        n_features=settings.get("n_features", 10, int),
        informative=_parse_informative(settings.get("informative", "")),
        seed=settings.get("synth_seed", default_seed, int),
        **kwargs,
    )


def _load_spec_file(args: argparse.Namespace) -> None:
    # The synth spec file shares the config syntax; an explicit --spec is
    # merged under the same lookup rules (flags still win).
    if getattr(args, "spec", None):
        if args.config:
            raise ConfigError("give either --spec or --config, not both")
        args.config = args.spec


def cmd_synth(args: argparse.Namespace) -> int:
    _load_spec_file(args)
    settings = _Settings(args)
    spec = cohort_spec_from_settings(settings, default_seed=settings.get("seed", 0, int))
    ds = generate_cohort(spec)
    outputs = _Outputs(settings.output_dir())
    try:
        write_dataset_csv(ds, outputs.path(settings.get("dataset_name", "synth.csv")))
    except BaseException:
        outputs.discard_all()
        raise
    print(f"wrote {ds.n_rows} rows x {ds.n_features} features")
    return 0


def cmd_augment(args: argparse.Namespace) -> int:
    settings = _Settings(args)
    src = settings.get("dataset_csv")
    if src is None:
        raise ConfigError("augment needs --dataset-csv")
    mode = settings.get("augment_mode", AUGMENT_SUBTRACT_MEAN)
    if mode not in (AUGMENT_SUBTRACT_MEAN, AUGMENT_REFLECT):
        raise ConfigError(f"augment_mode must be {AUGMENT_SUBTRACT_MEAN} or {AUGMENT_REFLECT}")
    ds = augment_negatives(read_dataset_csv(src), mode)
    outputs = _Outputs(settings.output_dir())
    try:
        write_dataset_csv(ds, outputs.path(settings.get("dataset_name", "augmented.csv")))
    except BaseException:
        outputs.discard_all()
        raise
    n_hc, n_pd = ds.class_counts()
    print(f"augmented to {n_pd} PD / {n_hc} HC")
    return 0


def _run_input_dataset(settings: _Settings, seed: int) -> LabeledDataset:
    sources = [k for k in ("stats_dir", "dataset_csv", "synth_spec") if settings.get(k)]
    if len(sources) != 1:
        raise ConfigError(
            "exactly one input source required (stats_dir | dataset_csv | synth_spec), "
            f"got {sources or 'none'}"
        )
    source = sources[0]
    if source == "dataset_csv":
        return read_dataset_csv(settings.get("dataset_csv"))
    if source == "synth_spec":
        spec_settings = _Settings(
            argparse.Namespace(config=settings.get("synth_spec"))
        )
        return generate_cohort(cohort_spec_from_settings(spec_settings, default_seed=seed))
    tables, demo, pre_excluded = _load_stats_dir(settings)
    ds, _ = assemble_cohort(tables, demo, include_age_sex=True, pre_excluded=pre_excluded)
    return ds


def _age_sex_variant(ds: LabeledDataset, with_age_sex: bool) -> LabeledDataset:
    if with_age_sex:
        missing = [n for n in ("age", "sex") if n not in ds.feature_names]
        if missing:
            raise UnknownFeature(missing[0], ds.feature_names)
        return ds
    return ds.drop_features(("age", "sex"))


def _safe_name(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", text)


def cmd_run(args: argparse.Namespace) -> int:
    settings = _Settings(args)
    seed = settings.get("seed", 0, int)
    outer_k = _positive_int("outer_k", settings.get("outer_k", 10, int), 2)
    inner_k = _positive_int("inner_k", settings.get("inner_k", 5, int), 2)
    leakage_mode = settings.get("leakage_mode", PAPER_ORDER)
    if leakage_mode not in LEAKAGE_MODES:
        raise ConfigError(f"leakage_mode must be one of {LEAKAGE_MODES}")
    jobs = settings.get("jobs", os.cpu_count() or 1, int)
    classifiers = tuple(
        c.strip().upper() for c in str(settings.get("classifiers", "LR,RF,SVM")).split(",")
    )
    for c in classifiers:
        if c not in CLASSIFIERS:
            raise ConfigError(f"unknown classifier {c!r}")
    include = settings.get("include_age_sex", "false")
    if include not in ("true", "false", "both"):
        raise ConfigError("include_age_sex must be true, false, or both")
    age_sex_settings = {"true": (True,), "false": (False,), "both": (False, True)}[include]

    ds = _run_input_dataset(settings, seed)
    outputs = _Outputs(settings.output_dir())
    try:
        reports: list[tuple[bool, CvReport]] = []
        for with_age_sex in age_sex_settings:
            variant = _age_sex_variant(ds, with_age_sex)
            for classifier in classifiers:
                report = nested_cv(
                    variant,
                    classifier,
                    grid=default_grid(classifier),
                    outer_k=outer_k,
                    inner_k=inner_k,
                    seed=seed,
                    leakage_mode=leakage_mode,
                    n_jobs=jobs,
                )
                reports.append((with_age_sex, report))
                print(
                    f"{classifier} age_sex={str(with_age_sex).lower()} "
                    f"test_acc={report.mean_test_accuracy:.4f} auc={report.mean_auc:.4f}"
                )
        _write_run_outputs(outputs, reports, seed, leakage_mode, outer_k, inner_k)
    except BaseException:
        outputs.discard_all()
        raise
    return 0


def _header_comments(seed, leakage_mode, outer_k, inner_k) -> list[str]:
    return [
        f"seed = {seed}",
        f"leakage_mode = {leakage_mode}",
        f"outer_k = {outer_k}",
        f"inner_k = {inner_k}",
        f"note: {AUGMENT_NOTE}",
    ]


def _write_run_outputs(outputs, reports, seed, leakage_mode, outer_k, inner_k) -> None:
    from .model_selection import _format_param  # shared value formatting

    comments = _header_comments(seed, leakage_mode, outer_k, inner_k)

    agg_lines = [f"# {c}" for c in comments]
    agg_lines.append("classifier,with_age_sex,mean_train_acc,mean_test_acc,mean_auc")
    for with_age_sex, report in reports:
        agg_lines.append(
            ",".join(
                [
                    report.classifier,
                    str(with_age_sex).lower(),
                    format(report.mean_train_accuracy, ".17g"),
                    format(report.mean_test_accuracy, ".17g"),
                    format(report.mean_auc, ".17g"),
                ]
            )
        )
    outputs.path("report.csv").write_text("\n".join(agg_lines) + "\n", encoding="utf-8")

    fold_lines = [f"# {c}" for c in comments]
    fold_lines.append(
        "classifier,with_age_sex,fold,"
        + ",".join(_PARAM_COLUMNS)
        + ",train_acc,test_acc,auc,n_train_pd,n_train_hc,n_test_pd,n_test_hc"
    )
    for with_age_sex, report in reports:
        for r in report.per_outer_fold:
            row = [report.classifier, str(with_age_sex).lower(), str(r.fold)]
            row += [
                _format_param(r.chosen_params[p]) if p in r.chosen_params else ""
                for p in _PARAM_COLUMNS
            ]
            row += [
                format(r.train_accuracy, ".17g"),
                format(r.test_accuracy, ".17g"),
                format(r.auc, ".17g"),
                str(r.n_train_pd),
                str(r.n_train_hc),
                str(r.n_test_pd),
                str(r.n_test_hc),
            ]
            fold_lines.append(",".join(row))
    outputs.path("per_fold.csv").write_text("\n".join(fold_lines) + "\n", encoding="utf-8")

    for with_age_sex, report in reports:
        tag = f"{report.classifier}_{'with' if with_age_sex else 'without'}_age_sex"
        curves = {}
        for r in report.per_outer_fold:
            curve = roc_curve(np.array(r.test_scores), np.array(r.test_labels))
            curves[f"fold {r.fold}"] = curve
            write_roc_csv(curve, outputs.path(f"roc_{tag}_fold{r.fold:02d}.csv"))
        plots.plot_roc(curves, outputs.path(f"roc_{tag}.svg"), title=f"ROC {tag}")


def cmd_plot(args: argparse.Namespace) -> int:
    settings = _Settings(args)
    outputs = _Outputs(settings.output_dir())
    kind = args.kind
    try:
        if kind == "roc":
            src = settings.get("roc_csv")
            if src is None:
                raise ConfigError("plot --kind roc needs --roc-csv")
            curve = read_roc_csv(src)
            out = args.out or "roc.svg"
            plots.plot_roc({"ROC": curve}, outputs.path(out))
        else:
            src = settings.get("dataset_csv")
            if src is None:
                raise ConfigError(f"plot --kind {kind} needs --dataset-csv")
            ds = read_dataset_csv(src)
            if kind == "feature-dist":
                feature = settings.get("feature")
                if feature is None:
                    raise ConfigError("plot --kind feature-dist needs --feature")
                out = args.out or f"dist_{_safe_name(feature)}.svg"
                plots.plot_feature_distribution(ds, feature, outputs.path(out))
            else:
                fx, fy = settings.get("x_feature"), settings.get("y_feature")
                if fx is None or fy is None:
                    raise ConfigError("plot --kind pair-scatter needs --x-feature and --y-feature")
                out = args.out or f"scatter_{_safe_name(fx)}_vs_{_safe_name(fy)}.svg"
                plots.plot_pair_scatter(ds, fx, fy, outputs.path(out))
    except BaseException:
        outputs.discard_all()
        raise
    for p in outputs.written:
        print(f"wrote {p}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdvol",
        description="Volumetric-feature PD/HC classification pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key-value config file (flags win)")
        p.add_argument("--output-dir", dest="output_dir", help=f"defaults to ${OUT_DIR_ENV} or '.'")
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("ingest", help="parse stats + demographics into a dataset CSV")
    common(p)
    p.add_argument("--stats-dir", dest="stats_dir")
    p.add_argument("--demographics", dest="demographics")
    p.add_argument("--exclusions", dest="exclusions")
    p.add_argument("--include-age-sex", dest="include_age_sex", choices=("true", "false"))
    p.add_argument("--stats-name-field", dest="stats_name_field", type=int)
    p.add_argument("--stats-volume-field", dest="stats_volume_field", type=int)
    p.add_argument("--stats-delimiter", dest="stats_delimiter")
    p.add_argument("--dataset-name", dest="dataset_name")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generate a synthetic cohort CSV")
    common(p)
    p.add_argument("--spec", help="cohort spec file (same key-value syntax)")
    p.add_argument("--n-pd", dest="n_pd", type=int)
    p.add_argument("--n-hc", dest="n_hc", type=int)
    p.add_argument("--n-features", dest="n_features", type=int)
    p.add_argument("--informative", dest="informative", help="e.g. '0:1.0 3:0.5'")
    p.add_argument("--sex-ratio", dest="sex_ratio", type=float)
    p.add_argument("--synth-seed", dest="synth_seed", type=int)
    p.add_argument("--dataset-name", dest="dataset_name")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("augment", help="apply the negative-class augmentation to a dataset CSV")
    common(p)
    p.add_argument("--dataset-csv", dest="dataset_csv")
    p.add_argument("--mode", dest="augment_mode", choices=(AUGMENT_SUBTRACT_MEAN, AUGMENT_REFLECT))
    p.add_argument("--dataset-name", dest="dataset_name")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("run", help="nested cross-validated grid search; CSV report + figures")
    common(p)
    p.add_argument("--stats-dir", dest="stats_dir")
    p.add_argument("--demographics", dest="demographics")
    p.add_argument("--exclusions", dest="exclusions")
    p.add_argument("--dataset-csv", dest="dataset_csv")
    p.add_argument("--synth-spec", dest="synth_spec")
    p.add_argument("--classifiers", dest="classifiers", help="comma list from LR,RF,SVM")
    p.add_argument("--include-age-sex", dest="include_age_sex", choices=("true", "false", "both"))
    p.add_argument("--outer-k", dest="outer_k", type=int)
    p.add_argument("--inner-k", dest="inner_k", type=int)
    p.add_argument("--leakage-mode", dest="leakage_mode", choices=LEAKAGE_MODES)
    p.add_argument("--jobs", dest="jobs", type=int, help="worker pool size (default: cores)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("plot", help="render a dataset or ROC figure to SVG")
    common(p)
    p.add_argument("--kind", required=True, choices=("feature-dist", "pair-scatter", "roc"))
    p.add_argument("--dataset-csv", dest="dataset_csv")
    p.add_argument("--roc-csv", dest="roc_csv")
    p.add_argument("--feature", dest="feature")
    p.add_argument("--x-feature", dest="x_feature")
    p.add_argument("--y-feature", dest="y_feature")
    p.add_argument("--out", help="output SVG filename")
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (PipelineError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
