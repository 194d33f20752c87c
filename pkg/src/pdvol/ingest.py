"""Parsers for volumetric stats output and demographics, plus cohort assembly.

The stats parser reads the whitespace-delimited per-region volume tables the
segmentation toolchain emits ('#' comment lines, one structure per data row);
a format descriptor makes the column positions configurable, defaulting to
the aseg-stats layout. Demographics arrive as a plain CSV. Assembly joins the
two on subject id into a LabeledDataset plus a manifest that accounts for
every input subject exactly once.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .dataset import LABEL_HC, LABEL_PD, LabeledDataset
from .errors import (
    BadAge,
    BadEnum,
    DuplicateRegion,
    DuplicateSubject,
    EmptyCohort,
    EmptyInput,
    MalformedRow,
    MissingColumn,
)

SEX_ENCODING = {"F": 0.0, "M": 1.0}


class ExclusionReason(enum.Enum):
    HARD_FAILURE = "HardFailure"
    SOFT_FAILURE = "SoftFailure"
    MISSING_LABEL = "MissingLabel"
    MISSING_VOLUMES = "MissingVolumes"


@dataclass(frozen=True)
class StatsFormat:
    """Column positions (1-indexed) of the structure name and volume fields."""

    name_field: int
    volume_field: int
    delimiter: str | None = None  # None = any whitespace run

    def __post_init__(self):
        if self.name_field < 1 or self.volume_field < 1:
            raise ValueError("field positions are 1-indexed")
        if self.name_field == self.volume_field:
            raise ValueError("name and volume fields must differ")


# aseg-stats rows look like:
#   10  4   8504  7890.1  Left-Lateral-Ventricle  25.1 ...
# with the volume in field 4 and the structure name in field 5.
ASEG_STATS_FORMAT = StatsFormat(name_field=5, volume_field=4)
PLAIN_CSV_FORMAT = StatsFormat(name_field=1, volume_field=2, delimiter=",")


@dataclass(frozen=True)
class RegionVolumeTable:
    """One subject's named region volumes, ordered lexicographically by name."""

    subject_id: str
    volumes: dict[str, float]

    def __post_init__(self):
        ordered = dict(sorted(self.volumes.items()))
        for name, vol in ordered.items():
            if not np.isfinite(vol) or vol < 0:
                raise ValueError(f"region {name!r} has invalid volume {vol}")
        object.__setattr__(self, "volumes", ordered)


@dataclass(frozen=True)
class DemographicRecord:
    subject_id: str
    age: float
    sex: str  # "F" | "M"
    label: str  # "PD" | "HC"


@dataclass(frozen=True)
class CohortManifest:
    """Admitted subject ids plus excluded (id, reason) pairs; disjoint, complete."""

    admitted: tuple[str, ...]
    excluded: tuple[tuple[str, ExclusionReason], ...]

    def __post_init__(self):
        adm = set(self.admitted)
        exc = set(sid for sid, _ in self.excluded)
        if adm & exc:
            raise ValueError("admitted and excluded lists overlap")
        if len(adm) != len(self.admitted) or len(exc) != len(self.excluded):
            raise ValueError("manifest lists contain duplicates")


def parse_volume_stats(
    text: str,
    subject_id: str = "",
    fmt: StatsFormat = ASEG_STATS_FORMAT,
) -> RegionVolumeTable:
    """Parse one stats file into a region->volume table.

    Lines starting with '#' and blank lines are skipped. Every remaining line
    must supply a structure name and a numeric, non-negative volume at the
    positions the format descriptor declares.
    """
    volumes: dict[str, float] = {}
    n_fields = max(fmt.name_field, fmt.volume_field)
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = stripped.split(fmt.delimiter)
        if len(fields) < n_fields:
            raise MalformedRow(
                line_no, f"expected >= {n_fields} fields, got {len(fields)}"
            )
        name = fields[fmt.name_field - 1].strip()
        raw = fields[fmt.volume_field - 1].strip()
        try:
            volume = float(raw)
        except ValueError:
            raise MalformedRow(line_no, f"non-numeric volume {raw!r}") from None
        if not np.isfinite(volume) or volume < 0:
            raise MalformedRow(line_no, f"volume {raw!r} not finite and >= 0")
        if name in volumes:
            raise DuplicateRegion(name)
        volumes[name] = volume
    if not volumes:
        raise EmptyInput("stats text has no data rows")
    return RegionVolumeTable(subject_id=subject_id, volumes=volumes)


def parse_demographics(text: str) -> list[DemographicRecord]:
    """Parse the demographics CSV (columns subject_id, age, sex, label).

    Comma-separated with a header row; fields are not quoted, so a field
    containing a comma shows up as a field-count mismatch and is rejected.
    Sex and label are parsed case-insensitively; age must lie in (0, 120).
    """
    lines = [ln for ln in text.splitlines()]
    if not lines or not lines[0].strip():
        raise EmptyInput("demographics CSV is empty")
    header = [h.strip() for h in lines[0].split(",")]
    positions: dict[str, int] = {}
    for col in ("subject_id", "age", "sex", "label"):
        if col not in header:
            raise MissingColumn(col)
        positions[col] = header.index(col)
    records: list[DemographicRecord] = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != len(header):
            raise MalformedRow(
                line_no, f"expected {len(header)} fields, got {len(fields)}"
            )
        sid = fields[positions["subject_id"]]
        raw_age = fields[positions["age"]]
        try:
            age = float(raw_age)
        except ValueError:
            raise MalformedRow(line_no, f"non-numeric age {raw_age!r}") from None
        if not np.isfinite(age) or not (0.0 < age < 120.0):
            raise BadAge(line_no, age)
        sex = fields[positions["sex"]].upper()
        if sex not in ("F", "M"):
            raise BadEnum(line_no, fields[positions["sex"]], ("F", "M"))
        label = fields[positions["label"]].upper()
        if label not in ("PD", "HC"):
            raise BadEnum(line_no, fields[positions["label"]], ("PD", "HC"))
        records.append(DemographicRecord(subject_id=sid, age=age, sex=sex, label=label))
    if not records:
        raise EmptyInput("demographics CSV has no data rows")
    return records


def parse_exclusions(text: str) -> list[str]:
    """Operator-supplied exclusion list: one subject id per line, '#' comments."""
    out: list[str] = []
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        out.append(stripped)
    return out


def assemble_cohort(
    tables: Iterable[RegionVolumeTable],
    demographics: Iterable[DemographicRecord],
    include_age_sex: bool = False,
    pre_excluded: Mapping[str, ExclusionReason] | None = None,
) -> tuple[LabeledDataset, CohortManifest]:
    """Join volume tables with demographics into a dataset plus manifest.

    Feature columns are the union of region names over joinable subjects, in
    lexicographic order; `age` and `sex` (F=0, M=1) follow when requested. A
    subject missing from either input, named in pre_excluded, or lacking any
    region in the unified column set is excluded with the matching reason.
    Admitted rows are ordered by subject id, so assembly does not depend on
    input order.
    """
    pre_excluded = dict(pre_excluded or {})
    by_table: dict[str, RegionVolumeTable] = {}
    for t in tables:
        if t.subject_id in by_table:
            raise DuplicateSubject(t.subject_id)
        by_table[t.subject_id] = t
    by_demo: dict[str, DemographicRecord] = {}
    for d in demographics:
        if d.subject_id in by_demo:
            raise DuplicateSubject(d.subject_id)
        by_demo[d.subject_id] = d

    excluded: dict[str, ExclusionReason] = dict(pre_excluded)
    candidates: list[str] = []
    for sid in set(by_table) | set(by_demo):
        if sid in excluded:
            continue
        if sid not in by_demo:
            excluded[sid] = ExclusionReason.MISSING_LABEL
        elif sid not in by_table:
            excluded[sid] = ExclusionReason.MISSING_VOLUMES
        else:
            candidates.append(sid)

    region_names = sorted(set().union(*(by_table[sid].volumes for sid in candidates))) if candidates else []
    admitted = []
    for sid in candidates:
        if any(r not in by_table[sid].volumes for r in region_names):
            excluded[sid] = ExclusionReason.MISSING_VOLUMES
        else:
            admitted.append(sid)
    admitted.sort()

    manifest = CohortManifest(
        admitted=tuple(admitted),
        excluded=tuple(sorted(excluded.items(), key=lambda kv: kv[0])),
    )
    if not admitted:
        raise EmptyCohort(
            f"no subjects admitted ({len(excluded)} excluded)"
        )

    feature_names = list(region_names)
    if include_age_sex:
        feature_names += ["age", "sex"]
    rows = np.empty((len(admitted), len(feature_names)), dtype=np.float64)
    labels = np.empty(len(admitted), dtype=np.int8)
    for i, sid in enumerate(admitted):
        table, demo = by_table[sid], by_demo[sid]
        rows[i, : len(region_names)] = [table.volumes[r] for r in region_names]
        if include_age_sex:
            rows[i, -2] = demo.age
            rows[i, -1] = SEX_ENCODING[demo.sex]
        labels[i] = LABEL_PD if demo.label == "PD" else LABEL_HC
    ds = LabeledDataset(
        features=rows,
        labels=labels,
        feature_names=tuple(feature_names),
        subject_ids=tuple(admitted),
    )
    return ds, manifest


def manifest_to_csv(manifest: CohortManifest) -> str:
    lines = ["subject_id,status,reason"]
    for sid in manifest.admitted:
        lines.append(f"{sid},admitted,")
    for sid, reason in manifest.excluded:
        lines.append(f"{sid},excluded,{reason.value}")
    return "\n".join(lines) + "\n"
