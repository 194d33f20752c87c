"""Typed errors raised across the pipeline.

Everything user-facing derives from PipelineError so the CLI can turn any
pipeline fault into a diagnostic plus a nonzero exit code.
"""

from __future__ import annotations


class PipelineError(Exception):
    """Base class for all errors this package raises on bad input or state."""


# --- parsing ---------------------------------------------------------------


class EmptyInput(PipelineError):
    """A parser received text with no data rows."""


class MalformedRow(PipelineError):
    """A data row could not be parsed (bad field count or non-numeric value)."""

    def __init__(self, line_no: int, detail: str):
        self.line_no = line_no
        self.detail = detail
        super().__init__(f"line {line_no}: {detail}")


class DuplicateRegion(PipelineError):
    """The same region name appeared twice in one subject's volume table."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"duplicate region name: {name!r}")


class MissingColumn(PipelineError):
    """A required column is absent from a CSV header."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"missing required column: {name!r}")


class BadEnum(PipelineError):
    """A categorical field holds a value outside its allowed set."""

    def __init__(self, line_no: int, value: str, allowed: tuple[str, ...]):
        self.line_no = line_no
        self.value = value
        self.allowed = allowed
        super().__init__(
            f"line {line_no}: {value!r} not one of {', '.join(allowed)}"
        )


class BadAge(PipelineError):
    """An age value lies outside the plausible (0, 120) range."""

    def __init__(self, line_no: int, value: float):
        self.line_no = line_no
        self.value = value
        super().__init__(f"line {line_no}: age {value} outside (0, 120)")


class DuplicateSubject(PipelineError):
    """One subject id occurred more than once in a single input table."""

    def __init__(self, subject_id: str):
        self.subject_id = subject_id
        super().__init__(f"duplicate subject id: {subject_id!r}")


# --- cohort / dataset -------------------------------------------------------


class EmptyCohort(PipelineError):
    """Cohort assembly admitted zero subjects."""


class NoNegatives(PipelineError):
    """Augmentation requires at least one negative (HC) row."""


class ClassTooSmall(PipelineError):
    """A class has fewer members than the requested fold count."""

    def __init__(self, class_name: str, count: int, k: int):
        self.class_name = class_name
        self.count = count
        self.k = k
        super().__init__(f"class {class_name} has {count} rows, need >= {k} for {k} folds")


# --- models -----------------------------------------------------------------


class NonFiniteInput(PipelineError):
    """A feature matrix or label vector contains NaN or infinity."""


class DimensionMismatch(PipelineError):
    """An input vector or matrix has the wrong number of features."""

    def __init__(self, expected: int, got: int):
        self.expected = expected
        self.got = got
        super().__init__(f"expected {expected} features, got {got}")


class SingleClass(PipelineError):
    """An operation needs both classes present but saw only one."""


# --- metrics ----------------------------------------------------------------


class LengthMismatch(PipelineError):
    """Two paired vectors have different lengths."""

    def __init__(self, a: int, b: int):
        self.a = a
        self.b = b
        super().__init__(f"length mismatch: {a} vs {b}")


class Empty(PipelineError):
    """An operation needs at least one element."""


# --- synth / cli ------------------------------------------------------------


class InvalidSpec(PipelineError):
    """A synthetic cohort specification violates its invariants."""


class UnknownFeature(PipelineError):
    """A named feature does not exist in the dataset."""

    def __init__(self, name: str, available: tuple[str, ...]):
        self.name = name
        self.available = available
        super().__init__(
            f"unknown feature {name!r}; available: {', '.join(available)}"
        )


class ConfigError(PipelineError):
    """A run configuration is inconsistent or incomplete."""
