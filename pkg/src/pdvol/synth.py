"""Synthetic cohorts with planted class effects and a closed-form oracle.

Feature columns are independent unit Gaussians; PD rows of an informative
column are shifted by its effect size (in standard deviations). Age and sex
columns mimic the reference cohort's demographics but carry no class signal,
which keeps the two-Gaussian Bayes accuracy exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import LabeledDataset
from .errors import InvalidSpec

# Half-open age bands [lo, hi); the published band edges overlap at 75-76,
# so the last band is snapped to 76 to make the three a partition.
AGE_BANDS = ((25.0, 50.0), (50.0, 76.0), (76.0, 100.0))

# Reference cohort demographics: 411 PD / 187 HC, ages 81/472/45 across the
# three bands, 217 F of 598.
DEFAULT_AGE_WEIGHTS = (81 / 598, 472 / 598, 45 / 598)
DEFAULT_SEX_RATIO = 217 / 598


@dataclass(frozen=True)
class CohortSpec:
    n_pd: int
    n_hc: int
    n_features: int
    informative: tuple[tuple[int, float], ...] = ()
    age_weights: tuple[float, float, float] = DEFAULT_AGE_WEIGHTS
    sex_ratio: float = DEFAULT_SEX_RATIO
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(
            self, "informative", tuple((int(i), float(e)) for i, e in self.informative)
        )
        object.__setattr__(self, "age_weights", tuple(float(w) for w in self.age_weights))
        if self.n_pd < 0 or self.n_hc < 0 or self.n_pd + self.n_hc < 1:
            raise InvalidSpec("need at least one subject")
        if self.n_features < 1:
            raise InvalidSpec("need at least one feature")
        seen = set()
        for idx, eff in self.informative:
            if not 0 <= idx < self.n_features:
                raise InvalidSpec(f"informative index {idx} out of range")
            if idx in seen:
                raise InvalidSpec(f"informative index {idx} repeated")
            if not math.isfinite(eff):
                raise InvalidSpec("effect sizes must be finite")
            seen.add(idx)
        if len(self.age_weights) != 3 or any(w < 0 for w in self.age_weights):
            raise InvalidSpec("age_weights must be three non-negative values")
        if abs(sum(self.age_weights) - 1.0) > 1e-9:
            raise InvalidSpec("age_weights must sum to 1")
        if not 0.0 <= self.sex_ratio <= 1.0:
            raise InvalidSpec("sex_ratio must lie in [0, 1]")
        if self.seed < 0:
            raise InvalidSpec("seed must be non-negative")


def _apportion(weights, total: int) -> list[int]:
    """Largest-remainder apportionment so band counts match weights exactly."""
    raw = [w * total for w in weights]
    counts = [int(math.floor(r)) for r in raw]
    remainder = total - sum(counts)
    order = sorted(range(len(raw)), key=lambda i: raw[i] - counts[i], reverse=True)
    for i in order[:remainder]:
        counts[i] += 1
    return counts


def _feature_name(j: int, n: int) -> str:
    width = max(3, len(str(n - 1)))
    return f"f{j:0{width}d}"


def generate_cohort(spec: CohortSpec) -> LabeledDataset:
    """Deterministic synthetic dataset: f-columns, then `age`, then `sex`."""
    s = spec.n_pd + spec.n_hc
    rng = np.random.default_rng(spec.seed)
    X = rng.standard_normal((s, spec.n_features))
    for idx, eff in spec.informative:
        X[: spec.n_pd, idx] += eff

    band_counts = _apportion(spec.age_weights, s)
    band_of = np.repeat(np.arange(3), band_counts)
    rng.shuffle(band_of)
    lo = np.array([AGE_BANDS[b][0] for b in band_of])
    hi = np.array([AGE_BANDS[b][1] for b in band_of])
    ages = lo + rng.random(s) * (hi - lo)

    n_f = round(spec.sex_ratio * s)
    sexes = np.concatenate([np.zeros(n_f), np.ones(s - n_f)])
    rng.shuffle(sexes)

    labels = np.concatenate(
        [np.ones(spec.n_pd, dtype=np.int8), np.zeros(spec.n_hc, dtype=np.int8)]
    )
    id_width = max(4, len(str(s)))
    ids = [f"PD-{i + 1:0{id_width}d}" for i in range(spec.n_pd)] + [
        f"HC-{i + 1:0{id_width}d}" for i in range(spec.n_hc)
    ]
    names = [_feature_name(j, spec.n_features) for j in range(spec.n_features)]
    return LabeledDataset(
        features=np.column_stack([X, ages, sexes]),
        labels=labels,
        feature_names=tuple(names) + ("age", "sex"),
        subject_ids=tuple(ids),
    )


def mahalanobis_distance(spec: CohortSpec) -> float:
    return math.sqrt(sum(eff * eff for _, eff in spec.informative))


def analytic_bayes_accuracy(spec: CohortSpec) -> float:
    """Best equal-prior accuracy of the planted two-Gaussian problem.

    With independent unit-variance features and mean shift vector e, the
    optimal rule thresholds the projection onto e and achieves Phi(|e|/2).
    """
    d = mahalanobis_distance(spec)
    return 0.5 * (1.0 + math.erf(d / (2.0 * math.sqrt(2.0))))
