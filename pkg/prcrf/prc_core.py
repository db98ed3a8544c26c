"""
Precision-recall split criterion.

A feature's PR curve is traced over its sorted unique values: at each value
``v`` the rows with feature <= v are the predicted positives. Whenever the
precision of that prefix falls below the positive-class baseline, the point is
replaced by the complementary split (rows > v). The replacement is pointwise,
so recall need not grow along the curve, and a feature and its negation can
score differently. The curve is integrated by the trapezoidal rule, starting
from (0, 1), without clamping the result.
"""

import logging
from typing import Iterable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from prcrf.data import Dataset
from prcrf.errors import DatasetError, UnsplittableNodeError
from prcrf.models import POSITIVE, SplitCandidate

logger = logging.getLogger(__name__)


class PRCurve(BaseModel):
    """Recall/precision pairs over a feature's ascending unique values."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    thresholds: np.ndarray
    recall: np.ndarray
    precision: np.ndarray
    baseline: float
    total_positives: int
    total_negatives: int

    @model_validator(mode="after")
    def _check_invariants(self) -> "PRCurve":
        n = self.thresholds.shape[0]
        if n == 0 or self.recall.shape != (n,) or self.precision.shape != (n,):
            raise ValueError("thresholds, recall and precision must be non-empty and aligned")
        if n > 1 and not np.all(np.diff(self.thresholds) > 0):
            raise ValueError("thresholds must be strictly ascending")
        for name, values in (("recall", self.recall), ("precision", self.precision)):
            if np.any(values < 0) or np.any(values > 1):
                raise ValueError(f"{name} entries must lie in [0, 1]")
        prevalence = self.total_positives / (self.total_positives + self.total_negatives)
        if not np.isclose(self.baseline, prevalence, rtol=0.0, atol=1e-15):
            raise ValueError("baseline must equal the positive-class prevalence")
        return self

    def to_text(self) -> str:
        """Aligned threshold/recall/precision columns for debugging."""
        lines = [f"{'threshold':>24} {'recall':>20} {'precision':>20}"]
        for t, r, p in zip(self.thresholds, self.recall, self.precision):
            lines.append(f"{t!r:>24} {r!r:>20} {p!r:>20}")
        lines.append(f"baseline {self.baseline!r}")
        return "\n".join(lines)


def compute_baseline(labels: np.ndarray) -> float:
    labels = np.asarray(labels)
    if labels.shape[0] == 0:
        raise DatasetError("baseline of an empty label vector is undefined")
    positives = int(np.count_nonzero(labels == POSITIVE))
    negatives = labels.shape[0] - positives
    return positives / (positives + negatives)


def compute_pr_curve(feature_values: np.ndarray, labels: np.ndarray) -> PRCurve:
    x = np.asarray(feature_values, dtype=np.float64)
    y = np.asarray(labels)
    if x.shape != y.shape or x.ndim != 1:
        raise DatasetError(f"feature and label lengths differ: {x.shape} vs {y.shape}")

    n = x.shape[0]
    is_positive = y == POSITIVE
    total_positives = int(np.count_nonzero(is_positive))
    total_negatives = n - total_positives
    if total_positives == 0 or total_negatives == 0:
        raise DatasetError("a PR curve needs both classes present")
    baseline = total_positives / (total_positives + total_negatives)

    order = np.argsort(x, kind="stable")
    sorted_x = x[order]
    uniq = np.unique(sorted_x)
    # rows with value <= uniq[j]
    selected = np.searchsorted(sorted_x, uniq, side="right")
    positives_in = np.cumsum(is_positive[order])[selected - 1]

    recall = positives_in / total_positives
    precision = positives_in / selected

    flip = precision < baseline
    if flip.any():
        rest = n - selected
        degenerate = flip & (rest == 0)
        flip_ok = flip & ~degenerate
        recall = recall.copy()
        precision = precision.copy()
        recall[flip_ok] = 1 - recall[flip_ok]
        precision[flip_ok] = (total_positives - positives_in[flip_ok]) / rest[flip_ok]
        # no complementary rows: the point carries no split information
        recall[degenerate] = 0.0
        precision[degenerate] = baseline

    return PRCurve(
        thresholds=uniq,
        recall=recall,
        precision=precision,
        baseline=baseline,
        total_positives=total_positives,
        total_negatives=total_negatives,
    )


def auprc_trapezoid(curve: PRCurve) -> float:
    """Trapezoidal area under the curve, anchored at (0, 1) for the first point.

    The raw accumulation is returned; pointwise flips can make the recall
    sequence non-monotone, so the value is not clamped.
    """
    r, p = curve.recall, curve.precision
    area = r[0] * (1 + p[0]) / 2
    if r.shape[0] > 1:
        area += float(np.sum((r[1:] - r[:-1]) * (p[1:] + p[:-1]) / 2))
    return float(area)


def harmonic_mean(recall, precision):
    """Elementwise 2rp/(r+p), 0 where r + p == 0."""
    r = np.asarray(recall, dtype=np.float64)
    p = np.asarray(precision, dtype=np.float64)
    total = r + p
    with np.errstate(divide="ignore", invalid="ignore"):
        hm = np.where(total > 0, 2 * r * p / np.where(total > 0, total, 1.0), 0.0)
    return hm if hm.ndim else float(hm)


def select_threshold(curve: PRCurve) -> Tuple[float, float]:
    """Threshold with the highest F1; the smallest threshold wins ties."""
    f1 = harmonic_mean(curve.recall, curve.precision)
    best = int(np.argmax(f1))
    return float(curve.thresholds[best]), float(f1[best])


def rank_features(
    features: np.ndarray,
    labels: np.ndarray,
    candidates: Iterable[int],
) -> List[Tuple[int, float, PRCurve]]:
    """(feature_index, auprc, curve) per candidate, in ascending index order."""
    ranked = []
    for j in sorted(set(int(c) for c in candidates)):
        curve = compute_pr_curve(features[:, j], labels)
        ranked.append((j, auprc_trapezoid(curve), curve))
    return ranked


def _best(ranked: List[Tuple[int, float, PRCurve]]) -> Optional[Tuple[int, float, PRCurve]]:
    best = None
    for entry in ranked:
        # strict > keeps the lowest index on ties and rejects auprc <= 0
        if entry[1] > (best[1] if best else 0.0):
            best = entry
    return best


def select_feature(d: Dataset, candidate_features: Iterable[int]) -> Tuple[int, float]:
    """Candidate column with the largest AUPRC on dataset ``d``."""
    candidates = list(candidate_features)
    if not candidates:
        raise DatasetError("select_feature needs at least one candidate feature")
    best = _best(rank_features(d.features, d.labels, candidates))
    if best is None:
        raise UnsplittableNodeError(f"no candidate among {sorted(candidates)} has AUPRC > 0")
    return best[0], best[1]


def best_split(
    features: np.ndarray,
    labels: np.ndarray,
    candidates: Iterable[int],
) -> Optional[SplitCandidate]:
    """Feature by AUPRC, then threshold by F1; None when nothing scores above 0."""
    best = _best(rank_features(features, labels, candidates))
    if best is None:
        return None
    feature_index, auprc, curve = best
    threshold, f1 = select_threshold(curve)
    return SplitCandidate(feature_index=feature_index, auprc=auprc, threshold=threshold, f1=f1)
