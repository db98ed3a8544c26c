"""
Dataset ingestion, normalization, splitting and resampling.
"""

import logging
import math
import os
import tempfile
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, model_validator

from prcrf.errors import DatasetError
from prcrf.models import NEGATIVE, POSITIVE, DatasetSummary, SplitSpec

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def write_text_atomic(path: PathLike, text: str) -> None:
    """Write ``text`` to a temporary sibling, then rename it over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise


def _frozen_array(values, dtype) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


class Dataset(BaseModel):
    """Feature matrix with named columns and a target vector in {-1, +1}."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    name: str = "dataset"
    feature_names: List[str]
    features: np.ndarray
    labels: np.ndarray

    @model_validator(mode="before")
    @classmethod
    def _coerce_arrays(cls, data):
        if not isinstance(data, dict):
            return data
        data = dict(data)
        features = np.asarray(data.get("features"), dtype=np.float64)
        if features.ndim == 1 and features.size == 0:
            features = features.reshape(0, len(data.get("feature_names") or []))
        data["features"] = _frozen_array(features, np.float64)
        data["labels"] = _frozen_array(np.asarray(data.get("labels")).reshape(-1), np.int64)
        data["feature_names"] = [str(n) for n in data.get("feature_names") or []]
        return data

    @model_validator(mode="after")
    def _check_invariants(self) -> "Dataset":
        if self.features.ndim != 2:
            raise ValueError(f"features must be a 2-D matrix, got shape {self.features.shape}")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"{self.features.shape[0]} feature rows but {self.labels.shape[0]} labels"
            )
        if len(self.feature_names) != self.features.shape[1]:
            raise ValueError(
                f"{len(self.feature_names)} feature names for {self.features.shape[1]} columns"
            )
        if len(set(self.feature_names)) != len(self.feature_names):
            raise ValueError("feature names must be distinct")
        bad = ~np.isin(self.labels, (NEGATIVE, POSITIVE))
        if bad.any():
            raise ValueError(f"labels must be -1 or +1, found {sorted(set(self.labels[bad].tolist()))}")
        return self

    @property
    def n_rows(self) -> int:
        return int(self.features.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.features.shape[1])

    def class_counts(self) -> Tuple[int, int]:
        """(negatives, positives)."""
        positives = int(np.count_nonzero(self.labels == POSITIVE))
        return self.n_rows - positives, positives

    def has_both_classes(self) -> bool:
        negatives, positives = self.class_counts()
        return negatives > 0 and positives > 0

    def subset(self, indices: Sequence[int], name: Optional[str] = None) -> "Dataset":
        """Rows at ``indices`` in the given order (repeats allowed)."""
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            name=name or self.name,
            feature_names=self.feature_names,
            features=self.features[idx],
            labels=self.labels[idx],
        )

    def with_features(self, features: np.ndarray) -> "Dataset":
        return Dataset(
            name=self.name,
            feature_names=self.feature_names,
            features=features,
            labels=self.labels,
        )


class MinMaxTable(BaseModel):
    """Per-column minimum and maximum captured from a fitting set."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    minimums: np.ndarray
    maximums: np.ndarray

    @model_validator(mode="before")
    @classmethod
    def _coerce(cls, data):
        if isinstance(data, dict):
            data = dict(data)
            data["minimums"] = _frozen_array(data["minimums"], np.float64)
            data["maximums"] = _frozen_array(data["maximums"], np.float64)
        return data

    def apply(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        if features.shape[-1] != self.minimums.shape[0]:
            raise DatasetError(
                f"expected {self.minimums.shape[0]} columns, got {features.shape[-1]}"
            )
        span = self.maximums - self.minimums
        constant = span == 0
        safe_span = np.where(constant, 1.0, span)
        scaled = (features - self.minimums) / safe_span
        return np.where(constant, 0.0, scaled)


def _parse_numeric(frame: pd.DataFrame, columns: List[str], source: str) -> np.ndarray:
    matrix = np.empty((len(frame), len(columns)), dtype=np.float64)
    for j, column in enumerate(columns):
        raw = frame[column].str.strip()
        parsed = pd.to_numeric(raw, errors="coerce")
        bad = parsed.isna().to_numpy() | raw.eq("").to_numpy()
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            # +2: header line and 1-based numbering
            raise DatasetError(
                f"{source}: line {row + 2}, column '{column}': cannot parse "
                f"{frame[column].iloc[row]!r} as a number"
            )
        matrix[:, j] = parsed.to_numpy(dtype=np.float64)
    return matrix


def _read_table(path: PathLike, delimiter: str) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"dataset file not found: {path}")
    try:
        frame = pd.read_csv(path, sep=delimiter, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DatasetError(f"{path}: cannot read delimited text: {e}") from e
    frame.columns = [str(c).strip() for c in frame.columns]
    return frame


def _matches_label(values: pd.Series, positive_label: str) -> np.ndarray:
    text = values.str.strip()
    matches = text.eq(positive_label.strip()).to_numpy()
    try:
        wanted = float(positive_label)
    except ValueError:
        return matches
    numeric = pd.to_numeric(text, errors="coerce").to_numpy()
    return matches | (numeric == wanted)


def load_csv(
    path: PathLike,
    target_column: str,
    positive_label: str,
    delimiter: str = ",",
    name: Optional[str] = None,
) -> Dataset:
    """Load a delimited file with a header row into a Dataset.

    ``positive_label`` maps to +1, every other target value to -1. All other
    columns must parse as real numbers; missing cells are rejected.
    """
    frame = _read_table(path, delimiter)
    if target_column not in frame.columns:
        raise DatasetError(f"{path}: target column '{target_column}' not in header")
    if len(frame) < 2:
        raise DatasetError(f"{path}: need at least 2 data rows, found {len(frame)}")

    feature_names = [c for c in frame.columns if c != target_column]
    features = _parse_numeric(frame, feature_names, str(path))
    labels = np.where(_matches_label(frame[target_column], positive_label), POSITIVE, NEGATIVE)

    dataset = Dataset(
        name=name or Path(path).stem,
        feature_names=feature_names,
        features=features,
        labels=labels,
    )
    if not dataset.has_both_classes():
        raise DatasetError(
            f"{path}: target '{target_column}' has a single class "
            f"(positive label {positive_label!r})"
        )
    logger.info(f"Loaded {dataset.name}: {dataset.n_rows} rows, {dataset.n_features} features")
    return dataset


def load_features(
    path: PathLike,
    delimiter: str = ",",
    drop_column: Optional[str] = None,
) -> Tuple[List[str], np.ndarray]:
    """Read a prediction input file; ``drop_column`` is removed when present."""
    frame = _read_table(path, delimiter)
    if drop_column and drop_column in frame.columns:
        frame = frame.drop(columns=[drop_column])
    names = list(frame.columns)
    return names, _parse_numeric(frame, names, str(path))


def write_csv(
    d: Dataset,
    path: PathLike,
    target_column: str,
    positive_label: str = "1",
    negative_label: str = "0",
    delimiter: str = ",",
) -> None:
    frame = pd.DataFrame(d.features, columns=d.feature_names)
    frame[target_column] = np.where(d.labels == POSITIVE, positive_label, negative_label)
    write_text_atomic(path, frame.to_csv(sep=delimiter, index=False, float_format="%.17g", lineterminator="\n"))


def write_rows(source: PathLike, rows: Sequence[int], path: PathLike, delimiter: str = ",") -> None:
    """Copy the header and the data rows at ``rows`` of ``source`` to ``path`` verbatim."""
    frame = _read_table(source, delimiter)
    kept = frame.iloc[np.asarray(rows, dtype=np.int64)]
    write_text_atomic(path, kept.to_csv(sep=delimiter, index=False, lineterminator="\n"))


def summarize(d: Dataset) -> DatasetSummary:
    if d.n_rows == 0:
        raise DatasetError("cannot summarize an empty dataset")
    negatives, positives = d.class_counts()
    return DatasetSummary(
        name=d.name,
        n_observations=d.n_rows,
        minority_fraction=min(negatives, positives) / d.n_rows,
        n_features=d.n_features,
    )


def fit_minmax(features: np.ndarray) -> MinMaxTable:
    features = np.asarray(features, dtype=np.float64)
    if features.shape[0] == 0:
        raise DatasetError("cannot fit a min/max table on zero rows")
    return MinMaxTable(minimums=features.min(axis=0), maximums=features.max(axis=0))


def normalize_minmax(d: Dataset) -> Tuple[Dataset, MinMaxTable]:
    """Rescale every column to [0, 1]; constant columns map to 0."""
    table = fit_minmax(d.features)
    return apply_minmax(d, table), table


def apply_minmax(d: Dataset, table: MinMaxTable) -> Dataset:
    return d.with_features(table.apply(d.features))


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _test_count(n: int, test_fraction: float) -> int:
    return min(max(_round_half_up(test_fraction * n), 1), n - 1)


def split_indices(labels: np.ndarray, spec: SplitSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Row indices (train, test), each ascending."""
    labels = np.asarray(labels)
    n = labels.shape[0]
    if n < 2:
        raise DatasetError(f"cannot split {n} rows into two non-empty partitions")
    if not (np.any(labels == POSITIVE) and np.any(labels == NEGATIVE)):
        raise DatasetError("train/test split needs both classes present")

    rng = np.random.default_rng(spec.seed)
    if spec.stratified:
        test_parts = []
        for code in (NEGATIVE, POSITIVE):
            members = np.flatnonzero(labels == code)
            if members.shape[0] < 2:
                raise DatasetError(
                    f"stratified split needs at least 2 rows of class {code:+d}, "
                    f"found {members.shape[0]}"
                )
            chosen = rng.permutation(members)[: _test_count(members.shape[0], spec.test_fraction)]
            test_parts.append(chosen)
        test = np.sort(np.concatenate(test_parts))
    else:
        test = np.sort(rng.permutation(n)[: _test_count(n, spec.test_fraction)])

    in_test = np.zeros(n, dtype=bool)
    in_test[test] = True
    train = np.flatnonzero(~in_test)
    return train, test


def train_test_split(d: Dataset, spec: SplitSpec) -> Tuple[Dataset, Dataset]:
    train, test = split_indices(d.labels, spec)
    return d.subset(train), d.subset(test)


def bootstrap_indices(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(0, n, size=n)


def bootstrap_sample(d: Dataset, seed: int) -> Dataset:
    """Same-size resample drawn with replacement."""
    if d.n_rows == 0:
        raise DatasetError("cannot bootstrap an empty dataset")
    return d.subset(bootstrap_indices(d.n_rows, seed))


def make_cluster_with_outliers(
    n_inliers: int = 950,
    n_outliers: int = 50,
    n_features: int = 8,
    seed: int = 0,
    spread: float = 0.05,
    outlier_distance: float = 4.0,
    positive_rate: float = 0.3,
) -> Tuple[Dataset, np.ndarray]:
    """Tight Gaussian cluster plus far outliers.

    Inliers are drawn from N(0, spread^2) per coordinate. Each outlier sits at
    ``outlier_distance`` along a random direction, plus cluster-sized noise.
    Labels are drawn independently of outlier status (+1 with probability
    ``positive_rate``), so filtering outliers leaves both classes. Returns the
    dataset and the ascending row indices of the outliers.
    """
    rng = np.random.default_rng(seed)
    inliers = rng.normal(0.0, spread, size=(n_inliers, n_features))
    directions = rng.normal(size=(n_outliers, n_features))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    outliers = outlier_distance * directions + rng.normal(0.0, spread, size=(n_outliers, n_features))

    features = np.vstack([inliers, outliers])
    is_outlier = np.concatenate([np.zeros(n_inliers, dtype=bool), np.ones(n_outliers, dtype=bool)])
    labels = np.where(rng.random(n_inliers + n_outliers) < positive_rate, POSITIVE, NEGATIVE)

    order = rng.permutation(n_inliers + n_outliers)
    dataset = Dataset(
        name="synthetic_cluster",
        feature_names=[f"x{j}" for j in range(n_features)],
        features=features[order],
        labels=labels[order],
    )
    return dataset, np.flatnonzero(is_outlier[order])
