"""
PRC random forest: bagged PRC trees with per-split feature subsampling.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, model_validator
from tenacity import RetryError, Retrying, before_sleep_log, retry_if_exception_type, stop_after_attempt

from prcrf.data import Dataset, bootstrap_sample
from prcrf.errors import DatasetError, TrainingError
from prcrf.models import NEGATIVE, POSITIVE, SCHEMA_VERSION, ForestArtifact, ForestParams
from prcrf.seeding import derive_seed
from prcrf.tree import (
    PRCTree,
    build_tree,
    iter_nodes,
    predict_tree_batch,
    tree_from_artifact,
    tree_to_artifact,
)

logger = logging.getLogger(__name__)

MAX_BOOTSTRAP_ATTEMPTS = 10

# key spaces under the master seed
_BOOTSTRAP_KEY = 0
_TREE_KEY = 1


class SingleClassSampleError(DatasetError):
    """A bootstrap sample drew rows of one class only."""


class PRCForest(BaseModel):
    trees: List[PRCTree]
    params: ForestParams
    feature_names: List[str]
    tree_seeds: List[int]

    @model_validator(mode="after")
    def _check_size(self) -> "PRCForest":
        if len(self.trees) != self.params.n_trees:
            raise ValueError(f"forest holds {len(self.trees)} trees, expected {self.params.n_trees}")
        if len(self.tree_seeds) != len(self.trees):
            raise ValueError("one bootstrap seed per tree is required")
        return self

    @property
    def n_features(self) -> int:
        return len(self.feature_names)


def _draw_bootstrap(d: Dataset, master_seed: int, index: int) -> Tuple[Dataset, int]:
    for attempt in Retrying(
        stop=stop_after_attempt(MAX_BOOTSTRAP_ATTEMPTS),
        retry=retry_if_exception_type(SingleClassSampleError),
        before_sleep=before_sleep_log(logger, logging.WARNING),
    ):
        with attempt:
            seed = derive_seed(master_seed, index, _BOOTSTRAP_KEY, attempt.retry_state.attempt_number - 1)
            sample = bootstrap_sample(d, seed)
            if not sample.has_both_classes():
                raise SingleClassSampleError(f"bootstrap seed {seed} drew a single class")
    return sample, seed


def _build_member(d: Dataset, params: ForestParams, index: int) -> Tuple[PRCTree, int]:
    try:
        sample, seed = _draw_bootstrap(d, params.master_seed, index)
    except RetryError as e:
        negatives, positives = d.class_counts()
        raise TrainingError(
            f"tree {index}: {MAX_BOOTSTRAP_ATTEMPTS} bootstrap samples in a row held a single "
            f"class ({positives} positive / {negatives} negative training rows)"
        ) from e
    tree_params = params.tree_params.model_copy(
        update={"rng_seed": derive_seed(params.master_seed, index, _TREE_KEY)}
    )
    tree = build_tree(sample, range(d.n_features), tree_params)
    logger.debug(f"tree {index}: bootstrap seed {seed}, {tree.n_leaves} leaves")
    return tree, seed


def build_forest(d: Dataset, params: ForestParams, n_threads: int = 1) -> PRCForest:
    """Grow ``params.n_trees`` trees, each on its own bootstrap sample.

    Trees are independent given their derived seeds; with ``n_threads > 1``
    they are grown concurrently and collected in index order, so the result
    does not depend on the thread count.
    """
    if d.n_rows == 0 or not d.has_both_classes():
        raise DatasetError("a forest needs a non-empty training set with both classes")

    def member(index: int) -> Tuple[PRCTree, int]:
        return _build_member(d, params, index)

    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            members = list(pool.map(member, range(params.n_trees)))
    else:
        members = [member(j) for j in range(params.n_trees)]

    forest = PRCForest(
        trees=[tree for tree, _ in members],
        params=params,
        feature_names=d.feature_names,
        tree_seeds=[seed for _, seed in members],
    )
    logger.info(
        f"Built forest of {params.n_trees} trees on {d.n_rows} rows "
        f"({sum(t.n_leaves for t in forest.trees)} leaves in total)"
    )
    return forest


def _aggregate(positive_votes: np.ndarray, n_trees: int) -> Tuple[np.ndarray, np.ndarray]:
    labels = np.where(2 * positive_votes >= n_trees, POSITIVE, NEGATIVE)
    return labels, positive_votes / n_trees


def predict_forest_batch(forest: PRCForest, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Majority vote per row (ties go to +1) and the fraction of +1 votes."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != forest.n_features:
        raise DatasetError(f"expected {forest.n_features} feature columns, got shape {X.shape}")
    positive_votes = np.zeros(X.shape[0], dtype=np.int64)
    for tree in forest.trees:
        labels, _ = predict_tree_batch(tree, X)
        positive_votes += labels == POSITIVE
    return _aggregate(positive_votes, len(forest.trees))


def predict_forest(forest: PRCForest, x: np.ndarray) -> Tuple[int, float]:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (forest.n_features,):
        raise DatasetError(f"expected a row of {forest.n_features} features, got shape {x.shape}")
    labels, fractions = predict_forest_batch(forest, x.reshape(1, -1))
    return int(labels[0]), float(fractions[0])


def feature_importance(forest: PRCForest) -> Dict[str, float]:
    """Coverage- and AUPRC-weighted split counts, normalised to sum to 1."""
    totals = np.zeros(forest.n_features, dtype=np.float64)
    for tree in forest.trees:
        root_rows = tree.root.n_samples
        for node in iter_nodes(tree):
            if node.split is not None:
                totals[node.split.feature_index] += node.n_samples / root_rows * node.split.auprc
    grand_total = totals.sum()
    if grand_total > 0:
        totals = totals / grand_total
    return {name: float(value) for name, value in zip(forest.feature_names, totals)}


def forest_to_artifact(forest: PRCForest) -> ForestArtifact:
    return ForestArtifact(
        schema_version=SCHEMA_VERSION,
        params=forest.params,
        feature_names=forest.feature_names,
        tree_seeds=forest.tree_seeds,
        trees=[tree_to_artifact(t, forest.feature_names) for t in forest.trees],
    )


def forest_from_artifact(artifact: ForestArtifact) -> PRCForest:
    if artifact.schema_version != SCHEMA_VERSION:
        raise ValueError(f"unsupported forest schema version {artifact.schema_version}")
    return PRCForest(
        trees=[tree_from_artifact(t) for t in artifact.trees],
        params=artifact.params,
        feature_names=artifact.feature_names,
        tree_seeds=artifact.tree_seeds,
    )


def check_feature_names(forest: PRCForest, names: Sequence[str]) -> None:
    """Raise DatasetError unless ``names`` match the training columns."""
    names = list(names)
    if len(names) != forest.n_features:
        raise DatasetError(
            f"model expects {forest.n_features} feature columns, input has {len(names)}"
        )
    if names != forest.feature_names:
        mismatched = [f"{a}!={b}" for a, b in zip(names, forest.feature_names) if a != b]
        raise DatasetError(f"feature names differ from training columns: {', '.join(mismatched[:5])}")
