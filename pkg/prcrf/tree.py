"""
PRC classification tree: growth, prediction and serialization.

Each split picks its feature by AUPRC among ``n_features_per_split`` features
sampled from the pool, and its threshold by F1. Rows with value <= threshold
go left. The root has depth 1 and a node may split only while its depth is
below ``max_depth``.
"""

import logging
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, model_validator

from prcrf.data import Dataset
from prcrf.errors import DatasetError
from prcrf.models import (
    NEGATIVE,
    POSITIVE,
    SCHEMA_VERSION,
    NodeRecord,
    SplitCandidate,
    TreeArtifact,
    TreeParams,
)
from prcrf.prc_core import best_split

logger = logging.getLogger(__name__)


class PRCTreeNode(BaseModel):
    nodescore: Tuple[float, float]  # (fraction of -1, fraction of +1)
    nodelabel: int
    depth: int
    n_samples: int
    split: Optional[SplitCandidate] = None
    left: Optional["PRCTreeNode"] = None
    right: Optional["PRCTreeNode"] = None

    @model_validator(mode="after")
    def _check_node(self) -> "PRCTreeNode":
        if abs(sum(self.nodescore) - 1.0) > 1e-12:
            raise ValueError(f"nodescore {self.nodescore} does not sum to 1")
        children = (self.left is not None, self.right is not None)
        if (self.split is not None) != all(children) or any(children) != all(children):
            raise ValueError("a node has a split exactly when it has both children")
        return self

    @property
    def is_leaf(self) -> bool:
        return self.split is None

    @property
    def positive_fraction(self) -> float:
        return self.nodescore[1]


class PRCTree(BaseModel):
    root: PRCTreeNode
    params: TreeParams
    n_features: int
    n_leaves: int


def _make_node(labels: np.ndarray, depth: int) -> PRCTreeNode:
    n = labels.shape[0]
    positives = int(np.count_nonzero(labels == POSITIVE))
    negatives = n - positives
    return PRCTreeNode(
        nodescore=(negatives / n, positives / n),
        nodelabel=POSITIVE if positives >= negatives else NEGATIVE,
        depth=depth,
        n_samples=n,
    )


def node_rng(seed: int, node_id: int) -> np.random.Generator:
    """Generator for one node, keyed by its heap position (root = 1)."""
    return np.random.default_rng(np.random.SeedSequence([seed, node_id]))


class _TreeGrower:
    def __init__(self, features: np.ndarray, labels: np.ndarray, pool: np.ndarray, params: TreeParams):
        self.features = features
        self.labels = labels
        self.pool = pool
        self.params = params
        self.n_leaves = 0

    def grow(self, rows: np.ndarray, depth: int, node_id: int) -> PRCTreeNode:
        y = self.labels[rows]
        node = _make_node(y, depth)
        split = self._choose_split(rows, y, node, node_id)
        if split is None:
            self.n_leaves += 1
            return node

        goes_left = self.features[rows, split.feature_index] <= split.threshold
        left = self.grow(rows[goes_left], depth + 1, 2 * node_id)
        right = self.grow(rows[~goes_left], depth + 1, 2 * node_id + 1)
        return node.model_copy(update={"split": split, "left": left, "right": right})

    def _choose_split(
        self, rows: np.ndarray, y: np.ndarray, node: PRCTreeNode, node_id: int
    ) -> Optional[SplitCandidate]:
        params = self.params
        if node.nodescore[0] == 0.0 or node.nodescore[1] == 0.0:
            return None
        if node.depth >= params.max_depth or rows.shape[0] < 2 * params.min_leaf_size:
            return None

        rng = node_rng(params.rng_seed, node_id)
        sampled = rng.choice(self.pool, size=params.n_features_per_split, replace=False)
        X = self.features[rows]
        split = best_split(X, y, sampled)
        if split is None:
            return None

        # a constant column that wins sends every row left and fails this check
        n_left = int(np.count_nonzero(X[:, split.feature_index] <= split.threshold))
        if min(n_left, rows.shape[0] - n_left) < params.min_leaf_size:
            return None
        return split


def build_tree(d: Dataset, feature_pool: Sequence[int], params: TreeParams) -> PRCTree:
    """Grow a PRC tree on ``d`` using features from ``feature_pool``."""
    if d.n_rows == 0:
        raise DatasetError("cannot grow a tree on an empty dataset")
    pool = np.array(sorted(set(int(j) for j in feature_pool)), dtype=np.int64)
    if pool.shape[0] == 0 or pool.min() < 0 or pool.max() >= d.n_features:
        raise ValueError(f"feature pool must hold column indices in [0, {d.n_features})")
    if params.n_features_per_split > pool.shape[0]:
        raise ValueError(
            f"n_features_per_split={params.n_features_per_split} exceeds the "
            f"{pool.shape[0]} features in the pool"
        )

    grower = _TreeGrower(d.features, d.labels, pool, params)
    root = grower.grow(np.arange(d.n_rows), depth=1, node_id=1)
    return PRCTree(root=root, params=params, n_features=d.n_features, n_leaves=grower.n_leaves)


def iter_nodes(tree: PRCTree) -> Iterator[PRCTreeNode]:
    """Pre-order traversal."""
    stack = [tree.root]
    while stack:
        node = stack.pop()
        yield node
        if not node.is_leaf:
            stack.append(node.right)
            stack.append(node.left)


def tree_depth(tree: PRCTree) -> int:
    return max(node.depth for node in iter_nodes(tree))


def decision_path(tree: PRCTree, x: np.ndarray) -> List[PRCTreeNode]:
    """Nodes visited from the root to the leaf reached by ``x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (tree.n_features,):
        raise DatasetError(f"expected a row of {tree.n_features} features, got shape {x.shape}")
    node = tree.root
    path = [node]
    while not node.is_leaf:
        node = node.left if x[node.split.feature_index] <= node.split.threshold else node.right
        path.append(node)
    return path


def predict_tree(tree: PRCTree, x: np.ndarray) -> Tuple[int, float]:
    """(nodelabel, positive-class proportion) of the leaf reached by ``x``."""
    leaf = decision_path(tree, x)[-1]
    return leaf.nodelabel, leaf.positive_fraction


def predict_tree_batch(tree: PRCTree, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != tree.n_features:
        raise DatasetError(f"expected {tree.n_features} feature columns, got shape {X.shape}")
    labels = np.empty(X.shape[0], dtype=np.int64)
    scores = np.empty(X.shape[0], dtype=np.float64)
    stack = [(tree.root, np.arange(X.shape[0]))]
    while stack:
        node, rows = stack.pop()
        if rows.shape[0] == 0:
            continue
        if node.is_leaf:
            labels[rows] = node.nodelabel
            scores[rows] = node.positive_fraction
            continue
        goes_left = X[rows, node.split.feature_index] <= node.split.threshold
        stack.append((node.left, rows[goes_left]))
        stack.append((node.right, rows[~goes_left]))
    return labels, scores


def tree_to_artifact(tree: PRCTree, feature_names: Optional[Sequence[str]] = None) -> TreeArtifact:
    records = []
    for node in iter_nodes(tree):
        record = NodeRecord(
            depth=node.depth,
            nodescore=node.nodescore,
            nodelabel=node.nodelabel,
            n_samples=node.n_samples,
        )
        if node.split is not None:
            s = node.split
            record = record.model_copy(update={
                "feature_index": s.feature_index,
                "feature_name": feature_names[s.feature_index] if feature_names else None,
                "threshold": s.threshold,
                "auprc": s.auprc,
                "f1": s.f1,
            })
        records.append(record)
    return TreeArtifact(
        schema_version=SCHEMA_VERSION,
        params=tree.params,
        n_features=tree.n_features,
        n_leaves=tree.n_leaves,
        nodes=records,
    )


def tree_from_artifact(artifact: TreeArtifact) -> PRCTree:
    if artifact.schema_version != SCHEMA_VERSION:
        raise ValueError(f"unsupported tree schema version {artifact.schema_version}")
    records = iter(artifact.nodes)

    def rebuild() -> PRCTreeNode:
        try:
            record = next(records)
        except StopIteration:
            raise ValueError("tree record list ends inside a split") from None
        node = PRCTreeNode(
            nodescore=record.nodescore,
            nodelabel=record.nodelabel,
            depth=record.depth,
            n_samples=record.n_samples,
        )
        if record.feature_index is None:
            return node
        split = SplitCandidate(
            feature_index=record.feature_index,
            threshold=record.threshold,
            auprc=record.auprc if record.auprc is not None else 0.0,
            f1=record.f1 if record.f1 is not None else 0.0,
        )
        left = rebuild()
        right = rebuild()
        return node.model_copy(update={"split": split, "left": left, "right": right})

    root = rebuild()
    if next(records, None) is not None:
        raise ValueError("tree record list has nodes after the last leaf")
    return PRCTree(
        root=root,
        params=artifact.params,
        n_features=artifact.n_features,
        n_leaves=artifact.n_leaves,
    )
