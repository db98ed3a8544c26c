"""
Autoencoder-PRC-RF composition, evaluation metrics and the repeated-split
benchmark protocol.
"""

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from prcrf.autoencoder import AutoencoderModel, ae_init, ae_train, filter_dataset, fit_threshold
from prcrf.data import Dataset, split_indices, summarize
from prcrf.errors import BenchmarkError, DatasetError, TrainingError
from prcrf.forest import PRCForest, build_forest, predict_forest_batch
from prcrf.models import (
    METRIC_NAMES,
    POSITIVE,
    AEConfig,
    Algorithm,
    BenchmarkReport,
    ForestParams,
    MetricSet,
    RepetitionResult,
    SplitSpec,
)
from prcrf.prc_core import harmonic_mean
from prcrf.seeding import derive_seed
from prcrf.tree import build_tree, predict_tree_batch

logger = logging.getLogger(__name__)

MAX_FAILURE_RATE = 0.10


def compute_metrics(predicted: Sequence[int], actual: Sequence[int]) -> MetricSet:
    """Confusion-matrix metrics with +1 as the positive class; 0/0 ratios are 0."""
    predicted = np.asarray(predicted)
    actual = np.asarray(actual)
    if predicted.shape != actual.shape:
        raise DatasetError(f"{predicted.shape[0]} predictions for {actual.shape[0]} labels")
    if actual.shape[0] == 0:
        raise DatasetError("cannot score an empty prediction vector")

    pred_pos = predicted == POSITIVE
    act_pos = actual == POSITIVE
    tp = int(np.count_nonzero(pred_pos & act_pos))
    fp = int(np.count_nonzero(pred_pos & ~act_pos))
    tn = int(np.count_nonzero(~pred_pos & ~act_pos))
    fn = int(np.count_nonzero(~pred_pos & act_pos))

    undefined: List[str] = []

    def ratio(numerator: int, denominator: int, name: str) -> float:
        if denominator == 0:
            undefined.append(name)
            return 0.0
        return numerator / denominator

    recall = ratio(tp, tp + fn, "recall")
    specificity = ratio(tn, tn + fp, "specificity")
    precision = ratio(tp, tp + fp, "precision")
    accuracy = (tp + tn) / actual.shape[0]
    if recall + precision == 0:
        undefined.append("f1")
    f1 = harmonic_mean(recall, precision)
    return MetricSet(
        recall=recall,
        specificity=specificity,
        precision=precision,
        accuracy=accuracy,
        f1=f1,
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        undefined=undefined,
    )


def autoencoder_filter(d: Dataset, ae_config: AEConfig) -> Tuple[Dataset, AutoencoderModel, List[int]]:
    """Train an autoencoder on ``d``, fit its threshold and drop the flagged rows."""
    model = ae_init(ae_config, d.n_features)
    ae_train(model, d)
    fit_threshold(model, d)
    cleaned, flagged = filter_dataset(model, d)
    return cleaned, model, flagged


def train_ae_prc_rf(
    d_train: Dataset,
    ae_config: AEConfig,
    forest_params: ForestParams,
    n_threads: int = 1,
) -> Tuple[PRCForest, AutoencoderModel, List[int]]:
    """Filter the training set through an autoencoder, then grow the forest on the rest."""
    if not d_train.has_both_classes():
        raise DatasetError("training set needs both classes")
    cleaned, model, flagged = autoencoder_filter(d_train, ae_config)
    forest = build_forest(cleaned, forest_params, n_threads=n_threads)
    return forest, model, flagged


class AlgorithmSpec:
    """One benchmarked algorithm: its tag, kind and autoencoder settings."""

    def __init__(self, tag: str, algorithm: Algorithm, ae_config: AEConfig):
        self.tag = tag
        self.algorithm = algorithm
        self.ae_config = ae_config


def expand_algorithms(
    algorithms: Sequence[Algorithm],
    ae_config: AEConfig,
    quantiles: Optional[Sequence[float]] = None,
) -> List[AlgorithmSpec]:
    """One spec per algorithm, or per (AE algorithm, quantile) for a sweep."""
    specs = []
    for algorithm in algorithms:
        algorithm = Algorithm(algorithm)
        if algorithm.uses_autoencoder and quantiles:
            for q in quantiles:
                cfg = ae_config.model_copy(update={"filter_quantile": q})
                specs.append(AlgorithmSpec(f"{algorithm.value}[q={q:g}]", algorithm, cfg))
        else:
            specs.append(AlgorithmSpec(algorithm.value, algorithm, ae_config))
    tags = [s.tag for s in specs]
    if len(set(tags)) != len(tags):
        raise ValueError(f"duplicate algorithms requested: {tags}")
    return specs


def fit_and_predict(
    spec: AlgorithmSpec,
    train: Dataset,
    test: Dataset,
    forest_params: ForestParams,
    n_threads: int = 1,
) -> Tuple[np.ndarray, int]:
    """Predicted test labels and the number of training rows filtered out."""
    flagged: List[int] = []
    if spec.algorithm.uses_autoencoder:
        train, _, flagged = autoencoder_filter(train, spec.ae_config)

    if spec.algorithm.is_forest:
        forest = build_forest(train, forest_params, n_threads=n_threads)
        labels, _ = predict_forest_batch(forest, test.features)
    else:
        tree_params = forest_params.tree_params.model_copy(
            update={"rng_seed": derive_seed(forest_params.master_seed, 0)}
        )
        tree = build_tree(train, range(train.n_features), tree_params)
        labels, _ = predict_tree_batch(tree, test.features)
    return labels, len(flagged)


def _digest(indices: np.ndarray) -> str:
    return hashlib.sha256(np.asarray(indices, dtype=np.int64).tobytes()).hexdigest()[:16]


def _run_repetition(
    d: Dataset,
    specs: List[AlgorithmSpec],
    repetition: int,
    split: SplitSpec,
    forest_params: ForestParams,
) -> Tuple[int, Optional[List[RepetitionResult]], Optional[str]]:
    split_seed = derive_seed(split.seed, repetition)
    rep_forest = forest_params.model_copy(
        update={"master_seed": derive_seed(forest_params.master_seed, repetition)}
    )
    try:
        train_idx, test_idx = split_indices(d.labels, split.model_copy(update={"seed": split_seed}))
        train, test = d.subset(train_idx), d.subset(test_idx)
        digest = _digest(test_idx)
        results = []
        for spec in specs:
            rep_spec = AlgorithmSpec(
                spec.tag,
                spec.algorithm,
                spec.ae_config.model_copy(update={"seed": derive_seed(spec.ae_config.seed, repetition)}),
            )
            predicted, n_flagged = fit_and_predict(rep_spec, train, test, rep_forest)
            metrics = compute_metrics(predicted, test.labels)
            if metrics.undefined:
                logger.debug(f"repetition {repetition} {spec.tag}: 0/0 for {metrics.undefined}")
            results.append(RepetitionResult(
                algorithm=spec.tag,
                repetition=repetition,
                seed=split_seed,
                metrics=metrics,
                n_flagged=n_flagged,
                test_indices_digest=digest,
            ))
    except (TrainingError, DatasetError) as e:
        return repetition, None, str(e)
    logger.info(
        f"repetition {repetition}: "
        + ", ".join(f"{r.algorithm} F1 {r.metrics.f1:.4f}" for r in results)
    )
    return repetition, results, None


def mean_metrics(sets: Sequence[MetricSet]) -> MetricSet:
    """Arithmetic mean of each ratio; confusion counts are summed."""
    values = np.array([s.values() for s in sets], dtype=np.float64)
    means = values.mean(axis=0)
    undefined = sorted({name for s in sets for name in s.undefined})
    return MetricSet(
        **{name: float(v) for name, v in zip(METRIC_NAMES, means)},
        tp=sum(s.tp for s in sets),
        fp=sum(s.fp for s in sets),
        tn=sum(s.tn for s in sets),
        fn=sum(s.fn for s in sets),
        undefined=undefined,
    )


def run_benchmark(
    d: Dataset,
    algorithms: Sequence[Algorithm],
    repetitions: int,
    split: SplitSpec,
    ae_config: AEConfig,
    forest_params: ForestParams,
    n_threads: int = 1,
    quantiles: Optional[Sequence[float]] = None,
) -> BenchmarkReport:
    """Train and score every algorithm on the same ``repetitions`` random splits.

    Repetition r uses split seed derive_seed(split.seed, r) and forest/autoencoder
    seeds derived from their own base seeds and r. A repetition in which any
    algorithm fails is excluded for all of them; more than 10% excluded aborts.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")
    specs = expand_algorithms(algorithms, ae_config, quantiles)

    def run(r: int):
        return _run_repetition(d, specs, r, split, forest_params)

    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            outcomes = list(pool.map(run, range(repetitions)))
    else:
        outcomes = [run(r) for r in range(repetitions)]

    results: List[RepetitionResult] = []
    excluded: List[int] = []
    for repetition, rep_results, error in outcomes:
        if rep_results is None:
            logger.warning(f"repetition {repetition} excluded: {error}")
            excluded.append(repetition)
        else:
            results.extend(rep_results)
    if len(excluded) > MAX_FAILURE_RATE * repetitions:
        raise BenchmarkError(
            f"{len(excluded)} of {repetitions} repetitions failed (limit {MAX_FAILURE_RATE:.0%})"
        )

    tags = [s.tag for s in specs]
    means: Dict[str, MetricSet] = {
        tag: mean_metrics([r.metrics for r in results if r.algorithm == tag]) for tag in tags
    }
    reference = means[tags[0]]
    paired = {
        tag: {
            name: getattr(means[tag], name) - getattr(reference, name) for name in METRIC_NAMES
        }
        for tag in tags[1:]
    }
    return BenchmarkReport(
        dataset=summarize(d),
        algorithms=tags,
        repetitions=repetitions,
        seeds=[derive_seed(split.seed, r) for r in range(repetitions)],
        results=results,
        means=means,
        excluded_repetitions=excluded,
        paired_differences=paired,
    )
