"""
Dense symmetric autoencoder used as a training-set anomaly filter.

The encoder maps the min-max normalized input through ``layer_widths`` down to
the bottleneck; the decoder mirrors those widths back to the input width.
Training minimises the mean squared reconstruction error with mini-batch SGD
or Adam. Rows whose reconstruction error exceeds a quantile of the training
errors are flagged and removed before the forest is grown.
"""

import logging
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from prcrf.data import Dataset, MinMaxTable, fit_minmax
from prcrf.errors import DatasetError, TrainingError
from prcrf.models import (
    NEGATIVE,
    POSITIVE,
    SCHEMA_VERSION,
    Activation,
    AEConfig,
    AutoencoderArtifact,
    FilterScope,
    Optimizer,
    TrainingPopulation,
    TrainReport,
)
from prcrf.seeding import derive_seed

logger = logging.getLogger(__name__)

# weights ~ U(-a, a) with a = sqrt(INIT_SCALE / fan_in)
INIT_SCALE = 6.0

_INIT_KEY = 0
_SHUFFLE_KEY = 1


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


# activation -> (f(z), f'(z) given z and f(z))
ACTIVATIONS: Dict[Activation, Tuple[Callable, Callable]] = {
    Activation.SIGMOID: (_sigmoid, lambda z, a: a * (1.0 - a)),
    Activation.RELU: (lambda z: np.maximum(z, 0.0), lambda z, a: (z > 0).astype(np.float64)),
    Activation.IDENTITY: (lambda z: z, lambda z, a: np.ones_like(z)),
}


class AutoencoderModel:
    """Weights, biases and fitted state of a symmetric dense autoencoder."""

    def __init__(
        self,
        config: AEConfig,
        input_width: int,
        weights: List[np.ndarray],
        biases: List[np.ndarray],
        norm_table: Optional[MinMaxTable] = None,
        threshold: Optional[float] = None,
    ):
        self.config = config
        self.input_width = input_width
        self.weights = weights
        self.biases = biases
        self.norm_table = norm_table
        self.threshold = threshold

        widths = config.resolve_widths(input_width)
        self.encoder_depth = len(widths) - 1
        self.activations = [config.hidden_activation] * (len(weights) - 1) + [config.output_activation]
        if weights[-1].shape[1] != input_width:
            raise ValueError("decoder output width must equal the input width")

    @property
    def widths(self) -> List[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def trained(self) -> bool:
        return self.norm_table is not None

    def normalize(self, features: np.ndarray) -> np.ndarray:
        if self.norm_table is None:
            return np.asarray(features, dtype=np.float64)
        return self.norm_table.apply(features)


def ae_init(config: AEConfig, input_width: int) -> AutoencoderModel:
    """Random weights scaled by fan-in, zero biases; deterministic in ``config.seed``."""
    widths = config.resolve_widths(input_width)
    if widths[0] != input_width:
        raise ValueError(f"layer_widths starts at {widths[0]} but the input has {input_width} columns")
    full = widths + widths[-2::-1]
    rng = np.random.default_rng(derive_seed(config.seed, _INIT_KEY))
    weights, biases = [], []
    for fan_in, fan_out in zip(full[:-1], full[1:]):
        limit = np.sqrt(INIT_SCALE / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return AutoencoderModel(config, input_width, weights, biases)


def _check_width(m: AutoencoderModel, X: np.ndarray) -> None:
    if X.shape[-1] != m.input_width:
        raise DatasetError(f"autoencoder expects {m.input_width} columns, got {X.shape[-1]}")


def _forward_layers(m: AutoencoderModel, X: np.ndarray) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """Pre-activations and activations per layer; activations[0] is the input."""
    pre, post = [], [X]
    for W, b, act in zip(m.weights, m.biases, m.activations):
        z = post[-1] @ W + b
        pre.append(z)
        post.append(ACTIVATIONS[act][0](z))
    return pre, post


def ae_forward(m: AutoencoderModel, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(latent, reconstruction) for an already-normalized row or matrix."""
    x = np.asarray(x, dtype=np.float64)
    _check_width(m, x)
    _, post = _forward_layers(m, x)
    return post[m.encoder_depth], post[-1]


def reconstruction_errors(m: AutoencoderModel, X: np.ndarray) -> np.ndarray:
    """Per-row mean squared error, normalizing with the stored fit-time table."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    _check_width(m, X)
    Xn = m.normalize(X)
    _, post = _forward_layers(m, Xn)
    return np.mean((post[-1] - Xn) ** 2, axis=1)


def reconstruction_error(m: AutoencoderModel, x: np.ndarray) -> float:
    return float(reconstruction_errors(m, np.asarray(x, dtype=np.float64).reshape(1, -1))[0])


def loss_and_gradients(
    m: AutoencoderModel, X: np.ndarray
) -> Tuple[float, List[np.ndarray], List[np.ndarray]]:
    """Mean squared reconstruction loss of normalized rows and its gradients."""
    pre, post = _forward_layers(m, X)
    residual = post[-1] - X
    loss = float(np.mean(residual ** 2))

    grad_w: List[np.ndarray] = [np.empty(0)] * len(m.weights)
    grad_b: List[np.ndarray] = [np.empty(0)] * len(m.biases)
    upstream = 2.0 * residual / residual.size
    for layer in range(len(m.weights) - 1, -1, -1):
        derivative = ACTIVATIONS[m.activations[layer]][1]
        delta = upstream * derivative(pre[layer], post[layer + 1])
        grad_w[layer] = post[layer].T @ delta
        grad_b[layer] = delta.sum(axis=0)
        upstream = delta @ m.weights[layer].T
    return loss, grad_w, grad_b


class _AdamState:
    def __init__(self, params: List[np.ndarray]):
        self.first = [np.zeros_like(p) for p in params]
        self.second = [np.zeros_like(p) for p in params]
        self.step = 0


def _apply_updates(
    m: AutoencoderModel,
    grads: List[np.ndarray],
    state: Optional[_AdamState],
) -> None:
    params = m.weights + m.biases
    cfg = m.config
    if cfg.optimizer == Optimizer.SGD:
        for p, g in zip(params, grads):
            p -= cfg.learning_rate * g
        return

    state.step += 1
    correction1 = 1.0 - cfg.beta1 ** state.step
    correction2 = 1.0 - cfg.beta2 ** state.step
    for p, g, m1, m2 in zip(params, grads, state.first, state.second):
        m1 *= cfg.beta1
        m1 += (1.0 - cfg.beta1) * g
        m2 *= cfg.beta2
        m2 += (1.0 - cfg.beta2) * g * g
        p -= cfg.learning_rate * (m1 / correction1) / (np.sqrt(m2 / correction2) + cfg.epsilon)


def population_mask(d: Dataset, population: TrainingPopulation) -> np.ndarray:
    """Rows the autoencoder learns from; majority ties resolve to -1."""
    if population == TrainingPopulation.ALL:
        return np.ones(d.n_rows, dtype=bool)
    negatives, positives = d.class_counts()
    majority = POSITIVE if positives > negatives else NEGATIVE
    return d.labels == majority


def ae_train(m: AutoencoderModel, d: Dataset) -> TrainReport:
    """Fit ``m`` in place on the configured training population of ``d``.

    Each entry of ``epoch_losses`` is the mean squared reconstruction error
    over the whole normalized population, evaluated after that epoch's last
    mini-batch update. It is not the average of the mini-batch losses seen
    during the epoch.
    """
    cfg = m.config
    if d.n_features != m.input_width:
        raise DatasetError(f"autoencoder expects {m.input_width} columns, dataset has {d.n_features}")
    rows = population_mask(d, cfg.training_population)
    if not rows.any():
        raise TrainingError("autoencoder training population is empty")

    population = d.features[rows]
    m.norm_table = fit_minmax(population)
    X = m.norm_table.apply(population)
    n = X.shape[0]

    rng = np.random.default_rng(derive_seed(cfg.seed, _SHUFFLE_KEY))
    state = _AdamState(m.weights + m.biases) if cfg.optimizer == Optimizer.ADAM else None
    losses: List[float] = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = X[order[start:start + cfg.batch_size]]
            _, grad_w, grad_b = loss_and_gradients(m, batch)
            _apply_updates(m, grad_w + grad_b, state)

        _, post = _forward_layers(m, X)
        loss = float(np.mean((post[-1] - X) ** 2))
        if not np.isfinite(loss):
            raise TrainingError(f"autoencoder training diverged at epoch {epoch} (loss {loss})")
        losses.append(loss)
        logger.debug(f"autoencoder epoch {epoch}/{cfg.epochs}: loss {loss:.6g}")

    logger.info(
        f"Trained autoencoder {m.widths} on {n} rows for {cfg.epochs} epochs "
        f"(loss {losses[0]:.6g} -> {losses[-1]:.6g})"
    )
    return TrainReport(epoch_losses=losses)


def fit_threshold(m: AutoencoderModel, d: Dataset) -> float:
    """Lower-interpolated ``filter_quantile`` of the population's reconstruction errors."""
    if not m.trained:
        raise TrainingError("fit_threshold needs a trained autoencoder")
    rows = population_mask(d, m.config.training_population)
    if not rows.any():
        raise TrainingError("threshold-fitting population is empty")
    errors = reconstruction_errors(m, d.features[rows])
    m.threshold = float(np.quantile(errors, m.config.filter_quantile, method="lower"))
    return m.threshold


def filter_dataset(m: AutoencoderModel, d: Dataset) -> Tuple[Dataset, List[int]]:
    """Drop rows whose reconstruction error is strictly above the threshold."""
    if m.threshold is None:
        raise TrainingError("filter_dataset needs a fitted threshold")
    errors = reconstruction_errors(m, d.features)
    if m.config.filter_scope == FilterScope.POPULATION:
        eligible = population_mask(d, m.config.training_population)
    else:
        eligible = np.ones(d.n_rows, dtype=bool)
    flagged = eligible & (errors > m.threshold)
    survivors = d.subset(np.flatnonzero(~flagged))

    if d.has_both_classes() and not survivors.has_both_classes():
        negatives, positives = d.class_counts()
        kept_neg, kept_pos = survivors.class_counts()
        raise TrainingError(
            f"filtering at threshold {m.threshold:.6g} would remove a whole class "
            f"(positives {positives} -> {kept_pos}, negatives {negatives} -> {kept_neg})"
        )
    flagged_rows = np.flatnonzero(flagged).tolist()
    logger.info(f"Autoencoder flagged {len(flagged_rows)} of {d.n_rows} rows")
    return survivors, flagged_rows


def autoencoder_to_artifact(m: AutoencoderModel) -> AutoencoderArtifact:
    return AutoencoderArtifact(
        schema_version=SCHEMA_VERSION,
        config=m.config,
        input_width=m.input_width,
        weights=[w.tolist() for w in m.weights],
        biases=[b.tolist() for b in m.biases],
        norm_min=m.norm_table.minimums.tolist() if m.norm_table is not None else None,
        norm_max=m.norm_table.maximums.tolist() if m.norm_table is not None else None,
        threshold=m.threshold,
    )


def autoencoder_from_artifact(artifact: AutoencoderArtifact) -> AutoencoderModel:
    if artifact.schema_version != SCHEMA_VERSION:
        raise ValueError(f"unsupported autoencoder schema version {artifact.schema_version}")
    table = None
    if artifact.norm_min is not None and artifact.norm_max is not None:
        table = MinMaxTable(minimums=artifact.norm_min, maximums=artifact.norm_max)
    return AutoencoderModel(
        config=artifact.config,
        input_width=artifact.input_width,
        weights=[np.array(w, dtype=np.float64).reshape(len(w), -1) for w in artifact.weights],
        biases=[np.array(b, dtype=np.float64) for b in artifact.biases],
        norm_table=table,
        threshold=artifact.threshold,
    )
