import numpy as np
import numpy.testing as npt
import pytest
from pydantic import ValidationError

from prcrf.autoencoder import (
    AutoencoderModel,
    ae_forward,
    ae_init,
    ae_train,
    autoencoder_from_artifact,
    autoencoder_to_artifact,
    filter_dataset,
    fit_threshold,
    loss_and_gradients,
    population_mask,
    reconstruction_error,
    reconstruction_errors,
)
from prcrf.errors import TrainingError
from prcrf.models import (
    Activation,
    AEConfig,
    AutoencoderArtifact,
    FilterScope,
    Optimizer,
    TrainingPopulation,
)

from conftest import make_dataset


@pytest.fixture
def small_data():
    rng = np.random.default_rng(3)
    labels = np.array([1] * 12 + [-1] * 28)
    return make_dataset(rng.normal(size=(40, 3)), labels)


def numeric_gradient(m, X, params, index, step=1e-5):
    original = params[index]
    params[index] = original + step
    plus, _, _ = loss_and_gradients(m, X)
    params[index] = original - step
    minus, _, _ = loss_and_gradients(m, X)
    params[index] = original
    return (plus - minus) / (2 * step)


def test_default_widths_and_shapes():
    m = ae_init(AEConfig(), 8)
    assert m.widths == [8, 4, 2, 4, 8]
    assert [w.shape for w in m.weights] == [(8, 4), (4, 2), (2, 4), (4, 8)]
    assert all(np.all(b == 0) for b in m.biases)
    latent, recon = ae_forward(m, np.zeros(8))
    assert latent.shape == (2,)
    assert recon.shape == (8,)


def test_init_is_seeded():
    a = ae_init(AEConfig(seed=4), 5)
    b = ae_init(AEConfig(seed=4), 5)
    c = ae_init(AEConfig(seed=5), 5)
    for wa, wb in zip(a.weights, b.weights):
        npt.assert_array_equal(wa, wb)
    assert not np.array_equal(a.weights[0], c.weights[0])


def test_widths_must_start_at_input_width():
    with pytest.raises(ValueError, match="input has 4"):
        ae_init(AEConfig(layer_widths=[3, 2]), 4)
    with pytest.raises(ValidationError):
        AEConfig(layer_widths=[3])
    with pytest.raises(ValidationError):
        AEConfig(filter_quantile=0.0)


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(0)
    for trial in range(20):
        input_width = int(rng.integers(2, 7))
        hidden = int(rng.integers(1, 5))
        bottleneck = int(rng.integers(1, 3))
        cfg = AEConfig(
            layer_widths=[input_width, hidden, bottleneck],
            hidden_activation=Activation.SIGMOID,
            output_activation=Activation.IDENTITY,
            seed=trial,
        )
        m = ae_init(cfg, input_width)
        for b in m.biases:
            b[:] = rng.normal(scale=0.1, size=b.shape)
        X = rng.uniform(size=(int(rng.integers(1, 9)), input_width))

        _, grad_w, grad_b = loss_and_gradients(m, X)
        for params, grads in ((m.weights, grad_w), (m.biases, grad_b)):
            for p, g in zip(params, grads):
                numeric = np.zeros_like(p)
                for index in np.ndindex(p.shape):
                    numeric[index] = numeric_gradient(m, X, p, index)
                scale = max(np.max(np.abs(g) + np.abs(numeric)), 1e-8)
                assert np.max(np.abs(g - numeric)) / scale <= 1e-4


def test_linear_autoencoder_loss_decreases(small_data):
    cfg = AEConfig(
        layer_widths=[3, 3],
        hidden_activation=Activation.IDENTITY,
        epochs=50,
        learning_rate=1e-2,
        training_population=TrainingPopulation.ALL,
    )
    m = ae_init(cfg, 3)
    report = ae_train(m, small_data)
    assert len(report.epoch_losses) == 50
    assert report.epoch_losses[-1] < report.epoch_losses[0]
    assert all(loss >= 0 for loss in report.epoch_losses)


def test_training_is_deterministic(small_data):
    cfg = AEConfig(epochs=5, batch_size=8, seed=2)
    first = ae_train(ae_init(cfg, 3), small_data)
    second = ae_train(ae_init(cfg, 3), small_data)
    assert first.epoch_losses == second.epoch_losses


def test_sgd_divergence_raises(small_data):
    cfg = AEConfig(
        layer_widths=[3, 2],
        hidden_activation=Activation.IDENTITY,
        optimizer=Optimizer.SGD,
        learning_rate=1e6,
        epochs=30,
        training_population=TrainingPopulation.ALL,
    )
    with np.errstate(all="ignore"):
        with pytest.raises(TrainingError, match="diverged at epoch"):
            ae_train(ae_init(cfg, 3), small_data)


def test_errors_use_stored_normalization(small_data):
    m = ae_init(AEConfig(epochs=3, training_population=TrainingPopulation.ALL), 3)
    ae_train(m, small_data)
    X = small_data.features
    Xn = (X - X.min(axis=0)) / (X.max(axis=0) - X.min(axis=0))
    _, recon = ae_forward(m, Xn)
    npt.assert_allclose(reconstruction_errors(m, X), np.mean((recon - Xn) ** 2, axis=1))
    assert reconstruction_error(m, X[0]) == pytest.approx(reconstruction_errors(m, X)[0])

    shifted = X + 100.0
    assert np.all(reconstruction_errors(m, shifted) > reconstruction_errors(m, X).max())


def test_population_mask(small_data):
    assert population_mask(small_data, TrainingPopulation.ALL).all()
    majority = population_mask(small_data, TrainingPopulation.MAJORITY)
    npt.assert_array_equal(majority, small_data.labels == -1)

    tied = make_dataset([[0.0], [1.0]], [1, -1])
    npt.assert_array_equal(population_mask(tied, TrainingPopulation.MAJORITY), [False, True])


def test_threshold_is_lower_quantile(small_data):
    m = ae_init(AEConfig(epochs=2, filter_quantile=0.9), 3)
    ae_train(m, small_data)
    threshold = fit_threshold(m, small_data)
    negatives = small_data.features[small_data.labels == -1]
    expected = np.quantile(reconstruction_errors(m, negatives), 0.9, method="lower")
    assert threshold == expected


def test_majority_population_never_removes_minority_rows(small_data):
    m = ae_init(AEConfig(epochs=2, filter_quantile=0.5), 3)
    ae_train(m, small_data)
    fit_threshold(m, small_data)
    cleaned, flagged = filter_dataset(m, small_data)
    assert flagged
    assert all(small_data.labels[i] == -1 for i in flagged)
    assert cleaned.class_counts() == (28 - len(flagged), 12)


def test_quantile_one_flags_nothing(small_data):
    m = ae_init(AEConfig(epochs=2, filter_quantile=1.0, training_population=TrainingPopulation.ALL), 3)
    ae_train(m, small_data)
    fit_threshold(m, small_data)
    cleaned, flagged = filter_dataset(m, small_data)
    assert flagged == []
    assert cleaned.n_rows == small_data.n_rows


def test_filter_needs_fitted_threshold(small_data):
    m = ae_init(AEConfig(epochs=1), 3)
    with pytest.raises(TrainingError):
        fit_threshold(m, small_data)
    ae_train(m, small_data)
    with pytest.raises(TrainingError):
        filter_dataset(m, small_data)


def test_filter_refuses_to_remove_a_class():
    rng = np.random.default_rng(1)
    d = make_dataset(rng.normal(size=(30, 2)), [-1] * 27 + [1] * 3)
    cfg = AEConfig(epochs=1, training_population=TrainingPopulation.ALL, filter_scope=FilterScope.ALL)
    m = ae_init(cfg, 2)
    ae_train(m, d)
    errors = reconstruction_errors(m, d.features)
    m.threshold = float(errors[d.labels == 1].min()) - 1e-9
    with pytest.raises(TrainingError, match="remove a whole class"):
        filter_dataset(m, d)


def test_flags_injected_outliers(cluster_with_outliers):
    d, outliers = cluster_with_outliers
    cfg = AEConfig(filter_quantile=0.95, training_population=TrainingPopulation.ALL, seed=0)
    m = ae_init(cfg, d.n_features)
    ae_train(m, d)
    fit_threshold(m, d)
    cleaned, flagged = filter_dataset(m, d)
    assert len(set(flagged) & set(outliers.tolist())) >= 40
    assert cleaned.n_rows == d.n_rows - len(flagged)


def test_artifact_round_trip(small_data):
    m = ae_init(AEConfig(epochs=3), 3)
    ae_train(m, small_data)
    fit_threshold(m, small_data)
    text = autoencoder_to_artifact(m).model_dump_json()
    restored = autoencoder_from_artifact(AutoencoderArtifact.model_validate_json(text))
    assert restored.threshold == m.threshold
    npt.assert_array_equal(
        reconstruction_errors(restored, small_data.features),
        reconstruction_errors(m, small_data.features),
    )


def test_zero_learning_rate_leaves_weights_unchanged(small_data):
    cfg = AEConfig(epochs=4, batch_size=8, learning_rate=0.0, training_population=TrainingPopulation.ALL)
    m = ae_init(cfg, 3)
    weights = [w.copy() for w in m.weights]
    biases = [b.copy() for b in m.biases]
    report = ae_train(m, small_data)
    for before, after in zip(weights + biases, m.weights + m.biases):
        npt.assert_array_equal(before, after)
    assert len(set(report.epoch_losses)) == 1


def test_reconstruction_error_of_zero_output():
    m = AutoencoderModel(
        AEConfig(layer_widths=[2, 1]),
        2,
        weights=[np.zeros((2, 1)), np.zeros((1, 2))],
        biases=[np.zeros(1), np.zeros(2)],
    )
    assert reconstruction_error(m, np.array([1.0, 0.0])) == 0.5
