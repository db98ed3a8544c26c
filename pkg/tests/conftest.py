import numpy as np
import pytest

from prcrf.data import Dataset, make_cluster_with_outliers


def make_dataset(features, labels, name="toy"):
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features.reshape(-1, 1)
    return Dataset(
        name=name,
        feature_names=[f"f{j}" for j in range(features.shape[1])],
        features=features,
        labels=labels,
    )


@pytest.fixture
def toy4():
    """Four rows of one feature, the two smallest values positive."""
    return make_dataset([1.0, 2.0, 3.0, 4.0], [1, 1, -1, -1])


@pytest.fixture
def separable():
    """Positives at 0..4 and negatives at 10..14, each value repeated 8 times."""
    values = np.repeat(np.concatenate([np.arange(5.0), np.arange(10.0, 15.0)]), 8)
    labels = np.where(values < 5, 1, -1)
    return make_dataset(values, labels, name="separable")


@pytest.fixture
def signal_and_noise():
    """Feature 0 separates the classes, feature 1 is unrelated noise."""
    rng = np.random.default_rng(7)
    labels = np.where(rng.random(120) < 0.4, 1, -1)
    signal = np.where(labels == 1, 0.0, 1.0) + rng.normal(0.0, 0.1, size=120)
    noise = rng.normal(size=120)
    return make_dataset(np.column_stack([signal, noise]), labels, name="signal_noise")


@pytest.fixture
def random_dataset():
    rng = np.random.default_rng(11)
    labels = np.where(rng.random(90) < 0.35, 1, -1)
    features = rng.integers(0, 12, size=(90, 3)).astype(np.float64)
    return make_dataset(features, labels, name="random")


@pytest.fixture(scope="session")
def cluster_with_outliers():
    return make_cluster_with_outliers(n_inliers=950, n_outliers=50, n_features=8, seed=0)


def write_text(path, rows, header):
    path.write_text("\n".join([",".join(header)] + [",".join(map(str, r)) for r in rows]) + "\n")
    return path
