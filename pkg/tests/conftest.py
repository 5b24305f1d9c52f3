import numpy as np
import pytest

from nnkrel.embeddings import EmbeddingDataset, l2_normalize
from nnkrel.synthetic import generate_synthetic

ACCEPTANCE_LINES = []


def make_dataset(points, labels, num_classes=None, normalize=False):
    labels = np.asarray(labels)
    C = num_classes or max(2, int(labels.max()) + 1)
    ds = EmbeddingDataset(np.asarray(points, dtype=float), labels, C, np.arange(len(labels)))
    return l2_normalize(ds) if normalize else ds


def random_dataset(rng, n=60, d=8, C=3, normalize=True):
    X = rng.normal(size=(n, d))
    y = rng.integers(0, C, size=n)
    y[:C] = np.arange(C)
    return make_dataset(X, y, C, normalize)


@pytest.fixture(scope="session")
def separable():
    """C=10, d=32, 100 training samples per class, separation 20."""
    return generate_synthetic(10, 200, 32, 20.0, seed=0)


@pytest.fixture(scope="session")
def small_separable():
    return generate_synthetic(4, 40, 8, 20.0, seed=1)


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
