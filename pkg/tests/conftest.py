import os

import numpy as np
import pytest

from s2cag import build_graph

ACCEPTANCE_LINES = []


def random_graph(rng, n, d, p=0.15, density=0.5, labels=None):
    """Erdos-Renyi edges and sparse nonnegative attributes with no zero rows."""
    up = np.triu(rng.random((n, n)) < p, 1)
    edges = np.argwhere(up)
    x = rng.random((n, d)) * (rng.random((n, d)) < density)
    x[np.arange(n), rng.integers(0, d, n)] += rng.random(n) + 0.1
    return build_graph(n, edges, x, labels=labels)


def planted_graph(rng, n, k, d, p_in=0.2, p_out=0.02, noise=0.3):
    """Stochastic block model with attributes that weakly indicate the block."""
    lab = np.arange(n) % k
    rng.shuffle(lab)
    same = lab[:, None] == lab[None, :]
    up = np.triu(rng.random((n, n)) < np.where(same, p_in, p_out), 1)
    x = rng.random((n, d)) * noise
    for j in range(k):
        x[lab == j, j % d] += 1.0
    return build_graph(n, np.argwhere(up), x, labels=lab)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def data_dir():
    return os.environ.get("SSCAG_DATA_DIR", os.path.join(os.getcwd(), "data"))


def dataset_paths(name):
    """``(edges, attrs, labels)`` under the data directory, or None if absent."""
    base = os.path.join(data_dir(), name)
    edges = os.path.join(base, "edges.txt")
    labels = os.path.join(base, "labels.tsv")
    for attrs in ("attrs.mtx", "attrs.tsv"):
        path = os.path.join(base, attrs)
        if os.path.isfile(edges) and os.path.isfile(path) and os.path.isfile(labels):
            return edges, path, labels
    return None


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
