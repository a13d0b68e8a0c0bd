"""Discretizing an orthonormal embedding into clusters."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .linalg import small_svd


@dataclass(eq=False)
class ClusterAssignment:
    labels: np.ndarray
    k: int
    objective_trace: list = field(default_factory=list)
    iterations: int = 0
    report: dict = field(default_factory=dict)
    embedding: np.ndarray | None = field(default=None, repr=False)
    nsr: object = field(default=None, repr=False)
    operators: object = field(default=None, repr=False)
    modularity_operator: object = field(default=None, repr=False)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.k):
            raise ValueError(f"labels must lie in 0..{self.k - 1}")

    @property
    def n(self):
        return self.labels.shape[0]

    @property
    def sizes(self):
        return np.bincount(self.labels, minlength=self.k)

    def members(self, j):
        return np.flatnonzero(self.labels == j)


def vca_matrix(a):
    """Sparse ``n x k`` matrix with ``1/sqrt(|C_j|)`` at ``(i, label_i)``."""
    labels = a.labels if isinstance(a, ClusterAssignment) else np.asarray(a)
    k = a.k if isinstance(a, ClusterAssignment) else int(labels.max()) + 1
    sizes = np.bincount(labels, minlength=k).astype(np.float64)
    if np.any(sizes == 0):
        raise ValueError("empty cluster in assignment")
    n = labels.shape[0]
    return sp.csr_matrix((1.0 / np.sqrt(sizes[labels]), (np.arange(n), labels)), shape=(n, k))


def _dense_vca(labels, k):
    sizes = np.bincount(labels, minlength=k).astype(np.float64)
    c = np.zeros((labels.shape[0], k))
    c[np.arange(labels.shape[0]), labels] = 1.0 / np.sqrt(sizes[labels])
    return c


def _procrustes(y, c):
    # argmax_T trace(C^T Y T) over orthogonal T
    u, _, v = small_svd(y.T @ c)
    return u @ v.T


def _initial_rotation(y):
    """Columns are k nearly-orthogonal rows of ``y`` (row-normalized).

    Greedy selection: start from the row of largest norm, then repeatedly
    take the row least aligned with everything chosen so far. Only inner
    products are used, so the choice is invariant to rotating ``y``.
    """
    n, k = y.shape
    norms = np.linalg.norm(y, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    yn = y / safe[:, None]
    picks = [int(np.argmax(norms))]
    align = np.zeros(n)
    for _ in range(1, k):
        align += np.abs(yn @ yn[picks[-1]])
        align[picks] = np.inf
        picks.append(int(np.argmin(align)))
    return yn[picks].T


def _argmax_rows(m):
    # np.argmax returns the first maximum, i.e. the lowest column index on ties
    return np.argmax(m, axis=1)


def _repair_empty(labels, k, yt):
    """Move the worst-fitting vertex into each empty cluster."""
    labels = labels.copy()
    sizes = np.bincount(labels, minlength=k)
    for j in np.flatnonzero(sizes == 0):
        sizes = np.bincount(labels, minlength=k)
        c = _dense_vca_safe(labels, k, sizes)
        resid = np.linalg.norm(yt - c, axis=1)
        resid[sizes[labels] <= 1] = -np.inf
        i = int(np.argmax(resid))
        labels[i] = j
    return labels


def _dense_vca_safe(labels, k, sizes):
    c = np.zeros((labels.shape[0], k))
    c[np.arange(labels.shape[0]), labels] = 1.0 / np.sqrt(np.maximum(sizes[labels], 1))
    return c


def snem_round(y, max_iters=100, seed=0):
    """Round ``y`` (``n x k``, orthonormal columns) to k clusters.

    Alternates an orthogonal Procrustes fit of ``y T`` to the scaled
    indicator ``C`` with a row-wise argmax reassignment, minimizing
    ``||y T - C||_F``. A reassignment that would raise the objective is
    rejected and the loop stops, so the recorded trace never increases.
    ``seed`` is accepted for interface symmetry; every step is deterministic.
    """
    y = np.asarray(y, dtype=np.float64)
    n, k = y.shape
    if k > n:
        raise ValueError(f"cannot form {k} nonempty clusters from {n} vertices")
    if k == 1:
        return ClusterAssignment(np.zeros(n, dtype=np.int64), 1, [0.0], 0)

    t0 = _initial_rotation(y)
    labels = _repair_empty(_argmax_rows(y @ t0), k, y @ t0)
    c = _dense_vca(labels, k)
    t = _procrustes(y, c)
    obj = float(np.linalg.norm(y @ t - c))
    trace = [obj]
    it = 0
    for it in range(1, max_iters + 1):
        yt = y @ t
        proposal = _repair_empty(_argmax_rows(yt), k, yt)
        if np.array_equal(proposal, labels):
            break
        c_new = _dense_vca(proposal, k)
        if np.linalg.norm(yt - c_new) > obj:
            break
        labels, c = proposal, c_new
        t = _procrustes(y, c)
        obj = float(np.linalg.norm(y @ t - c))
        trace.append(obj)
    return ClusterAssignment(_align_names(labels, t), k, trace, it)


def _align_names(labels, t):
    # name cluster b after the embedding column a that T maps onto it
    from scipy.optimize import linear_sum_assignment

    rows, cols = linear_sum_assignment(-t)
    rename = np.empty(t.shape[1], dtype=np.int64)
    rename[cols] = rows
    return rename[labels]


def kmeans_round(y, k, seed=0, restarts=10):
    """Lloyd's k-means on the rows of ``y`` with k-means++ seeding."""
    from sklearn.cluster import KMeans

    y = np.asarray(y, dtype=np.float64)
    if k == 1:
        return ClusterAssignment(np.zeros(y.shape[0], dtype=np.int64), 1)
    km = KMeans(n_clusters=k, init="k-means++", n_init=restarts, random_state=seed)
    # sklearn relocates empty clusters to the points farthest from their centers
    labels = km.fit_predict(y)
    return ClusterAssignment(labels, k, [float(km.inertia_)], int(km.n_iter_))
