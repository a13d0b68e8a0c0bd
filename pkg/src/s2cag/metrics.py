"""Clustering quality: external agreement, affinity-graph quality, diagnostics."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .smoothing import NsrMatrix, power_method

REPORT_SCHEMA_VERSION = 1


def _labels(a):
    labels = getattr(a, "labels", a)
    return np.asarray(labels, dtype=np.int64)


def _pair(pred, truth):
    pred, truth = _labels(pred), _labels(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape[0]} vs {truth.shape[0]}")
    return pred, truth


def contingency(pred, truth):
    pred, truth = _pair(pred, truth)
    _, p = np.unique(pred, return_inverse=True)
    _, t = np.unique(truth, return_inverse=True)
    table = np.zeros((p.max() + 1, t.max() + 1), dtype=np.int64)
    np.add.at(table, (p, t), 1)
    return table


def clustering_accuracy(pred, truth):
    """Best one-to-one cluster-to-class matching (Hungarian), as a fraction."""
    table = contingency(pred, truth)
    size = max(table.shape)
    padded = np.zeros((size, size), dtype=np.int64)
    padded[:table.shape[0], :table.shape[1]] = table
    rows, cols = linear_sum_assignment(padded, maximize=True)
    return float(padded[rows, cols].sum() / table.sum())


def _entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def nmi(pred, truth, average="arithmetic"):
    """Mutual information normalized by the mean (or max) of the entropies."""
    table = contingency(pred, truth).astype(np.float64)
    total = table.sum()
    h_p, h_t = _entropy(table.sum(1)), _entropy(table.sum(0))
    if h_p == 0.0 and h_t == 0.0:
        return 1.0
    joint = table / total
    outer = np.outer(table.sum(1), table.sum(0)) / total**2
    nz = joint > 0
    mi = float((joint[nz] * np.log(joint[nz] / outer[nz])).sum())
    if average == "arithmetic":
        norm = (h_p + h_t) / 2
    elif average == "max":
        norm = max(h_p, h_t)
    else:
        raise ValueError(f"unknown normalization '{average}'")
    return float(min(max(mi / norm, 0.0), 1.0))


def _comb2(x):
    x = np.asarray(x, dtype=np.float64)
    return x * (x - 1) / 2


def ari(pred, truth):
    table = contingency(pred, truth)
    n = table.sum()
    index = _comb2(table).sum()
    a, b = _comb2(table.sum(1)).sum(), _comb2(table.sum(0)).sum()
    total = _comb2(n)
    expected = a * b / total if total else 0.0
    best = (a + b) / 2
    if best == expected:
        return 1.0
    return float((index - expected) / (best - expected))


# ------------------------------------------------------- affinity quality

def affinity_conductance(z, a):
    """Total conductance of the clusters on the affinity graph ``W = Z Z^T``.

    Uses cluster row-sums of ``Z`` so ``W`` is never built.
    """
    z = z.z if isinstance(z, NsrMatrix) else np.asarray(z)
    labels = _labels(a)
    k = getattr(a, "k", int(labels.max()) + 1)
    sizes = np.bincount(labels, minlength=k)
    if np.any(sizes == 0):
        raise ValueError("conductance undefined for an empty cluster")
    s_all = z.sum(axis=0)
    s = np.zeros((k, z.shape[1]))
    np.add.at(s, labels, z)
    cross = s @ s_all - np.einsum("ij,ij->i", s, s)
    return float((cross / sizes).sum())


def affinity_modularity(op, a):
    """Modularity of the clusters on the normalized affinity graph."""
    labels = _labels(a)
    k = getattr(a, "k", int(labels.max()) + 1)
    sizes = np.bincount(labels, minlength=k)
    if np.any(sizes == 0):
        raise ValueError("modularity undefined for an empty cluster")
    s = np.zeros((k, op.z_hat.shape[1]))
    np.add.at(s, labels, op.z_hat)
    mass = np.bincount(labels, weights=op.omega, minlength=k)
    within = np.einsum("ij,ij->i", s, s) - op.gamma * mass**2 / op.omega_total
    return float(within.sum() / op.omega_total)


@dataclass
class QualityReport:
    acc: float | None = None
    nmi: float | None = None
    ari: float | None = None
    conductance: float | None = None
    modularity: float | None = None
    runtime_ms: float | None = None
    branch: str | None = None
    params: dict = field(default_factory=dict)

    def to_dict(self):
        out = asdict(self)
        out["schema_version"] = REPORT_SCHEMA_VERSION
        return out


def evaluate(assignment, truth=None, nsr=None, modularity_operator=None, nmi_average="arithmetic"):
    rep = assignment.report or {}
    q = QualityReport(runtime_ms=rep.get("timings_ms", {}).get("total"),
                      branch=rep.get("branch"), params=dict(rep.get("params", {})))
    if truth is not None:
        q.acc = clustering_accuracy(assignment, truth)
        q.nmi = nmi(assignment, truth, average=nmi_average)
        q.ari = ari(assignment, truth)
    if nsr is not None:
        q.conductance = affinity_conductance(nsr, assignment)
    if modularity_operator is not None:
        q.modularity = affinity_modularity(modularity_operator, assignment)
    return q


# ------------------------------------------------------------ diagnostics

@dataclass(eq=False)
class StochasticityDiagnostics:
    beta: np.ndarray
    pi: np.ndarray
    zz_rowsums: np.ndarray
    pi_lower: np.ndarray
    pi_upper: np.ndarray
    pi_lower_1hop: np.ndarray
    pi_upper_1hop: np.ndarray

    @property
    def rowsum_bounds_product(self):
        """``[min beta*pi, max beta*pi]``, the row-sum range claimed for ``Z Z^T``."""
        bp = self.beta * self.pi
        return float(bp.min()), float(bp.max())

    @property
    def rowsum_bounds(self):
        """``[min beta * min pi, max beta * max pi]``, which always contains the row sums."""
        return (float(self.beta.min() * self.pi.min()),
                float(self.beta.max() * self.pi.max()))

    def summary(self):
        lo, hi = self.rowsum_bounds
        plo, phi = self.rowsum_bounds_product
        zz = self.zz_rowsums
        return {
            "n": int(self.beta.shape[0]),
            "beta_sum": float(self.beta.sum()),
            "beta_mean": float(self.beta.mean()),
            "beta_var": float(self.beta.var()),
            "pi_mean": float(self.pi.mean()),
            "pi_var": float(self.pi.var()),
            "zz_rowsum_mean": float(zz.mean()),
            "zz_rowsum_var": float(zz.var()),
            "zz_rowsum_min": float(zz.min()),
            "zz_rowsum_max": float(zz.max()),
            "rowsum_bounds": [lo, hi],
            "rowsum_bounds_beta_pi": [plo, phi],
            "rowsum_within_beta_pi": bool(np.all((zz >= plo - 1e-8) & (zz <= phi + 1e-8))),
            "pi_bound_violations": int(np.sum((self.pi < self.pi_lower - 1e-10)
                                              | (self.pi > self.pi_upper + 1e-10))),
            "pi_bound_violations_1hop": int(np.sum((self.pi < self.pi_lower_1hop - 1e-10)
                                                   | (self.pi > self.pi_upper_1hop + 1e-10))),
        }


def _neighbourhood_extrema(adj, values, hops):
    """Per-vertex min and max of ``values`` over the closed ``hops``-ball."""
    lo, hi = values.copy(), values.copy()
    indptr, indices = adj.indptr, adj.indices
    starts = indptr[:-1]
    for _ in range(hops):
        new_lo = np.minimum.reduceat(lo[indices], starts)
        new_hi = np.maximum.reduceat(hi[indices], starts)
        if np.array_equal(new_lo, lo) and np.array_equal(new_hi, hi):
            break
        lo, hi = new_lo, new_hi
    return lo, hi


def stochasticity_report(ops, z, order=None, alpha=None):
    """How close ``Z Z^T`` is to a scaled stochastic matrix.

    ``beta`` are the row sums of ``Xh Xh^T``, ``pi`` the column sums of the
    propagation matrix ``sum_t w_t P^t``. The per-vertex bounds on ``pi`` use
    the degree ratio ``dh_l / dh_h`` over the vertices ``h`` that can reach
    ``l`` within ``order`` hops (the support of that column); the 1-hop
    variant is reported alongside for comparison.
    """
    if isinstance(z, NsrMatrix):
        order = z.order if order is None else order
        alpha = z.alpha if alpha is None else alpha
        z = z.z
    if order is None or alpha is None:
        raise ValueError("order and alpha are required when z is a plain array")
    x = ops.x_hat
    beta = np.asarray(x @ np.asarray(x.sum(axis=0)).ravel()).ravel()
    pi = power_method(ops.p_hat_t, np.ones(ops.n), order, alpha).ravel()
    zz = z @ z.sum(axis=0)
    dh = ops.ahat_rowsum
    adj = ops.p_hat
    lo_t, hi_t = _neighbourhood_extrema(adj, dh, order)
    lo_1, hi_1 = _neighbourhood_extrema(adj, dh, min(order, 1))
    return StochasticityDiagnostics(
        beta=beta, pi=pi, zz_rowsums=zz,
        pi_lower=dh / hi_t, pi_upper=dh / lo_t,
        pi_lower_1hop=dh / hi_1, pi_upper_1hop=dh / lo_1,
    )
