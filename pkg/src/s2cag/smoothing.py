"""Normalized smoothed representations via truncated weighted power iteration."""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .linalg import as_dense, spmm


@dataclass(frozen=True, eq=False)
class NsrMatrix:
    z: np.ndarray
    alpha: float
    order: int

    @property
    def shape(self):
        return self.z.shape


def decay_weights(alpha, order):
    """L1-normalized weights ``alpha**t / sum_l alpha**l`` for ``t = 0..order``.

    Equal to ``(1-alpha) alpha^t / (1-alpha^(order+1))`` and continuous at
    ``alpha = 1`` where every weight is ``1/(order+1)``. Computed in log space
    so large ``alpha**order`` cannot overflow.
    """
    if alpha <= 0:
        raise ValueError(f"decay factor must be positive, got {alpha}")
    if order < 0:
        raise ValueError(f"order must be >= 0, got {order}")
    logw = np.arange(order + 1) * np.log(alpha)
    logw -= logw.max()
    w = np.exp(logw)
    return w / w.sum()


def power_method(p, m0, order, alpha):
    """``sum_t w_t p^t m0`` by the recurrence ``Z <- alpha p Z + w_0 m0``.

    Costs ``order`` sparse-dense products. ``m0`` may be sparse; the result
    is always dense.
    """
    w0 = decay_weights(alpha, order)[0]
    m0 = as_dense(m0)
    if m0.shape[0] != p.shape[1]:
        raise ValueError(f"shape mismatch: {p.shape} operator with {m0.shape} block")
    base = w0 * m0
    z = base.copy()
    for _ in range(order):
        z = alpha * spmm(p, z)
        z += base
    return z


def build_nsr(ops, order, alpha):
    return NsrMatrix(z=power_method(ops.p_hat, ops.x_hat, order, alpha),
                     alpha=float(alpha), order=int(order))


def propagation_matrix(p, order, alpha):
    """Dense ``sum_t w_t p^t``; O(n^2) memory, for diagnostics on small graphs."""
    p = p.toarray() if sp.issparse(p) else np.asarray(p)
    return power_method(p, np.eye(p.shape[0]), order, alpha)
