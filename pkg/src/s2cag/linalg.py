"""Dense and sparse kernels shared by the solvers.

Dense matrices are C-ordered float64 ``numpy`` arrays and sparse matrices are
``scipy.sparse`` CSR matrices throughout the package.
"""
import numpy as np
import scipy.linalg
import scipy.sparse as sp

# Name of the Gaussian stream produced by sample_gaussian. Bump the suffix if
# the construction below ever changes, since seeds are part of saved reports.
GAUSSIAN_GENERATOR = "pcg64-boxmuller-v1"


def sample_gaussian(rows, cols, seed):
    """I.i.d. standard normal ``rows x cols`` matrix.

    Uniform doubles come from PCG64 (a stable numpy bit stream) and are
    turned into normals with Box-Muller, so the same seed gives a
    bit-identical matrix on any numpy version.
    """
    if rows < 1 or cols < 1:
        raise ValueError(f"need rows, cols >= 1, got {rows}x{cols}")
    size = rows * cols
    half = (size + 1) // 2
    rng = np.random.Generator(np.random.PCG64(seed))
    u = rng.random((2, half))
    radius = np.sqrt(-2.0 * np.log1p(-u[0]))
    theta = 2.0 * np.pi * u[1]
    z = np.concatenate([radius * np.cos(theta), radius * np.sin(theta)])
    return np.ascontiguousarray(z[:size].reshape(rows, cols))


def as_dense(m):
    if sp.issparse(m):
        return np.asarray(m.toarray(), dtype=np.float64)
    return np.asarray(m, dtype=np.float64)


def spmm(s, m):
    """Sparse (or dense) ``s`` times dense ``m``; returns a dense array."""
    m = np.asarray(m, dtype=np.float64)
    vector = m.ndim == 1
    if vector:
        m = m[:, None]
    if s.shape[1] != m.shape[0]:
        raise ValueError(f"shape mismatch: {s.shape} @ {m.shape}")
    out = s @ m
    if sp.issparse(out):
        out = out.toarray()
    out = np.ascontiguousarray(out, dtype=np.float64)
    return out[:, 0] if vector else out


def qr_orthonormalize(h, seed=0):
    """Orthonormal basis for the columns of ``h`` via Householder QR.

    Returns ``(q, replaced)`` where ``replaced`` lists the column indices
    whose diagonal of R was numerically zero. Those columns are filled with
    seeded random vectors orthogonalized against the rest, so ``q`` always
    has orthonormal columns. Signs are fixed so that diag(R) >= 0, which
    makes ``q`` agree with classical Gram-Schmidt on full-rank input.
    """
    h = np.asarray(h, dtype=np.float64)
    n, r = h.shape
    if r > n:
        raise ValueError(f"cannot orthonormalize {r} columns in dimension {n}")
    if not np.all(np.isfinite(h)):
        raise ValueError("non-finite entries in QR input")
    q, rr = np.linalg.qr(h, mode="reduced")
    diag = np.diag(rr).copy()
    signs = np.where(diag < 0, -1.0, 1.0)
    q *= signs
    diag = np.abs(diag)

    scale = np.linalg.norm(h, axis=0).max() if r else 0.0
    tol = max(n, r) * np.finfo(np.float64).eps * scale
    replaced = [j for j in range(r) if diag[j] <= tol or scale == 0.0]
    if replaced:
        good = [j for j in range(r) if j not in replaced]
        basis = q[:, good]
        fill = sample_gaussian(n, len(replaced), seed + 7919)
        for col, j in enumerate(replaced):
            v = fill[:, col]
            for _ in range(2):
                v = v - basis @ (basis.T @ v)
            v /= np.linalg.norm(v)
            q[:, j] = v
            basis = np.column_stack([basis, v])
    return np.ascontiguousarray(q), replaced


def small_svd(m):
    """Thin SVD ``m = u @ diag(s) @ v.T`` with ``s`` nonincreasing."""
    m = np.asarray(m, dtype=np.float64)
    if not np.all(np.isfinite(m)):
        raise ValueError("non-finite entries in SVD input")
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    return u, s, vt.T


def dense_eig_oracle(m, sym_tol=1e-10):
    """Full eigendecomposition of a symmetric matrix.

    Eigenpairs are ordered by decreasing absolute eigenvalue. Intended for
    checking the iterative solvers on small instances.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if np.max(np.abs(m - m.T), initial=0.0) > sym_tol:
        raise ValueError("matrix is not symmetric")
    vals, vecs = np.linalg.eigh((m + m.T) / 2)
    order = np.argsort(-np.abs(vals), kind="stable")
    return vals[order], vecs[:, order]


def principal_angles(a, b):
    """Principal angles (radians, descending) between column spaces."""
    return scipy.linalg.subspace_angles(np.asarray(a), np.asarray(b))


def max_principal_angle(a, b):
    return float(principal_angles(a, b).max())


def fix_column_signs(y):
    """Flip columns so each one's largest-magnitude entry is positive."""
    y = np.array(y, dtype=np.float64, copy=True)
    if y.size == 0:
        return y
    pivots = np.argmax(np.abs(y), axis=0)
    signs = np.sign(y[pivots, np.arange(y.shape[1])])
    signs[signs == 0] = 1.0
    return y * signs


def orthonormal_completion(y, extra, seed=0):
    """Append ``extra`` orthonormal columns orthogonal to ``y``."""
    n, r = y.shape
    if r + extra > n:
        raise ValueError(f"cannot complete {r} columns to {r + extra} in dimension {n}")
    padded = np.column_stack([y, sample_gaussian(n, extra, seed)]) if extra else y
    q, _ = qr_orthonormalize(padded, seed=seed)
    out = q.copy()
    out[:, :r] = y
    return out
