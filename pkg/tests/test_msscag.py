import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from s2cag import MsscagParams, build_graph, cluster_msscag, normalize
from s2cag.linalg import dense_eig_oracle, max_principal_angle
from s2cag.metrics import clustering_accuracy
from s2cag.msscag import (DegenerateRowError, deflated_apply, normalize_nsr_rows,
                          subspace_iterate)
from s2cag.smoothing import build_nsr

from conftest import planted_graph, random_graph


def operator(rng, n, d, gamma=1.0, order=5, alpha=0.9):
    ops = normalize(random_graph(rng, n, d))
    return normalize_nsr_rows(build_nsr(ops, order, alpha), gamma)


def test_row_normalization_identities(rng):
    op = operator(rng, 25, 6)
    w = op.z_hat @ op.z_hat.T
    np.testing.assert_allclose(w.sum(1), op.omega, atol=1e-12)
    assert np.all(op.omega > 0)
    np.testing.assert_allclose(op.omega_total, op.omega.sum())


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 50), st.integers(1, 8), st.floats(0.0, 1.5), st.integers(0, 10_000))
def test_deflated_apply_matches_dense(n, d, gamma, seed):
    rng = np.random.default_rng(seed)
    op = operator(rng, n, d, gamma)
    q = rng.standard_normal((n, 3))
    np.testing.assert_allclose(deflated_apply(op, q), op.dense() @ q, atol=1e-10)
    np.testing.assert_allclose(deflated_apply(op, q[:, 0]), op.dense() @ q[:, 0], atol=1e-10)


def test_deflated_apply_shape_error(rng):
    op = operator(rng, 10, 3)
    with pytest.raises(ValueError, match="shape"):
        deflated_apply(op, np.ones((11, 2)))


def test_gamma_one_annihilates_ones_direction():
    # identical rows: Zh Zh^T and the rank-one term cancel exactly
    g = build_graph(4, [(0, 1), (1, 2), (2, 3), (3, 0)], np.ones((4, 2)))
    op = normalize_nsr_rows(build_nsr(normalize(g), 3, 0.9), 1.0)
    np.testing.assert_allclose(deflated_apply(op, np.ones(4)), 0.0, atol=1e-14)


def test_subspace_iteration_converges(rng):
    g = planted_graph(rng, 60, 3, 9)
    op = normalize_nsr_rows(build_nsr(normalize(g), 6, 1.2), 1.0)
    q, info = subspace_iterate(op, 3, 200, seed=1)
    _, v = dense_eig_oracle(op.dense())
    assert max_principal_angle(q, v[:, :3]) < 1e-6
    np.testing.assert_allclose(q.T @ q, np.eye(3), atol=1e-12)
    assert info["sweeps"] == 200


def test_early_stop(rng):
    g = planted_graph(rng, 60, 3, 9)
    op = normalize_nsr_rows(build_nsr(normalize(g), 6, 1.2), 1.0)
    _, info = subspace_iterate(op, 3, 500, seed=1, early_stop=1e-10)
    assert info["sweeps"] < 500 and info["last_change"] < 1e-10


def test_degenerate_row():
    # isolated vertex with no attributes has zero affinity mass
    x = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    g = build_graph(3, [(0, 1)], x)
    with pytest.raises(DegenerateRowError, match="vertex 2"):
        normalize_nsr_rows(build_nsr(normalize(g), 3, 0.9))


def test_params_validation():
    with pytest.raises(ValueError):
        MsscagParams(k=2, iters=0)
    with pytest.raises(ValueError):
        MsscagParams(k=2, gamma=-1)


def test_cluster_end_to_end(rng):
    g = planted_graph(rng, 200, 4, 16)
    a = cluster_msscag(g, MsscagParams(k=4))
    assert clustering_accuracy(a, g.labels) > 0.95
    assert a.report["branch"] == "subspace-iteration"
    assert a.embedding.shape == (200, 4)
    b = cluster_msscag(g, MsscagParams(k=4))
    np.testing.assert_array_equal(a.labels, b.labels)
    with pytest.raises(ValueError):
        cluster_msscag(random_graph(rng, 3, 2), MsscagParams(k=4))
