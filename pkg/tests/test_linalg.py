import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from infstart.errors import NotPositiveDefinite, SingularSystem
from infstart.linalg import KktFactor, KktSystem, SaddlePointFactor, cholesky, row_rank, ruiz_scaling, solve_kkt


def spd(rng, n, spread=1.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return Q @ np.diag(np.exp(spread * rng.standard_normal(n))) @ Q.T


def test_cholesky_roundtrip():
    M = spd(np.random.default_rng(0), 6)
    L = cholesky(M)
    assert np.allclose(L @ L.T, M)
    assert np.allclose(L, np.tril(L))


def test_cholesky_rejects_indefinite():
    with pytest.raises(NotPositiveDefinite):
        cholesky(np.diag([1.0, -1.0]))
    with pytest.raises(ValueError):
        cholesky(np.ones((2, 3)))


def test_row_rank():
    A = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 1.0, 0.0]])
    assert row_rank(A) == 2
    assert row_rank(np.eye(4)) == 4
    assert row_rank(np.zeros((2, 3))) == 0


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 10), m=st.integers(0, 4))
def test_kkt_residuals_small(seed, n, m):
    rng = np.random.default_rng(seed)
    m = min(m, n - 1)
    H = spd(rng, n, spread=2.0)
    G = rng.standard_normal((m, n))
    r1, r2 = rng.standard_normal(n), rng.standard_normal(m)
    h, mult = KktFactor(H, G).solve(r1, r2)
    assert np.linalg.norm(H @ h + G.T @ mult - r1) <= 1e-9 * (1 + np.linalg.norm(r1))
    assert np.linalg.norm(G @ h - r2) <= 1e-9 * (1 + np.linalg.norm(r2))


def test_solve_kkt_matches_dense():
    rng = np.random.default_rng(3)
    H, G = spd(rng, 5), rng.standard_normal((2, 5))
    r1 = rng.standard_normal(5)
    h, mult = solve_kkt(KktSystem(H, G, r1))
    K = np.block([[H, G.T], [G, np.zeros((2, 2))]])
    ref = np.linalg.solve(K, np.concatenate([r1, np.zeros(2)]))
    assert np.allclose(np.concatenate([h, mult]), ref)


def test_kkt_rejects_asymmetric():
    with pytest.raises(ValueError):
        KktFactor(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_ruiz_equilibrates():
    rng = np.random.default_rng(1)
    K = np.diag(10.0 ** rng.uniform(-8, 8, 6))
    K[0, 1] = K[1, 0] = 1e3
    d = ruiz_scaling(K, iters=20)
    rows = np.max(np.abs(d[:, None] * K * d[None, :]), axis=1)
    assert np.all(np.abs(rows - 1) < 1e-3)


def test_saddle_point_matches_dense():
    rng = np.random.default_rng(2)
    q = np.array([1.0, 1.0, 0.0, 1.0, 1.0])
    C = rng.standard_normal((3, 5))
    a, r = rng.standard_normal(5), rng.standard_normal(3)
    z, mult = SaddlePointFactor(q, C).solve(a, r)
    K = np.block([[np.diag(q), C.T], [C, np.zeros((3, 3))]])
    ref = np.linalg.solve(K, np.concatenate([a, r]))
    assert np.allclose(np.concatenate([z, mult]).astype(float), ref, atol=1e-12)


def test_saddle_point_warm_multiplier_is_neutral():
    rng = np.random.default_rng(4)
    q = np.ones(4)
    C = rng.standard_normal((2, 4))
    a = rng.standard_normal(4)
    fac = SaddlePointFactor(q, C)
    z0, m0 = fac.solve(a)
    z1, m1 = fac.solve(a, mult0=m0 + 0.3)
    assert np.allclose(z0.astype(float), z1.astype(float), atol=1e-14)
    assert np.allclose(m0.astype(float), m1.astype(float), atol=1e-14)


def test_saddle_point_singular():
    C = np.array([[1.0, 0.0], [2.0, 0.0]])
    with pytest.raises(SingularSystem):
        SaddlePointFactor(np.array([1.0, 1.0]), C)
