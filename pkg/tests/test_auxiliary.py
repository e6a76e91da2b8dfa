import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from infstart.auxiliary import AuxProblem, default_refs, hot_start_refs
from infstart.errors import NotInterior, OutOfDomain
from infstart.linalg import KktFactor
from infstart.model import PrimalDualTriple
from infstart.solvers import SolverOptions, minimize_phi_t, solve
from problems import interior_point, lp_suite, soc_suite, tiny_lp

PROBLEMS = lp_suite(5, seed=11, n_max=8, m_max=4) + soc_suite()[:2]


def test_default_refs():
    p = tiny_lp()
    r = default_refs(p)
    assert np.allclose(r.x_bar, 1) and np.allclose(r.s_bar, 1) and r.tau_bar == 1.0
    r = default_refs(p, np.array([2.0, 4.0]))
    assert np.allclose(r.s_bar, [0.5, 0.25])
    with pytest.raises(NotInterior):
        default_refs(p, np.array([1.0, 0.0]))


def test_hot_start_refs():
    p = tiny_lp()
    x = np.array([0.3, 0.7])
    r = hot_start_refs(p, PrimalDualTriple(x, -p.barrier.grad(x), np.zeros(1)))
    d = default_refs(p, x)
    assert np.allclose(r.x_bar, d.x_bar) and np.allclose(r.s_bar, d.s_bar)
    r = hot_start_refs(p, PrimalDualTriple(np.array([2.0, 3.0]), np.ones(2), np.zeros(1)))
    assert np.allclose(r.x_bar, 1)
    with pytest.raises(NotInterior):
        hot_start_refs(p, PrimalDualTriple(np.array([2.0, 3.0]), np.array([1.0, -1.0]), np.zeros(1)))


def test_target_vector():
    p = tiny_lp()
    start = PrimalDualTriple(np.array([0.5, 0.5]), np.array([2.0, 2.0]), np.zeros(1))
    aux = AuxProblem(p, 0.1, hot_start_refs(p, start))
    assert np.allclose(aux.g, [1, 2, 0, 0.4])
    # feasible pair with gap eps gives g = 0
    x = np.array([0.05, 0.95])
    y = np.array([-0.05])
    s = p.c - p.A.T @ y
    eps = float(p.c @ x - p.b @ y)
    aux = AuxProblem(p, eps, hot_start_refs(p, PrimalDualTriple(x, s, y)))
    assert np.allclose(aux.g, 0, atol=1e-15)
    # primal feasible only: g_y = 0
    aux = AuxProblem(p, 0.1, hot_start_refs(p, PrimalDualTriple(x, np.ones(2), np.ones(1))))
    assert aux.g[2] == 0.0


@pytest.mark.parametrize("prob", PROBLEMS)
def test_phi_at_zero(prob):
    aux = AuxProblem(prob, 1e-2)
    assert aux.value(aux.zero()) == pytest.approx(-prob.nu, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(k=st.integers(0, len(PROBLEMS) - 1), seed=st.integers(0, 2**32 - 1))
def test_gradient_and_hessian_match_finite_differences(k, seed):
    prob = PROBLEMS[k]
    aux = AuxProblem(prob, 0.1)
    rng = np.random.default_rng(seed)
    u = 0.05 * rng.standard_normal(aux.dim)
    if not aux.in_domain(u):
        return
    g, H = aux.grad(u), aux.hess(u)
    d = rng.standard_normal(aux.dim)
    step = 1e-5
    fd = (aux.value(u + step * d) - aux.value(u - step * d)) / (2 * step)
    assert fd == pytest.approx(g @ d, rel=1e-6, abs=1e-8)
    fd2 = (aux.grad(u + step * d) - aux.grad(u - step * d)) / (2 * step)
    assert np.allclose(fd2, H @ d, rtol=1e-5, atol=1e-6 * np.abs(H @ d).max())


def test_out_of_domain():
    aux = AuxProblem(tiny_lp(), 0.1)
    with pytest.raises(OutOfDomain):
        aux.point(np.array([-2.0, 0.0, 0.0, 0.0]))
    assert not aux.in_domain(np.array([-2.0, 0.0, 0.0, 0.0]))
    with pytest.raises(ValueError):
        AuxProblem(tiny_lp(), 0.0)


@pytest.mark.parametrize("prob", PROBLEMS)
def test_restricted_norm_matches_dense_kkt(prob):
    aux = AuxProblem(prob, 0.1)
    rng = np.random.default_rng(0)
    u = 0.02 * rng.standard_normal(aux.dim)
    v = rng.standard_normal(aux.dim)
    lam, h = aux.restricted_norm(u, v)
    H = aux.hess(u)
    h_ref, mult_ref = KktFactor(H, aux.G).solve(v)
    assert np.allclose(h, h_ref, rtol=1e-8, atol=1e-10)
    assert lam == pytest.approx(math.sqrt(v @ h_ref), rel=1e-8)
    assert np.linalg.norm(aux.G @ h) <= 1e-12 * (1 + np.linalg.norm(h))
    # homogeneity
    lam2, h2 = aux.restricted_norm(u, -3 * v)
    assert lam2 == pytest.approx(3 * lam) and np.allclose(h2, -3 * h)
    lam0, h0 = aux.restricted_norm(u, np.zeros(aux.dim))
    assert lam0 == 0 and np.all(h0 == 0)


@pytest.mark.parametrize("prob", PROBLEMS)
def test_target_vector_norm_at_zero(prob):
    aux = AuxProblem(prob, 1e-3)
    lam, _ = aux.restricted_norm(aux.zero(), aux.g)
    assert lam <= math.sqrt(aux.nu_bar) + 1e-12


def test_grad_t_linear():
    aux = AuxProblem(tiny_lp(), 0.1)
    u = np.array([0.1, -0.1, 0.2, 0.1])
    assert np.allclose(aux.grad_t(u, 0.0), aux.grad(u))
    assert np.allclose(aux.grad_t(u, 2.0) - aux.grad_t(u, 1.0), aux.g)


@pytest.mark.parametrize("prob", PROBLEMS)
def test_hot_start_endpoint(prob):
    rng = np.random.default_rng(3)
    m = prob.m
    start = PrimalDualTriple(interior_point(rng, prob.cone.blocks), interior_point(rng, prob.cone.blocks), rng.standard_normal(m))
    aux = AuxProblem(prob, 1e-2, hot_start_refs(prob, start))
    g1 = aux.grad_t(aux.zero(), 1.0)
    ref = np.concatenate([prob.A.T @ start.y, np.zeros(m), [-(prob.b @ start.y)]])
    assert np.allclose(g1, ref, atol=1e-10 * (1 + np.abs(ref).max()))
    lam, _ = aux.restricted_norm(aux.zero(), g1)
    assert lam <= 1e-10


def test_recover_tiny_lp():
    p = tiny_lp()
    rep = solve(p, 1e-3)
    t = rep.recovered
    assert p.barrier.is_interior(t.x) and p.barrier.is_dual_interior(t.s)
    assert t.x[0] < 1e-2 and abs(t.x[1] - 1) < 1e-2
    assert p.c @ t.x - p.b @ t.y == pytest.approx(1e-3, abs=1e-9)


def test_primal_path_point_pattern():
    p = tiny_lp()
    start = PrimalDualTriple(np.array([0.2, 0.5]), np.array([2.0, 1.0]), np.array([0.3]))
    aux = AuxProblem(p, 1e-2, hot_start_refs(p, start))
    for t in (0.0, 0.5):
        r = minimize_phi_t(aux, t, None, SolverOptions(trace=False))
        tri, pred = aux.primal_path_point(r.point, r.mult, t)
        assert max(aux.shadow_residuals(tri, r.point, t)) <= 1e-12
        if t == 0.0:
            assert p.c @ tri.x - p.b @ tri.y == pytest.approx(1e-2, abs=1e-12)
        else:
            assert pred.primal > 0
