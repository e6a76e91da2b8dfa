"""Brute-force references for the tests. Nothing here imports solver internals."""
from __future__ import annotations

import itertools
import math

import numpy as np

from infstart.errors import NotInterior

MAX_N = 12
MAX_M = 8


class Infeasible(Exception):
    pass


class TooLarge(Exception):
    pass


def lp_optimum(problem, tol=1e-12):
    """``(f*, x*)`` for ``min <c,x> s.t. Ax = b, x >= 0`` by enumerating basic feasible solutions.

    Assumes the LP is bounded (true for the strictly dual-feasible instances
    used in tests).
    """
    if not problem.cone.is_orthant:
        raise ValueError("vertex enumeration needs an orthant cone")
    A, b, c = problem.A, problem.b, problem.c
    m, n = A.shape
    if n > MAX_N or m > MAX_M:
        raise TooLarge(f"n={n}, m={m} exceeds n<={MAX_N}, m<={MAX_M}")
    best = (math.inf, None)
    for basis in itertools.combinations(range(n), m):
        B = A[:, basis]
        if abs(np.linalg.det(B)) < 1e-12:
            continue
        xb = np.linalg.solve(B, b)
        if np.any(xb < -tol * (1.0 + np.abs(xb).max())):
            continue
        x = np.zeros(n)
        x[list(basis)] = np.maximum(xb, 0.0)
        f = float(c @ x)
        if f < best[0]:
            best = (f, x)
    if best[1] is None:
        raise Infeasible("no basic feasible solution")
    return best


def _unit(cone):
    return cone.unit()


def conjugate_value(barrier, s, grid=9, newton_tol=1e-14):
    """``sup_x -<s,x> - F(x)`` from a coarse grid of scaled candidates and damped Newton refinement.

    Uses only ``F``, its gradient and its Hessian on the primal side.
    """
    s = np.asarray(s, dtype=float)
    if not barrier.is_dual_interior(s):
        raise NotInterior("s must be interior to the dual cone")

    def obj(x):
        return -(s @ x) - barrier.value(x)

    rng = np.random.default_rng(0)
    cands = [barrier.cone.unit()]
    for _ in range(grid):
        z = barrier.cone.unit() + 0.5 * rng.standard_normal(barrier.dim) / math.sqrt(barrier.dim)
        if barrier.is_interior(z):
            cands.append(z)
    best_x, best_v = None, -math.inf
    for z in cands:
        for k in np.linspace(-6, 6, 4 * grid + 1):
            x = math.exp(k) * z
            v = obj(x)
            if v > best_v:
                best_x, best_v = x, v
    x = best_x
    for _ in range(200):
        g = s + barrier.grad(x)
        H = barrier.hess(x)
        h = -np.linalg.solve(H, g)
        lam = math.sqrt(max(float(h @ H @ h), 0.0))
        x = x + h / (1.0 + lam)
        if lam < newton_tol:
            break
    return obj(x)


def tiny_lp_path_x1(t, tol=1e-15):
    """``x1(t)`` on the central path of ``min x1 s.t. x1 + x2 = 1, x >= 0`` by bisection.

    Stationarity of ``t x1 - ln x1 - ln(1 - x1)``: ``t - 1/x1 + 1/(1 - x1) = 0``;
    the left side increases in ``x1``.
    """
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if t - 1.0 / mid + 1.0 / (1.0 - mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
