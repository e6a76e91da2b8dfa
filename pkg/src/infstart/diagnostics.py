"""Numerical checks of the structural bounds behind the solvers.

Central-path points, the reference-quality measures sigma and mu, Hessian lower
bounds, central-path orderings, and predicted versus actual iteration counts.
None of this is on the solve path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .barriers import Barrier, ConeSpec, Orthant
from .errors import NotInterior, NotStrictlyFeasible
from .linalg import KktFactor
from .model import ConicProblem

RCP_TOL = 1e-8
ORDER_SLACK = 1e-10
CENTER_TOL = 1e-12
BETA_HAT = 0.126
GAMMA_HAT = 0.164
# per-step decrease of the damped Newton method once lam >= 1/2
DAMPED_DECREASE = 0.5 - math.log(1.5)


@dataclass
class CentralPathPoint:
    t: float
    x: np.ndarray
    s: np.ndarray
    y: np.ndarray
    # |s + grad F(x)/t|, |<s,x> - nu/t|, |F(x) + F*(s) + nu - nu ln t|, |gap - nu/t|
    rcp_errors: tuple = ()
    newton_steps: int = 0

    @property
    def verified(self) -> bool:
        return bool(self.rcp_errors) and max(self.rcp_errors) <= RCP_TOL


def _relerr(a, b):
    return abs(a - b) / (1.0 + abs(b))


def rcp_errors(problem: ConicProblem, t, x, s, y):
    bar = problem.barrier
    nu = problem.nu
    e1 = float(np.linalg.norm(s + bar.grad(x) / t) / (1.0 + np.linalg.norm(s)))
    e2 = _relerr(float(s @ x), nu / t)
    e3 = _relerr(bar.value(x) + bar.dual_value(s), -nu + nu * math.log(t))
    e4 = _relerr(float(problem.c @ x - problem.b @ y), nu / t)
    return e1, e2, e3, e4


def _project(problem: ConicProblem, x):
    A, b = problem.A, problem.b
    return x - A.T @ np.linalg.solve(A @ A.T, A @ x - b)


def strictly_feasible_point(problem: ConicProblem, eps: float = 1.0):
    """An interior point of ``{Ax = b}``: the primal part of an ``eps``-solution, re-projected."""
    from .solvers import SolverOptions, solve

    rep = solve(problem, eps, SolverOptions(method="damped", trace=False))
    if not rep.converged:
        raise NotStrictlyFeasible(f"could not find a strictly feasible point ({rep.status})")
    x = _project(problem, rep.recovered.x)
    if not problem.barrier.is_interior(x):
        raise NotStrictlyFeasible("projected point left the cone")
    return x


def central_path_point(problem: ConicProblem, t: float, feasible_start=None, max_iters: int = 500) -> CentralPathPoint:
    """Minimize ``t<c,x> + F(x)`` on ``{Ax = b}`` by feasible-start damped Newton.

    ``s = -grad F(x)/t`` and ``y`` comes from the Newton multiplier. Without a
    start a strictly feasible point is computed first.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    bar = problem.barrier
    A, b, c = problem.A, problem.b, problem.c
    x = strictly_feasible_point(problem) if feasible_start is None else np.asarray(feasible_start, dtype=float)
    if not bar.is_interior(x):
        raise NotStrictlyFeasible("start is not interior to the cone")
    if np.linalg.norm(A @ x - b) > 1e-8 * (1.0 + np.linalg.norm(b)):
        raise NotStrictlyFeasible("start violates A x = b")
    x = _project(problem, x)
    if not bar.is_interior(x):
        raise NotStrictlyFeasible("start is too close to the boundary")

    w = np.zeros(problem.m)
    steps = 0
    best = math.inf
    stall = 0
    for _ in range(max_iters):
        fac = KktFactor(bar.hess(x), A)
        h, w = fac.solve(-(t * c + bar.grad(x)), refine=2)
        lam = math.sqrt(max(float(h @ bar.hess(x) @ h), 0.0))
        if lam <= CENTER_TOL:
            break
        # stop once round-off dominates
        stall = stall + 1 if lam >= 0.5 * best else 0
        best = min(best, lam)
        if best < 1e-8 and stall >= 2:
            break
        x = x + h / (1.0 + lam)
        steps += 1
    s = -bar.grad(x) / t
    # H h + A^T w = -(tc + grad F) at h = 0 gives s + A^T (-w/t) = c
    y = -w / t
    errs = rcp_errors(problem, t, x, s, y)
    return CentralPathPoint(t=float(t), x=x, s=s, y=y, rcp_errors=errs, newton_steps=steps)


# ---- sigma -------------------------------------------------------------------

def _order_bisect(cone: ConeSpec, pos, neg, lo=1.0, rtol=1e-13):
    """Smallest ``sig >= lo`` with ``sig * pos - neg`` in ``cone``.

    No membership slack here: the boundary is the quantity being measured, and
    an absolute slack would shift it by ``slack / pos_i``.
    """
    def ok(sig):
        return cone.contains(sig * pos - neg)

    if ok(lo):
        return lo
    hi = 2.0 * lo
    while not ok(hi):
        hi *= 2.0
        if hi > 1e300:
            return math.inf
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _sigma_closed(x_bar, s_bar, x1, s1):
    r = np.concatenate([x_bar / x1, x1 / x_bar, s_bar / s1, s1 / s_bar])
    return max(1.0, float(np.max(r)))


def _sigma_bisect(cone, x_bar, s_bar, x1, s1):
    # (1/sig) xb <= x1  <=>  sig x1 - xb in K; x1 <= sig xb  <=>  sig xb - x1 in K
    return max(
        _order_bisect(cone, x1, x_bar),
        _order_bisect(cone, x_bar, x1),
        _order_bisect(cone, s1, s_bar),
        _order_bisect(cone, s_bar, s1),
    )


def measure_sigma(cone: ConeSpec, x_bar, s_bar, path1: CentralPathPoint, method: str = "auto") -> float:
    """Smallest ``sigma >= 1`` that sandwiches ``x(1)`` and ``s(1)`` between ``x_bar, s_bar`` scaled by ``1/sigma`` and ``sigma``.

    ``method`` is ``"closed"`` (orthant only), ``"bisect"``, or ``"auto"``.
    """
    x_bar = np.asarray(x_bar, dtype=float)
    s_bar = np.asarray(s_bar, dtype=float)
    if method == "auto":
        method = "closed" if cone.is_orthant else "bisect"
    if method == "closed":
        if not cone.is_orthant:
            raise ValueError("closed-form sigma needs an orthant cone")
        return _sigma_closed(x_bar, s_bar, path1.x, path1.s)
    if method == "bisect":
        return _sigma_bisect(cone, x_bar, s_bar, path1.x, path1.s)
    raise ValueError(f"unknown method {method!r}")


# ---- mu ----------------------------------------------------------------------

def _whitened(H1, H2):
    L = np.linalg.cholesky(H2)
    M = sla.solve_triangular(L, sla.solve_triangular(L, H1, lower=True).T, lower=True)
    return 0.5 * (M + M.T)


def _is_psd(M):
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return False
    return True


def max_scaling(H1, H2, tol: float = 1e-10) -> float:
    """``max {lam : H1 - lam H2 >= 0}`` for positive definite ``H2``, by bisection on Cholesky success."""
    M = _whitened(np.asarray(H1, dtype=float), np.asarray(H2, dtype=float))
    eye = np.eye(M.shape[0])
    lo, hi = 0.0, 1.0
    while _is_psd(M - hi * eye):
        lo, hi = hi, 2.0 * hi
    while hi - lo > tol * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        if _is_psd(M - mid * eye):
            lo = mid
        else:
            hi = mid
    return lo


def max_scaling_eig(H1, H2) -> float:
    """Same quantity from the generalized eigenvalues (cross-check)."""
    return float(sla.eigh(H1, H2, eigvals_only=True)[0])


def measure_mu(barrier: Barrier, x_tilde, x_bar, tol: float = 1e-10) -> float:
    """Centrality of the references: ``max {lam : hess F(x~) >= lam hess F(x_bar)}``."""
    for name, v in (("x_tilde", x_tilde), ("x_bar", x_bar)):
        if not barrier.is_interior(v):
            raise NotInterior(f"{name} is not interior")
    return max_scaling(barrier.hess(x_tilde), barrier.hess(x_bar), tol)


def dual_mu_holds(barrier: Barrier, s_tilde, s_bar, mu: float, rtol: float = 1e-8) -> bool:
    """Does ``hess F*(s~) >= mu hess F*(s_bar)`` hold (up to ``rtol`` of the trace)?"""
    D = barrier.dual_hess(s_tilde) - mu * barrier.dual_hess(s_bar)
    return float(np.linalg.eigvalsh(D)[0]) >= -rtol * float(np.trace(barrier.dual_hess(s_tilde)))


def mu_from_refs(problem: ConicProblem, refs):
    """``(mu, dual_ok)`` for references built from ``refs.origin``."""
    bar = problem.barrier
    o = refs.origin
    mu = measure_mu(bar, o.x, refs.x_bar)
    return mu, dual_mu_holds(bar, o.s, refs.s_bar, mu)


# ---- Hessian bounds ----------------------------------------------------------

def sample_interior(cone: ConeSpec, rng, spread: float = 1.0) -> np.ndarray:
    """Random interior point; ``spread`` controls how far from the unit point it wanders."""
    parts = []
    for blk in cone.blocks:
        if isinstance(blk, Orthant):
            parts.append(np.exp(spread * rng.standard_normal(blk.dim)))
        else:
            tail = rng.standard_normal(blk.dim - 1) * np.exp(spread * rng.standard_normal())
            head = np.linalg.norm(tail) + np.exp(spread * rng.standard_normal())
            parts.append(np.concatenate([[head], tail]))
    return np.concatenate(parts)


@dataclass
class HessianBoundReport:
    c_k: float
    n_pairs: int = 0
    n_simplex: int = 0
    violations: list = field(default_factory=list)
    # smallest eigenvalue of the difference relative to its trace
    worst_margin: float = math.inf
    # largest ||x||_{x_bar} / nu over the simplex samples
    worst_size_ratio: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.violations


def check_hessian_bounds(barrier: Barrier, samples, simplex_draws: int = 3, rng=None, c_k=None) -> HessianBoundReport:
    """Check ``hess F(x) >= hess F(x_bar) / (c(K) <-grad F(x_bar), x>^2)`` for each pair ``(x, x_bar)``.

    For every ``x_bar`` a few points of the set ``<-grad F(x_bar), x> <= nu``
    are also drawn and ``||x||_{x_bar} <= nu`` is checked.
    """
    rng = np.random.default_rng(rng)
    cone = barrier.cone
    nu = barrier.nu
    ck = cone.c_k if c_k is None else float(c_k)
    rep = HessianBoundReport(c_k=ck)
    for i, (x, xb) in enumerate(samples):
        x = np.asarray(x, dtype=float)
        xb = np.asarray(xb, dtype=float)
        gb = -barrier.grad(xb)
        Hx, Hb = barrier.hess(x), barrier.hess(xb)
        D = Hx - Hb / (ck * float(gb @ x) ** 2)
        tr = float(np.trace(Hx))
        emin = float(np.linalg.eigvalsh(0.5 * (D + D.T))[0])
        rep.worst_margin = min(rep.worst_margin, emin / tr)
        rep.n_pairs += 1
        if emin < -1e-8 * tr:
            rep.violations.append(("hess", i, emin / tr))
        for _ in range(simplex_draws):
            z = sample_interior(cone, rng)
            z *= rng.uniform(0.05, 1.0) * nu / float(gb @ z)
            size = math.sqrt(float(z @ Hb @ z))
            rep.worst_size_ratio = max(rep.worst_size_ratio, size / nu)
            rep.n_simplex += 1
            if size > nu * (1.0 + 1e-10):
                rep.violations.append(("size", i, size / nu))
    return rep


def random_hessian_pairs(cone: ConeSpec, count: int, seed: int = 0, spread: float = 1.0):
    rng = np.random.default_rng(seed)
    return [(sample_interior(cone, rng, spread), sample_interior(cone, rng, spread)) for _ in range(count)]


# ---- central-path orderings --------------------------------------------------

@dataclass
class OrderingReport:
    t1: float
    t2: float
    # name -> worst relative margin (negative means violated)
    margins: dict = field(default_factory=dict)
    product_error: float = math.inf
    rcp_ok: bool = False

    @property
    def ok(self) -> bool:
        return self.rcp_ok and all(v >= 0.0 for v in self.margins.values()) and self.product_error <= RCP_TOL


def _order_margin(cone: ConeSpec, d) -> float:
    """Smallest block margin of ``d`` relative to the slack; ``>= 0`` means ``d`` is in the cone."""
    slack = ORDER_SLACK * (1.0 + np.linalg.norm(d))
    return float(np.min(cone.margins(d)) + slack)


def check_path_ordering(problem: ConicProblem, t1: float, t2: float, feasible_start=None) -> OrderingReport:
    """Orderings between central-path points at ``t1``, ``t2`` and ``1``, and the cross-product identity."""
    cone = problem.cone
    nu = problem.nu
    if feasible_start is None:
        feasible_start = strictly_feasible_point(problem)
    pts = {}
    for t in {t1, t2, 1.0}:
        pts[t] = central_path_point(problem, t, feasible_start)
    p1, p2 = pts[t1], pts[t2]
    rep = OrderingReport(t1=t1, t2=t2)
    rep.rcp_ok = all(p.verified for p in pts.values())
    k = t2 / (nu * (t1 + t2))
    rep.margins["s_low"] = _order_margin(cone, p1.s - k * p2.s)
    rep.margins["x_low"] = _order_margin(cone, p1.x - k * p2.x)
    one = pts[1.0]
    worst = math.inf
    for t in (t1, t2):
        p = pts[t]
        lo = 1.0 / (nu * (1.0 + t))
        hi = nu * (1.0 + 1.0 / t)
        for cur, ref in ((p.x, one.x), (p.s, one.s)):
            worst = min(worst, _order_margin(cone, cur - lo * ref), _order_margin(cone, hi * ref - cur))
    rep.margins["t1_bound"] = worst
    lhs = float(p1.s @ p2.x + p2.s @ p1.x)
    rep.product_error = _relerr(lhs, nu * (1.0 / t1 + 1.0 / t2))
    return rep


# ---- iteration bounds --------------------------------------------------------

@dataclass
class BoundLedger:
    sigma: float
    mu: float
    mu_bar: float
    zeta: float
    c_k: float
    eps: float
    nu: float
    nu_bar: float
    damped_expr: float
    damped_adjusted: float
    path_bound: float
    sigma_flagged: bool = False
    actual_damped: int | None = None
    actual_path: int | None = None

    @property
    def damped_ratio(self):
        if self.actual_damped is None or self.damped_expr <= 0:
            return None
        return self.actual_damped / self.damped_expr

    def to_dict(self):
        d = dict(self.__dict__)
        d["damped_ratio"] = self.damped_ratio
        return d


def zeta(nu: float, eps: float, sigma: float, sx: float) -> float:
    """``(nu sigma / eps) (nu + eps)^2 [1 + 2 sigma <s_bar, x_bar>]``."""
    return nu * sigma / eps * (nu + eps) ** 2 * (1.0 + 2.0 * sigma * sx)


def damped_bound(nu: float, eps: float, sigma: float) -> float:
    nu_bar = 2.0 * nu + 1.0
    return nu_bar * math.log((1.0 + sigma * (nu + eps)) / nu_bar) + nu * math.log(nu / eps)


def path_bound(nu: float, eps: float, sigma: float, sx: float, mu: float, c_k: float,
               beta_hat: float = BETA_HAT, gamma_hat: float = GAMMA_HAT) -> float:
    nu_bar = 2.0 * nu + 1.0
    mu_bar = min(mu, 1.0)
    z = zeta(nu, eps, sigma, sx)
    return (beta_hat + math.sqrt(nu_bar)) / gamma_hat * math.log(z * math.sqrt(nu_bar * c_k / mu_bar))


def predicted_bounds(aux, sigma: float | None = None, mu: float | None = None, report=None) -> BoundLedger:
    """Both iteration bounds for ``aux``; ``sigma`` falls back to ``nu + eps`` (flagged), ``mu`` to the refs' value.

    ``report`` (a ``SolveReport`` or a dict of them keyed by method) fills the
    actual counts (all steps taken, both phases).
    """
    nu, eps = aux.nu, aux.eps
    flagged = sigma is None
    if flagged:
        sigma = nu + eps
    if mu is None:
        mu = measure_mu(aux.barrier, aux.refs.origin.x, aux.refs.x_bar) if aux.refs.origin is not None else 1.0
    ck = aux.problem.cone.c_k
    sx = float(aux.refs.s_bar @ aux.refs.x_bar)
    de = damped_bound(nu, eps, sigma)
    led = BoundLedger(
        sigma=float(sigma), mu=float(mu), mu_bar=min(float(mu), 1.0), zeta=zeta(nu, eps, sigma, sx),
        c_k=ck, eps=eps, nu=nu, nu_bar=aux.nu_bar, damped_expr=de, damped_adjusted=de / DAMPED_DECREASE,
        path_bound=path_bound(nu, eps, sigma, sx, mu, ck), sigma_flagged=flagged,
    )
    reports = report if isinstance(report, dict) else ({report.method: report} if report is not None else {})
    if "damped" in reports:
        led.actual_damped = reports["damped"].n_steps
    if "path" in reports:
        led.actual_path = reports["path"].n_steps
    return led


def measure_refs(problem: ConicProblem, refs, feasible_start=None):
    """``(sigma, mu, path1)`` for the given references."""
    path1 = central_path_point(problem, 1.0, feasible_start)
    sigma = measure_sigma(problem.cone, refs.x_bar, refs.s_bar, path1)
    mu = measure_mu(problem.barrier, refs.origin.x, refs.x_bar) if refs.origin is not None else 1.0
    return sigma, mu, path1


# ---- barrier identities ------------------------------------------------------

def barrier_identity_errors(barrier: Barrier, x, rng=None, dikin_r: float = 0.9) -> dict:
    """Relative errors of the homogeneity and duality identities at ``x``, plus pass flags for the
    self-concordance finite-difference test and Dikin-ellipsoid membership."""
    from .barriers import dikin_check, scf_third_derivative_check

    rng = np.random.default_rng(rng)
    nu = barrier.nu
    g = barrier.grad(x)
    H = barrier.hess(x)
    s = -g
    h = rng.standard_normal(x.size)
    scale = np.linalg.norm(x)
    return {
        "grad_x": _relerr(float(g @ x), -nu),
        "hess_x": float(np.linalg.norm(H @ x + g) / (1.0 + np.linalg.norm(g))),
        "local_norm_x": _relerr(float(x @ H @ x), nu),
        "dual_interior": 0.0 if barrier.is_dual_interior(s) else 1.0,
        "dual_grad": float(np.linalg.norm(barrier.dual_grad(s) + x) / (1.0 + scale)),
        "dual_value": _relerr(barrier.value(x) + barrier.dual_value(s), -nu),
        "scf": 0.0 if scf_third_derivative_check(barrier, x, h) else 1.0,
        "dikin": 0.0 if dikin_check(barrier, x, dikin_r, samples=20, rng=rng) else 1.0,
    }
