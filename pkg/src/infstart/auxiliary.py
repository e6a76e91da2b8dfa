"""The auxiliary barrier problem whose minimizer encodes a strictly feasible eps-solution.

For reference points ``x_bar in int K``, ``s_bar in int K*`` and ``tau_bar > 0``
the objective over ``u = (x, y, tau)`` with ``A x = tau b`` is

    Phi(u) = F(x_bar + x) + F*(s_bar + tau c - A^T y) - ln(ell(u)),
    ell(u) = tau_bar - <c, x> + <b, y> - eps tau.

``Phi`` is a self-concordant barrier with parameter ``2 nu + 1``.
The parametric family ``Phi_t(u) = t <g, u> + Phi(u)`` has ``u = 0`` as its
minimizer at ``t = 1`` and the target minimizer at ``t = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import ddarith as dd
from .barriers import Barrier
from .errors import NotInterior, OutOfDomain
from .linalg import SaddlePointFactor
from .model import ConicProblem, PrimalDualTriple, Residuals

LD = np.longdouble


@dataclass(frozen=True)
class ReferencePoints:
    x_bar: np.ndarray
    s_bar: np.ndarray
    tau_bar: float = 1.0
    # the triple (x~, s~, y~) the references were built from
    origin: PrimalDualTriple | None = None


def default_refs(problem: ConicProblem, x_bar=None) -> ReferencePoints:
    """``tau_bar = 1``, ``s_bar = -grad F(x_bar)``; ``x_bar`` defaults to the cone's unit point."""
    bar = problem.barrier
    x_bar = problem.cone.unit() if x_bar is None else np.asarray(x_bar, dtype=float)
    if not bar.is_interior(x_bar):
        raise NotInterior("reference point x_bar must be interior")
    s_bar = -bar.grad(x_bar)
    origin = PrimalDualTriple(x=x_bar.copy(), s=s_bar.copy(), y=np.zeros(problem.m))
    return ReferencePoints(x_bar=x_bar, s_bar=s_bar, tau_bar=1.0, origin=origin)


def hot_start_refs(problem: ConicProblem, start: PrimalDualTriple) -> ReferencePoints:
    """References built from a guess ``(x~, s~, y~)``: ``x_bar = -grad F*(s~)``, ``s_bar = -grad F(x~)``."""
    bar = problem.barrier
    x_t = np.asarray(start.x, dtype=float)
    s_t = np.asarray(start.s, dtype=float)
    y_t = np.asarray(start.y, dtype=float)
    if not bar.is_interior(x_t):
        raise NotInterior("hot-start x must be interior to K")
    if not bar.is_dual_interior(s_t):
        raise NotInterior("hot-start s must be interior to K*")
    if y_t.shape != (problem.m,):
        raise ValueError(f"hot-start y must have length {problem.m}")
    return ReferencePoints(
        x_bar=-bar.dual_grad(s_t),
        s_bar=-bar.grad(x_t),
        tau_bar=1.0,
        origin=PrimalDualTriple(x=x_t.copy(), s=s_t.copy(), y=y_t.copy()),
    )


@dataclass
class Direction:
    """Newton-type direction at an ``AuxPoint``.

    ``h`` is in ``u`` coordinates; ``dx``, ``ds`` and ``dl`` are the matching
    changes of ``x_bar + x``, ``s_bar + tau c - A^T y`` and ``ell``, solved for
    directly so that they keep full relative accuracy when ``u`` is large.
    """

    lam: float
    h: np.ndarray
    mult: np.ndarray
    dx: np.ndarray
    ds: np.ndarray
    dl: float
    # full multiplier vector of the scaled system, reusable as a warm start
    kkt_mult: np.ndarray | None = None


class AuxPoint:
    """A point ``u`` of the auxiliary problem with lazily cached barrier evaluations.

    The barrier arguments ``x_arg = x_bar + x``, ``s_arg = s_bar + tau c - A^T y``
    and ``ell`` are stored alongside ``u``. Iterates produced by ``advance``
    update them incrementally: recomputing ``s_arg`` from ``y`` and ``tau``,
    which grow like ``1/eps``, cancels away most of its significant digits.

    State is held in ``np.longdouble``. Near the minimizer the entries grow
    like ``1/eps`` and rounding them to double already moves the minimizer by
    about ``1e-16 / eps`` in the local norm; the extra bits keep that below the
    Newton tolerance for small ``eps``.
    """

    def __init__(self, aux: "AuxProblem", u, state=None):
        self.aux = aux
        self.u = np.asarray(u).astype(LD)
        p = aux.problem
        self.x, self.y, self.tau = aux.split(self.u)
        if state is None:
            self.x_arg = aux.refs.x_bar + self.x
            self.s_arg = aux.refs.s_bar + self.tau * p.c - p.A.T @ self.y
            self.ell = aux.refs.tau_bar - p.c @ self.x + p.b @ self.y - aux.eps * self.tau
        else:
            self.x_arg, self.s_arg, self.ell = state
        bar = aux.barrier
        if not bar.is_interior(self.x_arg):
            raise OutOfDomain("x_bar + x left the interior of K")
        if not bar.is_dual_interior(self.s_arg):
            raise OutOfDomain("s_bar + tau c - A^T y left the interior of K*")
        if not (self.ell > 0.0 and np.isfinite(self.ell)):
            raise OutOfDomain(f"gap denominator ell(u) = {self.ell:.3e} is not positive")

    def advance(self, d: Direction, alpha: float) -> "AuxPoint":
        """The point ``u + alpha h`` with its barrier arguments updated in place of recomputed."""
        state = (self.x_arg + alpha * d.dx, self.s_arg + alpha * d.ds, self.ell + alpha * d.dl)
        return AuxPoint(self.aux, self.u + alpha * d.h, state)

    @cached_property
    def value(self) -> float:
        bar = self.aux.barrier
        return bar.value(self.x_arg) + bar.dual_value(self.s_arg) - float(np.log(self.ell))

    @cached_property
    def primal_grad(self):
        return self.aux.barrier.grad(self.x_arg)

    @cached_property
    def dual_grad(self):
        return self.aux.barrier.dual_grad(self.s_arg)

    @cached_property
    def grad(self) -> np.ndarray:
        p = self.aux.problem
        gx = self.primal_grad
        gs = self.dual_grad
        # -grad(ln ell) = -(-c, b, -eps) / ell
        g = np.concatenate(
            [
                gx + p.c / self.ell,
                -p.A @ gs - p.b / self.ell,
                [p.c @ gs + self.aux.eps / self.ell],
            ]
        )
        return g.astype(float)

    @cached_property
    def hess(self) -> np.ndarray:
        aux = self.aux
        p = aux.problem
        n = p.n
        N = aux.dim
        H = np.zeros((N, N))
        H[:n, :n] = aux.barrier.hess(self.x_arg)
        # F*(s_bar + M w) with w = (y, tau), M = [-A^T | c]
        M = np.hstack([-p.A.T, p.c[:, None]])
        Hs = aux.barrier.dual_hess(self.s_arg)
        H[n:, n:] = M.T @ Hs @ M
        d = aux.ell_grad / float(self.ell)
        H += np.outer(d, d)
        return 0.5 * (H + H.T)

    @cached_property
    def _wx(self):
        return self.aux.barrier.hess_inv_factor(self.x_arg)

    @cached_property
    def _ws(self):
        return self.aux.barrier.dual_hess_inv_factor(self.s_arg)

    @cached_property
    def kkt(self) -> SaddlePointFactor:
        """Scaled saddle-point factorization for the restricted Newton system.

        Unknowns are ``(p, h_y, h_tau, q, zeta)`` with ``h_x = Wx p``,
        ``M h_w = Ws q`` and ``ell zeta = <ell_grad, h>``, where ``Wx Wx^T`` and
        ``Ws Ws^T`` invert the two barrier Hessians. The quadratic form becomes
        ``|p|^2 + |q|^2 + zeta^2``, so the reduced Hessian in ``(y, tau)``,
        whose condition number grows like ``1/eps^2``, is never formed.
        """
        aux = self.aux
        p = aux.problem
        n, m = p.n, p.m
        Wx, Ws = self._wx, self._ws
        nz = 2 * n + m + 2
        C = np.zeros((m + n + 1, nz), dtype=LD)
        iy, it, iq, iz = n, n + m, n + m + 1, 2 * n + m + 1
        # A h_x - h_tau b = 0
        C[:m, :n] = p.A @ Wx
        C[:m, it] = -p.b
        # Ws q - M h_w = 0
        C[m : m + n, iy:it] = p.A.T
        C[m : m + n, it] = -p.c
        C[m : m + n, iq:iz] = Ws
        # ell zeta - <ell_grad, h> = 0
        C[m + n, :n] = p.c @ Wx
        C[m + n, iy:it] = -p.b
        C[m + n, it] = aux.eps
        C[m + n, iz] = self.ell
        qdiag = np.concatenate([np.ones(n), np.zeros(m + 1), np.ones(n), [1.0]])
        return SaddlePointFactor(qdiag, C)

    def _direction(self, a, mult0=None) -> Direction:
        p = self.aux.problem
        n, m = p.n, p.m
        z, mu = self.kkt.solve(a, mult0=mult0)
        pz, hw, q, zeta = z[:n], z[n : n + m + 1], z[n + m + 1 : 2 * n + m + 1], z[-1]
        dx = self._wx @ pz
        lam = float(np.sqrt(pz @ pz + q @ q + zeta * zeta))
        return Direction(
            lam=lam,
            h=np.concatenate([dx, hw]),
            mult=mu[:m],
            dx=dx,
            ds=self._ws @ q,
            dl=self.ell * zeta,
            kkt_mult=mu,
        )

    def direction(self, v) -> Direction:
        """Maximizer of ``2<v, h> - <hess h, h>`` over ``A h_x = h_tau b`` for a vector ``v``."""
        v = np.asarray(v).astype(LD)
        n = self.aux.problem.n
        a = np.concatenate([self._wx.T @ v[:n], v[n:], np.zeros(n + 1, dtype=LD)])
        return self._direction(a)

    def newton(self, t: float = 0.0, warm: Direction | None = None) -> Direction:
        """Newton direction for ``Phi_t = t <g, u> + Phi``.

        The gradient of ``Phi`` enters through the barrier arguments, so the
        large cancelling terms of its ``u``-coordinate form never appear. With a
        warm start the system is solved for the multiplier correction; its
        right-hand side ``a - C^T mult0`` is O(lam) after cancelling O(|u|)
        terms, so it is formed in pair arithmetic.
        """
        aux = self.aux
        p = aux.problem
        n, m = p.n, p.m
        bar = aux.barrier
        Wx, Ws = self._wx, self._ws
        tg = (t * aux.g).astype(LD)
        mu0 = np.zeros(m + n + 1, dtype=LD) if warm is None else warm.kkt_mult
        mu1, mu2, mu3 = mu0[:m], mu0[m : m + n], mu0[m + n :]

        a_p = dd.add(bar.scaled_grad_pair(self.x_arg, Wx), dd.matvec(Wx.T, dd.dd(tg[:n])))
        sigma = dd.matvec(np.hstack([p.A.T, p.c[:, None]]), dd.dd(np.concatenate([mu1, mu3])))
        r_p = dd.sub(a_p, dd.matvec(Wx.T, sigma))
        r_y = dd.sub(dd.dd(tg[n : n + m]), dd.matvec(np.hstack([p.A, -p.b[:, None]]), dd.dd(np.concatenate([mu2, mu3]))))
        row_t = np.concatenate([-p.b, -p.c, [aux.eps]])[None, :]
        r_t = dd.sub(dd.dd(tg[n + m :]), dd.matvec(row_t, dd.dd(np.concatenate([mu1, mu2, mu3]))))
        r_q = dd.sub(bar.scaled_grad_pair(self.s_arg, Ws), dd.matvec(Ws.T, dd.dd(mu2)))
        r_z = dd.sub(dd.dd(np.array([-1.0])), dd.mul(dd.dd(np.array([self.ell])), dd.dd(mu3)))
        r = np.concatenate([dd.to_ld(x) for x in (r_p, r_y, r_t, r_q, r_z)])
        d = self._direction(r)
        d.mult = d.mult + mu1
        d.kkt_mult = d.kkt_mult + mu0
        return d

    def restricted(self, v):
        """Restricted local norm of ``v`` and the maximizer; returns ``(lam, h, mult)``."""
        d = self.direction(v)
        return d.lam, d.h.astype(float), d.mult.astype(float)


class AuxProblem:
    """Auxiliary problem for a conic pair, a target gap ``eps``, and reference points."""

    def __init__(self, problem: ConicProblem, eps: float, refs: ReferencePoints | None = None):
        if not eps > 0.0:
            raise ValueError("epsilon must be positive")
        self.problem = problem
        self.eps = float(eps)
        self.refs = default_refs(problem) if refs is None else refs
        self.barrier: Barrier = problem.barrier
        p = problem
        self.nu = p.nu
        self.nu_bar = 2.0 * p.nu + 1.0
        self.dim = p.n + p.m + 1
        # constraint A h_x - h_tau b = 0
        self.G = np.hstack([p.A, np.zeros((p.m, p.m)), -p.b[:, None]])
        self.ell_grad = np.concatenate([-p.c, p.b, [-self.eps]])
        self.g = self.target_vector()

    def split(self, u):
        n, m = self.problem.n, self.problem.m
        return u[:n], u[n : n + m], u[n + m]

    def join(self, x, y, tau):
        return np.concatenate([x, y, [tau]])

    def zero(self):
        return np.zeros(self.dim)

    def point(self, u) -> AuxPoint:
        return AuxPoint(self, u)

    def in_domain(self, u) -> bool:
        try:
            AuxPoint(self, u)
        except OutOfDomain:
            return False
        return True

    def target_vector(self) -> np.ndarray:
        """``g = (s~ + A^T y~ - c, b - A x~, <c, x~> - <b, y~> - eps)``."""
        p = self.problem
        o = self.refs.origin
        if o is None:
            raise ValueError("reference points carry no originating triple")
        gx = o.s + p.A.T @ o.y - p.c
        gy = p.b - p.A @ o.x
        gt = p.c @ o.x - p.b @ o.y - self.eps
        return np.concatenate([gx, gy, [gt]])

    # convenience wrappers over AuxPoint
    def value(self, u) -> float:
        return self.point(u).value

    def grad(self, u) -> np.ndarray:
        return self.point(u).grad

    def hess(self, u) -> np.ndarray:
        return self.point(u).hess

    def grad_t(self, u, t: float) -> np.ndarray:
        """Gradient of ``Phi_t = t <g, u> + Phi``."""
        return self.point(u).grad + t * self.g

    def restricted_norm(self, u, v):
        """``(lam, h)`` with ``lam^2 = max 2<v,h> - <hess h, h>`` over ``A h_x = h_tau b``."""
        lam, h, _ = self.point(u).restricted(v)
        return lam, h

    def constraint_residual(self, u) -> float:
        x, _, tau = self.split(np.asarray(u).astype(LD))
        return float(np.linalg.norm(self.problem.A @ x - tau * self.problem.b))

    def ell(self, u) -> float:
        return float(self.point(u).ell)

    def recover(self, pt: AuxPoint, mult) -> PrimalDualTriple:
        """Map a (near-)minimizer of ``Phi`` and its KKT multipliers to ``(x_eps, s_eps, y_eps)``."""
        triple, _ = self.primal_path_point(pt, mult, 0.0)
        return triple

    def primal_path_point(self, pt: AuxPoint, mult, t: float):
        """Primal path triple for a (near-)minimizer of ``Phi_t`` and the predicted residual pattern.

        Returns the triple and the ``Residuals`` it should exhibit exactly at the
        minimizer: ``t w g_x``, ``t w g_y``, and gap ``eps + t w g_tau``.
        """
        if not isinstance(pt, AuxPoint):
            pt = self.point(pt)
        w = pt.ell
        x = (-w * pt.dual_grad).astype(float)
        s = (-w * pt.primal_grad).astype(float)
        y = (w * np.asarray(mult).astype(LD)).astype(float)
        w = float(w)
        n, m = self.problem.n, self.problem.m
        g = self.g
        predicted = Residuals(
            primal=float(np.linalg.norm(t * w * g[n : n + m])),
            dual=float(np.linalg.norm(t * w * g[:n])),
            gap=float(self.eps + t * w * g[-1]),
        )
        return PrimalDualTriple(x=x, s=s, y=y), predicted

    def shadow_residuals(self, triple: PrimalDualTriple, pt: AuxPoint, t: float):
        """Deviation from the exact residual identities along the primal path, per equation."""
        p = self.problem
        n, m = p.n, p.m
        w = float(pt.ell)
        g = self.g
        dual = triple.s + p.A.T @ triple.y - p.c - t * w * g[:n]
        primal = p.b - p.A @ triple.x - t * w * g[n : n + m]
        gap = p.c @ triple.x - p.b @ triple.y - self.eps - t * w * g[-1]
        return float(np.linalg.norm(primal)), float(np.linalg.norm(dual)), float(abs(gap))
