"""Dense linear algebra: Cholesky, equality-constrained (KKT) solves, rank checks.

Everything here is dense and sized for desk-scale problems (a few hundred
unknowns at most).
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import NotPositiveDefinite, SingularSystem

log = logging.getLogger(__name__)

SYMMETRY_RTOL = 1e-12


def cholesky(M) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == M``.

    Raises NotPositiveDefinite when ``M`` is not (numerically) positive
    definite. Callers near a cone boundary are expected to handle this.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"cholesky needs a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("cholesky: matrix has non-finite entries")
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None


def row_rank(M, tol: float = 1e-10) -> int:
    """Numerical row rank via column-pivoted QR with relative threshold ``tol``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0
    # rank of M equals rank of M.T; pivoting over rows of M
    R = sla.qr(M.T, mode="r", pivoting=True)[0]
    d = np.abs(np.diag(R))
    if d.size == 0 or d[0] == 0.0:
        return 0
    return int(np.sum(d > tol * d[0]))


@dataclass(frozen=True)
class KktSystem:
    """``[H G^T; G 0] [h; mult] = [rhs_primal; rhs_dual]``."""

    H: np.ndarray
    G: np.ndarray
    rhs_primal: np.ndarray
    rhs_dual: np.ndarray | None = None


class KktFactor:
    """Block-elimination factorization of a KKT matrix, reusable across right-hand sides.

    ``H`` is symmetrically equilibrated by its diagonal before factoring so the
    Cholesky factor and the Schur complement ``G H^{-1} G^T`` do not inherit
    the (often huge) scale spread of barrier Hessians near the boundary.
    """

    def __init__(self, H, G=None):
        H = np.asarray(H, dtype=float)
        n = H.shape[0]
        if G is None:
            G = np.zeros((0, n))
        G = np.atleast_2d(np.asarray(G, dtype=float)).reshape(-1, n)
        asym = np.max(np.abs(H - H.T)) if n else 0.0
        if asym > SYMMETRY_RTOL * max(1.0, np.max(np.abs(H))):
            raise ValueError(f"KKT: H is not symmetric (max asymmetry {asym:.3e})")
        self.H = H
        self.G = G
        self.n = n
        self.m = G.shape[0]
        self.regularized = False

        diag = np.diag(H).copy()
        if np.any(~np.isfinite(diag)) or np.any(diag <= 0.0):
            raise SingularSystem("KKT: Hessian has a non-positive diagonal entry")
        self._d = 1.0 / np.sqrt(diag)
        Hs = self._d[:, None] * H * self._d[None, :]
        Hs = 0.5 * (Hs + Hs.T)
        try:
            self._L = cholesky(Hs)
        except NotPositiveDefinite:
            ridge = 1e-12 * np.trace(Hs) / max(n, 1)
            log.info("KKT: Cholesky failed, retrying with ridge %.3e", ridge)
            try:
                self._L = cholesky(Hs + ridge * np.eye(n))
            except NotPositiveDefinite:
                raise SingularSystem("KKT: Hessian block is not positive definite") from None
            self.regularized = True

        if self.m:
            Gs = G * self._d[None, :]
            self._W = sla.solve_triangular(self._L, Gs.T, lower=True)
            S = self._W.T @ self._W
            S = 0.5 * (S + S.T)
            try:
                self._LS = cholesky(S)
            except NotPositiveDefinite:
                raise SingularSystem("KKT: constraint block is rank deficient") from None
        else:
            self._W = np.zeros((n, 0))
            self._LS = np.zeros((0, 0))

    def _solve_once(self, r1, r2):
        d = self._d
        z = sla.solve_triangular(self._L, d * r1, lower=True)
        if self.m:
            rhs = self._W.T @ z - r2
            mult = sla.cho_solve((self._LS, True), rhs)
            z = z - self._W @ mult
        else:
            mult = np.zeros(0)
        h = d * sla.solve_triangular(self._L, z, lower=True, trans="T")
        return h, mult

    def residuals(self, h, mult, r1, r2):
        e1 = r1 - self.H @ h - self.G.T @ mult
        e2 = r2 - self.G @ h
        return e1, e2

    def solve(self, rhs_primal, rhs_dual=None, refine: int = 1):
        """Solve for ``(h, mult)``; one round of iterative refinement by default."""
        r1 = np.asarray(rhs_primal, dtype=float)
        r2 = np.zeros(self.m) if rhs_dual is None else np.asarray(rhs_dual, dtype=float)
        h, mult = self._solve_once(r1, r2)
        for _ in range(refine):
            e1, e2 = self.residuals(h, mult, r1, r2)
            dh, dm = self._solve_once(e1, e2)
            h = h + dh
            mult = mult + dm
        if not (np.all(np.isfinite(h)) and np.all(np.isfinite(mult))):
            raise SingularSystem("KKT: solution is not finite")
        return h, mult


def solve_kkt(sys: KktSystem):
    """Solve ``H h + G^T mult = rhs_primal``, ``G h = rhs_dual``. Returns ``(h, mult)``."""
    return KktFactor(sys.H, sys.G).solve(sys.rhs_primal, sys.rhs_dual)


def ruiz_scaling(K, iters: int = 5) -> np.ndarray:
    """Diagonal ``d`` such that ``diag(d) K diag(d)`` has rows of roughly unit max-norm."""
    d = np.ones(K.shape[0])
    absK = np.abs(K)
    for _ in range(iters):
        r = np.sqrt(np.max(d[:, None] * absK * d[None, :], axis=1))
        r[r == 0.0] = 1.0
        d /= r
    return d


class SaddlePointFactor:
    """LU factorization of ``[[diag(q), C^T], [C, 0]]`` for equality-constrained least squares.

    Used where the reduced Hessian would be too ill-conditioned to form: the
    caller supplies a change of variables in which the quadratic term is
    diagonal (usually 0/1) and all scale spread sits in ``C``. The matrix is
    Ruiz-equilibrated, and iterative refinement computes residuals in extended
    precision, which recovers useful accuracy up to condition numbers near
    ``1/eps_machine``.
    """

    def __init__(self, qdiag, C):
        ld = np.longdouble
        # C may arrive in extended precision; it is kept exactly for residuals
        C = np.atleast_2d(np.asarray(C)).astype(ld)
        qdiag = np.asarray(qdiag).astype(ld)
        nz, nc = qdiag.size, C.shape[0]
        Kx = np.zeros((nz + nc, nz + nc), dtype=ld)
        Kx[np.arange(nz), np.arange(nz)] = qdiag
        Kx[:nz, nz:] = C.T
        Kx[nz:, :nz] = C
        K = Kx.astype(float)
        if not np.all(np.isfinite(K)):
            raise SingularSystem("saddle-point matrix has non-finite entries")
        self.K = K
        self.C = C
        self.nz = nz
        self._Kx = Kx
        self._d = ruiz_scaling(K)
        Ks = self._d[:, None] * K * self._d[None, :]
        with warnings.catch_warnings():
            # exact singularity is reported below as SingularSystem
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            self._lu = sla.lu_factor(Ks, check_finite=False)
        piv = np.abs(np.diag(self._lu[0]))
        if piv.min() <= 1e-15 * piv.max():
            raise SingularSystem("saddle-point matrix is numerically singular")

    def _solve_once(self, rhs):
        return self._d * sla.lu_solve(self._lu, self._d * rhs.astype(float), check_finite=False)

    def solve(self, a, r=None, refine: int = 4, mult0=None):
        """Minimize ``0.5 z^T diag(q) z - a^T z`` subject to ``C z = r``; returns ``(z, mult)``.

        The multiplier convention is ``diag(q) z + C^T mult = a``. A multiplier
        guess ``mult0`` (e.g. from a nearby point) is subtracted first, so the
        right-hand side and with it the absolute error shrink as the guess
        improves. Results are in extended precision.
        """
        ld = np.longdouble
        nc = self.K.shape[0] - self.nz
        a_x = np.asarray(a).astype(ld)
        if mult0 is not None:
            mult0 = np.asarray(mult0).astype(ld)
            a_x = a_x - self.C.T @ mult0
        r_x = np.zeros(nc, dtype=ld) if r is None else np.asarray(r).astype(ld)
        rhs = np.concatenate([a_x, r_x])
        sol = self._solve_once(rhs).astype(ld)
        for _ in range(refine):
            sol = sol + self._solve_once(rhs - self._Kx @ sol)
        if not np.all(np.isfinite(sol)):
            raise SingularSystem("saddle-point solution is not finite")
        z, mult = sol[: self.nz], sol[self.nz :]
        if mult0 is not None:
            mult = mult + mult0
        return z, mult
