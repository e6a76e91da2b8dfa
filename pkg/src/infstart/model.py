"""Primal-dual conic problem data, residuals, and certificate checks.

The pair is

    min <c, x>  s.t.  A x = b, x in K
    max <b, y>  s.t.  s + A^T y = c, s in K*
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .barriers import Barrier, ConeSpec
from .errors import CInRangeOfAT, DimensionMismatch, RankDeficient
from .linalg import row_rank


@dataclass(frozen=True, eq=False)
class ConicProblem:
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    cone: ConeSpec

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def nu(self) -> float:
        return self.cone.nu

    @property
    def barrier(self) -> Barrier:
        return Barrier(self.cone)


@dataclass
class PrimalDualTriple:
    x: np.ndarray
    s: np.ndarray
    y: np.ndarray


@dataclass
class AlternativeCertificate:
    x: np.ndarray
    y: np.ndarray
    tau: float


@dataclass
class Residuals:
    primal: float
    dual: float
    gap: float

    def as_tuple(self):
        return self.primal, self.dual, self.gap


def validate(problem: ConicProblem, rank_tol: float = 1e-10) -> ConicProblem:
    """Check dimensions, full row rank of A, and that c is not in the range of A^T."""
    A, b, c, cone = problem.A, problem.b, problem.c, problem.cone
    m, n = A.shape
    if b.shape != (m,):
        raise DimensionMismatch(f"b has length {b.size}, A has {m} rows")
    if c.shape != (n,):
        raise DimensionMismatch(f"c has length {c.size}, A has {n} columns")
    if cone.dim != n:
        raise DimensionMismatch(f"cone dimension {cone.dim} does not match {n} columns of A")
    for name, arr in (("A", A), ("b", b), ("c", c)):
        if not np.all(np.isfinite(arr)):
            raise DimensionMismatch(f"{name} has non-finite entries")
    if m > n:
        raise RankDeficient(f"A has more rows ({m}) than columns ({n})")
    r = row_rank(A, rank_tol)
    if r < m:
        raise RankDeficient(f"A has row rank {r} < {m}")
    # distance from c to range(A^T)
    coef, *_ = np.linalg.lstsq(A.T, c, rcond=None)
    dist = np.linalg.norm(c - A.T @ coef)
    if dist <= 1e-10 * np.linalg.norm(c):
        raise CInRangeOfAT(f"c lies in the range of A^T (distance {dist:.3e})")
    return problem


def residuals(problem: ConicProblem, triple: PrimalDualTriple) -> Residuals:
    A, b, c = problem.A, problem.b, problem.c
    x = np.asarray(triple.x, dtype=float)
    s = np.asarray(triple.s, dtype=float)
    y = np.asarray(triple.y, dtype=float)
    return Residuals(
        primal=float(np.linalg.norm(A @ x - b)),
        dual=float(np.linalg.norm(s + A.T @ y - c)),
        gap=float(c @ x - b @ y),
    )


def check_eps_optimal(problem: ConicProblem, triple: PrimalDualTriple, eps: float, tol: float = 1e-8) -> bool:
    """Is ``triple`` a strictly feasible primal-dual pair with gap ``eps`` (up to ``tol``)?"""
    bar = problem.barrier
    if not (bar.is_interior(triple.x) and bar.is_dual_interior(triple.s)):
        return False
    r = residuals(problem, triple)
    return (
        r.primal <= tol * (1 + np.linalg.norm(problem.b))
        and r.dual <= tol * (1 + np.linalg.norm(problem.c))
        and abs(r.gap - eps) <= tol * (1 + eps)
    )


def check_certificate(
    problem: ConicProblem, cert: AlternativeCertificate, eps: float, tol: float = 1e-8
) -> bool:
    """Check that ``cert`` is a nonzero element of the alternative set.

    The certificate is normalized to unit max-norm first; the set is a cone so
    only the direction matters.
    """
    x = np.asarray(cert.x, dtype=float)
    y = np.asarray(cert.y, dtype=float)
    tau = float(cert.tau)
    scale = max(np.max(np.abs(x), initial=0.0), np.max(np.abs(y), initial=0.0), abs(tau))
    if not np.isfinite(scale) or scale <= 1e-8:
        return False
    x, y, tau = x / scale, y / scale, tau / scale
    A, b, c, cone = problem.A, problem.b, problem.c, problem.cone
    return (
        tau <= tol
        and cone.contains(tau * c - A.T @ y, slack=tol)
        and cone.contains(x, slack=tol)
        and np.linalg.norm(A @ x - tau * b) <= tol
        and -(c @ x) + b @ y - eps * tau >= -tol
    )
