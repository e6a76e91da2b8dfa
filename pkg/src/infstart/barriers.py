"""Logarithmically homogeneous barriers for products of orthants and Lorentz cones.

Both cone families are self-dual, so the dual barrier lives on the same cone
and membership tests are shared between primal and dual points.

Per block:

* nonnegative orthant of dimension n: ``F(x) = -sum(ln x_i)``, parameter n,
  conjugate ``F*(s) = -sum(ln s_i) - n``;
* second-order cone ``{(x0, xb): x0 >= |xb|}``: ``F(x) = -ln(x0^2 - |xb|^2)``,
  parameter 2, conjugate ``F*(s) = -ln(s0^2 - |sb|^2) + 2 ln 2 - 2``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ddarith as dd
from .errors import NotInterior

LN2 = float(np.log(2.0))


def as_real(x) -> np.ndarray:
    """``x`` as a float array, keeping extended precision if it already has it."""
    x = np.asarray(x)
    return x if x.dtype == np.longdouble else x.astype(float)


def _cholesky(M) -> np.ndarray:
    if M.dtype != np.longdouble:
        return np.linalg.cholesky(M)
    # LAPACK has no extended-precision kernel; blocks are small
    n = M.shape[0]
    L = np.zeros_like(M)
    for j in range(n):
        d = M[j, j] - L[j, :j] @ L[j, :j]
        if not d > 0:
            raise np.linalg.LinAlgError("matrix is not positive definite")
        L[j, j] = np.sqrt(d)
        L[j + 1 :, j] = (M[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    return L


@dataclass(frozen=True)
class Orthant:
    dim: int

    kind = "nonneg"

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"orthant block needs dim >= 1, got {self.dim}")

    @property
    def nu(self) -> float:
        return float(self.dim)

    def margin(self, x):
        return float(np.min(x))

    def unit(self):
        return np.ones(self.dim)

    def value(self, x):
        return -float(np.sum(np.log(x)))

    def grad(self, x):
        return -1.0 / x

    def hess(self, x):
        return np.diag(1.0 / x**2)

    def third(self, x, h):
        # D^3 F(x)[h]^3
        return -2.0 * float(np.sum((h / x) ** 3))

    def dual_value(self, s):
        return -float(np.sum(np.log(s))) - self.dim

    def dual_grad(self, s):
        return -1.0 / s

    def dual_hess(self, s):
        return np.diag(1.0 / s**2)

    def hess_inv_factor(self, x):
        # W W^T = hess(x)^{-1}
        return np.diag(x)

    def scaled_grad_pair(self, x, W):
        # W^T grad F(x) = -1 exactly for W = diag(x)
        return dd.dd(-np.ones(self.dim))


@dataclass(frozen=True)
class SecondOrder:
    dim: int

    kind = "soc"

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValueError(f"second-order block needs dim >= 2, got {self.dim}")

    @property
    def nu(self) -> float:
        return 2.0

    def margin(self, x):
        return float(x[0] - np.linalg.norm(x[1:]))

    def unit(self):
        e = np.zeros(self.dim)
        e[0] = 1.0
        return e

    @staticmethod
    def _reflect(x):
        jx = -x.copy()
        jx[0] = x[0]
        return jx

    def _q(self, x):
        # x0^2 - |xb|^2 factored to limit cancellation near the boundary
        nb = np.sqrt(x[1:] @ x[1:])
        return (x[0] - nb) * (x[0] + nb)

    def value(self, x):
        return -float(np.log(self._q(x)))

    def grad(self, x):
        return -2.0 * self._reflect(x) / self._q(x)

    def hess(self, x):
        q = self._q(x)
        jx = self._reflect(x)
        J = -np.eye(self.dim, dtype=x.dtype)
        J[0, 0] = 1.0
        return -2.0 * J / q + 4.0 * np.outer(jx, jx) / q**2

    def third(self, x, h):
        q = self._q(x)
        a = float(self._reflect(x) @ h)  # <Jx, h>
        b = float(self._reflect(h) @ h)  # <Jh, h>
        # f(t) = -ln q(x + t h), q(x+th) = q + 2 a t + b t^2
        return -(16.0 * a**3 / q**3 - 12.0 * a * b / q**2)

    def dual_value(self, s):
        return -float(np.log(self._q(s))) + 2.0 * LN2 - 2.0

    def dual_grad(self, s):
        return self.grad(s)

    def dual_hess(self, s):
        return self.hess(s)

    def hess_inv_factor(self, x):
        # hess(x)^{-1} = x x^T - (q/2) J, formed without inverting anything
        J = -np.ones(self.dim, dtype=x.dtype)
        J[0] = 1.0
        Hinv = np.outer(x, x) - 0.5 * self._q(x) * np.diag(J)
        return _cholesky(Hinv)

    def scaled_grad_pair(self, x, W):
        # W^T grad F(x) = -2 W^T J x / q, with q and the product in pair arithmetic
        jx = self._reflect(x)
        q = dd.matvec(jx[None, :], dd.dd(x))
        wjx = dd.matvec(W.T, dd.dd(jx))
        return dd.div(dd.mul(wjx, dd.dd(-2.0)), (np.full(self.dim, q[0][0]), np.full(self.dim, q[1][0])))


_BLOCK_TYPES = {"nonneg": Orthant, "soc": SecondOrder}


def make_block(kind: str, dim: int):
    try:
        cls = _BLOCK_TYPES[kind]
    except KeyError:
        raise ValueError(f"unknown cone type {kind!r}; expected one of {sorted(_BLOCK_TYPES)}") from None
    return cls(int(dim))


class ConeSpec:
    """Ordered product of orthant and second-order blocks."""

    def __init__(self, blocks):
        blocks = tuple(blocks)
        if not blocks:
            raise ValueError("cone needs at least one block")
        self.blocks = blocks
        offsets = np.cumsum([0] + [b.dim for b in blocks])
        self.slices = tuple(slice(int(a), int(b)) for a, b in zip(offsets[:-1], offsets[1:]))
        self.dim = int(offsets[-1])

    @classmethod
    def orthant(cls, n: int) -> "ConeSpec":
        return cls([Orthant(n)])

    @classmethod
    def second_order(cls, n: int) -> "ConeSpec":
        return cls([SecondOrder(n)])

    @property
    def nu(self) -> float:
        return float(sum(b.nu for b in self.blocks))

    @property
    def is_orthant(self) -> bool:
        return all(isinstance(b, Orthant) for b in self.blocks)

    @property
    def c_k(self) -> float:
        """Constant of the Hessian lower bound: 2 for one self-scaled block, 4 for products."""
        return 2.0 if len(self.blocks) == 1 else 4.0

    def unit(self) -> np.ndarray:
        return np.concatenate([b.unit() for b in self.blocks])

    def margins(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.array([b.margin(x[sl]) for b, sl in zip(self.blocks, self.slices)])

    def contains(self, x, slack: float = 0.0) -> bool:
        """Closed-cone membership with absolute slack on each block margin."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,) or not np.all(np.isfinite(x)):
            return False
        return bool(np.all(self.margins(x) >= -slack))

    def to_list(self):
        return [{"type": b.kind, "dim": b.dim} for b in self.blocks]

    def __eq__(self, other):
        return isinstance(other, ConeSpec) and self.blocks == other.blocks

    def __hash__(self):
        return hash(self.blocks)

    def __repr__(self):
        inner = ", ".join(f"{b.kind}({b.dim})" for b in self.blocks)
        return f"ConeSpec([{inner}])"


class Barrier:
    """Barrier oracle for a ``ConeSpec``: value, derivatives, and the conjugate barrier."""

    def __init__(self, cone: ConeSpec):
        self.cone = cone

    @property
    def nu(self) -> float:
        return self.cone.nu

    @property
    def dim(self) -> int:
        return self.cone.dim

    def is_interior(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,) or not np.all(np.isfinite(x)):
            return False
        return bool(np.all(self.cone.margins(x) > 0.0))

    # both block families are self-dual
    is_dual_interior = is_interior

    def _check(self, x, what="x"):
        x = as_real(x)
        if not self.is_interior(x):
            raise NotInterior(f"{what} is not in the interior of {self.cone!r}")
        return x

    def _parts(self, x):
        return [(b, x[sl]) for b, sl in zip(self.cone.blocks, self.cone.slices)]

    def _blockdiag(self, mats):
        H = np.zeros((self.dim, self.dim), dtype=mats[0].dtype)
        for sl, M in zip(self.cone.slices, mats):
            H[sl, sl] = M
        return H

    def value(self, x) -> float:
        x = self._check(x)
        return float(sum(b.value(xi) for b, xi in self._parts(x)))

    def grad(self, x) -> np.ndarray:
        x = self._check(x)
        return np.concatenate([b.grad(xi) for b, xi in self._parts(x)])

    def hess(self, x) -> np.ndarray:
        x = self._check(x)
        return self._blockdiag([b.hess(xi) for b, xi in self._parts(x)])

    def third(self, x, h) -> float:
        """Exact third directional derivative ``D^3F(x)[h]^3``."""
        x = self._check(x)
        h = as_real(h)
        return float(sum(b.third(x[sl], h[sl]) for b, sl in zip(self.cone.blocks, self.cone.slices)))

    def dual_value(self, s) -> float:
        s = self._check(s, "s")
        return float(sum(b.dual_value(si) for b, si in self._parts(s)))

    def dual_grad(self, s) -> np.ndarray:
        s = self._check(s, "s")
        return np.concatenate([b.dual_grad(si) for b, si in self._parts(s)])

    def dual_hess(self, s) -> np.ndarray:
        s = self._check(s, "s")
        return self._blockdiag([b.dual_hess(si) for b, si in self._parts(s)])

    def hess_inv_factor(self, x) -> np.ndarray:
        """Lower-triangular ``W`` with ``W W^T = hess(x)^{-1}``, built from ``x`` directly."""
        x = self._check(x)
        return self._blockdiag([b.hess_inv_factor(xi) for b, xi in self._parts(x)])

    # the conjugate barriers have the same Hessian up to the cone's self-duality
    def dual_hess_inv_factor(self, s) -> np.ndarray:
        s = self._check(s, "s")
        return self._blockdiag([b.hess_inv_factor(si) for b, si in self._parts(s)])

    def scaled_grad_pair(self, x, W):
        """``W^T grad F(x)`` as a ``(hi, lo)`` pair, for a block-diagonal ``W`` from ``hess_inv_factor``.

        The conjugate barriers share the gradient formula, so this also serves
        ``W_s^T grad F*(s)``.
        """
        x = self._check(x)
        parts = [b.scaled_grad_pair(x[sl], W[sl, sl]) for b, sl in zip(self.cone.blocks, self.cone.slices)]
        return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])

    def local_norm(self, x, h) -> float:
        return float(np.sqrt(h @ self.hess(x) @ h))


def scf_third_derivative_check(barrier: Barrier, x, h, step: float = 1e-4, rtol: float = 1e-6) -> bool:
    """Check ``|D^3F(x)[h]^3| <= 2 (D^2F(x)[h]^2)^{3/2}`` with D^3 from central differences.

    The third derivative is the central difference of ``<hess(x + d h) h, h>``;
    ``step`` is measured in the local norm of ``h`` so it stays inside the
    Dikin ellipsoid.
    """
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    d2 = float(h @ barrier.hess(x) @ h)
    if d2 == 0.0:
        return True
    delta = step / np.sqrt(d2)
    d3 = (float(h @ barrier.hess(x + delta * h) @ h) - float(h @ barrier.hess(x - delta * h) @ h)) / (2 * delta)
    bound = 2.0 * d2**1.5
    return abs(d3) <= bound * (1.0 + rtol) + 1e-12


def dikin_check(barrier: Barrier, x, r: float, samples: int = 100, rng=None) -> bool:
    """Sample directions on the local-norm sphere of radius ``r`` and test ``x + h`` for interiority."""
    if not 0.0 <= r < 1.0:
        raise ValueError(f"Dikin radius must lie in [0, 1), got {r}")
    x = np.asarray(x, dtype=float)
    if r == 0.0:
        return barrier.is_interior(x)
    rng = np.random.default_rng(rng)
    H = barrier.hess(x)
    L = np.linalg.cholesky(H)
    for _ in range(samples):
        z = rng.standard_normal(barrier.dim)
        z /= np.linalg.norm(z)
        # ||h||_x = r  <=>  L^T h = r z
        h = np.linalg.solve(L.T, r * z)
        if not barrier.is_interior(x + h):
            return False
    return True
