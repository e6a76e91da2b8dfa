"""Error-free transformations and pair ("double-word") arithmetic on numpy arrays.

A value is carried as ``(hi, lo)`` with ``|lo| <= ulp(hi) / 2``. The working
type is ``np.longdouble``; on platforms where that is plain double the same
code gives double-double accuracy.

Only what the Newton residual needs is here: sums, products, a matrix-vector
product with compensated accumulation, and division.
"""
from __future__ import annotations

import numpy as np

LD = np.longdouble
# Dekker splitter: 2^ceil(p/2) + 1 for p mantissa bits
_SPLIT = LD(2.0) ** ((np.finfo(LD).nmant + 2) // 2) + LD(1.0)


def _ld(x):
    return np.asarray(x).astype(LD)


def two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def fast_two_sum(a, b):
    # needs |a| >= |b|
    s = a + b
    return s, b - (s - a)


def _split(a):
    t = _SPLIT * a
    hi = t - (t - a)
    return hi, a - hi


def two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def dd(hi, lo=None):
    hi = _ld(hi)
    return hi, np.zeros_like(hi) if lo is None else _ld(lo)


def add(x, y):
    s, e = two_sum(x[0], y[0])
    return fast_two_sum(s, e + x[1] + y[1])


def neg(x):
    return -x[0], -x[1]


def sub(x, y):
    return add(x, neg(y))


def mul(x, y):
    """Pair times pair (or plain array, passed as ``(y, 0)``)."""
    p, e = two_prod(x[0], y[0])
    return fast_two_sum(p, e + x[0] * y[1] + x[1] * y[0])


def div(x, y):
    q = x[0] / y[0]
    # remainder x - q y, exactly enough for one correction
    r = sub(x, mul(dd(q), y))
    return fast_two_sum(q, r[0] / y[0])


def matvec(M, v):
    """``M @ v`` for a plain matrix ``M`` and a pair vector ``v``, accumulated in pairs.

    Products are split exactly, then summed by a pairwise tree of
    ``two_sum``; the collected low parts are small enough to add plainly.
    """
    M = _ld(M)
    vh, vl = v
    P, E = two_prod(M, vh[None, :])
    comp = E.sum(axis=1) + M @ vl
    while P.shape[1] > 1:
        if P.shape[1] % 2:
            P = np.hstack([P, np.zeros((P.shape[0], 1), dtype=LD)])
        P, e = two_sum(P[:, ::2], P[:, 1::2])
        comp += e.sum(axis=1)
    if P.shape[1] == 0:
        return np.zeros(M.shape[0], dtype=LD), comp
    return two_sum(P[:, 0], comp)


def to_ld(x):
    return x[0] + x[1]
