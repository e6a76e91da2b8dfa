from fractions import Fraction

import numpy as np
from hypothesis import given, settings, strategies as st

from infstart import ddarith as dd

LD = np.longdouble


def exact(v):
    return Fraction(*LD(v).as_integer_ratio())


floats = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@given(a=floats, b=floats)
def test_two_sum_is_exact(a, b):
    s, e = dd.two_sum(LD(a), LD(b))
    assert exact(s) + exact(e) == exact(a) + exact(b)


@given(a=floats, b=floats)
def test_two_prod_is_exact(a, b):
    p, e = dd.two_prod(LD(a), LD(b))
    assert exact(p) + exact(e) == exact(a) * exact(b)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_matvec_beats_plain_product(seed):
    rng = np.random.default_rng(seed)
    # entries of mixed magnitude so plain summation cancels badly
    M = rng.standard_normal((3, 7)) * 10.0 ** rng.integers(-6, 6, (3, 7))
    v = rng.standard_normal(7) * 10.0 ** rng.integers(-6, 6, 7)
    hi, lo = dd.matvec(M, dd.dd(v))
    for i in range(3):
        ref = sum(Fraction(float(M[i, j])) * Fraction(float(v[j])) for j in range(7))
        got = exact(hi[i]) + exact(lo[i])
        assert abs(got - ref) <= abs(ref) * Fraction(1, 10**25) + Fraction(1, 10**40)


def test_div_and_mul():
    x = dd.dd(LD(1.0))
    y = dd.dd(LD(3.0))
    q = dd.div(x, y)
    back = dd.mul(q, y)
    assert abs(exact(back[0]) + exact(back[1]) - 1) < Fraction(1, 10**30)
    assert dd.to_ld(dd.sub(x, x)) == 0
