import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from willmore_ch.jets import Jet, constant_jet, s_jet, z_jet

D = 4
small = st.floats(-2.0, 2.0)


def poly_jet(c):
    """Jet from a dense coefficient list, zeroing the entries above the degree."""
    c = np.array(c, dtype=float).reshape(D + 1, D + 1)
    for i in range(D + 1):
        c[i, D + 1 - i:] = 0.0
    return Jet(c, D)


coeffs = st.lists(small, min_size=(D + 1) ** 2, max_size=(D + 1) ** 2)


@given(coeffs, coeffs)
def test_product_is_truncated_polynomial_product(a, b):
    A, B = poly_jet(a), poly_jet(b)
    P = (A * B).coef
    ref = np.zeros((2 * D + 1, 2 * D + 1))
    for i in range(D + 1):
        for k in range(D + 1):
            ref[i:i + D + 1, k:k + D + 1] += A.coef[i, k] * B.coef
    for i in range(D + 1):
        for k in range(D + 1 - i):
            assert P[i, k] == pytest.approx(ref[i, k], abs=1e-12)


@given(coeffs, coeffs, small)
def test_ring_laws(a, b, c):
    A, B = poly_jet(a), poly_jet(b)
    np.testing.assert_allclose((A + B).coef, (B + A).coef)
    np.testing.assert_allclose((A * B).coef, (B * A).coef, atol=1e-12)
    np.testing.assert_allclose(((A + c) - c).coef, A.coef, atol=1e-12)
    np.testing.assert_allclose((A * 2.0 - A).coef, A.coef, atol=1e-12)
    np.testing.assert_allclose((A ** 2).coef, (A * A).coef, atol=1e-12)
    np.testing.assert_allclose((A ** 0).coef, constant_jet(1.0, D).coef)


@given(coeffs)
def test_reciprocal(a):
    A = poly_jet(a) + 3.0 + 4.0 * abs(a[0])  # keep the base value away from zero
    one = A * A.reciprocal()
    np.testing.assert_allclose(one.coef, constant_jet(1.0, D).coef, atol=1e-10)
    np.testing.assert_allclose((A / A).coef, one.coef, atol=1e-12)


@given(coeffs)
def test_derivatives_and_partials(a):
    A = poly_jet(a)
    ds, dz = A.d_s(), A.d_z()
    assert ds.degree == D - 1 and dz.degree == D - 1
    for i in range(D):
        for k in range(D - i):
            assert ds.coef[i, k] == pytest.approx((i + 1) * A.coef[i + 1, k])
            assert dz.coef[i, k] == pytest.approx((k + 1) * A.coef[i, k + 1])
    assert A.partial(2, 1) == pytest.approx(2 * A.coef[2, 1])
    assert A.truncate(2).degree == 2 and A.truncate(9) is A


def test_compose_matches_mpmath():
    s0, z0 = 0.3, -0.4

    def f(s, z):
        return mpmath.exp(mpmath.sin(s) * z) / (2 + s * s * z)

    S = s_jet(np.array([math.sin(s0), math.cos(s0), -math.sin(s0), -math.cos(s0), math.sin(s0)]), D)
    S_id = s_jet(np.array([s0, 1.0, 0.0, 0.0, 0.0]), D)
    Z = z_jet(z0, D)
    inner = S * Z
    e = math.exp(float(inner.value))
    J = inner.compose(np.full(D + 1, e)) / (S_id * S_id * Z + 2.0)
    for i in range(D + 1):
        for k in range(D + 1 - i):
            ref = mpmath.diff(f, (s0, z0), (i, k))
            assert J.partial(i, k) == pytest.approx(float(ref), abs=1e-12)


def test_s_jet_scale_and_batch():
    t = np.linspace(0, 1, 5)
    stack = np.stack([np.sin(2 * t), 2 * np.cos(2 * t), -4 * np.sin(2 * t), -8 * np.cos(2 * t), 16 * np.sin(2 * t)])
    j = s_jet(stack, D, scale=0.5)
    assert j.shape == (5,)
    np.testing.assert_allclose(j.partial(1, 0), 0.5 * stack[1])
    np.testing.assert_allclose(j.partial(3, 0), 0.125 * stack[3])
    with pytest.raises(ValueError):
        j.compose(np.zeros((2, 5)))
