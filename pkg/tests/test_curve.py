import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from willmore_ch.curve import (T_BAR, CurvatureProfile, ResolutionError, build_curve, curvature,
                               rescale)

prof = CurvatureProfile()
S4096 = np.linspace(0.0, T_BAR, 4096, endpoint=False)


@pytest.fixture(scope="module")
def curve():
    return build_curve(512)


def test_special_values():
    k, k1, k2 = curvature(np.array([0.0, -T_BAR / 4]))
    assert abs(k[0]) < 1e-15 and k1[0] == pytest.approx(-1.0, abs=1e-14)
    assert k[1] == pytest.approx(math.sqrt(2), abs=1e-14)


def test_ode_and_first_integral():
    k, k1, k2 = prof(S4096)
    assert np.max(np.abs(k2 + 0.5 * k**3)) < 1e-9
    assert np.max(np.abs(k1**2 + k**4 / 4 - 1)) < 1e-9
    assert np.max(np.abs(k)) <= math.sqrt(2) + 1e-14


def test_symmetries():
    k = prof(S4096)[0]
    assert np.max(np.abs(k + prof(-S4096)[0])) < 1e-12
    assert np.max(np.abs(k + prof(S4096 + T_BAR / 2)[0])) < 1e-12
    assert np.max(np.abs(k - prof(S4096 + T_BAR)[0])) < 1e-12


@given(st.floats(-20.0, 20.0))
def test_higher_derivatives_by_differences(s):
    d = prof.derivatives(np.array([s - 1e-4, s, s + 1e-4]), order=6)
    for n in range(1, 7):
        fd = (d[n - 1][2] - d[n - 1][0]) / 2e-4
        assert fd == pytest.approx(d[n][1], abs=2e-6 * 10**(n // 2))


def test_curve_basics(curve):
    np.testing.assert_allclose(curve.position(np.array(0.0)), [0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(curve.tangent(np.array(0.0)), [0.0, 1.0], atol=1e-15)
    assert curve.position(np.array(T_BAR))[0] > 0
    assert curve.unit_speed_defect() < 1e-9
    assert curve.frenet_defect() < 1e-8
    # the turning angle closes over one period
    assert abs(curve.theta_at(np.array(T_BAR))) < 1e-9


def test_curve_vs_ode(curve):
    """Independent integration of theta' = k, gamma' = (-sin, cos)."""
    rhs = lambda s, y: [prof(np.array(s))[0], -math.sin(y[0]), math.cos(y[0])]
    s = np.linspace(0, T_BAR, 17)
    sol = solve_ivp(rhs, (0, T_BAR), [0, 0, 0], t_eval=s, rtol=1e-12, atol=1e-13, method="DOP853")
    np.testing.assert_allclose(curve.position(s), sol.y[1:].T, atol=1e-9)
    np.testing.assert_allclose(curve.theta_at(s), sol.y[0], atol=1e-9)


def test_symmetry_of_curve(curve):
    s = np.linspace(-5, 5, 41)
    np.testing.assert_allclose(curve.position(-s), -curve.position(s), atol=1e-13)
    L = curve.x1_period
    np.testing.assert_allclose(curve.position(s + T_BAR), curve.position(s) + [L, 0.0], atol=1e-13)


def test_build_curve_validation():
    with pytest.raises(ValueError):
        build_curve(63)
    with pytest.raises(ValueError):
        build_curve(32)
    assert issubclass(ResolutionError, RuntimeError)
    assert build_curve(64).unit_speed_defect() < 1e-9


def test_rescale(curve):
    same = rescale(curve, T_BAR)
    s = np.linspace(0, T_BAR, 9)
    np.testing.assert_allclose(same.position(s), curve.position(s), atol=1e-15)
    c2 = rescale(curve, 2 * T_BAR)
    assert np.max(np.abs(c2.curvature_at(np.linspace(0, 2 * T_BAR, 4001)))) == pytest.approx(
        math.sqrt(2) / 2, rel=1e-6)
    c4 = rescale(curve, 4 * T_BAR)
    assert c4.x1_period / c2.x1_period == pytest.approx(2.0, abs=1e-9)
    assert c4.x1_period == pytest.approx(c4.position(np.array(c4.period))[0] - 0.0, rel=1e-12)
    with pytest.raises(ValueError):
        rescale(curve, 0.5 * T_BAR)
