import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from willmore_ch.approx import (ApproxField, ApproximateSolution, FermiChart, GlobalField, TiltFunction,
                                TubeExitError, assemble, fermi_laplacian, globalize, laplacian_expansion,
                                laplacian_fermi_exact, smoothing_R, zeta)
from willmore_ch.curve import T_BAR
from willmore_ch.jets import s_jet
from willmore_ch.layers import v0_stack
from willmore_ch.residual import scaling_fit

SWEEP = (1 / 8, 1 / 12, 1 / 16, 1 / 24, 1 / 32)


@pytest.fixture(scope="module")
def fields(profiles, phibar):
    return {e: assemble(e, "leading", profiles, phibar) for e in SWEEP}


# ---------------------------------------------------------------- cutoff and smoothing

def test_zeta_plateaus_and_monotone():
    t = np.linspace(-3, 4, 7001)
    z = zeta(t)
    assert np.all(z[t <= 1] == 1.0) and np.all(z[t >= 2] == 0.0)
    assert np.all(np.diff(z) <= 0)
    # all derivatives vanish at the plateau edges: z - 1 is flatter than any power near 1
    h = np.array([1e-2, 5e-3])
    assert np.all(1 - zeta(1 + h) < h**6)


def test_smoothing_single_modes():
    n = 256
    s = np.arange(n) * T_BAR / n
    w = 2 * math.pi / T_BAR
    low = np.sin(3 * w * s)
    np.testing.assert_allclose(smoothing_R(low, 3.5 * w), low, atol=1e-14)
    assert np.max(np.abs(smoothing_R(low, 2.5 * w))) < 1e-14
    mixed = low + np.sin(9 * w * s)
    once = smoothing_R(mixed, 5 * w)
    np.testing.assert_allclose(smoothing_R(once, 5 * w), once, atol=1e-14)


def test_smoothing_operator_constants_stable():
    n = 2048
    s = np.arange(n) * T_BAR / n
    w = 2 * math.pi / T_BAR
    modes = np.arange(1, 400, 2)
    f = (np.sin(np.outer(s, modes * w)) / modes.astype(float) ** 6).sum(axis=1)
    c = [np.max(np.abs(f - smoothing_R(f, th))) * th**5 for th in (8, 16, 32, 64)]
    assert max(c) <= 2 * min(c)


def test_tilt_smoothing_gap_decay(phibar):
    gap = {e: TiltFunction(e, 1.0, phibar).smoothing_gap() / e for e in SWEEP}
    for a, b in ((1 / 8, 1 / 16), (1 / 12, 1 / 24)):
        assert gap[b] <= gap[a] / 8 or gap[b] < 1e-14


def test_tilt_symmetry_and_modes(phibar):
    tilt = TiltFunction(1 / 16, 0.7, phibar)
    sig = np.linspace(0, 1.7, 23)
    np.testing.assert_allclose(tilt.star(-sig, 0)[0], -tilt.star(sig, 0)[0], atol=1e-15)
    np.testing.assert_allclose(tilt.star(sig + T_BAR / 2, 0)[0], -tilt.star(sig, 0)[0], atol=1e-15)
    assert tilt.modes_kept > 0 and not tilt.is_zero
    assert TiltFunction(1 / 16).is_zero


# ---------------------------------------------------------------- chart

@pytest.mark.parametrize("eps", [1 / 8, 1 / 32])
def test_chart_round_trip(eps, phibar):
    chart = FermiChart(eps, TiltFunction(eps, 0.6, phibar))
    rng = np.random.default_rng(1)
    s = rng.uniform(-1.5, 1.5, 300) * T_BAR / eps
    t = rng.uniform(-0.24, 0.24, 300) / eps
    x = chart.forward(s, t)
    s2, t2 = chart.to_fermi(x)
    np.testing.assert_allclose(chart.forward(s2, t2), x, atol=1e-10 / eps)
    np.testing.assert_allclose(t2, t, atol=1e-9)


@pytest.mark.parametrize("eps", SWEEP)
def test_det_bound(eps, phibar):
    chart = FermiChart(eps, TiltFunction(eps, 0.6, phibar))
    S, Tt = np.meshgrid(np.linspace(0, T_BAR / eps, 101),
                        np.linspace(-0.999, 0.999, 41) / (2 * math.sqrt(2) * eps), indexing="ij")
    assert np.min(chart.det(S, Tt)) >= 0.25 - 1e-12


def test_chart_independence_of_laplacian():
    """Pull a global test function back through the chart; the Fermi Laplacian equals the Cartesian one."""
    eps = 1 / 16
    chart = FermiChart(eps)
    L = chart.L
    S, Z = np.meshgrid(np.linspace(-12, 12, 25), np.linspace(-3, 3, 13), indexing="ij")
    X1, X2 = chart.position_jet(S, Z, degree=2)
    w = 2 * math.pi / L
    x1, x2 = X1.value, X2.value
    sin_stack = np.stack([np.sin(w * x1), w * np.cos(w * x1), -w**2 * np.sin(w * x1)])
    g = np.exp(-x2**2)
    exp_stack = np.stack([g, -2 * x2 * g, (4 * x2**2 - 2) * g])
    G = X1.compose(sin_stack) * X2.compose(exp_stack)
    k = chart.profile.derivatives(eps * S, 2)
    K = s_jet(k, 2, eps)
    from willmore_ch.jets import z_jet
    a = 1.0 - eps * z_jet(Z, 2) * K
    lap = fermi_laplacian(G, a).value
    exact = np.sin(w * x1) * g * (-w**2 + 4 * x2**2 - 2)
    assert np.max(np.abs(lap - exact)) < 1e-6


# ---------------------------------------------------------------- Laplacian expansion

def _expansion_errors(fields, order):
    out = []
    for e, f in fields.items():
        S, Tt = np.meshgrid(np.linspace(0, T_BAR / e, 37), np.linspace(-1.5, 1.5, 13), indexing="ij")
        out.append(np.max(np.abs(laplacian_expansion(order, S, Tt, f) - laplacian_fermi_exact(f, S, Tt))))
    return out


def test_expansion_orders(fields):
    assert abs(scaling_fit(SWEEP, _expansion_errors(fields, 1)).slope - 2.0) < 0.3
    assert abs(scaling_fit(SWEEP, _expansion_errors(fields, 5)).slope - 6.0) < 0.3
    with pytest.raises(ValueError):
        laplacian_expansion(6, 0.0, 0.0, fields[1 / 8])


def test_expansion_reduces_without_tilt(profiles):
    f = assemble(1 / 16, "zero", profiles)
    S, Tt = np.meshgrid(np.linspace(0, 20, 9), np.linspace(-2, 2, 9), indexing="ij")
    # with zero tilt sz- and st-jets coincide
    u1, _ = f.jets(S, Tt, 2, "sz")
    u2, _ = f.jets(S, Tt, 2, "st")
    np.testing.assert_allclose(u1.coef, u2.coef, atol=1e-15)


# ---------------------------------------------------------------- assembled field

def test_field_limits(profiles, phibar):
    f = assemble(1 / 64, "leading", profiles, phibar)
    s = np.linspace(0, T_BAR * 64, 41)
    np.testing.assert_allclose(f(s, np.full_like(s, 15.0)), 1.0, atol=1e-6)
    np.testing.assert_allclose(f(s, np.full_like(s, -15.0)), -1.0, atol=1e-6)


def test_zero_tilt_origin(profiles):
    f = assemble(1 / 16, "zero", profiles)
    assert abs(f(np.array(0.0), np.array(0.0))) < 1e-15


def test_distance_to_v0_and_bounds(fields):
    d = []
    for e, f in fields.items():
        S, Tt = np.meshgrid(np.linspace(0, T_BAR / e, 65), np.linspace(-0.24, 0.24, 201) / e, indexing="ij")
        v = f(S, Tt)
        d.append(np.max(np.abs(v - v0_stack(Tt, 0)[0])))
        assert np.max(np.abs(v)) <= 1 + e**2
    assert abs(scaling_fit(SWEEP, d).slope - 2.0) < 0.3


def test_v1_vanishes_for_resolved_tilt(profiles):
    eps = 1 / 16
    s = np.arange(512) * T_BAR / 512
    psi = 0.3 * np.sin(2 * math.pi * s / T_BAR)
    tilt = TiltFunction(eps, psi=psi)
    assert tilt.smoothing_gap() < 1e-14
    full = ApproxField(eps, tilt, profiles)
    no_v1 = ApproxField(eps, tilt, profiles, ablate=("v1",))
    S, Tt = np.meshgrid(np.linspace(0, 100, 11), np.linspace(-3, 3, 11), indexing="ij")
    np.testing.assert_allclose(full(S, Tt), no_v1(S, Tt), atol=1e-14)


def test_errors(profiles):
    with pytest.raises(ValueError):
        assemble(0.2, "leading", profiles)
    with pytest.raises(ValueError):
        assemble(1 / 16, "sideways", profiles)
    with pytest.raises(ValueError):
        ApproxField(1 / 16, TiltFunction(1 / 16), profiles, ablate=("v7",))
    f = assemble(1 / 16, "zero", profiles)
    with pytest.raises(TubeExitError):
        f(np.array(0.0), np.array(4.0))


def test_partials_match_differences(fields):
    f = fields[1 / 16]
    s, t, h = np.array([3.0, 17.0]), np.array([0.4, -1.1]), 1e-4
    p = f.partials(s, t)
    chart = FermiChart(f.eps, f.tilt)
    z = t + f.tilt.star(f.eps * s, 0)[0]

    def v_sz(ss, zz):
        return f(ss, zz - f.tilt.star(f.eps * ss, 0)[0])

    ds = (v_sz(s + h, z) - v_sz(s - h, z)) / (2 * h)
    dz = (v_sz(s, z + h) - v_sz(s, z - h)) / (2 * h)
    np.testing.assert_allclose(p[(1, 0)], ds, atol=1e-8)
    np.testing.assert_allclose(p[(0, 1)], dz, atol=1e-8)
    assert chart.eps == f.eps


# ---------------------------------------------------------------- globalization

def test_symmetry_pairs(fields):
    f = fields[1 / 16]
    g = globalize(f)
    L = g.chart.L
    rng = np.random.default_rng(7)
    x = np.stack([rng.uniform(-L, L, 100), rng.uniform(-10, 10, 100)], axis=1)
    v = g(x)
    np.testing.assert_allclose(g(-x), -v, atol=1e-9)
    shifted = np.stack([x[:, 0] + L / 2, -x[:, 1]], axis=1)
    np.testing.assert_allclose(g(shifted), -v, atol=1e-9)


def test_far_field_is_sign(fields):
    f = fields[1 / 16]
    g = GlobalField(f)
    s = np.linspace(0, T_BAR * 16, 31)
    d = g.band_start + 2.5
    x = np.concatenate([g.chart.untilted(s, np.full_like(s, d)), g.chart.untilted(s, np.full_like(s, -d))])
    v = g(x)
    assert np.all(v[:31] == 1.0) and np.all(v[31:] == -1.0)


def test_continuity_across_band(profiles, phibar):
    eps = 1 / 32
    f = assemble(eps, "leading", profiles, phibar)
    g = GlobalField(f)
    s = np.linspace(0, T_BAR / eps, 17)
    for sign in (1.0, -1.0):
        t = sign * np.linspace(g.band_start + 0.5, g.band_start + 2.5, 201)
        S, Tt = np.meshgrid(s, t, indexing="ij")
        vg = g(g.chart.forward(S, Tt))
        # across the cutoff band the blend is no further from the sign than the layer tail
        tail = 2 * math.exp(-math.sqrt(2) * (g.band_start + 0.5))
        assert np.max(np.abs(vg - sign)) < 1.5 * tail
        assert np.max(np.abs(np.diff(vg, axis=1))) < 1e-7


# ---------------------------------------------------------------- estimator

def test_estimator_api():
    est = ApproximateSolution(eps=1 / 16, tilt_mode="zero", layer_n=300)
    assert clone(est).get_params()["eps"] == 1 / 16
    est.fit()
    X = np.array([[0.0, 30.0], [0.0, -30.0], [1.0, 0.2]])
    y = est.predict(X)
    assert y.shape == (3,)
    assert y[0] == 1.0 and y[1] == -1.0 and abs(y[2]) < 1
    s, t = est.fermi(X)
    assert s.shape == (3,) and t.shape == (3,)


@settings(max_examples=20, deadline=None)
@given(st.floats(-50, 50), st.floats(-6, 6))
def test_estimator_odd_symmetry(x1, x2):
    est = _fitted()
    X = np.array([[x1, x2]])
    assert est.predict(-X)[0] == pytest.approx(-est.predict(X)[0], abs=1e-9)


_EST = {}


def _fitted():
    if "e" not in _EST:
        _EST["e"] = ApproximateSolution(eps=1 / 12, layer_n=300).fit()
    return _EST["e"]
