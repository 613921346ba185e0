import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from willmore_ch.curve import T_BAR, CurvatureProfile
from willmore_ch.layers import (C_STAR, D_STAR, SQRT2, LayerProfiles, ProfileTransformer,
                                SolvabilityError, eta_explicit, eta_tilde_stack, lstar_stack, q_form,
                                v0, v0_stack)
from willmore_ch.phibar import gbar


@pytest.fixture(scope="module")
def prof():
    return LayerProfiles()


def test_v0_basics():
    assert v0(0.0) == 0.0
    assert abs(v0(20.0) - 1) < 1e-8
    assert v0_stack(np.array(0.0), 1)[1] == pytest.approx(1 / SQRT2, abs=1e-15)
    t = np.linspace(-10, 10, 201)
    v = v0_stack(t, 4)
    np.testing.assert_allclose(-v[2], v[0] - v[0] ** 3, atol=1e-12)


@given(st.floats(-12.0, 12.0))
def test_v0_stack_by_differences(t):
    h = 1e-4
    d = v0_stack(np.array([t - h, t, t + h]), 4)
    for n in range(1, 5):
        assert (d[n - 1][2] - d[n - 1][0]) / (2 * h) == pytest.approx(d[n][1], abs=1e-7)


def test_constants(prof):
    assert C_STAR == pytest.approx(2 * SQRT2 / 3, abs=1e-15)
    assert D_STAR == pytest.approx(0.6080496694, abs=1e-10)
    c = prof.constants()
    assert abs(c.c_star - C_STAR) < 1e-10
    assert abs(c.d_star - D_STAR) < 1e-10
    for key in ("t_v0pp_v0p", "t3_v0pp_v0p", "etap_v0p", "2_Lstar_eta3_p_v0p", "int1", "int2", "int3",
                "quadratic_eta", "Q_eta_eta_tv0p", "Q_eta_eta1_v0p", "2_Lstar_eta2_p_v0p",
                "t_Lstar_eta1_p_v0p"):
        assert abs(c.identities[key]["deviation"]) < 1e-8, key
    assert c.identities["int3"]["value"] == pytest.approx(1 / (18 * SQRT2), abs=1e-8)


def test_domain_truncation_robust():
    wide = LayerProfiles(half_width=50.0, n=1000).constants()
    base = LayerProfiles().constants()
    assert abs(wide.c_star - base.c_star) < 1e-12
    assert abs(wide.d_star - base.d_star) < 1e-12


def test_lstar_identities(prof):
    res = prof.lstar_identities()
    for key in ("tv0v0p", "tv0p_1_sqrt2tv0", "v0v0p", "kernel_v0p", "eta_tilde", "eta"):
        assert res[key] < 1e-9, key
    for key in ("lstar2_eta", "lstar2_eta1", "lstar2_eta2", "lstar2_eta3"):
        assert res[key] < 1e-8, key


def test_orthogonality_and_decay(prof):
    for name, val in prof.orthogonality().items():
        assert abs(val) < 1e-9, name
    t = prof.solver.t
    for name in ("eta", "eta1", "eta2", "eta3"):
        u = getattr(prof, name)(t)
        assert max(abs(u[0]), abs(u[-1])) <= 1e-8 * np.max(np.abs(u)), name


def test_parity(prof):
    t = np.linspace(0, 15, 61)
    for name in ("eta", "eta2", "eta3"):
        u = getattr(prof, name)
        np.testing.assert_allclose(u(-t), -u(t), atol=1e-8)
    np.testing.assert_allclose(prof.eta1(-t), prof.eta1(t), atol=1e-8)


def test_eta_explicit(prof):
    t = np.linspace(-10, 10, 41)
    np.testing.assert_allclose(eta_explicit(t), prof.eta(t), atol=1e-7)


def test_solver_examples(prof):
    s = prof.solver
    # L* u = v0'' gives -t v0'/2
    u = s.solve(lambda t, o: v0_stack(t, o + 2)[2:], "tilde")
    np.testing.assert_allclose(u(s.t), eta_tilde_stack(s.t, 0)[0], atol=1e-8)
    # L*^2 u = -v0'' gives eta
    w = s.solve(lambda t, o: -v0_stack(t, o + 2)[2:], "w")
    e = s.solve(lambda t, o: w.derivatives(t, o), "e")
    np.testing.assert_allclose(e(s.t), prof.eta(s.t), atol=1e-7)
    with pytest.raises(SolvabilityError):
        s.solve(lambda t, o: v0_stack(t, o + 1)[1:], "kernel")
    assert s.residual(prof.eta) < 1e-9


def test_q_form(prof):
    t = np.linspace(-8, 8, 81)
    a = prof.eta.derivatives(t, 2)
    b = prof.eta1.derivatives(t, 2)
    np.testing.assert_allclose(q_form(a, b, t), q_form(b, a, t), atol=1e-12)
    assert np.max(np.abs(q_form(np.zeros_like(a), b, t))) == 0.0
    # eta_2 right-hand side is orthogonal to the kernel
    s = prof.solver
    assert abs(s.inner(prof.eta2_rhs(s.t, 0)[0])) < 1e-7


def test_profile_derivatives_by_differences(prof):
    t = np.linspace(-6, 6, 25)
    h = 1e-4
    for name in ("eta", "eta1", "eta2", "eta3"):
        p = getattr(prof, name)
        lo, mid, hi = p.derivatives(t - h), p.derivatives(t), p.derivatives(t + h)
        for r in range(1, 5):
            np.testing.assert_allclose((hi[r - 1] - lo[r - 1]) / (2 * h), mid[r], atol=1e-6)


def test_e5_readings(prof):
    a, b = prof.e5_projection_coefficients("eta3")
    assert a == pytest.approx(9 / 8 * D_STAR, abs=1e-12)
    assert b == pytest.approx(-9 * D_STAR, abs=1e-12)
    _, b_eta1 = prof.e5_projection_coefficients("eta1")
    assert b_eta1 == pytest.approx(-11 * D_STAR, abs=1e-10)
    s = np.array([0.0, -T_BAR / 4])
    k, k1 = CurvatureProfile().derivatives(s, 1)
    proj = a * k**5 + b * k * k1**2
    np.testing.assert_allclose(proj, D_STAR * gbar(s), atol=1e-12)
    assert proj[1] == pytest.approx(D_STAR * 9 / 8 * SQRT2**5, rel=1e-12)
    with pytest.raises(ValueError):
        prof.e5_groups(np.zeros(3), "other")


def test_lstar_of_stack():
    t = np.linspace(-5, 5, 51)
    np.testing.assert_allclose(lstar_stack(v0_stack(t, 3)[1:], t)[0], 0.0, atol=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.lists(st.floats(-30, 30), min_size=1, max_size=8))
def test_transformer(ts):
    tr = ProfileTransformer(derivative=0, n=200).fit()
    X = np.array(ts)[:, None]
    out = tr.transform(X)
    assert out.shape == (len(ts), 6)
    np.testing.assert_allclose(out[:, 0], np.tanh(np.array(ts) / math.sqrt(2)), atol=1e-15)
    assert clone(tr).get_params()["n"] == 200
    assert list(tr.get_feature_names_out()) == ["v0", "eta", "eta_tilde", "eta1", "eta2", "eta3"]
