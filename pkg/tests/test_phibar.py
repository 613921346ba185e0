import csv
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from willmore_ch.curve import T_BAR, CurvatureProfile
from willmore_ch.linwillmore import L0Operator, symmetry_defect
from willmore_ch.phibar import (PhiBar, TruncationError, coefficient_oracle, export_csv, gbar,
                                mu_recursion, phibar_series, solve_mu01, summand_gaps)

G34 = math.gamma(0.75)
MU1 = float(mpmath.pi**2 / (8 * mpmath.gamma(mpmath.mpf(3) / 4) ** 4))


@pytest.fixture(scope="module")
def pb():
    return PhiBar()


def test_solve_mu01():
    (mu0, mu1), A, b, det = solve_mu01(return_system=True)
    assert mu0 == 0.0
    assert abs(mu1 - MU1) < 1e-12
    assert abs(det) > 1e-3
    np.testing.assert_allclose(A @ [mu0, mu1], b, atol=1e-14)


@given(st.floats(-2.0, 2.0))
def test_mu2_independent_of_mu1(mu1):
    assert mu_recursion(0.0, mu1, 8).mu[2] == pytest.approx(-3 / 40, abs=1e-12)


def test_mu3_over_mu1():
    c = mu_recursion(0.0, 0.7, 8)
    ref = 3 * math.sqrt(2) * G34**2 / (8 * math.pi) * math.gamma(1.25) / (4 * math.gamma(2.75))
    assert c.mu[3] / c.mu[1] == pytest.approx(ref, rel=1e-13)


def test_even_asymptotics():
    c = mu_recursion(0.0, MU1, 1001).mu
    lead = -3 * math.pi * math.sqrt(2) / (32 * G34**2)
    for m in (100, 300, 500):
        assert c[2 * m] * 4.0**m * m**1.5 == pytest.approx(lead, rel=2.0 / m)


def test_recursion_matches_oracle():
    rec = mu_recursion(0.0, MU1, 60).mu
    ref = coefficient_oracle(60, 0.0, MU1)
    nz = np.abs(ref.mu) > 0
    assert np.max(np.abs(rec[nz] - ref.mu[nz]) / np.abs(ref.mu[nz])) < 1e-12
    # right-hand side of the ODE read back from the collected powers
    assert ref.collected[1] == pytest.approx(-9.0, abs=1e-12)
    assert ref.collected[5] == pytest.approx(27 / 8, abs=1e-12)
    assert all(abs(v) < 1e-12 for e, v in ref.collected.items() if e not in (1, 5) and e < 100)


@given(st.floats(-1.0, 1.0))
def test_oracle_with_free_mu0(mu0):
    rec = mu_recursion(mu0, 0.3, 30).mu
    ref = coefficient_oracle(30, mu0, 0.3).mu
    np.testing.assert_allclose(rec[2:], ref[2:], rtol=1e-11, atol=1e-300)


def test_summand_gaps_nonnegative():
    assert np.all(summand_gaps(400) >= 0)


def test_phibar_values(pb):
    s = np.linspace(0, T_BAR, 2049)
    f = pb(s, 1)
    k = pb.profile(s)[0]
    assert abs(pb(np.array(0.0), 0)[0]) < 1e-15
    assert np.min(f[0] * k) >= -1e-12
    j = np.argmin(np.abs(s - T_BAR / 4))
    assert abs(f[1][j]) < 1e-4
    d = np.linspace(0.01, 1.5, 30)
    up = pb(T_BAR / 4 + d, 0)[0]
    down = pb(T_BAR / 4 - d, 0)[0]
    assert np.max(np.abs(up - down)) < 1e-8


def test_symmetry_class(pb):
    s = np.arange(512) * T_BAR / 512
    assert symmetry_defect(pb(s, 0)[0]) < 1e-12
    assert symmetry_defect(gbar(s)) < 1e-12


def test_L0_phibar(pb):
    op = L0Operator(512)
    r = op.apply(pb(op.s, 0)[0]) - gbar(op.s)
    assert np.max(np.abs(r)) < 1e-6
    assert np.max(np.abs(pb.L0_residual(np.linspace(-5, 5, 301)))) < 1e-9


def test_interior_series_agrees(pb):
    s = np.linspace(-0.8, 0.8, 41)
    k = pb.profile(s)[0]
    np.testing.assert_allclose(pb(s, 0)[0], phibar_series(k, M=400), atol=1e-13)


def test_derivatives_by_differences(pb):
    s = np.linspace(-4.0, 4.0, 33)
    h = 1e-4
    lo, mid, hi = pb(s - h), pb(s), pb(s + h)
    for r in range(1, 5):
        np.testing.assert_allclose((hi[r - 1] - lo[r - 1]) / (2 * h), mid[r], atol=5e-7)


def test_gbar_values():
    assert abs(gbar(np.array(0.0))) < 1e-15
    assert gbar(np.array(-T_BAR / 4)) == pytest.approx(4.5 * math.sqrt(2), abs=1e-12)
    s = np.linspace(0, 3, 17)
    np.testing.assert_allclose(gbar(s) + gbar(-s), 0, atol=1e-13)


def test_truncation_error():
    with pytest.raises(TruncationError):
        PhiBar(M=10)
    with pytest.raises(ValueError):
        mu_recursion(0, 1, 3)


def test_export_csv(tmp_path):
    path = export_csv(tmp_path / "phibar.csv", n=64)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["s", "k", "phibar", "phibar_prime", "residual"]
    assert len(rows) == 65
    assert max(abs(float(r[4])) for r in rows[1:]) < 1e-9


def test_profile_shared():
    pb = PhiBar(profile=CurvatureProfile())
    assert pb.tail_bound <= 1e-10
