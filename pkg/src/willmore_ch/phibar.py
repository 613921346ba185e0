"""Closed-form tilt ``phibar = Phi(k)`` solving ``L0 phibar = gbar``.

``Phi(z) = sum_j mu_j z^(2j+1)`` solves a fourth-order ODE with polynomial
coefficients.  The even and odd coefficient families have closed forms in
terms of Gamma ratios, and the two free parameters ``(mu0, mu1)`` are fixed by
asking that ``phibar'`` and ``phibar'''`` vanish where ``|k| -> sqrt 2``.

Evaluation
----------
The power series in ``k`` converges like ``(k^4/4)^m`` and is useless close to
``|k| = sqrt 2``.  Writing ``p = k'`` (so ``p^2 = 1 - k^4/4``), the two
Gamma sums are Gauss hypergeometric functions of ``x = k^4/4`` and the
connection formula at ``x = 1`` turns them into series in ``q = 1 - x = p^2``
whose singular ``sqrt q`` parts cancel for the chosen ``(mu0, mu1)``.  Both
representations are polynomials in ``(k, p)``; ``d/ds`` acts on them as the
derivation ``D = p d/dk - (k^3/2) d/dp``, so all s-derivatives are exact
derivatives of the truncated series.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np

from .curve import T_BAR, CurvatureProfile
from .specfun import gamma_fn, gamma_ratio, gamma_ratio_sequence

__all__ = [
    "G34",
    "PHIBAR_PREFACTOR",
    "SeriesCoefficients",
    "TruncationError",
    "InconsistentSystemError",
    "mu_recursion",
    "coefficient_oracle",
    "solve_mu01",
    "summand_gaps",
    "phibar_series",
    "PhiBar",
    "gbar",
    "export_csv",
]

G34 = float(gamma_fn(0.75))
PHIBAR_PREFACTOR = 3.0 * math.pi * math.sqrt(2.0) / (64.0 * G34**2)
_EVEN_LEAD = -3.0 * math.pi * math.sqrt(2.0) / (32.0 * G34**2)
_ODD_LEAD = 3.0 * math.sqrt(2.0) * G34**2 / (8.0 * math.pi)


class TruncationError(ArithmeticError):
    """The requested truncation cannot meet the tail tolerance."""


class InconsistentSystemError(ArithmeticError):
    """A collected coefficient equation has no solution."""


@dataclass(frozen=True)
class SeriesCoefficients:
    """``mu_0 .. mu_M`` of ``Phi(z) = sum mu_j z^(2j+1)``."""

    mu: np.ndarray
    mu0: float
    mu1: float
    M: int
    collected: dict = field(default_factory=dict, repr=False)

    def __getitem__(self, j):
        return self.mu[j]

    def __call__(self, z):
        """Evaluate ``Phi`` by Horner in ``z^2``; only meaningful for ``|z| < sqrt 2``."""
        z = np.asarray(z, dtype=float)
        z2 = z * z
        acc = np.zeros_like(z)
        for c in self.mu[::-1]:
            acc = acc * z2 + c
        return acc * z


def mu_recursion(mu0, mu1, M=200):
    """Coefficients from the closed Gamma-ratio formulas (indices ``j >= 2``).

    ``mu[2m] = A G(m-1/4)/(4^m G(m+5/4)) - mu0/sqrt(pi) G(m+1/2)/(4^m m! (4m-1))``
    and ``mu[2m+1] = B mu1 G(m+1/4)/(4^m G(m+7/4))`` for ``m >= 1``.
    """
    M = int(M)
    if M < 4:
        raise ValueError("M must be at least 4")
    mh = M // 2 + 1
    even_a = gamma_ratio_sequence(-0.25, 1.25, mh, scale=0.25)
    even_b = gamma_ratio_sequence(0.5, 1.0, mh, scale=0.25)
    odd = gamma_ratio_sequence(0.25, 1.75, mh, scale=0.25)
    m = np.arange(mh + 1)
    even = _EVEN_LEAD * even_a - mu0 / math.sqrt(math.pi) * even_b / (4.0 * m - 1.0)
    odd = _ODD_LEAD * mu1 * odd

    mu = np.empty(M + 1)
    mu[0::2] = even[: mu[0::2].size]
    mu[1::2] = odd[: mu[1::2].size]
    mu[0], mu[1] = mu0, mu1
    return SeriesCoefficients(mu=mu, mu0=float(mu0), mu1=float(mu1), M=M)


# ODE for Phi, times 16: list of (coefficient, power of z, derivative order)
_ODE_TERMS = (
    (1, 8, 4), (-8, 4, 4), (16, 0, 4),
    (12, 7, 3), (-48, 3, 3),
    (26, 6, 2), (-56, 2, 2),
    (-16, 5, 1), (32, 1, 1),
    (-20, 4, 0), (48, 0, 0),
)
_ODE_RHS = {1: Fraction(-9), 5: Fraction(27, 8)}  # right-hand side, before the factor 16


def _falling(n, d):
    out = 1
    for i in range(d):
        out *= n - i
    return out


def _shift_coefficients(n):
    """Exact image of ``z^n`` under 16 x (ODE operator): ``{shift: coefficient}``."""
    out = {}
    for c, p, d in _ODE_TERMS:
        sh = p - d
        out[sh] = out.get(sh, Fraction(0)) + Fraction(c * _falling(n, d))
    return out


def coefficient_oracle(M=200, mu0=0.0, mu1=None, dps=40):
    """Brute-force coefficients obtained by substituting the series into the ODE.

    Powers of ``z`` are collected with exact rational coefficients; the
    unknowns are carried in ``dps``-digit floating point.  The returned
    ``collected`` dict maps the power ``e`` to the collected left-hand side
    (divided by 16) so the right-hand side can be read back.
    """
    M = int(M)
    if M < 4:
        raise ValueError("M must be at least 4")
    if mu1 is None:
        mu1 = solve_mu01()[1]
    shifts = [_shift_coefficients(2 * j + 1) for j in range(M + 1)]
    with mpmath.workdps(dps):
        mu = [mpmath.mpf(mu0), mpmath.mpf(mu1)] + [mpmath.mpf(0)] * (M - 1)
        for top in range(2, M + 1):
            e = 2 * top - 3  # power fixed by the equation that first contains mu[top]
            lead = shifts[top].get(-4, Fraction(0))
            rest = mpmath.mpf(0)
            for j in (top - 2, top - 4):
                if j >= 0:
                    c = shifts[j].get(e - (2 * j + 1), Fraction(0))
                    rest += mpmath.mpf(c.numerator) / c.denominator * mu[j]
            rhs = 16 * _ODE_RHS.get(e, Fraction(0))
            rhs = mpmath.mpf(rhs.numerator) / rhs.denominator
            if lead == 0:
                if abs(rhs - rest) > mpmath.mpf(10) ** (-dps // 2):
                    raise InconsistentSystemError(f"z^{e} equation cannot be satisfied")
                continue
            mu[top] = (rhs - rest) / (mpmath.mpf(lead.numerator) / lead.denominator)

        collected = {}
        for e in range(-3, 2 * M - 2, 2):
            total = mpmath.mpf(0)
            for j in range(M + 1):
                c = shifts[j].get(e - (2 * j + 1))
                if c:
                    total += mpmath.mpf(c.numerator) / c.denominator * mu[j]
            collected[e] = float(total / 16)
        vals = np.array([float(v) for v in mu])
    return SeriesCoefficients(mu=vals, mu0=float(mu0), mu1=float(mu1), M=M, collected=collected)


def solve_mu01(return_system=False):
    """Solve the two endpoint conditions for ``(mu0, mu1)``.

    Row 1 removes the ``m^(-1/2)`` tail of the coefficients of ``phibar'``,
    row 2 the one of ``phibar'''``.
    """
    sq2, spi = math.sqrt(2.0), math.sqrt(math.pi)
    A = np.array([
        [-1.0 / spi, 3.0 * sq2 * G34**2 / math.pi],
        [2.0 / spi, -4.5 * sq2 * G34**2 / math.pi],
    ])
    b = np.array([
        3.0 * math.pi * sq2 / (8.0 * G34**2),
        -9.0 * math.pi * sq2 / (16.0 * G34**2),
    ])
    det = float(np.linalg.det(A))
    if abs(det) < 1e-12:
        raise np.linalg.LinAlgError("endpoint system is singular")
    sol = np.linalg.solve(A, b)
    mu0 = 0.0 if abs(sol[0]) < 1e-14 else float(sol[0])
    out = (mu0, float(sol[1]))
    if return_system:
        return out, A, b, det
    return out


def summand_gaps(M=200):
    """``G(m+1/4)/G(m+7/4) - G(m+3/4)/G(m+9/4)`` for ``m = 0..M``."""
    return gamma_ratio_sequence(0.25, 1.75, M) - gamma_ratio_sequence(0.75, 2.25, M)


def phibar_series(k, M=200):
    """Direct truncated two-Gamma-sum for ``phibar`` as a function of ``k``.

    Kept as a reference; it converges slowly as ``|k| -> sqrt 2``.
    """
    k = np.asarray(k, dtype=float)
    x = k**4 / 4.0
    a = gamma_ratio_sequence(0.75, 2.25, M)
    b = gamma_ratio_sequence(0.25, 1.75, M)
    acc5 = np.zeros_like(k)
    acc3 = np.zeros_like(k)
    for m in range(M, -1, -1):
        acc5 = acc5 * x + a[m]
        acc3 = acc3 * x + b[m]
    return PHIBAR_PREFACTOR * (-0.5 * k**5 * acc5 + k**3 * acc3)


def _derive(poly):
    """Apply ``D = p d/dk - (k^3/2) d/dp`` to ``{(i, j): c}``."""
    out = {}
    for (i, j), c in poly.items():
        if i:
            key = (i - 1, j + 1)
            out[key] = out.get(key, 0.0) + i * c
        if j:
            key = (i + 3, j - 1)
            out[key] = out.get(key, 0.0) - 0.5 * j * c
    return out


def _as_arrays(poly):
    keys = sorted(poly)
    return (
        np.array([k[0] for k in keys]),
        np.array([k[1] for k in keys]),
        np.array([poly[k] for k in keys]),
    )


def _eval_poly(arrs, k, p):
    ii, jj, cc = arrs
    # group by powers through repeated products to avoid pow overflow warnings
    kp = np.power.outer(k, ii) if k.ndim else k**ii
    pp = np.power.outer(p, jj) if p.ndim else p**jj
    return (kp * pp) @ cc


class PhiBar:
    """Evaluator for ``phibar(s)`` and its first four s-derivatives.

    Parameters
    ----------
    M : int
        Number of terms kept in each of the two local series.
    mu : tuple, optional
        ``(mu0, mu1)``; defaults to the solution of the endpoint system.  Only
        the interior series is available for other choices.
    switch : float
        Interior series is used for ``k^4/4 <= switch``, endpoint series above.
    tol : float
        Bound on the truncated geometric tail of either series.
    """

    def __init__(self, M=200, mu=None, switch=0.5, tol=1e-10, profile=None):
        self.M = int(M)
        self.switch = float(switch)
        self.profile = profile or CurvatureProfile()
        if mu is None:
            mu = solve_mu01()
        self.coefficients = mu_recursion(mu[0], mu[1], max(self.M, 4))
        self._closed_form = mu[0] == 0.0 and abs(mu[1] - solve_mu01()[1]) < 1e-14

        tail_in = np.max(np.abs(self.coefficients.mu[-2:])) * 2.0 * (4.0 * self.switch) ** (self.M // 2)
        # F(1, a; 1/2; q) = sum (a)_n / (1/2)_n q^n, ratio (n+a)/(n+1/2)
        c34 = gamma_ratio_sequence(0.75, 0.5, self.M) / gamma_ratio(0.75, 0.5, 0.0)
        c14 = gamma_ratio_sequence(0.25, 0.5, self.M) / gamma_ratio(0.25, 0.5, 0.0)
        tail_end = (c34[-1] + c14[-1]) * 2.0 * (1.0 - self.switch) ** self.M
        self.tail_bound = float(max(tail_in, tail_end if self._closed_form else 0.0))
        if self.tail_bound > tol:
            raise TruncationError(
                f"tail bound {self.tail_bound:.2e} exceeds {tol:.1e}; increase M (now {self.M})"
            )

        interior = {(2 * j + 1, 0): float(c) for j, c in enumerate(self.coefficients.mu) if c != 0.0}
        self._interior = self._tower(interior)
        self._endpoint = None
        if self._closed_form:
            r5 = 2.0 * PHIBAR_PREFACTOR * (-0.5) * gamma_ratio(0.75, 1.25, 0.0)
            r3 = 2.0 * PHIBAR_PREFACTOR * gamma_ratio(0.25, 0.75, 0.0)
            endpoint = {}
            for j in range(self.M + 1):
                endpoint[(5, 2 * j)] = r5 * c34[j]
                endpoint[(3, 2 * j)] = r3 * c14[j]
            self._endpoint = self._tower(endpoint)

    @staticmethod
    def _tower(poly):
        out = [poly]
        for _ in range(4):
            out.append(_derive(out[-1]))
        return [_as_arrays(p) for p in out]

    def of_kp(self, k, p, order=4):
        """Stack of ``D^r Phi`` for ``r <= order`` at given ``(k, k')``."""
        k = np.asarray(k, dtype=float)
        p = np.asarray(p, dtype=float)
        k, p = np.broadcast_arrays(k, p)
        x = k**4 / 4.0
        inner = x <= self.switch
        out = np.empty((order + 1,) + k.shape)
        for r in range(order + 1):
            vals = np.empty(k.shape)
            if np.any(inner):
                vals[inner] = _eval_poly(self._interior[r], k[inner], p[inner])
            if np.any(~inner):
                if self._endpoint is None:
                    raise TruncationError("endpoint series only exists for the closed-form coefficients")
                vals[~inner] = _eval_poly(self._endpoint[r], k[~inner], p[~inner])
            out[r] = vals
        return out

    def __call__(self, s, order=4):
        """``[phibar, phibar', ..., phibar^(order)]`` at arc length ``s``."""
        s = np.asarray(s, dtype=float)
        k, p = self.profile.derivatives(s, order=1)
        return self.of_kp(k, p, order)

    def L0_residual(self, s):
        """Pointwise ``L0 phibar - gbar`` from the exact derivatives."""
        s = np.asarray(s, dtype=float)
        k, k1 = self.profile.derivatives(s, order=1)
        f = self.of_kp(k, k1, 4)
        lhs = f[4] + 2.5 * (2.0 * k * k1 * f[1] + k**2 * f[2]) + (3.0 - 1.25 * k**4) * f[0]
        return lhs - gbar(s, self.profile)


def gbar(s, profile=None):
    """``9/8 k^5 - 9 k k'^2``."""
    profile = profile or CurvatureProfile()
    k, k1 = profile.derivatives(np.asarray(s, dtype=float), order=1)
    return 1.125 * k**5 - 9.0 * k * k1**2


def export_csv(path, n=512, M=200, op=None):
    """Write ``s, k, phibar, phibar', L0 phibar - gbar`` on the periodic grid.

    The residual column uses the spectral operator when ``op`` is given and
    the exact pointwise derivatives otherwise.
    """
    pb = PhiBar(M=M)
    s = np.arange(n) * T_BAR / n
    k = pb.profile.derivatives(s, order=0)[0]
    f = pb(s, order=1)
    if op is not None:
        res = op.apply(f[0]) - gbar(s, pb.profile)
    else:
        res = pb.L0_residual(s)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "k", "phibar", "phibar_prime", "residual"])
        for row in zip(s, k, f[0], f[1], res):
            w.writerow([f"{v:.17g}" for v in row])
    return path
