"""The periodic planar Willmore curve and its dilations.

The curvature is ``k(s) = sqrt(2) cn(s + Tbar/4 | 1/2)``; it solves
``k'' = -k^3/2`` with first integral ``(k')^2 + k^4/4 = 1``.  Integrating the
turning angle ``theta = int_0^s k`` gives an arc-length parametrised curve
``gamma(s) = int_0^s (-sin theta, cos theta)`` that advances in ``x1`` by
``gamma_1(Tbar)`` per period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .specfun import elliptic_K, jacobi_sncndn

__all__ = [
    "M_WILLMORE",
    "T_BAR",
    "CurvatureProfile",
    "PlanarCurve",
    "curvature",
    "build_curve",
    "rescale",
    "ResolutionError",
]

M_WILLMORE = 0.5
T_BAR = 4.0 * elliptic_K(M_WILLMORE)
SQRT2 = math.sqrt(2.0)


class ResolutionError(RuntimeError):
    """Raised when a discretisation is too coarse for the requested accuracy."""


@dataclass(frozen=True)
class CurvatureProfile:
    """Curvature of the unit-scale Willmore curve and its derivatives."""

    period_bar: float = T_BAR

    def __call__(self, s):
        """Return ``(k, k', k'')`` at arc length ``s``."""
        d = self.derivatives(s, order=2)
        return d[0], d[1], d[2]

    def derivatives(self, s, order=4):
        """Stack ``[k, k', ..., k^(order)]`` with shape ``(order + 1,) + s.shape``.

        ``k'`` and ``k''`` are the analytic derivatives of ``cn``
        (``cn' = -sn dn``, ``cn'' = -cn (dn^2 - m sn^2)``), so the Willmore
        equation is a genuine check on them; higher derivatives are closed
        through ``k'' = -k^3 / 2``.
        """
        s = np.asarray(s, dtype=float)
        sn, cn, dn = jacobi_sncndn(s + 0.25 * self.period_bar, M_WILLMORE)
        ks = [SQRT2 * cn, -SQRT2 * sn * dn, -SQRT2 * cn * (dn * dn - M_WILLMORE * sn * sn)]
        for n in range(1, order - 1):
            # (k^3)^(n) by the trinomial Leibniz rule
            cube = 0.0
            for a in range(n + 1):
                for b in range(n + 1 - a):
                    c = n - a - b
                    w = math.factorial(n) // (math.factorial(a) * math.factorial(b) * math.factorial(c))
                    cube = cube + w * ks[a] * ks[b] * ks[c]
            ks.append(-0.5 * cube)
        return np.stack(ks[: order + 1])

    def turning_angle(self, s):
        """Closed form ``theta(s) = 2 arcsin(sn(s + K)/sqrt 2) - pi/2``.

        Used as an oracle for the quadrature in :func:`build_curve`.
        """
        s = np.asarray(s, dtype=float)
        sn, _, _ = jacobi_sncndn(s + 0.25 * self.period_bar, M_WILLMORE)
        return 2.0 * np.arcsin(sn / SQRT2) - 0.5 * math.pi


def curvature(s):
    """``(k, k', k'')`` of the unit-scale Willmore curve."""
    return CurvatureProfile()(s)


def _spectral_antiderivative(values, period):
    """Periodic antiderivative vanishing at 0, plus the mean slope.

    Returns ``(mean, coeffs)`` where ``coeffs`` are rfft coefficients of the
    zero-mean periodic part ``P`` with ``P(0) = 0``; the full antiderivative is
    ``mean * s + P(s)``.
    """
    n = values.size
    c = np.fft.rfft(values) / n
    mean = c[0].real
    freq = 2.0 * math.pi * np.arange(c.size) / period
    pc = np.zeros_like(c)
    pc[1:] = c[1:] / (1j * freq[1:])
    if n % 2 == 0:
        # Nyquist mode of a real signal has no well-defined antiderivative
        pc[-1] = 0.0
    # fix P(0) = 0
    p0 = pc[0].real + 2.0 * pc[1:].real.sum()
    if n % 2 == 0:
        p0 -= pc[-1].real
    pc[0] = -p0
    return mean, pc


def _trim(coeffs, rtol=1e-17):
    """Drop trailing modes below ``rtol * max|c|``; the curve data are analytic, so few survive."""
    mag = np.abs(coeffs)
    big = np.nonzero(mag > rtol * mag.max())[0]
    last = big[-1] + 1 if big.size else 1
    return coeffs[: max(last, 2)].copy()


def _eval_rfft_series(coeffs, period, s, deriv=0):
    """Evaluate ``sum c_n e^{i w n s}`` (real signal convention) or its derivative."""
    s = np.asarray(s, dtype=float)
    nmode = np.arange(coeffs.size)
    w = 2.0 * math.pi * nmode / period
    phase = np.exp(1j * np.multiply.outer(s, w))
    fac = (1j * w) ** deriv
    weights = np.where(nmode == 0, 1.0, 2.0)
    return (phase * (coeffs * fac * weights)).real.sum(axis=-1)


@dataclass(frozen=True)
class PlanarCurve:
    """Arc-length parametrised Willmore curve, possibly dilated by ``1/eps``.

    The curve is stored at unit scale as spectral coefficients of the
    periodic parts of ``theta`` and ``gamma``; ``eps`` only enters on
    evaluation, ``gamma_T(s) = gamma(eps s) / eps``.
    """

    s: np.ndarray
    gamma: np.ndarray
    theta: np.ndarray
    eps: float = 1.0
    x1_period: float = field(default=0.0)
    _theta_coef: np.ndarray = field(default=None, repr=False)
    _g1_mean: float = field(default=0.0, repr=False)
    _g1_coef: np.ndarray = field(default=None, repr=False)
    _g2_coef: np.ndarray = field(default=None, repr=False)
    profile: CurvatureProfile = field(default_factory=CurvatureProfile, repr=False)

    @property
    def period(self):
        """Arc-length period of this (possibly rescaled) curve, ``T = Tbar / eps``."""
        return self.profile.period_bar / self.eps

    def theta_at(self, s):
        """Turning angle of the rescaled curve at its own arc length ``s``."""
        return _eval_rfft_series(self._theta_coef, self.profile.period_bar, self.eps * np.asarray(s))

    def position(self, s):
        """``gamma_T(s)`` with shape ``s.shape + (2,)``."""
        u = self.eps * np.asarray(s, dtype=float)
        g1 = self._g1_mean * u + _eval_rfft_series(self._g1_coef, self.profile.period_bar, u)
        g2 = _eval_rfft_series(self._g2_coef, self.profile.period_bar, u)
        return np.stack([g1, g2], axis=-1) / self.eps

    def tangent(self, s):
        th = self.theta_at(s)
        return np.stack([-np.sin(th), np.cos(th)], axis=-1)

    def normal(self, s):
        """``gamma_T'(s)^perp`` with ``w^perp = (-w2, w1)``."""
        th = self.theta_at(s)
        return np.stack([-np.cos(th), -np.sin(th)], axis=-1)

    def curvature_at(self, s):
        """Curvature of the rescaled curve, ``eps * k(eps s)``."""
        return self.eps * self.profile.derivatives(self.eps * np.asarray(s), order=0)[0]

    def unit_speed_defect(self):
        """Sup over the stored grid of ``| |gamma'| - 1 |`` from the spectral derivative."""
        u = self.s * self.eps
        d1 = self._g1_mean + _eval_rfft_series(self._g1_coef, self.profile.period_bar, u, deriv=1)
        d2 = _eval_rfft_series(self._g2_coef, self.profile.period_bar, u, deriv=1)
        return float(np.max(np.abs(np.hypot(d1, d2) - 1.0)))

    def frenet_defect(self):
        """Sup of ``|gamma'' - k gamma'^perp|`` at unit scale on the stored grid."""
        u = self.s * self.eps
        pb = self.profile.period_bar
        dd1 = _eval_rfft_series(self._g1_coef, pb, u, deriv=2)
        dd2 = _eval_rfft_series(self._g2_coef, pb, u, deriv=2)
        th = _eval_rfft_series(self._theta_coef, pb, u)
        k = self.profile.derivatives(u, order=0)[0]
        r1 = dd1 - k * (-np.cos(th))
        r2 = dd2 - k * (-np.sin(th))
        return float(np.max(np.hypot(r1, r2)))


def build_curve(n_samples=512, check=True):
    """Integrate the Willmore curvature into the unit-scale curve ``gamma``.

    Quadrature is spectral on the periodic grid: ``k`` has zero mean so its
    antiderivative is periodic, and ``(-sin theta, cos theta)`` splits into
    a mean drift plus a periodic part.
    """
    n_samples = int(n_samples)
    if n_samples < 64 or n_samples % 2:
        raise ValueError("n_samples must be an even integer >= 64")
    profile = CurvatureProfile()
    pb = profile.period_bar
    s = np.arange(n_samples) * pb / n_samples
    k = profile.derivatives(s, order=0)[0]

    _, th_coef = _spectral_antiderivative(k, pb)
    theta = _eval_rfft_series(th_coef, pb, s)
    g1_mean, g1_coef = _spectral_antiderivative(-np.sin(theta), pb)
    g2_mean, g2_coef = _spectral_antiderivative(np.cos(theta), pb)
    th_coef, g1_coef, g2_coef = _trim(th_coef), _trim(g1_coef), _trim(g2_coef)
    if abs(g2_mean) > 1e-12:
        raise ResolutionError(f"curve does not close vertically (drift {g2_mean:.3e})")
    g1 = g1_mean * s + _eval_rfft_series(g1_coef, pb, s)
    g2 = _eval_rfft_series(g2_coef, pb, s)

    curve = PlanarCurve(
        s=s,
        gamma=np.stack([g1, g2], axis=-1),
        theta=theta,
        eps=1.0,
        x1_period=g1_mean * pb,
        _theta_coef=th_coef,
        _g1_mean=g1_mean,
        _g1_coef=g1_coef,
        _g2_coef=g2_coef,
        profile=profile,
    )
    if check:
        defect = curve.unit_speed_defect()
        if defect > 1e-9:
            raise ResolutionError(f"unit-speed defect {defect:.3e} exceeds 1e-9; increase n_samples")
    return curve


def rescale(curve, T):
    """Dilate to ``gamma_T(s) = gamma(eps s) / eps`` with ``eps = Tbar / T``."""
    T = float(T)
    pb = curve.profile.period_bar
    if T < pb * (1.0 - 1e-12):
        raise ValueError(f"period T={T} must be at least Tbar={pb:.6f}")
    eps = pb / T
    s = curve.s / eps
    return PlanarCurve(
        s=s,
        gamma=curve.gamma / eps,
        theta=curve.theta,
        eps=eps,
        x1_period=curve._g1_mean * pb / eps,
        _theta_coef=curve._theta_coef,
        _g1_mean=curve._g1_mean,
        _g1_coef=curve._g1_coef,
        _g2_coef=curve._g2_coef,
        profile=curve.profile,
    )
