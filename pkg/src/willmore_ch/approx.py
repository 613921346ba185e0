"""Fermi chart around the dilated curve and the five-term approximate solution.

Coordinates: ``s`` is arc length on ``gamma_T`` (period ``T = Tbar/eps``),
``z`` the signed distance along ``nu = gamma_T'^perp``, and
``t = z - phi_star(eps s)`` the layer variable.  The tilt ``phi`` and its
Fourier truncation ``phi_star`` are functions of ``sigma = eps s`` and
already carry their factor ``eps``.

Every quantity is evaluated as a bivariate jet in ``(ds, dz)`` so that the
fourth-order Cahn-Hilliard operator can be applied with exact metric
coefficients and exact chain rules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator

from .curve import T_BAR, CurvatureProfile, PlanarCurve, build_curve
from .jets import Jet, s_jet, z_jet
from .layers import C_STAR, D_STAR, LayerProfiles, eta_tilde_stack, v0_stack
from .phibar import PhiBar

__all__ = [
    "TubeExitError",
    "zeta",
    "smoothing_R",
    "fourier_stack",
    "TiltFunction",
    "FermiChart",
    "ApproxField",
    "assemble",
    "fermi_laplacian",
    "laplacian_fermi_exact",
    "laplacian_expansion",
    "GlobalField",
    "globalize",
    "ApproximateSolution",
]

TILT_MODES = ("zero", "leading", "leading+psi")
CORRECTIONS = ("v1", "v2", "v3", "v4")


class TubeExitError(ValueError):
    """Requested point lies outside ``|t| < 1/(4 eps)``."""


# ---------------------------------------------------------------- cutoff

def _flat(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def zeta(t):
    """C-infinity step: 1 for ``t <= 1``, 0 for ``t >= 2``, monotone between."""
    t = np.asarray(t, dtype=float)
    a, b = _flat(2.0 - t), _flat(t - 1.0)
    return a / (a + b)


# ---------------------------------------------------------------- smoothing

def _rfft_coefficients(values):
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    c = np.fft.rfft(values) / n
    c[1:] *= 2.0
    if n % 2 == 0:
        c[-1] /= 2.0
    return c


def smoothing_R(values, theta, period=T_BAR):
    """Fourier projection onto modes with ``|n| 2 pi / period <= theta``."""
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    c = np.fft.rfft(values)
    freq = np.arange(c.shape[-1]) * 2.0 * math.pi / period
    c[freq > theta * (1.0 + 1e-14)] = 0.0
    return np.fft.irfft(c, n)


def fourier_stack(coeffs, period, x, order):
    """Derivative stack of ``Re sum_n c_n exp(i n w x)`` at points ``x``."""
    x = np.asarray(x, dtype=float)
    w = 2.0 * math.pi / period
    n = np.arange(len(coeffs))
    live = np.nonzero(coeffs)[0]
    out = np.zeros((order + 1,) + x.shape)
    if live.size == 0:
        return out
    phase = np.exp(1j * np.multiply.outer(x, n[live] * w))
    for r in range(order + 1):
        out[r] = np.real(phase @ (coeffs[live] * (1j * n[live] * w) ** r))
    return out


@dataclass
class TiltFunction:
    """``phi = eps (scale * phibar + psi)`` and ``phi_star = R_{1/eps} phi``.

    ``psi`` is given by samples on the uniform grid of ``[0, Tbar)``.  The
    unsmoothed ``phibar`` part is evaluated exactly (no Fourier truncation).
    """

    eps: float
    scale: float = 0.0
    phibar: Optional[PhiBar] = None
    psi: Optional[np.ndarray] = None
    n_grid: int = 512
    theta: Optional[float] = None

    def __post_init__(self):
        if self.theta is None:
            self.theta = 1.0 / self.eps
        grid = np.arange(self.n_grid) * T_BAR / self.n_grid
        total = np.zeros(self.n_grid)
        if self.scale != 0.0:
            if self.phibar is None:
                self.phibar = PhiBar()
            total += self.scale * self.phibar(grid, order=0)[0]
        self._psi_coef = None
        if self.psi is not None:
            psi = np.asarray(self.psi, dtype=float)
            if psi.shape != (self.n_grid,):
                raise ValueError("psi must be sampled on the tilt grid")
            self._psi_coef = _rfft_coefficients(psi)
            total += psi
        c = _rfft_coefficients(total)
        freq = np.arange(c.size) * 2.0 * math.pi / T_BAR
        c[freq > self.theta * (1.0 + 1e-14)] = 0.0
        c[np.abs(c) < 1e-300] = 0.0
        self._star_coef = c

    @property
    def is_zero(self):
        return self.scale == 0.0 and self._psi_coef is None

    @property
    def modes_kept(self):
        return int(np.count_nonzero(self._star_coef))

    def star(self, sigma, order=4):
        """Stack of ``phi_star`` in the slow variable ``sigma``."""
        return self.eps * fourier_stack(self._star_coef, T_BAR, sigma, order)

    def full(self, sigma, order=4):
        """Stack of the unsmoothed ``phi`` (order <= 4)."""
        sigma = np.asarray(sigma, dtype=float)
        out = np.zeros((order + 1,) + sigma.shape)
        if self.scale != 0.0:
            out += self.scale * self.phibar(sigma, order=order)
        if self._psi_coef is not None:
            out += fourier_stack(self._psi_coef, T_BAR, sigma, order)
        return self.eps * out

    def smoothing_gap(self, n=2048):
        """``sup |phi - phi_star|`` on a fine grid."""
        sigma = np.arange(n) * T_BAR / n
        return float(np.max(np.abs(self.full(sigma, 0)[0] - self.star(sigma, 0)[0])))


# ---------------------------------------------------------------- chart

class FermiChart:
    """``Z(s, t) = gamma_T(s) + (t + phi_star(eps s)) nu(s)``."""

    def __init__(self, eps, tilt: Optional[TiltFunction] = None, curve: Optional[PlanarCurve] = None):
        self.eps = float(eps)
        self.curve = curve if curve is not None else build_curve()
        self.tilt = tilt if tilt is not None else TiltFunction(self.eps)
        self.profile = self.curve.profile
        self.T = T_BAR / self.eps
        self.L = self.curve.x1_period / self.eps
        self.half_width = 0.25 / self.eps
        # invertibility radius from the determinant bound
        self.chart_radius = 1.0 / (2.0 * math.sqrt(2.0) * self.eps)
        n_seed = max(256, int(8 * self.T))
        self._seed_s = np.linspace(-0.75 * self.T, 0.75 * self.T, n_seed)
        self._seed_x = self.gamma(self._seed_s)

    # geometry of gamma_T
    def gamma(self, s):
        return self.curve.position(self.eps * np.asarray(s, dtype=float)) / self.eps

    def tangent(self, s):
        return self.curve.tangent(self.eps * np.asarray(s, dtype=float))

    def normal(self, s):
        return self.curve.normal(self.eps * np.asarray(s, dtype=float))

    def kappa(self, s):
        """Curvature of ``gamma_T``: ``eps k(eps s)``."""
        return self.eps * self.profile.derivatives(self.eps * np.asarray(s, dtype=float), 0)[0]

    def untilted(self, s, z):
        return self.gamma(s) + np.asarray(z, dtype=float)[..., None] * self.normal(s)

    def forward(self, s, t):
        s = np.asarray(s, dtype=float)
        z = np.asarray(t, dtype=float) + self.tilt.star(self.eps * s, 0)[0]
        return self.untilted(s, z)

    def g_ss(self, s, z):
        return (1.0 - np.asarray(z) * self.kappa(s)) ** 2

    def det(self, s, t):
        s = np.asarray(s, dtype=float)
        z = np.asarray(t, dtype=float) + self.tilt.star(self.eps * s, 0)[0]
        return 1.0 - self.kappa(s) * z

    def inverse(self, x, max_iter=50, tol=1e-13):
        """``(s, z)`` of points ``x`` (shape ``(..., 2)``) by damped Newton."""
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        x = x.reshape(-1, 2)
        m = np.round(x[:, 0] / self.L)
        xr = x - np.stack([m * self.L, np.zeros_like(m)], axis=1)
        s = np.empty(len(xr))
        for lo in range(0, len(xr), 512):
            blk = xr[lo: lo + 512]
            d2 = ((blk[:, None, :] - self._seed_x[None, :, :]) ** 2).sum(-1)
            s[lo: lo + 512] = self._seed_s[np.argmin(d2, axis=1)]
        for _ in range(max_iter):
            r = xr - self.gamma(s)
            tau = self.tangent(s)
            z = np.sum(r * self.normal(s), axis=1)
            f = np.sum(r * tau, axis=1)
            jac = np.maximum(1.0 - self.kappa(s) * z, 0.25)
            step = np.clip(f / jac, -2.0, 2.0)
            s = s + step
            if np.max(np.abs(step)) < tol * max(1.0, self.T):
                break
        z = np.sum((xr - self.gamma(s)) * self.normal(s), axis=1)
        s = s + m * self.T
        return s.reshape(shape), z.reshape(shape)

    def to_fermi(self, x):
        s, z = self.inverse(x)
        return s, z - self.tilt.star(self.eps * s, 0)[0]

    def side(self, x):
        """``H(x)``: +1 above the curve, -1 below (the curve is a graph over x1)."""
        x = np.asarray(x, dtype=float)
        s, z = self.inverse(x)
        return np.where(z >= 0.0, 1.0, -1.0)

    def position_jet(self, s, z, degree=4):
        """Jets of ``x1, x2`` of the untilted chart in ``(ds, dz)``."""
        s = np.asarray(s, dtype=float)
        sigma = self.eps * s
        k = self.profile.derivatives(sigma, degree)
        th = self.curve.theta_at(sigma)
        # theta_T(s) = theta(eps s); theta' = k
        th_stack = np.concatenate([th[None], k[:degree]], axis=0)
        Th = s_jet(th_stack, degree, self.eps)
        tau1 = Th.compose(np.stack([-np.sin(th), -np.cos(th), np.sin(th), np.cos(th), -np.sin(th)][: degree + 1]))
        tau2 = Th.compose(np.stack([np.cos(th), -np.sin(th), -np.cos(th), np.sin(th), np.cos(th)][: degree + 1]))
        g0 = self.gamma(s)
        Z = z_jet(np.asarray(z, dtype=float) * np.ones_like(s), degree)
        out = []
        for comp, tau in ((0, tau1), (1, tau2)):
            c = np.zeros_like(tau.coef)
            c[0, 0] = g0[..., comp]
            for n in range(1, degree + 1):
                c[n, 0] = tau.coef[n - 1, 0] / n
            out.append(Jet(c, degree))
        nu1, nu2 = -tau2, tau1
        return out[0] + Z * nu1, out[1] + Z * nu2


# ---------------------------------------------------------------- field

def fermi_laplacian(u: Jet, a: Jet) -> Jet:
    """Exact Laplacian in ``(s, z)`` with ``sqrt(g_ss) = a``."""
    us, uz = u.d_s(), u.d_z()
    a_inv = a.reciprocal()
    return us.d_s() * a_inv**2 - a.d_s() * us * a_inv**3 + uz.d_z() + a.d_z() * a_inv * uz


@dataclass
class ApproxField:
    """Evaluator of ``v_tilde(s, t)`` with jets through total order 4."""

    eps: float
    tilt: TiltFunction
    profiles: LayerProfiles
    ablate: tuple = ()
    v2_argument: str = "literal"
    strict: bool = True
    curvature: CurvatureProfile = field(default_factory=CurvatureProfile)

    def __post_init__(self):
        bad = set(self.ablate) - set(CORRECTIONS)
        if bad:
            raise ValueError(f"unknown corrections {sorted(bad)}")
        if self.v2_argument not in ("literal", "shifted"):
            raise ValueError("v2_argument is 'literal' or 'shifted'")
        self.half_width = 0.25 / self.eps

    def _check_tube(self, t):
        if self.strict and np.any(np.abs(t) >= self.half_width):
            raise TubeExitError(f"|t| must stay below 1/(4 eps) = {self.half_width:g}")

    def _profile(self, name, T: Jet):
        t0 = T.value
        if name == "v0":
            stack = v0_stack(t0, T.degree)
        elif name == "eta_tilde":
            stack = eta_tilde_stack(t0, T.degree)
        else:
            stack = getattr(self.profiles, name).derivatives(t0, T.degree)
        return T.compose(stack)

    def jets(self, s, t, degree=4, coords="sz"):
        """``(u, a)``: jet of the field and of ``sqrt(g_ss) = 1 - eps z k``.

        ``coords='sz'`` expands in ``(ds, dz)``; ``'st'`` in ``(ds, dt)``.
        """
        s, t = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
        self._check_tube(t)
        eps, D = self.eps, degree
        # slow-variable stacks depend on s only; evaluate once per distinct s
        su, inv = np.unique(eps * s, return_inverse=True)
        inv = inv.reshape(s.shape)
        kst = self.curvature.derivatives(su, D + 1)[:, inv]
        K = s_jet(kst[: D + 1], D, eps)
        K1 = s_jet(kst[1: D + 2], D, eps)
        P = self.tilt.star(su, D + 2)[:, inv]
        Pj, P1, P2 = (s_jet(P[r: r + D + 1], D, eps) for r in range(3))
        Pu = s_jet(self.tilt.full(su, D)[:, inv], D, eps)
        if coords == "sz":
            Z = z_jet(t + P[0], D)
            T = Z - Pj
        elif coords == "st":
            T = z_jet(t, D)
            Z = T + Pj
        else:
            raise ValueError("coords is 'sz' or 'st'")
        shifted = Z - Pu

        u = self._profile("v0", T if "v1" in self.ablate else shifted)
        if "v2" not in self.ablate:
            arg = T if self.v2_argument == "literal" else shifted
            c2 = eps**2 * (-(K * K) + eps * (-2.0 * K * P2 - 2.0 * K**3 * Pj))
            u = u + c2 * self._profile("eta", arg) + eps**2 * (P1 * P1) * self._profile("eta_tilde", arg)
        if "v3" not in self.ablate:
            u = u + 1.5 * eps**3 * K**3 * self._profile("eta1", T)
        if "v4" not in self.ablate:
            u = u + eps**4 * (K**4 * self._profile("eta2", T) + (K1 * K1) * self._profile("eta3", T))
        a = 1.0 - eps * Z * K
        return u, a

    def __call__(self, s, t):
        return self.jets(s, t, degree=0)[0].value

    def partials(self, s, t, coords="sz"):
        """Dictionary ``{(i, j): d^i_s d^j_(z|t) v}`` for ``i + j <= 4``."""
        u, _ = self.jets(s, t, 4, coords)
        return {(i, j): u.partial(i, j) for i in range(5) for j in range(5 - i)}


def assemble(eps, tilt_mode="leading", profiles=None, phibar=None, psi=None,
             ablate=(), v2_argument="literal", strict=True):
    """Five-term approximate solution for the given tilt mode."""
    if eps > 0.125 + 1e-12:
        raise ValueError("assembly requires eps <= 1/8")
    if tilt_mode not in TILT_MODES:
        raise ValueError(f"tilt mode must be one of {TILT_MODES}")
    profiles = profiles if profiles is not None else LayerProfiles()
    if tilt_mode == "zero":
        tilt = TiltFunction(eps)
    else:
        use_psi = psi if tilt_mode == "leading+psi" else None
        tilt = TiltFunction(eps, D_STAR / C_STAR, phibar or PhiBar(), use_psi)
    return ApproxField(eps, tilt, profiles, tuple(ablate), v2_argument, strict)


# ---------------------------------------------------------------- Laplacians

def laplacian_fermi_exact(field: ApproxField, s, t):
    """Exact Fermi-chart Laplacian of the field at ``(s, t)``."""
    u, a = field.jets(s, t, degree=2)
    return fermi_laplacian(u, a).value


def laplacian_expansion(order, s, t, field: ApproxField):
    """Laplacian with every metric coefficient Taylor-truncated at ``eps**order``.

    Works in ``(s, t)`` with ``z = t + phi_star``; ``phi_star``, ``k`` and
    ``z`` count as O(1), as in the usual bookkeeping of such expansions.
    """
    if not 0 <= order <= 5:
        raise ValueError("order must lie in 0..5")
    eps = field.eps
    s, t = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
    u, _ = field.jets(s, t, degree=2, coords="st")
    d = {(i, j): u.partial(i, j) for i in range(3) for j in range(3 - i)}
    sigma = eps * s
    k, k1 = field.curvature.derivatives(sigma, 1)
    P = field.tilt.star(sigma, 2)
    z = t + P[0]
    zk = z * k

    def series(weight, shift, cap):
        # sum_n weight(n) (zk)^n eps^(n + shift) over n + shift <= cap
        out = np.zeros_like(zk)
        for n in range(0, cap - shift + 1):
            out = out + weight(n) * zk**n * eps ** (n + shift)
        return out

    A = lambda cap: series(lambda n: n + 1.0, 0, cap)                       # 1 / a^2
    B = -k * series(lambda n: 1.0, 1, order)                                # a_z / a
    C = lambda cap: z * k1 * series(lambda n: (n + 1) * (n + 2) / 2.0, 2, cap)  # -a_s / a^3

    lap = (
        A(order) * d[(2, 0)]
        - 2.0 * eps * P[1] * A(order - 1) * d[(1, 1)]
        + eps**2 * A(order - 2) * (P[1] ** 2 * d[(0, 2)] - P[2] * d[(0, 1)])
        + C(order) * d[(1, 0)]
        - eps * P[1] * C(order - 1) * d[(0, 1)]
        + d[(0, 2)]
        + B * d[(0, 1)]
    )
    return lap


# ---------------------------------------------------------------- globalization

class GlobalField:
    """``v = chi_5 v_hat + (1 - chi_5) H`` on the plane."""

    def __init__(self, field: ApproxField, chart: Optional[FermiChart] = None, layer=5):
        self.field = field
        self.chart = chart if chart is not None else FermiChart(field.eps, field.tilt)
        self.layer = layer
        eps = field.eps
        self.band_start = 1.0 / (8.0 * eps) + layer
        # the chart is only used where it is invertible
        self.radius = self.chart.chart_radius

    def cutoff(self, t, inside):
        return np.where(inside, zeta(np.abs(t) - self.band_start), 0.0)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        s, z = self.chart.inverse(x)
        t = z - self.field.tilt.star(self.field.eps * s, 0)[0]
        inside = np.abs(z) < self.radius
        chi = self.cutoff(t, inside)
        H = np.where(z >= 0.0, 1.0, -1.0)
        vhat = np.zeros_like(t)
        live = chi > 0.0
        if np.any(live):
            strict, self.field.strict = self.field.strict, False
            try:
                vhat[live] = self.field(s[live], t[live])
            finally:
                self.field.strict = strict
        return chi * vhat + (1.0 - chi) * H


def globalize(field: ApproxField, chart: Optional[FermiChart] = None):
    return GlobalField(field, chart)


# ---------------------------------------------------------------- estimator

class ApproximateSolution(BaseEstimator):
    """Estimator-style wrapper: ``ApproximateSolution(eps=1/16).fit().predict(X)``.

    ``fit`` builds the layer profiles, the tilt and the chart; ``predict``
    evaluates the globalized field at Cartesian points ``X`` of shape (n, 2).
    """

    def __init__(self, eps=1.0 / 16, tilt_mode="leading", ablate=(), v2_argument="literal",
                 layer_half_width=25.0, layer_n=600):
        self.eps = eps
        self.tilt_mode = tilt_mode
        self.ablate = ablate
        self.v2_argument = v2_argument
        self.layer_half_width = layer_half_width
        self.layer_n = layer_n

    def fit(self, X=None, y=None):
        profiles = LayerProfiles(self.layer_half_width, self.layer_n)
        self.field_ = assemble(self.eps, self.tilt_mode, profiles, ablate=self.ablate,
                               v2_argument=self.v2_argument)
        self.chart_ = FermiChart(self.eps, self.field_.tilt)
        self.global_ = GlobalField(self.field_, self.chart_)
        return self

    def predict(self, X):
        return self.global_(np.asarray(X, dtype=float))

    def fermi(self, X):
        """``(s, t)`` coordinates of Cartesian points."""
        return self.chart_.to_fermi(np.asarray(X, dtype=float))
