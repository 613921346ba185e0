"""One-dimensional transition layer and its correction profiles.

``v0 = tanh(t / sqrt 2)`` is the heteroclinic of ``-v'' = v - v^3``.  The
linearisation ``L* u = -u'' + (3 v0^2 - 1) u`` has the decaying kernel
``v0'``; every profile below is the unique solution orthogonal to it.

Profiles are stored as Chebyshev series on ``[-L, L]`` (value only).  The
first derivative comes from the series, higher ones from the ODE closure
``u'' = V u - L*u`` with ``V = 3 v0^2 - 1``, so the fourth derivative of
``eta_1`` never requires differentiating grid data more than once.

Derivative information is passed around as *stacks*: arrays of shape
``(order + 1,) + t.shape`` holding ``[f, f', f'', ...]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.fft
import scipy.linalg
from numpy.polynomial import chebyshev as C
from sklearn.base import BaseEstimator, TransformerMixin

__all__ = [
    "SQRT2",
    "C_STAR",
    "D_STAR",
    "SolvabilityError",
    "v0",
    "v0_stack",
    "potential_stack",
    "t_stack",
    "leibniz",
    "lstar_stack",
    "LayerProfile",
    "LayerSolver",
    "LayerProfiles",
    "LayerConstants",
    "q_form",
    "eta_explicit",
    "ProfileTransformer",
]

SQRT2 = math.sqrt(2.0)
C_STAR = 2.0 * SQRT2 / 3.0
D_STAR = SQRT2 * (math.pi**2 - 6.0) / 9.0
_MAX_ORDER = 8


class SolvabilityError(ValueError):
    """Right-hand side has a component along the kernel ``v0'``."""


# ---------------------------------------------------------------- analytic stacks

def _tanh_polys(order):
    """Polynomials ``P_n(y)`` with ``d^n/dt^n tanh(t/sqrt2) = P_n(tanh(t/sqrt2))``."""
    P = np.polynomial.Polynomial
    polys = [P([0.0, 1.0])]
    w = P([1.0, 0.0, -1.0]) / SQRT2
    for _ in range(order):
        polys.append(polys[-1].deriv() * w)
    return polys


_V0_POLYS = _tanh_polys(_MAX_ORDER + 4)


def v0(t):
    return np.tanh(np.asarray(t, dtype=float) / SQRT2)


def v0_stack(t, order=4):
    y = v0(t)
    return np.stack([p(y) for p in _V0_POLYS[: order + 1]])


def leibniz(a, b):
    """Derivative stack of the product of two stacks (same order)."""
    n = min(a.shape[0], b.shape[0])
    out = np.zeros((n,) + np.broadcast_shapes(a.shape[1:], b.shape[1:]))
    for r in range(n):
        for i in range(r + 1):
            out[r] += math.comb(r, i) * a[i] * b[r - i]
    return out


def t_stack(t, order=4, power=1):
    """Stack of ``t**power``."""
    t = np.asarray(t, dtype=float)
    out = np.zeros((order + 1,) + t.shape)
    for r in range(min(order, power) + 1):
        out[r] = math.perm(power, r) * t ** (power - r)
    return out


def shift(stack, n=1):
    """Stack of the ``n``-th derivative (drops the top ``n`` entries)."""
    return stack[n:]


def potential_stack(t, order=4):
    """``V = W''(v0) = 3 v0^2 - 1``."""
    v = v0_stack(t, order)
    out = 3.0 * leibniz(v, v)
    out[0] -= 1.0
    return out


def lstar_stack(u, t):
    """``L* u = -u'' + V u`` from a stack ``u`` of order ``r + 2``; returns order ``r``."""
    r = u.shape[0] - 3
    V = potential_stack(t, r)
    return -u[2:] + leibniz(V, u[: r + 1])


# ---------------------------------------------------------------- Chebyshev kit

def _cheb_points(n):
    return np.cos(np.pi * np.arange(n + 1) / n)


def _cheb_diff(n):
    """Trefethen's Chebyshev differentiation matrix on ``n + 1`` extreme points."""
    x = _cheb_points(n)
    c = np.ones(n + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(n + 1)
    X = np.tile(x, (n + 1, 1)).T
    dX = X - X.T
    D = np.outer(c, 1.0 / c) / (dX + np.eye(n + 1))
    D -= np.diag(D.sum(axis=1))
    return D


def _clenshaw_curtis(n):
    """Clenshaw-Curtis weights on the ``n + 1`` extreme points of ``[-1, 1]``."""
    theta = np.pi * np.arange(n + 1) / n
    w = np.zeros(n + 1)
    v = np.ones(n - 1)
    ii = np.arange(1, n)
    if n % 2 == 0:
        w[0] = w[n] = 1.0 / (n**2 - 1)
        for k in range(1, n // 2):
            v -= 2.0 * np.cos(2 * k * theta[ii]) / (4 * k * k - 1)
        v -= np.cos(n * theta[ii]) / (n**2 - 1)
    else:
        w[0] = w[n] = 1.0 / n**2
        for k in range(1, (n - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[ii]) / (4 * k * k - 1)
    w[ii] = 2.0 * v / n
    return w


def _values_to_cheb(values):
    """Chebyshev coefficients from samples on the extreme points (DCT-I)."""
    n = values.shape[-1] - 1
    c = scipy.fft.dct(values, type=1, axis=-1) / n
    c[..., 0] *= 0.5
    c[..., -1] *= 0.5
    return c


# ---------------------------------------------------------------- profiles

Source = Callable[[np.ndarray, int], np.ndarray]


@dataclass(frozen=True)
class LayerProfile:
    """Decaying profile ``u`` on ``[-L, L]`` with ``L* u = source``.

    ``source(t, order)`` returns the derivative stack of ``L* u``.  Derivatives
    of ``u`` of order >= 2 come from the closure
    ``u^(n+2) = sum_i C(n, i) V^(i) u^(n-i) - f^(n)``.
    """

    name: str
    coeffs: np.ndarray
    half_width: float
    source: Source = field(repr=False)
    multiplier: float = 0.0  # kernel component removed from the source

    def __call__(self, t):
        return self.derivatives(t, 0)[0]

    def derivatives(self, t, order=4):
        t = np.asarray(t, dtype=float)
        L = self.half_width
        inside = np.abs(t) <= L
        x = np.clip(t / L, -1.0, 1.0)
        out = np.zeros((order + 1,) + t.shape)
        out[0] = C.chebval(x, self.coeffs)
        if order >= 1:
            out[1] = C.chebval(x, C.chebder(self.coeffs)) / L
        if order >= 2:
            V = potential_stack(t, order - 2)
            f = self.source(t, order - 2)
            for n in range(order - 1):
                acc = -f[n]
                for i in range(n + 1):
                    acc = acc + math.comb(n, i) * V[i] * out[n - i]
                out[n + 2] = acc
        return np.where(inside, out, 0.0)

    def lstar(self, t, order=2):
        """Stack of ``L* u`` (the stored source)."""
        return self.source(np.asarray(t, dtype=float), order)


class LayerSolver:
    """Chebyshev collocation for ``L* u = f`` with ``<u, v0'> = 0``.

    The system is bordered by the kernel: ``L* u + lam v0' = f`` together with
    ``<u, v0'> = 0``.  For a solvable ``f`` the multiplier ``lam`` equals
    ``<f, v0'> / c*`` and is tiny; otherwise :class:`SolvabilityError`.
    """

    def __init__(self, half_width=25.0, n=600, tol=1e-8):
        self.L = float(half_width)
        self.n = int(n)
        self.tol = float(tol)
        x = _cheb_points(self.n)
        self.t = self.L * x
        self.weights = self.L * _clenshaw_curtis(self.n)
        D = _cheb_diff(self.n) / self.L
        V = potential_stack(self.t, 0)[0]
        A = -(D @ D) + np.diag(V)
        A[0, :] = 0.0
        A[-1, :] = 0.0
        A[0, 0] = A[-1, -1] = 1.0
        self.kernel = v0_stack(self.t, 1)[1]
        col = self.kernel.copy()
        col[0] = col[-1] = 0.0
        M = np.zeros((self.n + 2, self.n + 2))
        M[:-1, :-1] = A
        M[:-1, -1] = col
        M[-1, :-1] = self.weights * self.kernel
        self._A = A
        self._lu = scipy.linalg.lu_factor(M)

    def inner(self, f, g=None):
        g = self.kernel if g is None else g
        return float(np.sum(self.weights * f * g))

    def integrate(self, values):
        return float(np.sum(self.weights * values))

    def solve(self, source, name="u", check=True):
        """Solve ``L* u = source``; ``source(t, order)`` returns a derivative stack."""
        f = source(self.t, 0)[0]
        obstruction = self.inner(f)
        if check and abs(obstruction) > self.tol * max(1.0, np.max(np.abs(f))):
            raise SolvabilityError(
                f"<f, v0'> = {obstruction:.3e} exceeds {self.tol:.1e}; f is not orthogonal to the kernel"
            )
        rhs = np.concatenate([f, [0.0]])
        rhs[0] = rhs[self.n] = 0.0
        sol = scipy.linalg.lu_solve(self._lu, rhs)
        u, lam = sol[:-1], sol[-1]
        if lam != 0.0:
            base = source

            def source(t, order, _base=base, _lam=lam):
                return _base(t, order) - _lam * v0_stack(t, order + 1)[1:]

        return LayerProfile(name=name, coeffs=_values_to_cheb(u), half_width=self.L, source=source, multiplier=float(lam))

    def residual(self, profile):
        """Sup over interior nodes of ``|L* u - f|`` using the collocation matrix."""
        u = profile(self.t)
        f = profile.source(self.t, 0)[0]
        r = self._A @ u - f
        return float(np.max(np.abs(r[1:-1])))


# ---------------------------------------------------------------- named sources

def _src_half_t_v0p(t, order):
    return 0.5 * leibniz(t_stack(t, order), shift(v0_stack(t, order + 1)))


def _src_eta1(t, order):
    v = v0_stack(t, order + 2)
    return 2.0 * leibniz(t_stack(t, order), v[2:]) + v[1 : order + 2]


def _src_eta3(t, order):
    return leibniz(t_stack(t, order), shift(v0_stack(t, order + 1)))


def eta_tilde_stack(t, order=4):
    """``-t v0'/2``."""
    return -0.5 * leibniz(t_stack(t, order), shift(v0_stack(t, order + 1)))


def profile_source(profile):
    """Source for ``L* u = profile`` (nested solves)."""

    def src(t, order):
        return profile.derivatives(t, order)

    return src


def q_form(v, w, t):
    """``Q(v, w) = L*(6 v0 v w) + 6 v0 (v L* w + w L* v)`` from stacks of order ``r + 2``."""
    r = v.shape[0] - 3
    v0s = v0_stack(t, r + 2)
    p = 6.0 * leibniz(v0s, leibniz(v, w))
    lv = lstar_stack(v, t)
    lw = lstar_stack(w, t)
    return lstar_stack(p, t) + 6.0 * leibniz(v0s[: r + 1], leibniz(v[: r + 1], lw) + leibniz(w[: r + 1], lv))


def eta_explicit(t, panels=40, nodes=24):
    """``eta(t) = -v0'(t) int_0^t v0'(s)^-2 int_{-inf}^s tau v0'(tau)^2 / 2 dtau ds``.

    The inner integral is even and vanishes at infinity, so for ``s > 0`` it is
    evaluated as ``-int_s^inf`` with composite Gauss-Legendre; the ratio with
    ``v0'(s)^2`` is then formed from two small but relatively accurate numbers.
    """
    t = np.asarray(t, dtype=float)
    gx, gw = np.polynomial.legendre.leggauss(nodes)

    def inner(s):
        s = np.abs(np.asarray(s, dtype=float))
        a = s[..., None]
        # map [s, s + 40] in panels
        edges = a + 40.0 * np.linspace(0.0, 1.0, panels + 1)
        lo, hi = edges[..., :-1, None], edges[..., 1:, None]
        tau = 0.5 * (hi - lo) * gx + 0.5 * (hi + lo)
        vp = v0_stack(tau, 1)[1]
        val = np.sum(0.5 * (hi - lo) * gw * tau * vp**2 / 2.0, axis=(-1, -2))
        return -val

    def integrand(s):
        vp = v0_stack(s, 1)[1]
        return inner(s) / vp**2

    flat = np.abs(t).ravel()
    out = np.empty_like(flat)
    for i, a in enumerate(flat):
        if a == 0.0:
            out[i] = 0.0
            continue
        m = max(2, int(math.ceil(a / 0.5)))
        edges = np.linspace(0.0, a, m + 1)
        lo, hi = edges[:-1, None], edges[1:, None]
        s = 0.5 * (hi - lo) * gx + 0.5 * (hi + lo)
        out[i] = np.sum(0.5 * (hi - lo) * gw * integrand(s))
    out = out.reshape(t.shape) * np.sign(t)
    return -v0_stack(t, 1)[1] * out


@dataclass
class LayerConstants:
    c_star: float
    d_star: float
    identities: dict

    def max_deviation(self, keys=None):
        keys = keys or list(self.identities)
        return max(abs(self.identities[k]["deviation"]) for k in keys)


class LayerProfiles:
    """All correction profiles built on one solver grid.

    Attributes ``eta, w1, eta1, w2, eta2, w3, eta3`` are :class:`LayerProfile`
    instances with ``w_i = L* eta_i``.
    """

    def __init__(self, half_width=25.0, n=600, tol=1e-8):
        self.solver = LayerSolver(half_width, n, tol)
        s = self.solver
        self.eta = s.solve(_src_half_t_v0p, "eta")
        self.w1 = s.solve(_src_eta1, "L*eta1")
        self.eta1 = s.solve(profile_source(self.w1), "eta1")
        self.w3 = s.solve(_src_eta3, "L*eta3")
        self.eta3 = s.solve(profile_source(self.w3), "eta3")
        self.w2 = s.solve(self.eta2_rhs, "L*eta2")
        self.eta2 = s.solve(profile_source(self.w2), "eta2")

    # -- sources that depend on earlier profiles
    def eta2_rhs(self, t, order):
        """``-3 (L* eta1)' + 4 t^2 v0'' + 3 t v0' - eta'' - Q(eta, eta)/2``."""
        t = np.asarray(t, dtype=float)
        v = v0_stack(t, order + 2)
        e = self.eta.derivatives(t, order + 2)
        out = -3.0 * shift(self.w1.derivatives(t, order + 1))
        out = out + 4.0 * leibniz(t_stack(t, order, 2), v[2:])
        out = out + 3.0 * leibniz(t_stack(t, order), v[1 : order + 2])
        out = out - e[2:]
        out = out - 0.5 * q_form(e, e, t)
        return out

    def profile(self, name):
        if name == "v0":
            return v0_stack
        if name == "eta_tilde":
            return eta_tilde_stack
        return getattr(self, name)

    def stacks(self, t, order=4):
        """Dictionary of derivative stacks of every profile at ``t``."""
        t = np.asarray(t, dtype=float)
        return {
            "v0": v0_stack(t, order),
            "eta": self.eta.derivatives(t, order),
            "eta_tilde": eta_tilde_stack(t, order),
            "eta1": self.eta1.derivatives(t, order),
            "eta2": self.eta2.derivatives(t, order),
            "eta3": self.eta3.derivatives(t, order),
        }

    # -- checks
    def orthogonality(self):
        s = self.solver
        out = {}
        for name in ("eta", "eta1", "eta2", "eta3"):
            out[name] = s.inner(getattr(self, name)(s.t))
        out["eta_tilde"] = s.inner(eta_tilde_stack(s.t, 0)[0])
        return out

    def lstar_identities(self):
        """Sup residuals of the three closed-form ``L*`` identities and the profile identities."""
        t = self.solver.t
        v = v0_stack(t, 5)
        tt = t_stack(t, 4)
        res = {}
        u = leibniz(tt, leibniz(v[:5], v[1:6])) / SQRT2
        rhs = v[3] + 3.0 * t * v[0] * v[1] ** 2
        res["tv0v0p"] = float(np.max(np.abs(lstar_stack(u, t)[0] - rhs)))
        inner = np.zeros_like(tt)
        inner[0] = 1.0
        inner = inner + SQRT2 * leibniz(tt, v[:5])
        u = leibniz(leibniz(tt, v[1:6]), inner) / 4.0
        rhs = t * v[3] + 1.5 * t**2 * v[0] * v[1] ** 2
        res["tv0p_1_sqrt2tv0"] = float(np.max(np.abs(lstar_stack(u, t)[0] - rhs)))
        u = leibniz(v[:5], v[1:6]) / (3.0 * SQRT2)
        rhs = v[0] * v[1] ** 2
        res["v0v0p"] = float(np.max(np.abs(lstar_stack(u, t)[0] - rhs)))
        res["kernel_v0p"] = float(np.max(np.abs(lstar_stack(v[1:6], t)[0])))
        res["eta_tilde"] = float(np.max(np.abs(lstar_stack(eta_tilde_stack(t, 2), t)[0] - v[2])))
        e = self.eta.derivatives(t, 4)
        res["eta"] = float(np.max(np.abs(lstar_stack(e, t)[0] - 0.5 * t * v[1])))
        res["lstar2_eta"] = float(np.max(np.abs(lstar_stack(lstar_stack(e, t), t)[0] + v[2])))
        for name, src in (("eta1", _src_eta1), ("eta3", _src_eta3), ("eta2", self.eta2_rhs)):
            u = getattr(self, name).derivatives(t, 4)
            res["lstar2_" + name] = float(np.max(np.abs(lstar_stack(lstar_stack(u, t), t)[0] - src(t, 0)[0])))
        return res

    def constants(self):
        """``c*``, ``d*`` and the integral identities used for the projection of ``E5``."""
        s = self.solver
        t = s.t
        v = v0_stack(t, 4)
        e = self.eta.derivatives(t, 3)
        e1 = self.eta1.derivatives(t, 3)
        w1 = self.w1.derivatives(t, 1)
        w3 = self.w3.derivatives(t, 1)
        w2 = self.w2.derivatives(t, 1)
        I = s.integrate
        cs = I(v[1] ** 2)
        ds = I(t**2 * v[1] ** 2)

        def entry(value, target):
            return {"value": float(value), "target": float(target), "deviation": float(value - target)}

        qee = q_form(self.eta.derivatives(t, 2), self.eta.derivatives(t, 2), t)[0]
        qe1 = q_form(self.eta.derivatives(t, 2), self.eta1.derivatives(t, 2), t)[0]
        ids = {
            "c_star": entry(cs, C_STAR),
            "d_star": entry(ds, D_STAR),
            "t_v0pp_v0p": entry(I(t * v[2] * v[1]), -0.5 * C_STAR),
            "t3_v0pp_v0p": entry(I(t**3 * v[2] * v[1]), -1.5 * D_STAR),
            "etap_v0p": entry(I(e[1] * v[1]), 0.25 * D_STAR),
            "2_Lstar_eta3_p_v0p": entry(2.0 * I(w3[1] * v[1]), D_STAR),
            "kk'2_group_eta1": entry(I((2 * t * w1[1] - 9 * t**2 * v[1] - 4 * e[1] - 18 * w1[0]) * v[1]), -9 * D_STAR),
            "t_Lstar_eta1_p_v0p": entry(I(t * w1[1] * v[1]), -0.5 * D_STAR),
            "int1": entry(I(e1[0] * (v[3] + 3 * t * v[0] * v[1] ** 2)), -0.25 * D_STAR),
            "int2": entry(I(e[0] * (t * v[3] + 1.5 * t**2 * v[0] * v[1] ** 2)), 5.0 / 16.0 * D_STAR),
            "int3": entry(I(e[0] * v[0] * v[1] ** 2), 1.0 / (18.0 * SQRT2)),
            "quadratic_eta": entry(
                12 * I(e[0] * e[1] * v[1] * v[0]) + 6 * I(e[0] ** 2 * v[1] ** 2),
                -6 * I(v[0] * v[2] * e[0] ** 2),
            ),
            "Q_eta_eta_tv0p": entry(
                I(qee * t * v[1]),
                -12 * I(v[0] * v[2] * e[0] ** 2) + 6 * I(t**2 * v[1] ** 2 * v[0] * e[0]),
            ),
            "Q_eta_eta1_v0p": entry(
                I(qe1 * v[1]),
                -3 * I(v[0] * v[1] ** 2 * e[0] * t**2)
                + 3 * ds / cs * I(v[0] * v[1] ** 2 * e[0])
                + 3 * I(t * v[0] * v[1] ** 2 * e1[0]),
            ),
            "2_Lstar_eta2_p_v0p": entry(
                2.0 * I(w2[1] * v[1]),
                -1.5 * ds - I(t * e[2] * v[1]) + 6 * I(v[0] * v[2] * e[0] ** 2) - 3 * I(t**2 * v[1] ** 2 * e[0] * v[0]),
            ),
        }
        return LayerConstants(c_star=cs, d_star=ds, identities=ids)

    # -- E5
    def e5_groups(self, t, reading="eta3"):
        """Return ``(A(t), B(t))`` with ``E5 = k^5 A + k k'^2 B``.

        ``reading="eta3"`` builds the ``k k'^2`` group from ``2 (L* eta3)'``;
        ``reading="eta1"`` uses ``2 t (L* eta1)'`` in its place.  Only the
        first projects onto ``d* gbar``.
        """
        t = np.asarray(t, dtype=float)
        v = v0_stack(t, 3)
        e = self.eta.derivatives(t, 2)
        e1 = self.eta1.derivatives(t, 2)
        w1 = self.w1.derivatives(t, 1)
        w2 = self.w2.derivatives(t, 1)
        w3 = self.w3.derivatives(t, 1)
        q = q_form(e, e1, t)[0]
        A = (
            -4 * t**2 * v[1] - 5 * t**3 * v[2] + 2 * t * e[2] - 1.5 * q + 3 * t * w1[1]
            + 12 * e[0] * e[1] * v[0] + 6 * e[0] ** 2 * v[1] - 1.5 * e1[2] + 4.5 * w1[0] + 2.5 * e[1]
            + 2 * w2[1]
        )
        if reading == "eta3":
            B = 2 * w3[1] - 9 * t**2 * v[1] - 4 * e[1] - 18 * w1[0]
        elif reading == "eta1":
            B = 2 * t * w1[1] - 9 * t**2 * v[1] - 4 * e[1] - 18 * w1[0]
        else:
            raise ValueError(f"unknown reading {reading!r}")
        return A, B

    def e5_projection_coefficients(self, reading="eta3"):
        """``(<A, v0'>, <B, v0'>)``; the target is ``(9/8 d*, -9 d*)``."""
        s = self.solver
        A, B = self.e5_groups(s.t, reading)
        return s.inner(A), s.inner(B)


class ProfileTransformer(TransformerMixin, BaseEstimator):
    """Map normal coordinates ``t`` (shape (n,) or (n, 1)) to profile values.

    Columns follow ``names``; ``derivative`` picks which entry of each stack
    is returned.
    """

    def __init__(self, names=("v0", "eta", "eta_tilde", "eta1", "eta2", "eta3"), derivative=0,
                 half_width=25.0, n=600):
        self.names = names
        self.derivative = derivative
        self.half_width = half_width
        self.n = n

    def fit(self, X=None, y=None):
        self.profiles_ = LayerProfiles(self.half_width, self.n)
        return self

    def transform(self, X):
        t = np.asarray(X, dtype=float).reshape(-1)
        st = self.profiles_.stacks(t, max(self.derivative, 1))
        return np.stack([st[k][self.derivative] for k in self.names], axis=1)

    def get_feature_names_out(self, input_features=None):
        suffix = "" if self.derivative == 0 else "_d%d" % self.derivative
        return np.array([k + suffix for k in self.names], dtype=object)
