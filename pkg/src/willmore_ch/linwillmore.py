"""Linearised Willmore operator on the periodic Willmore curvature.

    L0 phi = phi'''' + (5/2 k^2 phi')' + (3 - 5/4 k^4) phi

discretised by Fourier collocation on ``[0, Tbar)``.  Inversion happens on
the symmetry class ``f(s) = -f(-s) = -f(s + Tbar/2)``, which is spanned by
the odd sine harmonics ``sin((2j+1) w s)``, ``w = 2 pi / Tbar``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .curve import T_BAR, CurvatureProfile, build_curve

__all__ = [
    "SymmetricPeriodicFunction",
    "L0Operator",
    "SingularSystemError",
    "GridMismatchError",
    "fourier_derivative",
    "project_symmetric",
    "symmetry_defect",
    "jacobi_fields",
    "jacobi_boundary_table",
]


class SingularSystemError(np.linalg.LinAlgError):
    """The restricted operator is numerically rank deficient."""


class GridMismatchError(ValueError):
    pass


def fourier_derivative(values, period, order=1, filter_tol=None):
    """Spectral derivative of periodic samples on a uniform grid.

    With ``filter_tol`` set, Fourier modes whose magnitude is below
    ``filter_tol * max|c|`` are zeroed first (Krasny filter), which keeps
    round-off in the top modes from being amplified by ``(i w)^order``.
    """
    n = values.shape[-1]
    orders = np.atleast_1d(order)
    w = 2.0 * math.pi * np.fft.rfftfreq(n, d=period / n)
    c = np.fft.rfft(values, axis=-1)
    if filter_tol is not None:
        mag = np.abs(c)
        c = np.where(mag < filter_tol * mag.max(axis=-1, keepdims=True), 0.0, c)
    out = []
    for o in orders:
        mult = (1j * w) ** o
        if n % 2 == 0 and o % 2 == 1:
            mult[-1] = 0.0
        out.append(np.fft.irfft(c * mult, n=n, axis=-1))
    return out[0] if np.ndim(order) == 0 else out


def _index_maps(n):
    j = np.arange(n)
    if n % 4:
        raise GridMismatchError("grid size must be divisible by 4 for the symmetry maps")
    return (-j) % n, (j + n // 2) % n


def project_symmetric(values):
    """Average over the symmetry group: ``(f(s) - f(-s) - f(s+T/2) + f(T/2-s)) / 4``."""
    values = np.asarray(values, dtype=float)
    refl, shift = _index_maps(values.shape[-1])
    return 0.25 * (values - values[..., refl] - values[..., shift] + values[..., refl][..., shift])


def symmetry_defect(values):
    """Sup-norm distance from the symmetry class on the grid."""
    values = np.asarray(values, dtype=float)
    refl, shift = _index_maps(values.shape[-1])
    return float(max(np.max(np.abs(values + values[..., refl])), np.max(np.abs(values + values[..., shift]))))


@dataclass(frozen=True)
class SymmetricPeriodicFunction:
    """Samples of a ``Tbar``-periodic function on ``s_j = j Tbar / N``."""

    values: np.ndarray
    period: float = T_BAR
    coeffs: np.ndarray | None = None  # odd-sine coordinates when known exactly

    @property
    def n(self):
        return self.values.shape[-1]

    @property
    def grid(self):
        return np.arange(self.n) * self.period / self.n

    def defect(self):
        return symmetry_defect(self.values)

    def projected(self):
        return SymmetricPeriodicFunction(project_symmetric(self.values), self.period)

    def sup(self):
        return float(np.max(np.abs(self.values)))


class L0Operator:
    """Dense Fourier-collocation matrix of the linearised Willmore operator.

    Parameters
    ----------
    n : int
        Number of collocation points on one period; must be divisible by 4.
    """

    def __init__(self, n=512, profile=None):
        if n % 4 or n < 16:
            raise ValueError("n must be a multiple of 4 and at least 16")
        self.n = int(n)
        self.profile = profile or CurvatureProfile()
        self.period = self.profile.period_bar
        self.s = np.arange(self.n) * self.period / self.n
        k, k1, _ = self.profile(self.s)
        self.k, self.k1 = k, k1

        eye = np.eye(self.n)
        d1 = fourier_derivative(eye, self.period, 1).T
        d4 = fourier_derivative(eye, self.period, 4).T
        self.matrix = d4 + 2.5 * d1 @ (k[:, None] ** 2 * d1) + np.diag(3.0 - 1.25 * k**4)

        w = 2.0 * math.pi / self.period
        harmonics = 2 * np.arange(self.n // 4) + 1
        basis = np.sin(np.outer(self.s, harmonics * w))
        self.basis = basis / np.linalg.norm(basis, axis=0)
        self.restricted = self.basis.T @ self.matrix @ self.basis
        self.condition_number = float(np.linalg.cond(self.restricted))
        if not np.isfinite(self.condition_number) or self.condition_number > 1e13:
            raise SingularSystemError(
                f"restricted L0 matrix is numerically singular (cond={self.condition_number:.3e})"
            )
        # right preconditioning by the inverse bi-Laplacian symbol: LU errors in
        # the top harmonics then stay below round-off after L0 is re-applied
        self._colscale = 1.0 / (1.0 + (harmonics * w) ** 4)
        self._lu = scipy.linalg.lu_factor(self.restricted * self._colscale)

    def _as_values(self, phi):
        vals = phi.values if isinstance(phi, SymmetricPeriodicFunction) else np.asarray(phi, dtype=float)
        if vals.shape[-1] != self.n:
            raise GridMismatchError(f"expected {self.n} samples, got {vals.shape[-1]}")
        return vals

    def apply(self, phi, form="conserved", filter_tol=1e-15):
        """Apply ``L0`` spectrally.

        ``form="conserved"`` uses the zeroth-order coefficient ``3 - 5/4 k^4``;
        ``form="raw"`` uses ``3 (k')^2 - k^4 / 2``.  They agree because of the
        first integral of the Willmore equation.  ``filter_tol=None`` disables
        the round-off filter on the input spectrum.
        """
        vals = self._as_values(phi)
        p = self.period
        v0, d1, d4 = fourier_derivative(vals, p, [0, 1, 4], filter_tol=filter_tol)
        flux = fourier_derivative(self.k**2 * d1, p, 1)
        if form == "conserved":
            zeroth = 3.0 - 1.25 * self.k**4
        elif form == "raw":
            zeroth = 3.0 * self.k1**2 - 0.5 * self.k**4
        else:
            raise ValueError(f"unknown form {form!r}")
        out = d4 + 2.5 * flux + zeroth * v0
        if isinstance(phi, SymmetricPeriodicFunction):
            return SymmetricPeriodicFunction(out, p)
        return out

    def commutator_with_s(self, f):
        """``[L0, s] f = 4 f''' + 5/2 (k^2 f)' + 5/2 k^2 f'`` for periodic ``f``."""
        p = self.period
        f0, f1, f3 = fourier_derivative(f, p, [0, 1, 3], filter_tol=1e-15)
        return 4.0 * f3 + 2.5 * fourier_derivative(self.k**2 * f0, p, 1) + 2.5 * self.k**2 * f1

    def apply_affine(self, linear, periodic):
        """Apply ``L0`` to ``s * linear(s) + periodic(s)`` with both parts periodic."""
        return self.s * self.apply(linear) + self.commutator_with_s(linear) + self.apply(periodic)

    def solve(self, g, tol=1e-10):
        """Unique solution of ``L0 phi = g`` in the symmetry class.

        ``g`` must already be (numerically) in the class; its small defect is
        projected away.  Returns a :class:`SymmetricPeriodicFunction`.
        """
        vals = self._as_values(g)
        scale = max(np.max(np.abs(vals)), 1.0)
        if symmetry_defect(vals) > tol * scale:
            raise ValueError("right-hand side is not in the symmetry class")
        coeffs = self._colscale * scipy.linalg.lu_solve(self._lu, self.basis.T @ vals)
        return SymmetricPeriodicFunction(self.basis @ coeffs, self.period, coeffs)

    def coefficients(self, phi):
        """Coordinates of ``phi`` in the orthonormal odd-sine basis."""
        if isinstance(phi, SymmetricPeriodicFunction) and phi.coeffs is not None:
            return phi.coeffs
        return self.basis.T @ self._as_values(phi)

    def subspace_residual(self, phi, g):
        """``max |Q^T (L0 phi - g)|`` computed with the restricted matrix.

        Evaluating a fourth-order spectral operator on the grid carries a
        round-off floor of roughly ``eps * |phi| * (N w / 2)^4``; working in
        the basis coordinates avoids that amplification.
        """
        return float(np.max(np.abs(self.restricted @ self.coefficients(phi) - self.coefficients(g))))

    def stability_constant(self, samples=8, seed=0):
        """Measured ``max ||phi|| / ||g||`` over random symmetric right-hand sides."""
        rng = np.random.default_rng(seed)
        ratios = []
        m = min(16, self.n // 4)
        for _ in range(samples):
            c = rng.standard_normal(m) / (1.0 + np.arange(m)) ** 2
            g = self.basis[:, :m] @ c
            phi = self.solve(g)
            ratios.append(phi.sup() / np.max(np.abs(g)))
        return float(max(ratios))


def _curve_jet(curve, s):
    """gamma, gamma', gamma'', gamma''' of the unit-scale curve at ``s``."""
    prof = curve.profile
    k, k1, _ = prof(s)
    th = curve.theta_at(s)
    t = np.stack([-np.sin(th), np.cos(th)], axis=-1)
    nrm = np.stack([-t[..., 1], t[..., 0]], axis=-1)
    g0 = curve.position(s)
    g2 = k[..., None] * nrm
    g3 = k1[..., None] * nrm - (k**2)[..., None] * t
    return g0, t, g2, g3


def jacobi_fields(op=None, curve=None):
    """Return the four Jacobi fields sampled on ``op``'s grid with their kernel residuals.

    ``psi1 = gamma_1'``, ``psi2 = gamma_2'``, ``psi3 = gamma . gamma'``,
    ``psi4 = gamma x gamma'``.  The last two grow linearly through
    ``gamma_1 = a s + periodic``; ``L0`` is applied to them via the
    commutator with ``s``.
    """
    op = op or L0Operator()
    curve = curve or build_curve(max(op.n, 256))
    s = op.s
    g0, g1, _, _ = _curve_jet(curve, s)
    a = curve._g1_mean
    per1 = g0[:, 0] - a * s
    psi1, psi2 = g1[:, 0], g1[:, 1]
    psi3 = g0[:, 0] * psi1 + g0[:, 1] * psi2
    psi4 = g0[:, 0] * psi2 - g0[:, 1] * psi1
    residuals = [
        op.apply(psi1),
        op.apply(psi2),
        op.apply_affine(a * psi1, per1 * psi1 + g0[:, 1] * psi2),
        op.apply_affine(a * psi2, per1 * psi2 - g0[:, 1] * psi1),
    ]
    fields = np.stack([psi1, psi2, psi3, psi4])
    return fields, np.stack(residuals)


def jacobi_boundary_table(curve=None):
    """4x4 table with columns ``(psi_i(0), psi_i(T), psi_i''(0), psi_i''(T))`` per field."""
    curve = curve or build_curve(256)
    ends = np.array([0.0, curve.profile.period_bar])
    g0, g1, g2, g3 = _curve_jet(curve, ends)
    k = curve.profile(ends)[0]

    def cross(u, v):
        return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]

    vals = [g1[:, 0], g1[:, 1], np.sum(g0 * g1, axis=-1), cross(g0, g1)]
    seconds = [g3[:, 0], g3[:, 1], np.sum(g0 * g3, axis=-1), k + cross(g0, g3)]
    return np.array([[v[0], v[1], d[0], d[1]] for v, d in zip(vals, seconds)])
