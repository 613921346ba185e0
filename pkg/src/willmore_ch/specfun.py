"""Special functions used throughout the package.

Everything here is real-valued and vectorised over numpy arrays.  The
routines are deliberately self-contained (AGM / Landen for the elliptic
family, a Lanczos rational approximation for Gamma, series plus functional
equations for the dilogarithm) so that scipy can serve as an independent
oracle in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "EllipticParams",
    "elliptic_K",
    "jacobi_cn",
    "jacobi_sncndn",
    "gamma_fn",
    "lgamma_fn",
    "gamma_ratio",
    "gamma_ratio_sequence",
    "dilog",
]

_AGM_TOL = 1e-16


def _check_parameter(m):
    m = float(m)
    if not (0.0 < m < 1.0):
        raise ValueError(f"elliptic parameter must lie in (0, 1), got {m!r}")
    return m


def _agm_tables(m):
    """Descending AGM sequences (a_n, b_n, c_n) started from (1, sqrt(1-m), sqrt(m))."""
    a, b, c = [1.0], [math.sqrt(1.0 - m)], [math.sqrt(m)]
    while abs(c[-1]) > _AGM_TOL * a[-1] and len(a) < 64:
        an, bn = a[-1], b[-1]
        a.append(0.5 * (an + bn))
        b.append(math.sqrt(an * bn))
        c.append(0.5 * (an - bn))
    return a, b, c


def elliptic_K(m):
    """Complete elliptic integral of the first kind, ``K(m) = pi / (2 agm(1, sqrt(1-m)))``."""
    m = _check_parameter(m)
    a, _, _ = _agm_tables(m)
    return math.pi / (2.0 * a[-1])


@dataclass(frozen=True)
class EllipticParams:
    """Parameter ``m`` together with its quarter period ``K``."""

    m: float
    K: float

    @classmethod
    def from_m(cls, m):
        return cls(m=_check_parameter(m), K=elliptic_K(m))

    @property
    def period(self):
        return 4.0 * self.K


def jacobi_sncndn(u, m):
    """Return ``(sn, cn, dn)`` of ``u`` for parameter ``m`` via descending Landen steps.

    The argument is first reduced modulo ``4K`` into ``[-2K, 2K)`` so that the
    amplitude recursion only ever sees moderate angles.
    """
    m = _check_parameter(m)
    a, _, c = _agm_tables(m)
    K = math.pi / (2.0 * a[-1])
    u = np.asarray(u, dtype=float)
    period = 4.0 * K
    ur = u - period * np.floor((u + 2.0 * K) / period)

    n = len(a) - 1
    phi = (2.0**n) * a[n] * ur
    for j in range(n, 0, -1):
        phi = 0.5 * (phi + np.arcsin(c[j] / a[j] * np.sin(phi)))
    phi0 = phi
    sn = np.sin(phi0)
    cn = np.cos(phi0)
    dn = np.sqrt(1.0 - m * sn * sn)
    return sn, cn, dn


def jacobi_cn(u, m):
    """Jacobi cosine amplitude ``cn(u | m)``; ``4K``-periodic and even."""
    return jacobi_sncndn(u, m)[1]


# Lanczos approximation, g = 6.0246800407767296, 13 terms (the variant used in
# Boost and the scipy cephes port).  Coefficients are in ascending powers of x.
_LANCZOS_G = 6.024680040776729583740234375
_LANCZOS_NUM = np.array([
    56906521.91347156388090791033559122686859,
    103794043.1163445451906271053616070238554,
    86363131.28813859145546927288977868422342,
    43338889.32467613834773723740590533316085,
    14605578.08768506808414169982791359218571,
    3481712.15498064590882071018964774556468,
    601859.6171681098786670226533699352302507,
    75999.29304014542649875303443598909137092,
    6955.999602515376140356310115515198987526,
    449.9445569063168119446858607650988409623,
    19.51992788247617482847860966235652136208,
    0.5098416655656676188125178644804694509993,
    0.006061842346248906525783753964555936883222,
])[::-1]
_LANCZOS_DEN = np.array([
    0.0, 39916800.0, 120543840.0, 150917976.0, 105258076.0, 45995730.0,
    13339535.0, 2637558.0, 357423.0, 32670.0, 1925.0, 66.0, 1.0,
])[::-1]


def _lanczos_sum(x):
    return np.polyval(_LANCZOS_NUM, x) / np.polyval(_LANCZOS_DEN, x)


def _check_poles(x):
    if np.any((x <= 0) & (x == np.round(x))):
        raise ValueError("Gamma function has poles at non-positive integers")


def lgamma_fn(x):
    """Return ``(log|Gamma(x)|, sign(Gamma(x)))``."""
    x = np.asarray(x, dtype=float)
    _check_poles(x)
    out = np.empty_like(x)
    sign = np.ones_like(x)
    right = x >= 0.5
    xr = x[right]
    zgh = xr + _LANCZOS_G - 0.5
    out[right] = np.log(_lanczos_sum(xr)) + (xr - 0.5) * (np.log(zgh) - 1.0)
    if np.any(~right):
        xl = x[~right]
        # reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
        s = np.sin(np.pi * xl)
        one_minus = 1.0 - xl
        zgh = one_minus + _LANCZOS_G - 0.5
        lg1 = np.log(_lanczos_sum(one_minus)) + (one_minus - 0.5) * (np.log(zgh) - 1.0)
        out[~right] = math.log(math.pi) - np.log(np.abs(s)) - lg1
        sign[~right] = np.sign(s)
    if out.ndim == 0:
        return float(out), float(sign)
    return out, sign


def gamma_fn(x):
    """Gamma function for real ``x`` away from the poles."""
    lg, sign = lgamma_fn(x)
    return sign * np.exp(lg)


def gamma_ratio(a, b, m):
    """``Gamma(m + a) / Gamma(m + b)`` evaluated in log space."""
    m = np.asarray(m, dtype=float)
    la, sa = lgamma_fn(m + a)
    lb, sb = lgamma_fn(m + b)
    return sa * sb * np.exp(la - lb)


def gamma_ratio_sequence(a, b, m_max, scale=1.0):
    """Vector of ``scale**m * Gamma(m + a) / Gamma(m + b)`` for ``m = 0..m_max``.

    Built by accumulating ``log((j + a) / (j + b)) + log(scale)`` so that the
    relative error grows only like the square root of the index and no
    intermediate Gamma value is ever formed.  ``a`` and ``b`` must keep
    ``j + a`` and ``j + b`` away from zero for ``j >= 0``.
    """
    j = np.arange(m_max, dtype=float)
    steps = (j + a) / (j + b)
    if np.any(steps == 0.0) or not np.all(np.isfinite(steps)):
        raise ValueError("gamma_ratio_sequence hits a pole")
    logs = np.log(np.abs(steps)) + math.log(scale)
    signs = np.cumprod(np.sign(steps))
    base = gamma_ratio(a, b, 0.0)
    body = base * np.exp(np.cumsum(logs)) * signs
    return np.concatenate([[base], body])


_PI2_6 = math.pi**2 / 6.0


def _dilog_series(x):
    k = np.arange(1, 64, dtype=float)
    powers = x[..., None] ** k
    return np.sum(powers / k**2, axis=-1)


def _dilog_scalar_vec(x):
    # x is a flat array with x <= 1
    out = np.empty_like(x)
    small = np.abs(x) <= 0.5
    out[small] = _dilog_series(x[small])

    hi = x > 0.5  # (1/2, 1]
    if np.any(hi):
        xh = x[hi]
        one = xh == 1.0
        val = np.empty_like(xh)
        val[one] = _PI2_6
        xo = xh[~one]
        val[~one] = _PI2_6 - np.log(xo) * np.log1p(-xo) - _dilog_series(1.0 - xo)
        out[hi] = val

    mid = (x < -0.5) & (x >= -1.0)
    if np.any(mid):
        xm = x[mid]
        y = xm / (xm - 1.0)  # in (1/3, 1/2]
        out[mid] = -0.5 * np.log1p(-xm) ** 2 - _dilog_series(y)

    big = x < -1.0
    if np.any(big):
        xb = x[big]
        out[big] = -_PI2_6 - 0.5 * np.log(-xb) ** 2 - _dilog_scalar_vec(1.0 / xb)
    return out


def dilog(x):
    """Real dilogarithm ``Li2(x) = -int_0^x log(1-t)/t dt`` for ``x <= 1``."""
    x = np.asarray(x, dtype=float)
    if np.any(x > 1.0):
        raise ValueError("dilog is only defined here for x <= 1")
    out = _dilog_scalar_vec(x.ravel()).reshape(x.shape)
    if out.ndim == 0:
        return float(out)
    return out
