"""Residual of the Cahn-Hilliard operator on the approximate solution.

Norms are sup-norms over samples of the tube ``|t| < 1/(4 eps)`` restricted
to ``s`` in a quarter period, which covers every point up to the symmetries
of the curve.  Three weights are available: ``tube`` (none), ``normal``
(``psi_delta`` of the normal distance ``t``) and ``x2`` (``psi_delta`` of the
Cartesian height).
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import stats
from scipy.optimize import brentq

from .approx import ApproxField, FermiChart, assemble, fermi_laplacian, zeta
from .curve import T_BAR
from .jets import Jet
from .layers import D_STAR, LayerProfiles, v0_stack
from .linwillmore import SymmetricPeriodicFunction
from .phibar import PhiBar, gbar

__all__ = [
    "DegenerateFitError",
    "RootNotFoundError",
    "NormWeights",
    "ScalingFit",
    "scaling_fit",
    "ch_operator_jet",
    "cahn_hilliard_F",
    "cahn_hilliard_F_fd",
    "d2_stencil",
    "fd_crosscheck",
    "tube_grid",
    "residual_norm",
    "projected_residual",
    "monotonicity_min",
    "zero_set_distance",
    "ResidualReport",
    "parallel_map",
    "thread_count",
]

DEFAULT_EPS = (1 / 8, 1 / 12, 1 / 16, 1 / 24, 1 / 32)


class DegenerateFitError(ValueError):
    pass


class RootNotFoundError(RuntimeError):
    pass


def thread_count():
    try:
        return max(1, int(os.environ.get("WCH_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fn, items, threads=None):
    """Ordered map; results do not depend on the thread count."""
    items = list(items)
    threads = threads or thread_count()
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- weights

@dataclass(frozen=True)
class NormWeights:
    delta: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.delta < math.sqrt(2.0):
            raise ValueError("delta must lie in (0, sqrt 2)")

    def psi(self, y):
        """``zeta(|y|) + (1 - zeta(|y|)) exp(-delta |y|)``."""
        a = np.abs(np.asarray(y, dtype=float))
        z = zeta(a)
        return z + (1.0 - z) * np.exp(-self.delta * a)


# ---------------------------------------------------------------- fits

@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    r2: float
    stderr: float
    n: int


def scaling_fit(eps, norms):
    """Least squares on ``(log eps, log norm)``."""
    eps = np.asarray(eps, dtype=float)
    norms = np.asarray(norms, dtype=float)
    if eps.size < 4 or eps.size != norms.size:
        raise DegenerateFitError("need at least four (eps, norm) pairs")
    if np.any(~np.isfinite(norms)) or np.any(norms <= 1e-300) or np.any(eps <= 0):
        raise DegenerateFitError("norms must be finite and positive")
    res = stats.linregress(np.log(eps), np.log(norms))
    return ScalingFit(float(res.slope), float(res.intercept), float(res.rvalue**2), float(res.stderr), int(eps.size))


# ---------------------------------------------------------------- operator

def ch_operator_jet(u: Jet, a: Jet):
    """``-Lap(-Lap u + W'(u)) + W''(u)(-Lap u + W'(u))`` at the base points."""
    if u.degree < 4:
        raise ValueError("need a jet of degree 4")
    lap = fermi_laplacian(u, a)
    u2 = u.truncate(2)
    mu = -lap + u2**3 - u2
    u0 = u.value
    return -fermi_laplacian(mu, a).value + (3.0 * u0**2 - 1.0) * mu.value


def cahn_hilliard_F(field: ApproxField, s, t):
    """Fermi-path evaluation with exact metric and analytic derivatives."""
    u, a = field.jets(s, t, degree=4)
    return ch_operator_jet(u, a)


def d2_stencil(order=10):
    """Central second-difference weights of the given (even) accuracy order."""
    p = order // 2
    if order % 2 or p < 1:
        raise ValueError("order must be a positive even integer")
    c = np.zeros(2 * p + 1)
    for k in range(1, p + 1):
        ck = 2.0 * (-1) ** (k + 1) * math.factorial(p) ** 2 / (k**2 * math.factorial(p - k) * math.factorial(p + k))
        c[p + k] = c[p - k] = ck
    c[p] = -2.0 * c[p + 1:].sum()
    return c


def _lap_fd(u, h, c):
    p = len(c) // 2
    n0, n1 = u.shape[0] - 2 * p, u.shape[1] - 2 * p
    out = np.zeros((n0, n1))
    for i, ci in enumerate(c):
        out += ci * (u[i: i + n0, p: p + n1] + u[p: p + n0, i: i + n1])
    return out / h**2


def cahn_hilliard_F_fd(values, h, order=10):
    """Cartesian path on a uniform grid; ``order`` cells are lost on each side."""
    c = d2_stencil(order)
    p = order // 2
    u = np.asarray(values, dtype=float)
    inner = u[p:-p, p:-p]
    mu = -_lap_fd(u, h, c) + inner**3 - inner
    uc = u[2 * p:-2 * p, 2 * p:-2 * p]
    return -_lap_fd(mu, h, c) + (3.0 * uc**2 - 1.0) * mu[p:-p, p:-p]


def fd_crosscheck(field: ApproxField, chart: Optional[FermiChart] = None, centers=((0.25, 0.5), (0.135, 0.5)),
                  h=0.1, order=10, half_side=1.5):
    """Max difference of Cartesian-FD and Fermi-path ``F`` on square patches.

    ``centers`` are ``(sigma / Tbar, t)`` pairs.  Returns the absolute maximum
    difference and the largest ``|F|`` seen on the patches.
    """
    eps = field.eps
    chart = chart or FermiChart(eps, field.tilt)
    p = order // 2
    n = int(round(half_side / h))
    strict, field.strict = field.strict, False
    diff = peak = 0.0
    try:
        for frac, t0 in centers:
            c0 = chart.forward(np.array(frac * T_BAR / eps), np.array(t0))
            offs = h * np.arange(-n - 2 * p, n + 2 * p + 1)
            X, Y = np.meshgrid(c0[0] + offs, c0[1] + offs, indexing="ij")
            s, z = chart.inverse(np.stack([X, Y], axis=-1))
            t = z - field.tilt.star(eps * s, 0)[0]
            F_fd = cahn_hilliard_F_fd(field(s, t), h, order)
            core = (slice(2 * p, -2 * p),) * 2
            F_ex = cahn_hilliard_F(field, s[core], t[core])
            diff = max(diff, float(np.max(np.abs(F_fd - F_ex))))
            peak = max(peak, float(np.max(np.abs(F_ex))))
    finally:
        field.strict = strict
    return diff, peak


# ---------------------------------------------------------------- sampling

def tube_grid(eps, n_s=81, n_t=201, n_fine=161, fine_span=40.0, fraction=0.999):
    """``(s, t)`` samples: quarter period in ``s`` (refined near the axis crossing)."""
    quarter = 0.25 * T_BAR / eps
    s = np.unique(np.concatenate([
        np.linspace(0.0, quarter, n_s),
        np.linspace(0.0, min(fine_span, quarter), n_fine),
    ]))
    W = 0.25 / eps * fraction
    t = np.linspace(-W, W, n_t)
    return np.meshgrid(s, t, indexing="ij")


def residual_norm(field: ApproxField, chart: Optional[FermiChart] = None, weights=NormWeights(),
                  weight="tube", grid=None):
    """Weighted sup of ``|F|`` over the tube samples; returns (norm, details)."""
    S, Tt = grid if grid is not None else tube_grid(field.eps)
    F = cahn_hilliard_F(field, S, Tt)
    out = {"tube": float(np.max(np.abs(F)))}
    out["normal"] = float(np.max(np.abs(F) * weights.psi(Tt)))
    if weight == "x2" or chart is not None:
        chart = chart or FermiChart(field.eps, field.tilt)
        x2 = chart.forward(S, Tt)[..., 1]
        out["x2"] = float(np.max(np.abs(F) * weights.psi(x2)))
    i = int(np.argmax(np.abs(F)))
    out["argmax_s"] = float(S.flat[i])
    out["argmax_t"] = float(Tt.flat[i])
    return out[weight], out


# ---------------------------------------------------------------- projection

def _t_quadrature(eps, nodes=24):
    """Gauss-Legendre panels on ``|t| <= W``, refined where ``v0'`` lives.

    ``W`` is where ``chi_4`` vanishes, capped so that the chart metric stays
    above 0.2 when ``eps`` is large.
    """
    W = min(1.0 / (8.0 * eps) + 6.0, 0.8 / (math.sqrt(2.0) * eps))
    cuts = [c for c in (0.5, 1.0, 2.0, 3.0, 4.5, 6.5, 9.0, 12.0) if c < W] + [W]
    edges = np.array(sorted({-c for c in cuts} | {0.0} | set(cuts)))
    x, w = leggauss(nodes)
    a, b = edges[:-1, None], edges[1:, None]
    t = (0.5 * (b - a) * x + 0.5 * (a + b)).ravel()
    wt = (0.5 * (b - a) * w).ravel()
    chi4 = zeta(np.abs(t) - 1.0 / (8.0 * eps) - 4.0)
    return t, wt * chi4


def projected_residual(field: ApproxField, n=64, nodes=24):
    """``int chi_4 F(s, t) v0'(t) dt`` on the symmetric grid ``sigma_j = j Tbar/n``."""
    eps = field.eps
    sigma = np.arange(n) * T_BAR / n
    t, w = _t_quadrature(eps, nodes)
    S, Tt = np.meshgrid(sigma / eps, t, indexing="ij")
    strict, field.strict = field.strict, False
    try:
        F = cahn_hilliard_F(field, S, Tt)
    finally:
        field.strict = strict
    v0p = v0_stack(t, 1)[1]
    return SymmetricPeriodicFunction((F * v0p * w).sum(axis=1), T_BAR)


# ---------------------------------------------------------------- monotonicity

@dataclass
class MonotonicityResult:
    eps: float
    minimum: float
    scaled: float  # minimum / eps^3
    where: tuple
    far_minimum: float
    far_threshold: float
    dx2z: float
    dx2z_predicted: float


def dx2_derivative(field: ApproxField, chart: FermiChart, s, t):
    """``d v / d x2`` through the inverse chart."""
    u, a = field.jets(s, t, degree=1)
    tau = chart.tangent(s)
    nu = chart.normal(s)
    return u.partial(1, 0) * tau[..., 1] / a.value + u.partial(0, 1) * nu[..., 1]


def monotonicity_min(field: ApproxField, chart: Optional[FermiChart] = None, delta_bar=0.5,
                     n_s=321, n_t=201):
    eps = field.eps
    chart = chart or FermiChart(eps, field.tilt)
    half = 0.5 * T_BAR / eps
    s = np.unique(np.concatenate([np.linspace(0.0, half, n_s), np.linspace(0.0, min(40.0, half), n_s)]))
    W = 0.25 / eps * 0.999
    S, Tt = np.meshgrid(s, np.linspace(-W, W, n_t), indexing="ij")
    d = dx2_derivative(field, chart, S, Tt)
    i = int(np.argmin(d))
    x = chart.forward(S, Tt)
    far = np.abs(x[..., 1]) > delta_bar / eps
    far_min = float(np.min(d[far])) if np.any(far) else float("nan")
    # height derivative of the normal coordinate at (x1, x2) = (~0, 1)
    probe = np.array([[1e-6, 1.0]])
    sp, _ = chart.inverse(probe)
    dx2z = float(chart.normal(sp)[0, 1])
    k1_0 = abs(chart.profile.derivatives(np.array(0.0), 1)[1])
    return MonotonicityResult(
        eps, float(d.flat[i]), float(d.flat[i] / eps**3),
        (float(S.flat[i]), float(Tt.flat[i]), float(x[..., 0].flat[i]), float(x[..., 1].flat[i])),
        far_min, float(delta_bar / eps), dx2z, float(0.5 * k1_0 * eps**2),
    )


# ---------------------------------------------------------------- zero set

@dataclass
class ZeroSetResult:
    eps: float
    sigma: np.ndarray
    displacement: np.ndarray  # normal offset of the zero from gamma_T
    predicted: np.ndarray     # eps (d*/c*) phibar(sigma) for the leading tilt
    sup_displacement: float
    sup_deviation: float


def zero_set_distance(field: ApproxField, n=64, bracket=1.5):
    eps = field.eps
    sigma = np.arange(n) * T_BAR / n
    roots = np.empty(n)
    for j, sg in enumerate(sigma):
        s = np.array(sg / eps)
        f = lambda tt: float(field(s, np.array(tt)))
        lo, hi = -bracket, bracket
        if f(lo) * f(hi) > 0:
            raise RootNotFoundError(f"no sign change of the field at sigma = {sg:.4f}")
        roots[j] = brentq(f, lo, hi, xtol=1e-14, rtol=1e-14)
    disp = roots + field.tilt.star(sigma, 0)[0]
    pred = field.tilt.full(sigma, 0)[0]
    return ZeroSetResult(eps, sigma, disp, pred, float(np.max(np.abs(disp))), float(np.max(np.abs(disp - pred))))


# ---------------------------------------------------------------- report

SCHEMA_VERSION = "1.0"


@dataclass
class ResidualReport:
    """Per-eps norms, fitted slopes and pass/fail flags."""

    eps: list
    residual: dict = field(default_factory=dict)      # weight -> list of norms
    ablation: dict = field(default_factory=dict)      # label -> list of norms
    projection: dict = field(default_factory=dict)    # tilt mode -> list of sup norms
    profile_match: Optional[float] = None
    monotonicity: list = field(default_factory=list)
    zero_set: dict = field(default_factory=dict)
    fits: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def fit(self, key, norms):
        f = scaling_fit(self.eps, norms)
        self.fits[key] = asdict(f)
        return f

    @property
    def passed(self):
        return all(self.flags.values())

    def to_dict(self):
        return {"schema": SCHEMA_VERSION, **_jsonable(asdict(self)), "passed": self.passed}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(f"{float(obj):.12g}")
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def run_sweep(eps_list=DEFAULT_EPS, profiles=None, phibar=None, weights=NormWeights(),
              weight="tube", ablate=(), v2_argument="literal", threads=None, include=("residual",
              "projection", "monotonicity", "zero_set"), report=None, tube_n=(81, 201)):
    """Everything needed for the residual, projection, monotonicity and zero-set claims.

    ``tube_n`` is the ``(n_s, n_t)`` size of the residual samples.  Passing
    ``report`` fills an existing report, so the parts can be run and timed
    one at a time.
    """
    eps_list = [float(e) for e in eps_list]
    profiles = profiles or LayerProfiles()
    phibar = phibar or PhiBar()
    config = {"weight": weight, "delta": weights.delta, "ablate": sorted(ablate), "v2_argument": v2_argument}
    rep = report if report is not None else ResidualReport(eps_list, config=config)
    if rep.eps != eps_list:
        raise ValueError("report was built for a different eps list")

    def fields(mode, abl=ablate):
        return [assemble(e, mode, profiles, phibar, ablate=abl, v2_argument=v2_argument) for e in eps_list]

    if "residual" in include:
        lead = fields("leading")

        def norms(f):
            return residual_norm(f, FermiChart(f.eps, f.tilt), weights, weight, tube_grid(f.eps, *tube_n))[1]

        details = parallel_map(norms, lead, threads)
        for w in ("tube", "normal", "x2"):
            rep.residual[w] = [d[w] for d in details]
        f9 = rep.fit("residual", rep.residual[weight])
        rep.fit("residual_x2", rep.residual["x2"])
        abl_fields = fields("leading", tuple(sorted(set(ablate) | {"v3", "v4"})))
        rep.ablation["v0+v1+v2"] = [d[weight] for d in parallel_map(norms, abl_fields, threads)]
        fa = rep.fit("ablation_v0v1v2", rep.ablation["v0+v1+v2"])
        rep.flags["residual_slope"] = 4.6 <= f9.slope <= 5.4 and f9.r2 > 0.99
        rep.flags["ablation_slope"] = 2.6 <= fa.slope <= 3.4

    if "projection" in include:
        for mode in ("leading", "zero"):
            profs = parallel_map(projected_residual, fields(mode), threads)
            rep.projection[mode] = [p.sup() for p in profs]
            if mode == "zero":
                j = int(np.argmin([abs(e - 1 / 24) for e in eps_list]))
                e = eps_list[j]
                target = D_STAR * gbar(profs[j].grid)
                rep.profile_match = float(np.max(np.abs(profs[j].values / e**5 - target)) / np.max(np.abs(target)))
        fl = rep.fit("projection_leading", rep.projection["leading"])
        fz = rep.fit("projection_zero", rep.projection["zero"])
        rep.flags["projection_drop"] = fl.slope >= 5.6
        rep.flags["projection_zero"] = abs(fz.slope - 5.0) <= 0.4 and rep.profile_match < 0.05

    if "monotonicity" in include:
        res = parallel_map(monotonicity_min, fields("leading"), threads)
        rep.monotonicity = [asdict(r) for r in res]
        c0 = np.array([max(0.0, -r.scaled) for r in res])
        # stability: the bound found on the coarse half of the sweep covers the fine half
        half = len(c0) // 2
        floor = 1e-8
        stable = np.max(c0[half:]) <= 2.0 * max(np.max(c0[:half]), floor)
        rep.flags["monotonicity"] = bool(np.all(np.isfinite(c0)) and stable
                                         and all(r.far_minimum > 0 for r in res))

    if "zero_set" in include:
        res = parallel_map(zero_set_distance, fields("leading"), threads)
        sup = [r.sup_displacement for r in res]
        dev = [r.sup_deviation for r in res]
        rep.zero_set = {"sup_displacement": sup, "sup_deviation": dev,
                        "c": [d / e for d, e in zip(sup, eps_list)]}
        fd = rep.fit("zero_set_deviation", dev)
        c = np.array(rep.zero_set["c"])
        rep.flags["zero_set_bound"] = bool(np.max(c) <= 2.0 * np.min(c))
        rep.flags["zero_set_deviation"] = 1.6 <= fd.slope <= 2.4
    return rep
