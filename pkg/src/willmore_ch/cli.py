"""Command line front end: ``willmore-ch <command> [options]``.

Settings come from three layers, later ones winning: built-in defaults, a
flat ``key = value`` file given by ``--config``, and ``--set key=value`` or
the dedicated flags.  ``WCH_THREADS`` caps the worker count.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import acceptance
from .approx import CORRECTIONS, TILT_MODES, FermiChart, assemble, globalize
from .curve import T_BAR, build_curve, rescale
from .layers import LayerProfiles, eta_tilde_stack, lstar_stack
from .linwillmore import L0Operator
from .phibar import PhiBar, coefficient_oracle, export_csv, mu_recursion, solve_mu01
from .residual import (DEFAULT_EPS, NormWeights, _jsonable, residual_norm, thread_count, tube_grid,
                       zero_set_distance)

SCHEMA_VERSION = "1.0"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    T: float = 0.0                 # period of gamma_T; 0 means "use eps"
    eps: tuple = DEFAULT_EPS
    curve_n: int = 512
    layer_n: int = 600
    layer_half_width: float = 25.0
    operator_n: int = 512
    tube_n_s: int = 81
    tube_n_t: int = 201
    grid_n: int = 201
    M: int = 200
    delta: float = 1.0
    tilt: str = "leading"
    weight: str = "tube"
    v2_argument: str = "literal"
    out: str = "wch_out"
    threads: int = 0               # 0: take WCH_THREADS

    def validate(self):
        for name in ("curve_n", "layer_n", "operator_n", "tube_n_s", "tube_n_t", "grid_n", "M"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.curve_n < 64 or self.curve_n % 2:
            raise ConfigError("curve_n must be an even integer >= 64")
        if self.layer_half_width <= 0:
            raise ConfigError("layer_half_width must be positive")
        if self.T and self.T < T_BAR:
            raise ConfigError(f"T = {self.T} is below the minimal period Tbar = {T_BAR:.10f}")
        if not self.eps or any(not 0.0 < e <= 0.125 for e in self.eps):
            raise ConfigError("every eps must lie in (0, 1/8]")
        if not 0.0 < self.delta < math.sqrt(2.0):
            raise ConfigError("delta must lie in (0, sqrt 2)")
        if self.tilt not in TILT_MODES:
            raise ConfigError(f"tilt must be one of {', '.join(TILT_MODES)}")
        if self.weight not in ("tube", "normal", "x2"):
            raise ConfigError("weight must be tube, normal or x2")
        if self.v2_argument not in ("literal", "shifted"):
            raise ConfigError("v2_argument must be literal or shifted")
        return self

    @property
    def single_eps(self):
        """The scale used by single-field commands: ``Tbar / T`` or the first ``eps``."""
        return T_BAR / self.T if self.T else self.eps[0]

    @property
    def workers(self):
        env = thread_count()
        return min(self.threads, env) if self.threads else env


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _coerce(key, raw):
    if key not in _FIELDS:
        raise ConfigError(f"unknown key {key!r}")
    default = _FIELDS[key].default
    raw = raw.strip()
    try:
        if key == "eps":
            return tuple(_number(x) for x in raw.replace(",", " ").split())
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return _number(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return raw


def _number(text):
    """Floats, with ``a/b`` allowed (``eps = 1/8, 1/16``)."""
    if "/" in text:
        a, b = text.split("/", 1)
        return float(a) / float(b)
    return float(text)


def parse_config_text(text):
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        k, v = line.split("=", 1)
        out[k.strip()] = _coerce(k.strip(), v)
    return out


def load_config(path=None, overrides=()):
    values = {}
    if path:
        try:
            values.update(parse_config_text(Path(path).read_text()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        values[k.strip()] = _coerce(k.strip(), v)
    return RunConfig(**values).validate()


# ---------------------------------------------------------------- helpers

def _outdir(cfg):
    p = Path(cfg.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_csv(path, header, columns, comment=None):
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([f"{float(v):.15g}" for v in row])
    return path


def _dump(obj, path=None, stream=None):
    text = json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"
    if path is not None:
        Path(path).write_text(text)
    if stream is not None:
        stream.write(text)
    return text


def _say(args, msg):
    if not args.json:
        print(msg)


# ---------------------------------------------------------------- commands

def cmd_curve(cfg, args):
    out = _outdir(cfg)
    unit = build_curve(cfg.curve_n, check=False)
    # off-grid check: spectral interpolant against the closed-form angle
    mid = (np.arange(cfg.curve_n) + 0.5) * T_BAR / cfg.curve_n
    ang = float(np.max(np.abs(unit.theta_at(mid) - unit.profile.turning_angle(mid))))
    k, k1, k2 = unit.profile.derivatives(mid, 2)
    ode = float(np.max(np.abs(k2 + 0.5 * k**3)))
    residual = max(ang, unit.unit_speed_defect(), unit.frenet_defect(), ode)
    if residual > 1e-9:
        print(f"warning: curve resolution residual {residual:.2e} > 1e-9 at N={cfg.curve_n}; "
              "increase curve_n", file=sys.stderr)
    T = cfg.T or T_BAR
    curve = rescale(unit, T)
    s = curve.s
    pos = curve.position(s)
    kk, kk1 = unit.profile.derivatives(curve.eps * s, 1)
    path = _write_csv(out / "curve.csv", ["s", "k", "k_prime", "gamma1", "gamma2"],
                      [s, curve.eps * kk, curve.eps**2 * kk1, pos[:, 0], pos[:, 1]],
                      comment=f"Tbar={T_BAR:.15g} T={T:.15g} eps={curve.eps:.15g} N={cfg.curve_n}")
    report = {"schema": SCHEMA_VERSION, "Tbar": T_BAR, "T": T, "eps": curve.eps, "N": cfg.curve_n,
              "x1_period": curve.x1_period, "unit_speed_defect": unit.unit_speed_defect(),
              "frenet_defect": unit.frenet_defect(), "angle_offgrid_error": ang,
              "willmore_ode_residual": ode, "resolution_ok": residual <= 1e-9}
    _dump(report, out / "curve_report.json", sys.stdout if args.json else None)
    _say(args, f"wrote {path} (Tbar = {T_BAR:.10f}, L = {curve.x1_period:.10f})")
    return 0


def cmd_coeffs(cfg, args):
    out = _outdir(cfg)
    mu0, mu1 = solve_mu01()
    rec = mu_recursion(mu0, mu1, cfg.M).mu
    n_or = min(cfg.M, 60)
    ref = coefficient_oracle(n_or, mu0, mu1).mu
    j = np.arange(cfg.M + 1)
    oracle = np.full(cfg.M + 1, np.nan)
    oracle[: n_or + 1] = ref
    _write_csv(out / "mu.csv", ["j", "mu", "oracle"], [j, rec, oracle])
    export_csv(out / "phibar.csv", n=cfg.operator_n, M=cfg.M, op=L0Operator(cfg.operator_n))
    nz = np.abs(ref) > 0
    report = {"schema": SCHEMA_VERSION, "mu0": mu0, "mu1": mu1, "mu2": rec[2], "M": cfg.M,
              "oracle_rel_err": float(np.max(np.abs(rec[: n_or + 1][nz] - ref[nz]) / np.abs(ref[nz]))),
              "tail_bound": PhiBar(M=cfg.M).tail_bound}
    _dump(report, out / "coeffs_report.json", sys.stdout if args.json else None)
    _say(args, f"mu0 = {mu0:.3g}, mu1 = {mu1:.15g}; wrote {out / 'mu.csv'} and {out / 'phibar.csv'}")
    return 0


def cmd_profiles(cfg, args):
    out = _outdir(cfg)
    prof = LayerProfiles(cfg.layer_half_width, cfg.layer_n)
    t = np.linspace(-12.0, 12.0, 481)
    st = prof.stacks(t, 2)
    names = ["v0", "eta", "eta_tilde", "eta1", "eta2", "eta3"]
    _write_csv(out / "profiles.csv", ["t"] + names, [t] + [st[k][0] for k in names])
    const = prof.constants()
    table = {k: v for k, v in const.identities.items()}
    lstar = prof.lstar_identities()
    lstar["eta_tilde_direct"] = float(np.max(np.abs(lstar_stack(eta_tilde_stack(t, 2), t)[0] - st["v0"][2])))
    report = {"schema": SCHEMA_VERSION, "c_star": const.c_star, "d_star": const.d_star,
              "identities": table, "lstar_residuals": lstar, "orthogonality": prof.orthogonality()}
    _dump(report, out / "profiles_report.json", sys.stdout if args.json else None)
    if not args.json:
        for name, e in table.items():
            print(f"{name:24s} {e['value']:+.12f}  target {e['target']:+.12f}  dev {e['deviation']:.1e}")
    return 0


def _cartesian_grid(cfg, chart, n):
    L = chart.L
    H = min(0.25 / chart.eps, 40.0)
    x1 = np.linspace(-0.5 * L, 0.5 * L, n)
    x2 = np.linspace(-H, H, n)
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    return X1, X2


def cmd_assemble(cfg, args):
    out = _outdir(cfg)
    eps = cfg.single_eps
    field = assemble(eps, cfg.tilt, LayerProfiles(cfg.layer_half_width, cfg.layer_n), PhiBar(M=cfg.M),
                     ablate=args.ablate, v2_argument=cfg.v2_argument)
    chart = FermiChart(eps, field.tilt)
    glob = globalize(field, chart)
    X1, X2 = _cartesian_grid(cfg, chart, cfg.grid_n)
    v = glob(np.stack([X1, X2], axis=-1))
    _write_csv(out / "field.csv", ["x1", "x2", "v"], [X1.ravel(), X2.ravel(), v.ravel()],
               comment=f"eps={eps:.15g} tilt={cfg.tilt} ablate={','.join(args.ablate) or 'none'}")
    norm, details = residual_norm(field, chart, NormWeights(cfg.delta), cfg.weight,
                                  tube_grid(eps, cfg.tube_n_s, cfg.tube_n_t))
    report = {"schema": SCHEMA_VERSION, "eps": eps, "tilt": cfg.tilt, "ablate": list(args.ablate),
              "v_min": float(v.min()), "v_max": float(v.max()), "residual": details}
    _dump(report, out / "assemble_report.json", sys.stdout if args.json else None)
    _say(args, f"eps = {eps:.6g}: v in [{v.min():.4f}, {v.max():.4f}], sup|F| = {norm:.3e}")
    return 0


def cmd_verify(cfg, args):
    out = _outdir(cfg)
    ctx = acceptance.Context(eps=tuple(cfg.eps), curve_n=cfg.curve_n, layer_n=cfg.layer_n,
                             layer_half_width=cfg.layer_half_width, operator_n=cfg.operator_n, M=cfg.M,
                             delta=cfg.delta, weight=cfg.weight, ablate=tuple(args.ablate),
                             v2_argument=cfg.v2_argument, threads=cfg.workers,
                             tube_n=(cfg.tube_n_s, cfg.tube_n_t))
    numbers = args.only or sorted(acceptance.CHECKS)
    results = []
    for n in numbers:
        r = acceptance.run_one(n, ctx)
        results.append(r)
        if not args.json:
            print(r.line(), flush=True)
    report = ctx._cache.get("report")
    doc = {"schema": SCHEMA_VERSION, "config": asdict(cfg) | {"ablate": list(args.ablate)},
           "criteria": [r.to_dict() for r in results],
           "residual_report": report.to_dict() if report is not None else None,
           "passed": all(r.passed for r in results)}
    doc["config"].pop("out")
    _dump(doc, out / "report.json", sys.stdout if args.json else None)
    if not args.json:
        failed = [r.number for r in results if not r.passed]
        print("all criteria passed" if not failed else f"failed: {', '.join(map(str, failed))}")
    return 0 if doc["passed"] else 1


PLOT_SCRIPT = '''"""Render the CSV files written by `willmore-ch plotdata` (needs matplotlib)."""
import csv
import sys

import matplotlib.pyplot as plt
import numpy as np


def load(name):
    with open(name) as fh:
        rows = [r for r in fh if not r.startswith("#")]
    data = list(csv.reader(rows))
    return data[0], np.array(data[1:], dtype=float)


_, curve = load("curve_period.csv")
_, grid = load("solution_grid.csv")
_, zero = load("zero_polyline.csv")
n = int(round(np.sqrt(len(grid))))
X1, X2, V = (grid[:, i].reshape(n, n) for i in range(3))

fig, ax = plt.subplots(2, 1, figsize=(9, 7))
ax[0].plot(curve[:, 1], curve[:, 2], "k-")
ax[0].set_aspect("equal")
ax[0].set_title("one x1-period of the curve")
im = ax[1].pcolormesh(X1, X2, V, shading="auto", cmap="RdBu_r", vmin=-1, vmax=1)
ax[1].plot(curve[:, 1], curve[:, 2], "k--", lw=0.8, label="curve")
ax[1].plot(zero[:, 1], zero[:, 2], "y-", lw=1.2, label="zero set")
ax[1].set_aspect("equal")
ax[1].legend(loc="upper right")
fig.colorbar(im, ax=ax[1])
fig.tight_layout()
fig.savefig(sys.argv[1] if len(sys.argv) > 1 else "willmore.png", dpi=150)
'''


def cmd_plotdata(cfg, args):
    out = _outdir(cfg)
    eps = cfg.single_eps
    field = assemble(eps, cfg.tilt, LayerProfiles(cfg.layer_half_width, cfg.layer_n), PhiBar(M=cfg.M),
                     v2_argument=cfg.v2_argument)
    chart = FermiChart(eps, field.tilt)
    # one x1-period: arc length over one period T, centred on the axis crossing
    T = T_BAR / eps
    s = np.linspace(-0.5 * T, 0.5 * T, 801)
    g = chart.gamma(s)
    _write_csv(out / "curve_period.csv", ["s", "x1", "x2"], [s, g[:, 0], g[:, 1]],
               comment=f"eps={eps:.15g} L={chart.L:.15g}")
    X1, X2 = _cartesian_grid(cfg, chart, cfg.grid_n)
    v = globalize(field, chart)(np.stack([X1, X2], axis=-1))
    _write_csv(out / "solution_grid.csv", ["x1", "x2", "v"], [X1.ravel(), X2.ravel(), v.ravel()])
    zs = zero_set_distance(field, n=256)
    sig = zs.sigma
    roots = zs.displacement - field.tilt.star(sig, 0)[0]
    pts = chart.forward(sig / eps, roots)
    # the zero sits at normal offset `displacement` from the curve
    dist = float(np.max(np.abs(zs.displacement)))
    order = np.argsort(pts[:, 0])
    _write_csv(out / "zero_polyline.csv", ["sigma", "x1", "x2", "offset"],
               [sig[order], pts[order, 0], pts[order, 1], zs.displacement[order]])
    (out / "plot_willmore.py").write_text(PLOT_SCRIPT)
    report = {"schema": SCHEMA_VERSION, "eps": eps, "L": chart.L,
              "curve_x1_span": float(g[-1, 0] - g[0, 0]), "v_min": float(v.min()), "v_max": float(v.max()),
              "zero_max_offset": dist, "zero_offset_over_eps": dist / eps}
    _dump(report, out / "plotdata_report.json", sys.stdout if args.json else None)
    _say(args, f"wrote plot data to {out}; render with `python {out / 'plot_willmore.py'}`")
    return 0


COMMANDS = {
    "curve": (cmd_curve, "build the Willmore curve and write curve.csv with its invariant report"),
    "coeffs": (cmd_coeffs, "solve for (mu0, mu1), write the series coefficients and the tilt on a grid"),
    "profiles": (cmd_profiles, "solve the layer profiles and print the integral identity table"),
    "assemble": (cmd_assemble, "assemble the approximate solution at one eps and dump it on a grid"),
    "verify": (cmd_verify, "run the acceptance checks; exit status 1 if any fails"),
    "plotdata": (cmd_plotdata, "write figure data (curve period, solution grid, zero set) and a plot script"),
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value file (keys as in RunConfig)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key; may be repeated")
    common.add_argument("--out", help="output directory (config key out)")
    common.add_argument("-T", type=float, help="period of the dilated curve, at least Tbar (sets eps = Tbar/T)")
    common.add_argument("--eps", help="comma separated eps values for sweeps, each <= 1/8")
    common.add_argument("--tilt", choices=TILT_MODES, help="normal tilt of the layer: zero, leading or leading+psi")
    common.add_argument("--json", action="store_true", help="print the JSON report on stdout instead of text")

    p = argparse.ArgumentParser(prog="willmore-ch", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, (_, helptext) in COMMANDS.items():
        sp = sub.add_parser(name, parents=[common], help=helptext, description=helptext)
        if name in ("assemble", "verify"):
            sp.add_argument("--ablate", action="append", default=[], choices=CORRECTIONS,
                            help="drop one correction term from the approximate solution; may be repeated")
        if name == "verify":
            sp.add_argument("--only", type=int, action="append", choices=sorted(acceptance.CHECKS),
                            help="run only the given check number; may be repeated")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides = list(args.set)
    for key, val in (("out", args.out), ("T", args.T), ("eps", args.eps), ("tilt", args.tilt)):
        if val is not None:
            overrides.append(f"{key}={val}")
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        parser.error(str(exc))
    if not hasattr(args, "ablate"):
        args.ablate = []
    fn = COMMANDS[args.command][0]
    return fn(cfg, args)


if __name__ == "__main__":
    sys.exit(main())
