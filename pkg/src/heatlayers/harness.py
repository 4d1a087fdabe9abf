"""Finite-difference reference solver and the command-line front end.

The solver marches u_t = (sigma(x)^2 u_x)_x + drift u_x with an
explicit conservative scheme on a cell-centered grid. It exists to
cross-check the semi-analytic machinery, so it favours plainness over
speed. Coefficient jumps must sit on cell faces; face diffusivities
use the harmonic mean, which reproduces piecewise-linear steady states
exactly. The drift term covers frames co-moving with an interface that
travels at constant speed.

The second half of the module is the `heatlayers` console command. One
subcommand per solver family, JSON configs validated against explicit
schemas, CSV plus plot-script plus summary artifacts, and a fixed exit
code contract: 0 ok, 2 config, 3 numerics, 4 artifact I/O.
"""

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy

from . import __version__
from . import mixed, multilayer, obm, oit, smallmat, spectrum, stefan, volterra


def fd_solve(xlim, nx, tau_end, sigma, init, bc="dirichlet",
             bc_values=(0.0, 0.0), drift=0.0, cfl=0.4, checkpoints=None):
    """March to tau_end; returns (x, u) or (x, {tau: u}) with checkpoints.

    sigma and init are callables evaluated on the cell centers. bc is
    "dirichlet" (wall values from bc_values) or "neumann" (zero flux).
    The time step obeys cfl * dx^2 / max(sigma^2) plus an advective
    bound when drift is nonzero.
    """
    a, b = map(float, xlim)
    if not b > a:
        raise ValueError("bad interval")
    if bc not in ("dirichlet", "neumann"):
        raise ValueError("bc must be dirichlet or neumann")
    nx = int(nx)
    dx = (b - a) / nx
    x = a + (np.arange(nx) + 0.5) * dx
    u = np.array(init(x), dtype=float)
    if u.shape != x.shape:
        raise ValueError("init must return one value per cell")
    dd = np.asarray(sigma(x), dtype=float) ** 2
    if dd.shape != x.shape or np.any(dd <= 0):
        raise ValueError("sigma must be positive on the grid")
    dface = 2.0 * dd[:-1] * dd[1:] / (dd[:-1] + dd[1:])
    dt0 = cfl * dx * dx / dd.max()
    if drift != 0.0:
        dt0 = min(dt0, 0.5 * dx / abs(drift))
    guard = 1e7 * (1.0 + np.max(np.abs(u)))

    flux = np.empty(nx + 1)
    dudx = np.empty(nx) if drift != 0.0 else None

    def step(u, dt):
        flux[1:-1] = dface * (u[1:] - u[:-1]) / dx
        if bc == "dirichlet":
            flux[0] = dd[0] * 2.0 * (u[0] - bc_values[0]) / dx
            flux[-1] = dd[-1] * 2.0 * (bc_values[1] - u[-1]) / dx
        else:
            flux[0] = 0.0
            flux[-1] = 0.0
        out = u + (dt / dx) * (flux[1:] - flux[:-1])
        if drift != 0.0:
            dudx[1:-1] = (u[2:] - u[:-2]) / (2.0 * dx)
            if bc == "dirichlet":
                gl = 2.0 * bc_values[0] - u[0]
                gr = 2.0 * bc_values[1] - u[-1]
            else:
                gl, gr = u[0], u[-1]
            dudx[0] = (u[1] - gl) / (2.0 * dx)
            dudx[-1] = (gr - u[-2]) / (2.0 * dx)
            out += dt * drift * dudx
        return out

    marks = [] if checkpoints is None else sorted(float(t) for t in checkpoints)
    if any(t <= 0 or t > tau_end for t in marks):
        raise ValueError("checkpoints must lie in (0, tau_end]")
    stored = {}
    now = 0.0
    for target in marks + [float(tau_end)]:
        seg = target - now
        if seg > 0:
            n = max(1, int(np.ceil(seg / dt0)))
            dt = seg / n
            for k in range(n):
                u = step(u, dt)
                if k % 100 == 0 and np.max(np.abs(u)) > guard:
                    raise RuntimeError("finite-difference march blew up")
            now = target
        if checkpoints is not None and target in marks:
            stored[target] = u.copy()
    if checkpoints is None:
        return x, u
    stored[float(tau_end)] = u.copy()
    return x, stored


def piecewise_sigma(breaks, values):
    """Callable sigma(x) that is values[j] on the j-th piece of breaks."""
    breaks = np.atleast_1d(np.asarray(breaks, dtype=float))
    values = np.asarray(values, dtype=float)
    if values.size != breaks.size + 1:
        raise ValueError("need one more value than breakpoints")

    def sig(x):
        return values[np.searchsorted(breaks, x, side="right")]

    return sig


# ---------------------------------------------------------------------------
# Config schemas

class ConfigError(ValueError):
    """Config file violates the run schema."""


class RunConfig:
    """One validated run request.

    kind names the subcommand, params the merged field values, out the
    artifact directory. threads caps the _map_batch fan-out;
    deterministic forces serial reductions so repeated runs bit-match.
    """

    def __init__(self, kind, params, out, threads, deterministic):
        self.kind = kind
        self.params = params
        self.out = out
        self.threads = max(1, int(threads))
        self.deterministic = bool(deterministic)


def _num(lo=None, hi=None, open_lo=False):
    def check(v, name):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError("%s must be a number" % name)
        v = float(v)
        if not math.isfinite(v):
            raise ConfigError("%s must be finite" % name)
        if lo is not None and (v <= lo if open_lo else v < lo):
            raise ConfigError("%s must be %s %g"
                              % (name, ">" if open_lo else ">=", lo))
        if hi is not None and v > hi:
            raise ConfigError("%s must be <= %g" % (name, hi))
        return v

    return check


def _intval(lo, hi=None):
    def check(v, name):
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError("%s must be an integer" % name)
        if v < lo or (hi is not None and v > hi):
            raise ConfigError("%s must lie in [%d, %s]"
                              % (name, lo, hi if hi is not None else "inf"))
        return v

    return check


def _boolval(v, name):
    if not isinstance(v, bool):
        raise ConfigError("%s must be true or false" % name)
    return v


def _numlist(min_len, positive=False, increasing=False):
    def check(v, name):
        if not isinstance(v, list) or len(v) < min_len:
            raise ConfigError("%s must be a list of at least %d numbers"
                              % (name, min_len))
        vals = []
        for j, entry in enumerate(v):
            if isinstance(entry, bool) or not isinstance(entry, (int, float)):
                raise ConfigError("%s[%d] must be a number" % (name, j))
            vals.append(float(entry))
        if positive and any(x <= 0.0 for x in vals):
            raise ConfigError("%s entries must be positive" % name)
        if increasing and any(b <= a for a, b in zip(vals, vals[1:])):
            raise ConfigError("%s must increase strictly" % name)
        return vals

    return check


def _choice(*options):
    def check(v, name):
        if v not in options:
            raise ConfigError("%s must be one of: %s"
                              % (name, ", ".join(options)))
        return v

    return check


def _block(schema):
    def check(v, name):
        if not isinstance(v, dict):
            raise ConfigError("%s must be an object" % name)
        return _apply_schema(v, schema, where=" in " + name)

    return check


def _pathlist(v, name):
    # mixed list: a bare number pins a breakpoint, an object moves it
    if not isinstance(v, list) or len(v) < 2:
        raise ConfigError("%s must list at least two breakpoint paths" % name)
    out = []
    for j, entry in enumerate(v):
        tag = "%s[%d]" % (name, j)
        if isinstance(entry, bool):
            raise ConfigError("%s must be a number or an object" % tag)
        if isinstance(entry, (int, float)):
            out.append(float(entry))
        elif isinstance(entry, dict):
            out.append(_apply_schema(entry, _PATH_BLOCK, where=" in " + tag))
        else:
            raise ConfigError("%s must be a number or an object" % tag)
    return out


def _apply_schema(raw, schema, where=""):
    if not isinstance(raw, dict):
        raise ConfigError("config%s must be a JSON object" % where)
    for key in raw:
        if key not in schema:
            raise ConfigError("unknown key %r%s" % (key, where))
    out = {}
    for key, (check, default) in schema.items():
        if key in raw:
            out[key] = check(raw[key], key)
        elif isinstance(default, (dict, list)):
            out[key] = json.loads(json.dumps(default))
        else:
            out[key] = default
    return out


_PATH_BLOCK = {
    "kind": (_choice("constant", "linear"), "constant"),
    "a": (_num(), 0.0),
    "b": (_num(), 0.0),
}

_INIT_BLOCK = {
    "kind": (_choice("sine", "point"), "sine"),
    "waves": (_intval(1, 64), 1),
    "x0": (_num(), 0.9),
}

_SCHEMAS = {
    "spectrum": {
        "sigma_1": (_num(0.0, open_lo=True), 7.0),
        "sigma_2": (_num(0.0, open_lo=True), 0.7),
        "l_1": (_num(0.0, open_lo=True), 1.2),
        "l_2": (_num(0.0, open_lo=True), 1.0),
        "count": (_intval(1, 5000), 30),
    },
    "oit": {
        "sigma_minus": (_num(0.0, open_lo=True), 1.0),
        "sigma_plus": (_num(0.0, open_lo=True), 0.5),
        "zeta_source": (_num(), 0.4),
        "tau": (_num(0.0, open_lo=True), 0.25),
        "x_min": (_num(), -4.0),
        "x_max": (_num(), 4.0),
        "n_points": (_intval(2, 100000), 321),
    },
    "mixed": {
        "y": (_numlist(2, increasing=True), [0.0, 1.0]),
        "sigma": (_numlist(3, positive=True), [1.0, 0.5, 2.0]),
        "nmax": (_intval(0, 200), 10),
        "x0": (_num(), 0.5),
        "x_probe": (_num(), 0.25),
        "omega_max": (_num(0.0, open_lo=True), 12.0),
        "n_omega": (_intval(2, 100000), 240),
    },
    "obm": {
        "sigma_minus": (_num(0.0, open_lo=True), 1.0),
        "sigma_plus": (_num(0.0, open_lo=True), 0.6),
        "x0": (_num(), -0.4),
        "horizon": (_num(0.0, open_lo=True), 0.5),
        "m": (_intval(2, 100000), 160),
        "path": (_block(_PATH_BLOCK), {"kind": "linear", "a": 0.0, "b": 0.35}),
        "x_min": (_num(), -4.0),
        "x_max": (_num(), 4.0),
        "n_points": (_intval(2, 100000), 321),
        "checkpoints": (_numlist(1), [0.25, 0.5, 1.0]),
    },
    "multilayer": {
        "paths": (_pathlist, [0.0, {"kind": "linear", "a": 0.6, "b": 0.2},
                              2.0]),
        "sigma": (_numlist(1, positive=True), [1.0, 0.7]),
        "horizon": (_num(0.0, open_lo=True), 0.4),
        "m": (_intval(1, 100000), 12),
        "terms": (_intval(1, 5000), 160),
        "init": (_block(_INIT_BLOCK), {"kind": "sine", "waves": 1, "x0": 0.9}),
        "n_points": (_intval(2, 100000), 161),
    },
    "stefan": {
        "y_minus_mm": (_num(), 1.0),
        "y_plus_mm": (_num(), 50.0),
        "T_s_K": (_num(), 270.0),
        "T_m_K": (_num(), 273.0),
        "T_l_K": (_num(), 290.0),
        "kappa_I_mm2_per_s": (_num(0.0, open_lo=True), 1.02),
        "kappa_W_mm2_per_s": (_num(0.0, open_lo=True), 0.13),
        "rho_I_kg_per_m3": (_num(0.0, open_lo=True), 917.0),
        "rho_W_kg_per_m3": (_num(0.0, open_lo=True), 997.0),
        "L_K_m3_per_kg": (_num(0.0, open_lo=True), 49.86 / 917.0),
        "C_a_kJ_per_m3_per_K": (_num(0.0, open_lo=True), 3061.935),
        "melting": (_boolval, False),
        "horizon_s": (_num(0.0, open_lo=True), 600.0),
        "terms": (_intval(1, 5000), 50),
        "h0_s": (_num(0.0, open_lo=True), 0.01),
        "ratio": (_num(1.0), 1.2),
        "h_max_s": (_num(0.0, open_lo=True), 15.0),
        "small_time_horizon_s": (_num(0.0, open_lo=True), 1.0),
        "checkpoints": (_numlist(1), [0.25, 0.5, 1.0]),
        "profile_points": (_intval(2, 100000), 201),
    },
}


def _stefan_config(p):
    return stefan.StefanConfig(
        y_minus=p["y_minus_mm"], y_plus=p["y_plus_mm"],
        T_s=p["T_s_K"], T_m=p["T_m_K"], T_l=p["T_l_K"],
        kappa_I=p["kappa_I_mm2_per_s"], kappa_W=p["kappa_W_mm2_per_s"],
        rho_I=p["rho_I_kg_per_m3"], rho_W=p["rho_W_kg_per_m3"],
        L=p["L_K_m3_per_kg"], C_a=p["C_a_kJ_per_m3_per_K"],
        melting=p["melting"],
        small_time_horizon=p["small_time_horizon_s"])


def _build_paths(entries):
    out = []
    for e in entries:
        if isinstance(e, float):
            out.append(e)
        elif e["kind"] == "constant":
            out.append(float(e["a"]))
        else:
            a, b = float(e["a"]), float(e["b"])
            out.append((lambda t, a=a, b=b: a + b * t, lambda t, b=b: b))
    return out


def _build_layout(p):
    return multilayer.MovingLayerGrid(_build_paths(p["paths"]), p["sigma"],
                                      p["horizon"])


def _build_init(p, layout):
    ib = p["init"]
    if ib["kind"] == "point":
        return ("point", float(ib["x0"]))
    pos = layout.positions(0.0)
    a, b, k = pos[0], pos[-1], ib["waves"]
    return lambda x: np.sin(np.pi * k * (np.asarray(x) - a) / (b - a))


def _fractions_ok(fracs, name):
    if any(f <= 0.0 or f > 1.0 for f in fracs):
        raise ConfigError("%s must be fractions in (0, 1]" % name)


def _finalize_oit(p):
    if p["x_max"] <= p["x_min"]:
        raise ConfigError("x_max must exceed x_min")


def _finalize_mixed(p):
    if len(p["y"]) != 2:
        raise ConfigError("the pole study needs exactly two breakpoints")
    if len(p["sigma"]) != len(p["y"]) + 1:
        raise ConfigError("need len(y) + 1 sigma entries")
    try:
        mixed.MixedMedium(p["y"], p["sigma"])
    except ValueError as exc:
        raise ConfigError(str(exc))


def _finalize_obm(p):
    if p["x_max"] <= p["x_min"]:
        raise ConfigError("x_max must exceed x_min")
    pb = p["path"]
    if pb["kind"] == "constant" and pb["b"] != 0.0:
        raise ConfigError("a constant path takes no slope b")
    if p["x0"] == pb["a"]:
        raise ConfigError("x0 must avoid the starting interface position")
    _fractions_ok(p["checkpoints"], "checkpoints")


def _finalize_multilayer(p):
    if len(p["paths"]) != len(p["sigma"]) + 1:
        raise ConfigError("need one more path than sigma entries")
    try:
        layout = _build_layout(p)
        _build_init(p, layout)
        if p["init"]["kind"] == "point":
            multilayer._check_point(layout, p["init"]["x0"])
    except ValueError as exc:
        raise ConfigError(str(exc))


def _finalize_stefan(p):
    try:
        _stefan_config(p)
    except ValueError as exc:
        raise ConfigError(str(exc))
    _fractions_ok(p["checkpoints"], "checkpoints")


_FINALIZERS = {
    "oit": _finalize_oit,
    "mixed": _finalize_mixed,
    "obm": _finalize_obm,
    "multilayer": _finalize_multilayer,
    "stefan": _finalize_stefan,
}


def _load_params(kind, path):
    """Read, schema-check and cross-check a config before any math runs."""
    if path is None:
        raw = {}
    else:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError("cannot read config %s: %s" % (path, exc))
        except json.JSONDecodeError as exc:
            raise ConfigError("config %s is not valid JSON: %s" % (path, exc))
    params = _apply_schema(raw, _SCHEMAS[kind])
    fin = _FINALIZERS.get(kind)
    if fin is not None:
        fin(params)
    return params


# ---------------------------------------------------------------------------
# Shared run plumbing

def _map_batch(fn, items, cfg):
    """Map fn over items, fanning out to threads when allowed.

    Results always come back in input order. Deterministic runs stay
    serial so every floating-point reduction happens in one fixed
    sequence regardless of the thread cap.
    """
    items = list(items)
    if cfg.threads > 1 and not cfg.deterministic and len(items) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def _require_finite(label, *arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise RuntimeError("non-finite values in %s" % label)


def _write_csv(path, header, rows):
    # repr keeps full precision and a '.' decimal mark in every locale
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for row in rows:
            wr.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _params_hash(params):
    blob = json.dumps(params, sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


# ---------------------------------------------------------------------------
# Subcommand drivers. Each returns {"csvs": [(name, header, rows)],
# "plot": (name, text), "metrics": {...}} and raises on bad numerics.

_PLOT_SPECTRUM = '''"""Plot the eigenvalue approximation study; needs matplotlib."""
import csv
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("eigenvalues.csv", encoding="utf-8")))
n = [int(r["index"]) for r in rows]
plt.semilogy(n, [float(r["rel_err_zero"]) for r in rows], "o-",
             label="zero order")
plt.semilogy(n, [float(r["rel_err_first"]) for r in rows], "s-",
             label="first order")
plt.xlabel("mode index")
plt.ylabel("relative frequency error")
plt.legend()
plt.tight_layout()
plt.savefig("spectrum.png", dpi=150)
'''


def _run_spectrum(cfg):
    p = cfg.params
    grid = spectrum.LayerGrid(
        [0.0, p["l_1"], p["l_1"] + p["l_2"]], [p["sigma_1"], p["sigma_2"]])
    lams = spectrum.find_eigenvalues(grid, p["count"])
    _require_finite("eigenvalues", lams)
    ns = np.arange(1, p["count"] + 1)
    args = (p["sigma_1"], p["sigma_2"], p["l_1"], p["l_2"], ns)
    lam0 = spectrum.lambda_approx(*args, order=0)
    lam1 = spectrum.lambda_approx(*args, order=1)
    err0 = np.abs(lam0 - lams) / lams
    err1 = np.abs(lam1 - lams) / lams
    rows = [(int(n), float(le), float(l0), float(l1), float(e0), float(e1))
            for n, le, l0, l1, e0, e1 in zip(ns, lams, lam0, lam1, err0, err1)]
    header = ["index", "lambda_exact", "lambda_zero", "lambda_first",
              "rel_err_zero", "rel_err_first"]
    metrics = {"max_rel_err_zero": float(err0.max()),
               "max_rel_err_first": float(err1.max())}
    return {"csvs": [("eigenvalues.csv", header, rows)],
            "plot": ("plot_spectrum.py", _PLOT_SPECTRUM),
            "metrics": metrics}


_PLOT_OIT = '''"""Plot the jump-medium heat kernels; needs matplotlib."""
import csv
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("kernels.csv", encoding="utf-8")))
z = [float(r["z"]) for r in rows]
plt.plot(z, [float(r["p_from_left"]) for r in rows], label="source left")
plt.plot(z, [float(r["p_from_right"]) for r in rows], label="source right")
plt.axvline(0.0, color="k", lw=0.5)
plt.xlabel("offset from the interface")
plt.ylabel("kernel value")
plt.legend()
plt.tight_layout()
plt.savefig("oit.png", dpi=150)
'''


def _run_oit(cfg):
    p = cfg.params
    medium = oit.TwoLayerMedium(0.0, p["sigma_minus"], p["sigma_plus"])
    z = np.linspace(p["x_min"], p["x_max"], p["n_points"])
    tau, zeta = p["tau"], p["zeta_source"]
    pk = oit.heat_kernel_P(z, tau, zeta, 0.0, medium)
    ek = oit.heat_kernel_eta(z, tau, zeta, 0.0, medium)

    def fold(mat, row):
        return np.where(z < 0.0, mat[row, 0], mat[row, 1])

    cols = [fold(pk, 0), fold(pk, 1), fold(ek, 0), fold(ek, 1)]
    _require_finite("kernels", *cols)
    rows = [tuple(float(v) for v in vals)
            for vals in zip(z, cols[0], cols[1], cols[2], cols[3])]
    header = ["z", "p_from_left", "p_from_right",
              "eta_from_left", "eta_from_right"]
    eps = 1e-9 * max(1.0, abs(p["x_max"]))
    zc = np.array([-eps, eps])
    pc = oit.heat_kernel_P(zc, tau, zeta, 0.0, medium)
    gap = max(abs(float(pc[0, 0][0] - pc[0, 1][1])),
              abs(float(pc[1, 0][0] - pc[1, 1][1])))
    metrics = {"mass_from_left": float(np.trapezoid(cols[0], z)),
               "mass_from_right": float(np.trapezoid(cols[1], z)),
               "interface_gap": gap}
    return {"csvs": [("kernels.csv", header, rows)],
            "plot": ("plot_oit.py", _PLOT_OIT),
            "metrics": metrics}


_PLOT_MIXED = '''"""Plot resolvent poles and the cut density; needs matplotlib."""
import csv
import matplotlib.pyplot as plt

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
rows = list(csv.DictReader(open("poles.csv", encoding="utf-8")))
ax1.scatter([float(r["lam_re"]) for r in rows],
            [float(r["lam_im"]) for r in rows], s=18)
ax1.set_xlabel("Re lambda")
ax1.set_ylabel("Im lambda")
rows = list(csv.DictReader(open("cut.csv", encoding="utf-8")))
ax2.plot([float(r["omega"]) for r in rows],
         [float(r["density"]) for r in rows])
ax2.set_xlabel("omega")
ax2.set_ylabel("spectral density")
fig.tight_layout()
fig.savefig("mixed.png", dpi=150)
'''


def _run_mixed(cfg):
    p = cfg.params
    medium = mixed.MixedMedium(p["y"], p["sigma"])
    ws, lams = mixed.three_layer_poles(medium, p["nmax"])
    _require_finite("poles", np.abs(ws))
    polished = mixed.find_det_zeros(medium, ws)
    drift = np.abs(polished - ws)
    rows = [(j, float(w.real), float(w.imag), float(l.real), float(l.imag),
             float(d))
            for j, (w, l, d) in enumerate(zip(ws, lams, drift))]
    header = ["index", "w_re", "w_im", "lam_re", "lam_im", "newton_drift"]
    om = np.linspace(p["omega_max"] / p["n_omega"], p["omega_max"],
                     p["n_omega"])
    dens = _map_batch(
        lambda w: float(np.atleast_1d(
            mixed.cut_measure(medium, w, p["x0"], p["x_probe"]))[0]),
        om, cfg)
    _require_finite("cut density", dens)
    cut_rows = [(float(w), float(d)) for w, d in zip(om, dens)]
    metrics = {"n_poles": len(rows), "max_newton_drift": float(drift.max())}
    return {"csvs": [("poles.csv", header, rows),
                     ("cut.csv", ["omega", "density"], cut_rows)],
            "plot": ("plot_mixed.py", _PLOT_MIXED),
            "metrics": metrics}


_PLOT_OBM = '''"""Plot the moving-interface traces and field; needs matplotlib."""
import csv
import matplotlib.pyplot as plt

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
rows = list(csv.DictReader(open("trace.csv", encoding="utf-8")))
tau = [float(r["tau"]) for r in rows]
ax1.plot(tau, [float(r["phi"]) for r in rows], label="value")
ax1.plot(tau, [float(r["flux"]) for r in rows], label="flux")
ax1.set_xlabel("tau")
ax1.legend()
rows = list(csv.DictReader(open("field.csv", encoding="utf-8")))
x = [float(r["x"]) for r in rows]
for key in rows[0]:
    if key != "x":
        ax2.plot(x, [float(r[key]) for r in rows], label=key)
ax2.set_xlabel("x")
ax2.legend()
fig.tight_layout()
fig.savefig("obm.png", dpi=150)
'''


def _run_obm(cfg):
    p = cfg.params
    medium = oit.TwoLayerMedium(0.0, p["sigma_minus"], p["sigma_plus"])
    pb = p["path"]
    if pb["kind"] == "constant":
        motion = obm.MovingInterface.constant(pb["a"], p["horizon"])
    else:
        motion = obm.MovingInterface.linear(pb["a"], pb["b"], p["horizon"])
    grid = volterra.uniform_grid(p["horizon"], p["m"])
    trace = obm.solve_interface(medium, motion, p["x0"], grid)
    _require_finite("trace", trace.phi, trace.psi, trace.flux)
    rows = [(float(t), float(a), float(b), float(c))
            for t, a, b, c in zip(grid.nodes, trace.phi, trace.psi,
                                  trace.flux)]
    x = np.linspace(p["x_min"], p["x_max"], p["n_points"])
    idx = sorted({int(round(f * p["m"])) for f in p["checkpoints"]} - {0})
    if not idx:
        idx = [p["m"]]
    taus = [float(grid.nodes[i]) for i in idx]
    fields = _map_batch(
        lambda t: np.asarray(obm.green_function(
            medium, motion, p["x0"], trace, x, tau=t), dtype=float),
        taus, cfg)
    _require_finite("field", *fields)
    fheader = ["x"] + ["u_tau%g" % t for t in taus]
    frows = [tuple(float(v) for v in vals) for vals in zip(x, *fields)]
    metrics = {"taus": taus,
               "mass_final": float(np.trapezoid(fields[-1], x))}
    return {"csvs": [("trace.csv", ["tau", "phi", "psi", "flux"], rows),
                     ("field.csv", fheader, frows)],
            "plot": ("plot_obm.py", _PLOT_OBM),
            "metrics": metrics}


_PLOT_MULTILAYER = '''"""Plot strip traces and profiles; needs matplotlib."""
import csv
import matplotlib.pyplot as plt

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
rows = list(csv.DictReader(open("traces.csv", encoding="utf-8")))
tau = [float(r["tau"]) for r in rows]
for key in rows[0]:
    if key.startswith("phi_"):
        ax1.plot(tau, [float(r[key]) for r in rows], label=key)
ax1.set_xlabel("tau")
ax1.legend()
rows = list(csv.DictReader(open("profile.csv", encoding="utf-8")))
x = [float(r["x"]) for r in rows]
for key in rows[0]:
    if key != "x":
        ax2.plot(x, [float(r[key]) for r in rows], label=key)
ax2.set_xlabel("x")
ax2.legend()
fig.tight_layout()
fig.savefig("multilayer.png", dpi=150)
'''


def _run_multilayer(cfg):
    p = cfg.params
    layout = _build_layout(p)
    grid = volterra.uniform_grid(p["horizon"], p["m"])
    init = _build_init(p, layout)
    sol = multilayer.interface_volterra(layout, init, grid, terms=p["terms"])
    _require_finite("traces", sol.phi, sol.flux)
    nb = layout.nbreaks
    header = (["tau"] + ["phi_%d" % j for j in range(nb)]
              + ["flux_%d" % j for j in range(nb)])
    rows = [tuple(float(v) for v in (t,) + tuple(ph) + tuple(fl))
            for t, ph, fl in zip(sol.nodes, sol.phi, sol.flux)]
    pos_end = layout.positions(float(sol.nodes[-1]))
    x = np.linspace(pos_end[0], pos_end[-1], p["n_points"])
    idx = sorted({p["m"] // 2, p["m"]} - {0})
    taus = [float(sol.nodes[i]) for i in idx]
    profs = _map_batch(
        lambda t: np.asarray(sol.evaluate(x, tau=t), dtype=float), taus, cfg)
    _require_finite("profiles", *profs)
    pheader = ["x"] + ["u_tau%g" % t for t in taus]
    prows = [tuple(float(v) for v in vals) for vals in zip(x, *profs)]
    walls, tail = multilayer.solution_series(
        sol, float(sol.nodes[-1]), np.array([pos_end[0], pos_end[-1]]))
    metrics = {"taus": taus,
               "max_wall_value": float(np.max(np.abs(walls))),
               "series_tail_gauge": float(tail)}
    return {"csvs": [("traces.csv", header, rows),
                     ("profile.csv", pheader, prows)],
            "plot": ("plot_multilayer.py", _PLOT_MULTILAYER),
            "metrics": metrics}


_PLOT_STEFAN = '''"""Plot the freezing-front run; needs matplotlib."""
import csv
import matplotlib.pyplot as plt

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
rows = list(csv.DictReader(open("front.csv", encoding="utf-8")))
ax1.plot([float(r["tau_s"]) for r in rows],
         [float(r["y_mm"]) for r in rows])
ax1.set_xlabel("time, s")
ax1.set_ylabel("front position, mm")
rows = list(csv.DictReader(open("profile.csv", encoding="utf-8")))
x = [float(r["x_mm"]) for r in rows]
for key in rows[0]:
    if key != "x_mm":
        ax2.plot(x, [float(r[key]) for r in rows], label=key)
ax2.set_xlabel("x, mm")
ax2.set_ylabel("temperature, K")
ax2.legend()
fig.tight_layout()
fig.savefig("stefan.png", dpi=150)
'''


def _run_stefan(cfg):
    p = cfg.params
    sc = _stefan_config(p)
    state = stefan.solve_front(sc, p["horizon_s"], terms=p["terms"],
                               h0=p["h0_s"], ratio=p["ratio"],
                               h_max=p["h_max_s"])
    times = np.asarray(state.times)
    ys = np.asarray(state.y_trace)
    _require_finite("front trace", times, ys, np.asarray(state.Phi_trace))
    diag = state.diagnostics
    nan = float("nan")
    rows = []
    for k in range(len(state)):
        d = (k - 1) if k >= 1 else None
        rows.append((
            float(times[k]), float(ys[k]), float(state.y_rate_trace[k]),
            float(state.Phi_trace[k]),
            float(diag["residual"][d]) if d is not None else nan,
            float(diag["jump"][d]) if d is not None else nan,
            float(diag["jump_target"][d]) if d is not None else nan,
            float(diag["seconds"][d]) if d is not None else nan,
        ))
    header = ["tau_s", "y_mm", "rate_mm_per_s", "phi_K_mm_per_s",
              "residual_K", "jump_K_mm_per_s", "jump_target_K_mm_per_s",
              "step_seconds"]
    x = np.linspace(sc.y_minus, sc.y_plus, p["profile_points"])
    taus = []
    for f in p["checkpoints"]:
        k = int(np.argmin(np.abs(times - f * p["horizon_s"])))
        if k > 0 and times[k] not in taus:
            taus.append(float(times[k]))
    if not taus:
        taus = [float(times[-1])]
    tail_notes = []
    with warnings.catch_warnings(record=True) as grabbed:
        warnings.simplefilter("always")
        profs = _map_batch(
            lambda t: np.asarray(stefan.temperature(sc, state, t, x),
                                 dtype=float), taus, cfg)
        tail_notes = sorted({str(w.message) for w in grabbed})
    _require_finite("profiles", *profs)
    pheader = ["x_mm"] + ["T_K_tau%g" % t for t in taus]
    prows = [tuple(float(v) for v in vals) for vals in zip(x, *profs)]
    res = np.asarray(diag["residual"], dtype=float)
    metrics = {"n_steps": len(state) - 1,
               "final_front_mm": float(ys[-1]),
               "max_residual_K": float(np.max(np.abs(res))),
               "max_step_seconds": float(np.max(diag["seconds"])),
               "taus": taus,
               "tail_notes": tail_notes}
    return {"csvs": [("front.csv", header, rows),
                     ("profile.csv", pheader, prows)],
            "plot": ("plot_stefan.py", _PLOT_STEFAN),
            "metrics": metrics}


_DRIVERS = {
    "spectrum": _run_spectrum,
    "oit": _run_oit,
    "mixed": _run_mixed,
    "obm": _run_obm,
    "multilayer": _run_multilayer,
    "stefan": _run_stefan,
}


# ---------------------------------------------------------------------------
# Built-in invariant checks for `heatlayers validate`. Deliberately
# independent of pytest: each returns (ok, detail) and any exception
# inside a check counts as a failure.

def _check_smallmat():
    a, b = 0.37, -1.21
    g1 = np.max(np.abs(smallmat.ordered_product(
        [smallmat.rotation(a), smallmat.rotation(b)])
        - smallmat.rotation(a + b)))
    g2 = np.max(np.abs(smallmat.hyper(a) @ smallmat.hyper(b)
                       - smallmat.hyper(a + b)))
    gap = max(float(g1), float(g2))
    return gap < 1e-12, "composition gap %.2e" % gap


def _check_spectrum():
    grid = spectrum.LayerGrid([0.0, 1.2, 2.2], [7.0, 0.7])
    lams = spectrum.find_eigenvalues(grid, 12)
    res = float(np.max(np.abs(spectrum.eigen_residual(grid, lams))))
    approx = spectrum.lambda_approx(7.0, 0.7, 1.2, 1.0, np.arange(1, 13))
    rel = float(np.max(np.abs(approx - lams) / lams))
    ok = res < 1e-9 and rel < 0.025
    return ok, "residual %.2e, first-order gap %.4f" % (res, rel)


def _check_oit():
    medium = oit.TwoLayerMedium(0.0, 1.0, 0.5)
    z = np.linspace(-8.0, 8.0, 4001)
    pk = oit.heat_kernel_P(z, 0.3, 0.4, 0.0, medium)
    m1 = float(np.trapezoid(np.where(z < 0, pk[0, 0], pk[0, 1]), z))
    m2 = float(np.trapezoid(np.where(z < 0, pk[1, 0], pk[1, 1]), z))
    gap = max(abs(m1 - 1.0), abs(m2 - 1.0))
    return gap < 1e-5, "mass defect %.2e" % gap


def _check_volterra():
    system = volterra.VolterraSystem(
        1, lambda t: np.array([1.0]),
        kernel=lambda t, s: np.ones((1, 1, s.size)))
    u = volterra.solve_second_kind(system, volterra.uniform_grid(1.0, 200),
                                   rule="simpson")
    gap = abs(float(u[-1, 0]) - math.e)
    return gap < 1e-6, "exponential defect %.2e" % gap


def _check_mixed():
    medium = mixed.MixedMedium([0.0, 1.0], [1.0, 0.5, 2.0])
    ws, _ = mixed.three_layer_poles(medium, 4)
    drift = float(np.max(np.abs(mixed.find_det_zeros(medium, ws) - ws)))
    return drift < 1e-8, "pole drift %.2e" % drift


def _check_obm():
    # equal coefficients make the interface fictitious, so the field
    # must collapse to the free-space Gaussian
    medium = oit.TwoLayerMedium(0.0, 0.8, 0.8)
    motion = obm.MovingInterface.linear(0.1, 0.4, 0.3)
    trace = obm.solve_interface(medium, motion, -0.5,
                                volterra.uniform_grid(0.3, 24))
    x = np.linspace(-1.5, 1.5, 7)
    u = obm.green_function(medium, motion, -0.5, trace, x)
    dd = 0.8 ** 2
    free = (np.exp(-(x + 0.5) ** 2 / (4.0 * dd * 0.3))
            / math.sqrt(4.0 * math.pi * dd * 0.3))
    gap = float(np.max(np.abs(u - free)))
    return gap < 1e-12, "fictitious-interface gap %.2e" % gap


def _check_multilayer():
    layout = multilayer.MovingLayerGrid([0.0, 1.0], [1.0], 0.25)
    sol = multilayer.interface_volterra(
        layout, lambda x: np.sin(np.pi * x), volterra.uniform_grid(0.25, 6))
    xq = np.linspace(0.0, 1.0, 41)
    exact = math.exp(-math.pi ** 2 * 0.25) * np.sin(np.pi * xq)
    gap = float(np.max(np.abs(sol.evaluate(xq) - exact)))
    return gap < 1e-8, "sine decay gap %.2e" % gap


def _check_stefan_lift():
    sc = stefan.StefanConfig.table1()
    y, rate = 7.3, 0.004
    am, bm, ap, bp = stefan.lift_coefficients(sc, y, rate)
    gap = max(
        abs(am + bm * sc.y_minus - sc.T_s),
        abs(ap + bp * sc.y_plus - sc.T_l),
        abs((am + bm * y) - (ap + bp * y)),
        abs(sc.kappa_I * bm - sc.kappa_W * bp - sc.latent_product * rate))
    return gap < 1e-9, "lift identity gap %.2e" % gap


def _check_stefan_modes():
    sc = stefan.StefanConfig.table1()
    y = 10.0
    lams = stefan.stefan_eigenvalues(sc, y, 30)
    lm = (y - sc.y_minus) / math.sqrt(sc.kappa_I)
    lp = (sc.y_plus - y) / math.sqrt(sc.kappa_W)
    worst = 0.0
    for lam in lams:
        kk = stefan.k_factor(sc, y, lam)
        worst = max(
            worst,
            abs(math.sin(lam * lm) - kk * math.sin(lam * lp)),
            abs(math.sqrt(sc.kappa_I) * math.cos(lam * lm)
                + math.sqrt(sc.kappa_W) * kk * math.cos(lam * lp)))
    return worst < 1e-8, "matching gap %.2e" % worst


_CHECKS = [
    ("smallmat.composition", _check_smallmat),
    ("spectrum.roots", _check_spectrum),
    ("oit.kernel_mass", _check_oit),
    ("volterra.exponential", _check_volterra),
    ("mixed.pole_positions", _check_mixed),
    ("obm.fictitious_interface", _check_obm),
    ("multilayer.sine_decay", _check_multilayer),
    ("stefan.lift", _check_stefan_lift),
    ("stefan.mode_matching", _check_stefan_modes),
]


def _cmd_validate(cfg):
    def run_one(pair):
        name, fn = pair
        try:
            ok, detail = fn()
        except Exception as exc:
            ok, detail = False, "raised %s: %s" % (type(exc).__name__, exc)
        return name, bool(ok), detail

    results = _map_batch(run_one, _CHECKS, cfg)
    all_ok = True
    for name, ok, detail in results:
        print("%s %s: %s" % ("ok  " if ok else "FAIL", name, detail))
        all_ok = all_ok and ok
    payload = {"subcommand": "validate",
               "status": "ok" if all_ok else "failed",
               "version": __version__,
               "checks": [{"name": n, "ok": o, "detail": d}
                          for n, o, d in results]}
    print("RESULT " + json.dumps(payload, sort_keys=True))
    return 0 if all_ok else 3


# ---------------------------------------------------------------------------
# Entry point

def _build_parser():
    parser = argparse.ArgumentParser(
        prog="heatlayers",
        description="Layered-medium heat solvers: study runs and checks.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, blurb in (
            ("spectrum", "two-layer eigenvalue study"),
            ("oit", "diffusivity-jump heat kernels"),
            ("mixed", "half-line medium poles and cut density"),
            ("obm", "moving-interface point source"),
            ("multilayer", "moving layered strip"),
            ("stefan", "two-phase freezing front")):
        sp = sub.add_parser(name, help=blurb)
        sp.add_argument("--config", metavar="PATH",
                        help="JSON config; omitted fields use defaults")
        sp.add_argument("--out", metavar="DIR", default=name + "-out",
                        help="artifact directory (default %(default)s)")
        sp.add_argument("--threads", type=int, default=1, metavar="N",
                        help="worker cap for independent evaluations")
        sp.add_argument("--deterministic", action="store_true",
                        help="serialize reductions for bit-stable reruns")
    val = sub.add_parser("validate", help="run the built-in invariant checks")
    val.add_argument("--threads", type=int, default=1, metavar="N")
    val.add_argument("--deterministic", action="store_true")
    return parser


def _emit(cfg, arts):
    os.makedirs(cfg.out, exist_ok=True)
    outputs = []
    for name, header, rows in arts["csvs"]:
        _write_csv(os.path.join(cfg.out, name), header, rows)
        outputs.append(name)
    pname, ptext = arts["plot"]
    with open(os.path.join(cfg.out, pname), "w", encoding="utf-8") as fh:
        fh.write(ptext)
    outputs.append(pname)
    return outputs


def cli_run(argv=None):
    """Run one subcommand; returns the process exit code.

    0 on success, 2 for usage or config-schema problems, 3 when the
    numerics fail or a validate check trips, 4 when artifacts cannot
    be written.
    """
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else 2
        return 0 if code == 0 else 2

    t_start = time.perf_counter()
    if ns.command == "validate":
        cfg = RunConfig("validate", {}, None, ns.threads, ns.deterministic)
        print("heatlayers %s numpy %s scipy %s"
              % (__version__, np.__version__, scipy.__version__))
        return _cmd_validate(cfg)

    try:
        params = _load_params(ns.command, ns.config)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    cfg = RunConfig(ns.command, params, ns.out, ns.threads, ns.deterministic)
    chash = _params_hash(params)
    t_config = time.perf_counter() - t_start
    print("heatlayers %s numpy %s scipy %s"
          % (__version__, np.__version__, scipy.__version__))
    print("run %s config sha256 %s" % (cfg.kind, chash))

    t0 = time.perf_counter()
    try:
        arts = _DRIVERS[cfg.kind](cfg)
    except (ValueError, ArithmeticError, RuntimeError,
            np.linalg.LinAlgError) as exc:
        print("numeric failure: %s" % exc, file=sys.stderr)
        return 3
    t_compute = time.perf_counter() - t0

    t0 = time.perf_counter()
    try:
        outputs = _emit(cfg, arts)
    except OSError as exc:
        print("cannot write artifacts: %s" % exc, file=sys.stderr)
        return 4
    t_write = time.perf_counter() - t0

    phases = {"config": round(t_config, 6), "compute": round(t_compute, 6),
              "write": round(t_write, 6)}
    for label, secs in phases.items():
        print("phase %s %.3fs" % (label, secs))
    summary = {
        "subcommand": cfg.kind,
        "status": "ok",
        "version": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "config_sha256": chash,
        "threads": cfg.threads,
        "deterministic": cfg.deterministic,
        "phase_seconds": phases,
        "outputs": outputs + ["summary.json"],
        "metrics": arts["metrics"],
    }
    try:
        with open(os.path.join(cfg.out, "summary.json"), "w",
                  encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        print("cannot write artifacts: %s" % exc, file=sys.stderr)
        return 4
    print("RESULT " + json.dumps(summary, sort_keys=True))
    return 0


def main():
    """Console entry point."""
    sys.exit(cli_run(sys.argv[1:]))
