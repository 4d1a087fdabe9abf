"""Second-kind Volterra systems with optional square-root singular kernels.

Convention: u(t) = f(t) + integral_0^t [K(t,s) + Ks(t,s)/sqrt(t-s)] u(s) ds
with u, f of dimension d and the kernels (d, d)-valued. Ks carries only
the smooth factor; the solver supplies the 1/sqrt weight through exact
product-integration rules on piecewise-linear interpolants.
"""

import math
import warnings

import numpy as np


class TimeGrid:
    """Strictly increasing nodes starting at 0."""

    def __init__(self, nodes):
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("need at least two nodes")
        if nodes[0] != 0.0:
            raise ValueError("grid must start at 0")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must increase strictly")
        self.nodes = nodes

    def __len__(self):
        return self.nodes.size

    @property
    def steps(self):
        return np.diff(self.nodes)

    @property
    def uniform(self):
        h = self.steps
        return bool(np.all(np.abs(h - h[0]) <= 1e-12 * h[0]))


def uniform_grid(t_end, m):
    return TimeGrid(np.linspace(0.0, float(t_end), int(m) + 1))


def geometric_grid(h0, ratio, t_end, h_max=math.inf):
    """Steps growing by `ratio` from h0, capped at h_max, ending at t_end."""
    if h0 <= 0 or ratio < 1.0 or t_end <= 0:
        raise ValueError("need h0 > 0, ratio >= 1, t_end > 0")
    ts = [0.0]
    h = h0
    while ts[-1] < t_end:
        nxt = ts[-1] + h
        if nxt >= t_end - 0.01 * h:
            ts.append(float(t_end))
            break
        ts.append(nxt)
        h = min(h * ratio, h_max)
    return TimeGrid(np.array(ts))


class VolterraSystem:
    """Problem data: dimension, forcing, smooth kernel, sqrt-weighted kernel.

    forcing(t) -> (d,); kernel(t, s_array) -> (d, d, m); kernel_sqrt the
    same shape, already stripped of its 1/sqrt(t-s) factor. Kernel
    callables must accept s = t; a non-finite diagonal value is replaced
    by zero with a warning.
    """

    def __init__(self, d, forcing, kernel=None, kernel_sqrt=None):
        self.d = int(d)
        self.forcing = forcing
        self.kernel = kernel
        self.kernel_sqrt = kernel_sqrt
        if kernel is None and kernel_sqrt is None:
            raise ValueError("need at least one kernel part")


def _eval_kernel(part, t, s_arr, d, label):
    if part is None:
        return np.zeros((d, d, s_arr.size))
    out = np.asarray(part(t, s_arr), dtype=float)
    if out.shape != (d, d, s_arr.size):
        raise ValueError("%s returned shape %r, wanted %r"
                         % (label, out.shape, (d, d, s_arr.size)))
    if s_arr.size and s_arr[-1] == t:
        diag = out[:, :, -1]
        bad = ~np.isfinite(diag)
        if bad.any():
            warnings.warn("non-finite %s diagonal at t=%g replaced by 0" % (label, t))
            diag[bad] = 0.0
            out[:, :, -1] = diag
    return out


def _trap_weights(nodes):
    w = np.zeros(nodes.size)
    dt = np.diff(nodes)
    w[0] = 0.5 * dt[0]
    w[-1] = 0.5 * dt[-1]
    w[1:-1] = 0.5 * (dt[:-1] + dt[1:])
    return w


def sqrt_weights(nodes, t):
    """Product-integration weights for integral_0^t q(s)/sqrt(t-s) ds.

    Exact for piecewise-linear q on the given nodes (all <= t, with
    nodes[-1] == t allowed; the weight there multiplies the finite
    limit of the smooth factor).
    """
    nodes = np.asarray(nodes, dtype=float)
    w = np.zeros(nodes.size)
    for j in range(nodes.size - 1):
        a, b = nodes[j], nodes[j + 1]
        ra, rb = math.sqrt(t - a), math.sqrt(max(t - b, 0.0))
        i0 = 2.0 * (ra - rb)
        i1 = t * i0 - (2.0 / 3.0) * (ra ** 3 - rb ** 3)
        w[j] += (b * i0 - i1) / (b - a)
        w[j + 1] += (i1 - a * i0) / (b - a)
    return w


def _simpson_weights(k, h):
    """Weights over nodes 0..k of a uniform grid, fourth-order."""
    w = np.zeros(k + 1)
    if k % 2 == 0:
        w[0] = w[k] = 1.0
        w[1:k:2] = 4.0
        w[2:k:2] = 2.0
        w *= h / 3.0
    else:
        # 3/8 rule over the first three panels, plain composite beyond
        w[:4] = np.array([1.0, 3.0, 3.0, 1.0]) * (3.0 * h / 8.0)
        if k > 3:
            ws = np.zeros(k - 2)
            ws[0] = ws[-1] = 1.0
            ws[1:-1:2] = 4.0
            ws[2:-1:2] = 2.0
            w[3:] += ws * h / 3.0
    return w


def _solve_step(lhs, rhs, t):
    try:
        return np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("singular step system at t=%g" % t) from exc


def _first_step_simpson(system, h):
    """Fourth-order starter: implicit midpoint value, then one Simpson panel."""
    d = system.d
    eye = np.eye(d)
    tm = 0.5 * h
    f_m = np.asarray(system.forcing(tm), dtype=float)
    u0 = np.asarray(system.forcing(0.0), dtype=float)
    k_m = _eval_kernel(system.kernel, tm, np.array([0.0, tm]), d, "kernel")
    lhs = eye - 0.25 * h * k_m[:, :, 1]
    u_mid = _solve_step(lhs, f_m + 0.25 * h * (k_m[:, :, 0] @ u0), tm)
    f_1 = np.asarray(system.forcing(h), dtype=float)
    k_1 = _eval_kernel(system.kernel, h, np.array([0.0, tm, h]), d, "kernel")
    rhs = f_1 + (h / 6.0) * (k_1[:, :, 0] @ u0 + 4.0 * (k_1[:, :, 1] @ u_mid))
    return _solve_step(eye - (h / 6.0) * k_1[:, :, 2], rhs, h)


def solve_second_kind(system, grid, rule="trapezoid"):
    """March the system over the grid; returns (len(grid), d) array.

    rule "trapezoid" works on any grid and handles both kernel parts;
    rule "simpson" needs a uniform grid, no sqrt part, and reaches
    fourth order through a 3/8 patch on odd steps and an implicit
    midpoint starter on the very first one.
    """
    nodes = grid.nodes
    d = system.d
    eye = np.eye(d)
    u = np.zeros((nodes.size, d))
    u[0] = np.asarray(system.forcing(0.0), dtype=float)

    if rule == "simpson":
        if not grid.uniform:
            raise ValueError("simpson rule needs a uniform grid")
        if system.kernel_sqrt is not None:
            raise ValueError("simpson rule has no sqrt-kernel path")
        h = grid.steps[0]
        u[1] = _first_step_simpson(system, h)
        for k in range(2, nodes.size):
            t = nodes[k]
            w = _simpson_weights(k, h)
            kmat = _eval_kernel(system.kernel, t, nodes[:k + 1], d, "kernel")
            rhs = np.asarray(system.forcing(t), dtype=float)
            rhs += np.einsum("abj,jb->a", kmat[:, :, :k], u[:k] * w[:k, None])
            u[k] = _solve_step(eye - w[k] * kmat[:, :, k], rhs, t)
        return u

    if rule != "trapezoid":
        raise ValueError("rule must be 'trapezoid' or 'simpson'")

    for k in range(1, nodes.size):
        t = nodes[k]
        hist = nodes[:k + 1]
        w = _trap_weights(hist)
        kmat = _eval_kernel(system.kernel, t, hist, d, "kernel")
        rhs = np.asarray(system.forcing(t), dtype=float)
        rhs += np.einsum("abj,jb->a", kmat[:, :, :k], u[:k] * w[:k, None])
        lhs = eye - w[k] * kmat[:, :, k]
        if system.kernel_sqrt is not None:
            v = sqrt_weights(hist, t)
            smat = _eval_kernel(system.kernel_sqrt, t, hist, d, "kernel_sqrt")
            rhs += np.einsum("abj,jb->a", smat[:, :, :k], u[:k] * v[:k, None])
            lhs = lhs - v[k] * smat[:, :, k]
        u[k] = _solve_step(lhs, rhs, t)
    return u


# ---------------------------------------------------------------------------
# Laplace-domain route for convolution kernels

def _stehfest_coeffs(n):
    assert n % 2 == 0
    half = n // 2
    v = np.zeros(n)
    for k in range(1, n + 1):
        acc = 0.0
        for j in range((k + 1) // 2, min(k, half) + 1):
            acc += (j ** half * math.factorial(2 * j)
                    / (math.factorial(half - j) * math.factorial(j)
                       * math.factorial(j - 1) * math.factorial(k - j)
                       * math.factorial(2 * j - k)))
        v[k - 1] = (-1) ** (k + half) * acc
    return v


def _stehfest(ubar, t, n):
    ln2t = math.log(2.0) / t
    coeffs = _stehfest_coeffs(n)
    acc = None
    for k, c in enumerate(coeffs, start=1):
        val = np.asarray(ubar(k * ln2t), dtype=float)
        acc = c * val if acc is None else acc + c * val
    return ln2t * acc


def _talbot(ubar, t, m=32):
    # fixed Talbot contour; ubar must accept complex arguments
    acc = 0.0
    for k in range(m):
        if k == 0:
            delta = 2.0 * m / 5.0
            gamma = 0.5 * math.exp(delta)
        else:
            theta = k * math.pi / m
            cot = 1.0 / math.tan(theta)
            delta = 2.0 * k * math.pi / 5.0 * (cot + 1j)
            gamma = (1.0 + 1j * theta * (1.0 + cot ** 2) - 1j * cot) * np.exp(delta)
        acc = acc + (gamma * np.asarray(ubar(delta / t))).real
    return 2.0 / (5.0 * t) * acc


def laplace_convolution_solve(fbar, kbar, t, sweep=(8, 10, 12, 14), rtol=1e-5,
                              fallback="talbot"):
    """Invert ubar(p) = (I - kbar(p))^-1 fbar(p) at the times t.

    fbar(p) -> (d,), kbar(p) -> (d, d). Runs a Gaver-Stehfest order
    sweep on the real axis and accepts when the sweep agrees to rtol;
    otherwise falls back to a Talbot contour, for which the transforms
    must accept complex p. fallback "none" keeps the highest-order
    sweep value with a warning instead, for transforms only defined
    near the real axis.
    """
    if fallback not in ("talbot", "none"):
        raise ValueError("fallback must be 'talbot' or 'none'")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr <= 0):
        raise ValueError("times must be positive")

    def ubar(p):
        kb = np.atleast_2d(np.asarray(kbar(p)))
        fb = np.atleast_1d(np.asarray(fbar(p)))
        return np.linalg.solve(np.eye(kb.shape[0]) - kb, fb)

    out = []
    for ti in t_arr:
        vals = np.array([_stehfest(ubar, ti, n) for n in sweep])
        scale = np.max(np.abs(vals))
        spread = np.max(np.abs(vals - vals[-1]))
        if scale == 0.0 or spread <= rtol * scale:
            out.append(vals[-1])
        elif fallback == "talbot":
            out.append(_talbot(ubar, ti))
        else:
            warnings.warn("inversion sweep spread %.2e at t=%g; keeping the "
                          "highest order" % (spread / scale, ti))
            out.append(vals[-1])
    out = np.array(out)
    return out if np.ndim(t) else out[0]
