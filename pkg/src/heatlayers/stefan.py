"""Two-phase freezing-front solver on a finite strip.

A strip [y_minus, y_plus] holds solid on the left of a moving front
y(tau) and liquid on the right, with different diffusivities. The left
wall is quenched to T_s below the melting value T_m, the right wall
stays at the liquid value T_l, and the front advances as latent heat is
released. Temperature is split into a piecewise-linear lift that
carries the wall values, the melting value at the front and the latent
flux jump, plus an eigenfunction series whose basis is rebuilt at every
accepted time because the front moved. Each series coefficient splits
into an initial-data part S_n, a history part R_n driven by the
interface flux and the lift motion, and a squared norm N_n.

Marching works on a pair of Volterra equations: at each node a scalar
root solve places the front so the melting value is met, then the flux
of the modified temperature at the front follows explicitly. Both
kernels vanish on the integration diagonal and the flux history starts
at zero, so the trapezoid rule needs no special endpoint handling.

Units: lengths in mm, times in s, diffusivities in mm^2/s,
temperatures in K. Latent heat enters only through the density-latent
product, which has units of K here.

Within a step the eigen sums and history sums run as whole-array
numpy operations; stepping itself is sequential.
"""

import math
import time
import warnings

import numpy as np
from scipy.optimize import brentq

from . import volterra

_SIN_TOL = 1e-8
_IDENT_TOL = 1e-9


class StefanConfig:
    """Strip geometry, temperatures and material constants."""

    def __init__(self, y_minus, y_plus, T_s, T_m, T_l, kappa_I, kappa_W,
                 rho_I, rho_W, L, C_a, melting=False, small_time_horizon=1.0):
        if not y_minus < y_plus:
            raise ValueError("need y_minus < y_plus")
        if kappa_I <= 0 or kappa_W <= 0:
            raise ValueError("diffusivities must be positive")
        if melting:
            if not (T_s >= T_m >= T_l):
                raise ValueError("melting run needs T_s >= T_m >= T_l")
        else:
            if not (T_s <= T_m <= T_l):
                raise ValueError("freezing run needs T_s <= T_m <= T_l")
        self.y_minus = float(y_minus)
        self.y_plus = float(y_plus)
        self.T_s = float(T_s)
        self.T_m = float(T_m)
        self.T_l = float(T_l)
        self.kappa_I = float(kappa_I)
        self.kappa_W = float(kappa_W)
        self.rho_I = float(rho_I)
        self.rho_W = float(rho_W)
        self.L = float(L)
        self.C_a = float(C_a)
        self.melting = bool(melting)
        self.small_time_horizon = float(small_time_horizon)

    @property
    def latent_product(self):
        # density times reduced latent heat, in K; the density is the
        # one of the phase being created
        rho = self.rho_W if self.melting else self.rho_I
        return rho * self.L

    @property
    def span(self):
        return self.y_plus - self.y_minus

    @classmethod
    def table1(cls):
        """Ice-over-water benchmark instance.

        The latent field is stored so that the density-latent product
        equals the published operating value 49.86 K exactly; the
        rounded L in the source table would give 49.52.
        """
        rho_i, rho_w = 917.0, 997.0
        c_w, c_i = 4.22, 2.09
        return cls(
            y_minus=1.0, y_plus=50.0,
            T_s=270.0, T_m=273.0, T_l=290.0,
            kappa_I=1.02, kappa_W=0.13,
            rho_I=rho_i, rho_W=rho_w,
            L=49.86 / rho_i,
            C_a=0.5 * (rho_w * c_w + rho_i * c_i),
        )


def _geometry(config, y):
    lm = (y - config.y_minus) / math.sqrt(config.kappa_I)
    lp = (config.y_plus - y) / math.sqrt(config.kappa_W)
    return lm, lp


def lift_coefficients(config, y, y_prime):
    """Linear-in-x background (A_-, B_-, A_+, B_+).

    The two legs hit T_s and T_l at the walls, meet at T_m-like
    continuity at the front, and their conductive fluxes differ by the
    latent release rho*L*y'.
    """
    if not (config.y_minus <= y <= config.y_plus):
        raise ValueError("front outside the strip")
    kI, kW = config.kappa_I, config.kappa_W
    dT = config.T_l - config.T_s
    rl = config.latent_product
    den = kI * (config.y_plus - y) + kW * (y - config.y_minus)
    b_m = (dT * kW + (config.y_plus - y) * rl * y_prime) / den
    b_p = (dT * kI + (config.y_minus - y) * rl * y_prime) / den
    a_m = config.T_s - b_m * config.y_minus
    a_p = config.T_l - b_p * config.y_plus
    return a_m, b_m, a_p, b_p


def _lift_eval(config, coeffs, y, x):
    a_m, b_m, a_p, b_p = coeffs
    x = np.asarray(x, dtype=float)
    return np.where(x <= y, a_m + b_m * x, a_p + b_p * x)


def _eigen_scan(lm, lp, ratio, count):
    """Positive roots of sin(u lm)cos(u lp) + ratio sin(u lp)cos(u lm)."""

    def residual(u):
        return (np.sin(u * lm) * np.cos(u * lp)
                + ratio * np.sin(u * lp) * np.cos(u * lm))

    spacing = math.pi / (lm + lp)
    step = 0.1 * spacing
    hi = (count + 3) * spacing * 1.6
    for attempt in range(2):
        grid = np.arange(step, hi, step)
        vals = residual(grid)
        sign = np.signbit(vals)
        flips = np.nonzero(sign[:-1] != sign[1:])[0]
        if flips.size >= count:
            break
        step *= 0.25
        hi *= 2.0
    if flips.size < count:
        raise RuntimeError(
            "root shortfall: found %d of %d eigenvalues" % (flips.size, count))
    lo_b = grid[flips[:count]].copy()
    hi_b = grid[flips[:count] + 1].copy()
    flo = residual(lo_b)
    for _ in range(52):
        mid = 0.5 * (lo_b + hi_b)
        fm = residual(mid)
        left = (np.signbit(flo) != np.signbit(fm))
        hi_b = np.where(left, mid, hi_b)
        keep = ~left
        lo_b = np.where(keep, mid, lo_b)
        flo = np.where(keep, fm, flo)
    return 0.5 * (lo_b + hi_b)


def _k_vector(config, lam, lm, lp):
    """Amplitude ratios making the basis continuous and flux matched."""
    sqI, sqW = math.sqrt(config.kappa_I), math.sqrt(config.kappa_W)
    sm, sp = np.sin(lam * lm), np.sin(lam * lp)
    out = np.empty_like(lam)
    regular = np.abs(sp) >= _SIN_TOL
    out[regular] = sm[regular] / sp[regular]
    both = ~regular & (np.abs(sm) < _SIN_TOL)
    if np.any(~regular & ~both):
        raise RuntimeError("genuine pole accepted as an eigenvalue")
    if np.any(both):
        # 0/0 pair: continuity is free, flux matching fixes the ratio
        out[both] = -(sqI / sqW) * np.cos(lam[both] * lm) / np.cos(lam[both] * lp)
    ident = sqI * np.cos(lam * lm) + sqW * out * np.cos(lam * lp)
    if np.max(np.abs(ident)) > _IDENT_TOL * (sqI + sqW) * max(1.0, np.max(np.abs(out))):
        raise RuntimeError("flux identity violated at an accepted root")
    return out


def stefan_eigenvalues(config, y, count):
    """First `count` admissible eigenvalues for front position y."""
    if count < 1:
        raise ValueError("count must be positive")
    if not (config.y_minus <= y <= config.y_plus):
        raise ValueError("front outside the strip")
    lm, lp = _geometry(config, y)
    n = np.arange(1, count + 1, dtype=float)
    if lm == 0.0:
        # front on the left wall: the admissible family keeps every
        # other sine root of the remaining slab, hence the factor 2
        return 2.0 * math.pi * n / lp
    if lp == 0.0:
        return 2.0 * math.pi * n / lm
    ratio = math.sqrt(config.kappa_I / config.kappa_W)
    return _eigen_scan(lm, lp, ratio, count)


def k_factor(config, y, lam):
    """Right-leg amplitude for one eigenvalue at front position y."""
    lm, lp = _geometry(config, y)
    if lm == 0.0:
        sp = math.sin(lam * lp)
        if abs(sp) < _SIN_TOL:
            return -math.sqrt(config.kappa_W / config.kappa_I)
        return 0.0
    sm, sp = math.sin(lam * lm), math.sin(lam * lp)
    if abs(sp) >= _SIN_TOL:
        return sm / sp
    if abs(sm) >= _SIN_TOL:
        raise ValueError("pole: the right leg cannot match a finite left leg")
    sqI, sqW = math.sqrt(config.kappa_I), math.sqrt(config.kappa_W)
    return -(sqI / sqW) * math.cos(lam * lm) / math.cos(lam * lp)


class StefanState:
    """Accepted front trajectory plus the per-node spectral data.

    Row k of every trace belongs to time times[k]. Row 0 is the
    degenerate start: front on the left wall, zero flux, lift equal to
    the uniform liquid value, eigenvalues from the closed form.
    """

    def __init__(self, config, terms):
        if terms < 1:
            raise ValueError("terms must be positive")
        self.terms = int(terms)
        lam0 = stefan_eigenvalues(config, config.y_minus, self.terms)
        k0 = np.full(self.terms, -math.sqrt(config.kappa_W / config.kappa_I))
        lm0, lp0 = _geometry(config, config.y_minus)
        self.times = [0.0]
        self.y_trace = [config.y_minus]
        self.Phi_trace = [0.0]
        self.y_rate_trace = [0.0]
        self.eigen_trace = [lam0]
        self.k_trace = [k0]
        self.l_minus_trace = [lm0]
        self.l_plus_trace = [lp0]
        # start from the uniform liquid state: flat lift at T_l
        self.lift_trace = [(config.T_l, 0.0, config.T_l, 0.0)]
        self.diagnostics = {"residual": [], "jump": [], "jump_target": [],
                            "seconds": []}

    def __len__(self):
        return len(self.times)

    @property
    def grid(self):
        if len(self.times) < 2:
            raise ValueError("no steps accepted yet")
        return volterra.TimeGrid(np.array(self.times))

    def node_index(self, tau):
        times = np.asarray(self.times)
        k = int(np.argmin(np.abs(times - tau)))
        if abs(times[k] - tau) > 1e-9 * max(1.0, abs(tau)):
            raise ValueError("tau=%g is not an accepted node" % tau)
        return k

    def front(self, tau):
        """Front position, linearly interpolated between nodes."""
        if tau < 0 or tau > self.times[-1]:
            raise ValueError("tau outside the computed range")
        return float(np.interp(tau, self.times, self.y_trace))

    def _check(self, config):
        y = np.asarray(self.y_trace)
        if np.any(y < config.y_minus - 1e-12) or np.any(y > config.y_plus + 1e-12):
            raise RuntimeError("front left the strip")
        if self.Phi_trace[0] != 0.0:
            raise RuntimeError("flux must start at zero")


def _backward_rate(times, ys, tau_k, y_k):
    """One-sided derivative at tau_k, second order once two back nodes exist."""
    h2 = tau_k - times[-1]
    if len(times) >= 2:
        h1 = times[-1] - times[-2]
        c0 = (2.0 * h2 + h1) / (h2 * (h1 + h2))
        c1 = (h1 + h2) / (h1 * h2)
        c2 = h2 / (h1 * (h1 + h2))
        return c0 * y_k - c1 * ys[-1] + c2 * ys[-2]
    return (y_k - ys[-1]) / h2


class _Assembled:
    __slots__ = ("f1", "f2", "k1", "k2", "lam", "kk", "lm", "lp",
                 "lift", "y_rate", "n", "s", "p")


def _assemble(config, hist, tau_k, y_k, terms):
    """Forcings and history sums of both interface equations at (tau_k, y_k).

    hist carries the accepted arrays (times, y, Phi, B_m, B_p); the
    candidate node is not part of them. Trapezoid weights over the
    closed panel are safe because the integrands vanish at s=tau_k and
    the flux vanishes at s=0.
    """
    kI, kW = config.kappa_I, config.kappa_W
    sqI, sqW = math.sqrt(kI), math.sqrt(kW)
    times, ys, phis, bms, bps = hist
    y_rate = _backward_rate(times, ys, tau_k, y_k)
    lam = stefan_eigenvalues(config, y_k, terms)
    lm, lp = _geometry(config, y_k)
    kk = _k_vector(config, lam, lm, lp)
    norm = 0.5 * lm * sqI + 0.5 * kk * kk * lp * sqW
    a_m, b_m, a_p, b_p = lift_coefficients(config, y_k, y_rate)

    sin_lm, cos_lm = np.sin(lam * lm), np.cos(lam * lm)
    sin_lp, cos_lp = np.sin(lam * lp), np.cos(lam * lp)
    damp0 = np.exp(-tau_k * lam * lam)

    # initial-data part; the start front sits at y_trace[0]
    xm0 = lam * (ys[0] - config.y_minus) / sqI
    xp0 = lam * (config.y_plus - ys[0]) / sqW
    s_term = (damp0 / lam) * (
        sqI * (config.T_l - config.T_s)
        + (config.T_m - config.T_l) * (sqI * np.cos(xm0) + sqW * kk * np.cos(xp0))
        - (1.0 / lam) * (b_m * kI * sin_lm - b_p * kW * kk * sin_lp))

    decay = np.exp(-np.outer(lam * lam, tau_k - times))
    xm_j = np.sin(np.outer(lam / sqI, ys - config.y_minus))
    xp_j = np.sin(np.outer(lam / sqW, config.y_plus - ys))
    omega = xm_j - kk[:, None] * xp_j

    nodes = np.append(times, tau_k)
    dn = np.diff(nodes)
    w = np.zeros(nodes.size)
    w[:-1] += 0.5 * dn
    w[1:] += 0.5 * dn
    w = w[:-1]  # the s=tau_k node carries zero integrand in every sum

    p_int = (kI * (bms[None, :] * xm_j - b_m * sin_lm[:, None])
             - kk[:, None] * kW * (bps[None, :] * xp_j - b_p * sin_lp[:, None]))
    p_term = (decay * p_int * w[None, :]).sum(axis=1)

    coef = (s_term + p_term) / (2.0 * norm)
    sin_br = sin_lm + kk * sin_lp
    cos_br = sqI * cos_lm - sqW * kk * cos_lp
    f1 = -(coef * lam * cos_br).sum()
    f2 = config.T_m - (a_m + b_m * y_k) - (coef * sin_br).sum()

    phi_w = phis * w
    k1 = ((lam / (2.0 * norm) * cos_br)[:, None] * decay * omega * phi_w[None, :]).sum()
    k2 = ((1.0 / (2.0 * norm) * sin_br)[:, None] * decay * omega * phi_w[None, :]).sum()

    out = _Assembled()
    out.f1, out.f2, out.k1, out.k2 = f1, f2, k1, k2
    out.lam, out.kk, out.lm, out.lp = lam, kk, lm, lp
    out.lift = (a_m, b_m, a_p, b_p)
    out.y_rate = y_rate
    out.n, out.s, out.p = norm, s_term, p_term
    return out


def _history(state):
    return (np.asarray(state.times), np.asarray(state.y_trace),
            np.asarray(state.Phi_trace),
            np.asarray([c[1] for c in state.lift_trace]),
            np.asarray([c[3] for c in state.lift_trace]))


def step(config, state, h):
    """Advance the front by one node of size h.

    Places the new front so the interface temperature equation closes,
    then evaluates the new flux explicitly. The root is bracketed by
    geometric expansion ahead of the previous position and polished to
    1e-9 in the length unit.
    """
    if h <= 0:
        raise ValueError("step must be positive")
    hist = _history(state)
    tau_k = state.times[-1] + h
    y_last = state.y_trace[-1]
    first = len(state) == 1
    pad = 1e-6 * config.span

    def g(y):
        a = _assemble(config, hist, tau_k, y, state.terms)
        return a.f2 - a.k2

    lo = y_last + pad if first else y_last
    if len(state) >= 2:
        width = max(3.0 * (y_last - state.y_trace[-2]), 2e-5 * config.span)
    else:
        width = 2e-5 * config.span
    g_lo = g(lo)
    hi = lo
    root = None
    for _ in range(60):
        hi = min(hi + width, config.y_plus - pad)
        g_hi = g(hi)
        if g_lo == 0.0:
            root = lo
            break
        if np.sign(g_lo) != np.sign(g_hi):
            root = brentq(g, lo, hi, xtol=1e-9, rtol=8.9e-16)
            break
        if hi >= config.y_plus - pad:
            break
        width *= 2.0
    if root is None:
        raise RuntimeError("front bracketing exhausted at tau=%g" % tau_k)

    final = _assemble(config, hist, tau_k, root, state.terms)
    phi = final.k1 - final.f1
    state.times.append(tau_k)
    state.y_trace.append(float(root))
    state.Phi_trace.append(float(phi))
    state.y_rate_trace.append(float(final.y_rate))
    state.eigen_trace.append(final.lam)
    state.k_trace.append(final.kk)
    state.l_minus_trace.append(final.lm)
    state.l_plus_trace.append(final.lp)
    state.lift_trace.append(final.lift)
    state._check(config)
    return state


def _series_vectors(config, state, k, terms=None):
    """Stored-row series data (lam, K, N, S, R) at node k."""
    if terms is None:
        terms = state.terms
    if terms > state.terms:
        raise ValueError("state holds only %d terms" % state.terms)
    if k == 0:
        lam = state.eigen_trace[0][:terms]
        kk = state.k_trace[0][:terms]
        norm = 0.5 * kk * kk * state.l_plus_trace[0] * math.sqrt(config.kappa_W)
        zero = np.zeros(terms)
        return lam, kk, norm, zero, zero
    hist = tuple(a[:k] for a in _history(state))
    tau_k = state.times[k]
    kI, kW = config.kappa_I, config.kappa_W
    sqI, sqW = math.sqrt(kI), math.sqrt(kW)
    lam = state.eigen_trace[k][:terms]
    kk = state.k_trace[k][:terms]
    lm, lp = state.l_minus_trace[k], state.l_plus_trace[k]
    a_m, b_m, a_p, b_p = state.lift_trace[k]
    norm = 0.5 * lm * sqI + 0.5 * kk * kk * lp * sqW

    sin_lm, sin_lp = np.sin(lam * lm), np.sin(lam * lp)
    damp0 = np.exp(-tau_k * lam * lam)
    ys0 = state.y_trace[0]
    xm0 = lam * (ys0 - config.y_minus) / sqI
    xp0 = lam * (config.y_plus - ys0) / sqW
    s_term = (damp0 / lam) * (
        sqI * (config.T_l - config.T_s)
        + (config.T_m - config.T_l) * (sqI * np.cos(xm0) + sqW * kk * np.cos(xp0))
        - (1.0 / lam) * (b_m * kI * sin_lm - b_p * kW * kk * sin_lp))

    times, ys, phis, bms, bps = hist
    decay = np.exp(-np.outer(lam * lam, tau_k - times))
    xm_j = np.sin(np.outer(lam / sqI, ys - config.y_minus))
    xp_j = np.sin(np.outer(lam / sqW, config.y_plus - ys))
    omega = xm_j - kk[:, None] * xp_j
    nodes = np.append(times, tau_k)
    dn = np.diff(nodes)
    w = np.zeros(nodes.size)
    w[:-1] += 0.5 * dn
    w[1:] += 0.5 * dn
    w = w[:-1]
    p_int = (kI * (bms[None, :] * xm_j - b_m * sin_lm[:, None])
             - kk[:, None] * kW * (bps[None, :] * xp_j - b_p * sin_lp[:, None]))
    r_term = ((decay * (p_int + omega * phis[None, :])) * w[None, :]).sum(axis=1)
    return lam, kk, norm, s_term, r_term


def series_terms(config, state, k, n):
    """(S_n, R_n, N_n) at accepted node k for 1-based mode n."""
    if not 1 <= n <= state.terms:
        raise ValueError("mode index out of range")
    lam, kk, norm, s_term, r_term = _series_vectors(config, state, k)
    return float(s_term[n - 1]), float(r_term[n - 1]), float(norm[n - 1])


def temperature(config, state, tau, x, terms=None, tail_tol=1e-3):
    """Temperature field at an accepted node time.

    x may be a scalar or an array. Points within 1e-12 of the front get
    the averaged two-sided value; the walls are exact by construction.
    A truncation-tail estimate above tail_tol kelvin triggers a warning.
    """
    k = state.node_index(tau)
    y_k = state.y_trace[k]
    coeffs = state.lift_trace[k]
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x_arr < config.y_minus - 1e-12) or np.any(x_arr > config.y_plus + 1e-12):
        raise ValueError("x outside the strip")
    out = np.asarray(_lift_eval(config, coeffs, y_k, x_arr), dtype=float).copy()
    if k > 0:
        lam, kk, norm, s_term, r_term = _series_vectors(config, state, k, terms)
        coef = (s_term + r_term) / norm
        sqI, sqW = math.sqrt(config.kappa_I), math.sqrt(config.kappa_W)
        xm = np.outer(lam / sqI, x_arr - config.y_minus)
        xp = np.outer(lam / sqW, config.y_plus - x_arr)
        at_front = np.abs(x_arr - y_k) <= 1e-12 * max(1.0, abs(y_k))
        s_m = 1.0 + (abs(y_k - config.y_minus) == 0.0)
        s_p = 1.0 + (abs(y_k - config.y_plus) == 0.0)
        basis = np.where(x_arr[None, :] < y_k, np.sin(xm),
                         kk[:, None] * np.sin(xp))
        if np.any(at_front):
            lm, lp = state.l_minus_trace[k], state.l_plus_trace[k]
            mid = 0.5 * (s_p * np.sin(lam * lm) + s_m * kk * np.sin(lam * lp))
            basis[:, at_front] = mid[:, None]
        out += coef @ basis
        tail = np.max(np.abs(coef[-3:])) * max(1.0, np.max(np.abs(kk[-3:])))
        if tail > tail_tol:
            warnings.warn("series tail estimate %.2e K above %.1e K"
                          % (tail, tail_tol), stacklevel=2)
    if np.isscalar(x) or np.asarray(x).ndim == 0:
        return float(out[0])
    return out


def interface_residual(config, state, k, tail_tol=math.inf):
    """|T - T_m| at the front of accepted node k."""
    if k == 0:
        return abs(config.T_l - config.T_m)
    t_front = temperature(config, state, state.times[k], state.y_trace[k],
                          tail_tol=tail_tol)
    return abs(t_front - config.T_m)


def gradient_jump(config, state, k, rel_offset=1e-5, tail_tol=math.inf):
    """Conductive flux jump at the front vs the latent target.

    Returns (jump, target) where jump uses one-sided second-order
    differences of the full field at node k and target is the
    density-latent product times the discrete front speed.
    """
    if k == 0:
        raise ValueError("no jump at the start node")
    tau, y_k = state.times[k], state.y_trace[k]
    eps = rel_offset * config.span
    t_at = lambda z: temperature(config, state, tau, z, tail_tol=tail_tol)
    g_m = (3.0 * t_at(y_k) - 4.0 * t_at(y_k - eps) + t_at(y_k - 2 * eps)) / (2 * eps)
    g_p = (-3.0 * t_at(y_k) + 4.0 * t_at(y_k + eps) - t_at(y_k + 2 * eps)) / (2 * eps)
    jump = config.kappa_I * g_m - config.kappa_W * g_p
    target = config.latent_product * state.y_rate_trace[k]
    return jump, target


def theta3(z, omega):
    """Third Jacobi theta function by its defining series."""
    if abs(omega) >= 1.0:
        raise ValueError("theta series needs |omega| < 1")
    if omega == 0.0:
        return 1.0 if np.isscalar(z) else np.ones_like(np.asarray(z, float))
    n_max = max(1, int(math.ceil(math.sqrt(39.0 / -math.log(abs(omega))))))
    n = np.arange(1, n_max + 1)
    z_arr = np.atleast_1d(np.asarray(z, dtype=float))
    total = 1.0 + 2.0 * (omega ** (n * n) @ np.cos(2.0 * np.outer(n, z_arr)))
    if np.isscalar(z) or np.asarray(z).ndim == 0:
        return float(total[0])
    return total


def _short_time_pieces(config, state, tau):
    if tau <= 0.0:
        raise ValueError("theta series needs |omega| < 1, so tau > 0")
    if tau > config.small_time_horizon:
        raise ValueError("tau beyond the short-time window")
    y_tau = state.front(tau)
    lm = (y_tau - config.y_minus) / math.sqrt(config.kappa_I)
    omega = math.exp(-4.0 * math.pi ** 2 * tau / lm ** 2)
    k0 = -math.sqrt(config.kappa_W / config.kappa_I)
    lp0 = config.span / math.sqrt(config.kappa_W)
    n0 = 0.5 * k0 * k0 * lp0 * math.sqrt(config.kappa_W)
    s_m = 1.0 + (y_tau == config.y_minus)
    s_p = 1.0 + (y_tau == config.y_plus)
    return y_tau, omega, k0, n0, s_m, s_p


def small_time_theta(config, state, tau, x):
    """Early-time interface flux profile through theta functions.

    Valid while the front barely moved; the series collapses to two
    theta evaluations with nome omega(tau). Rejects tau outside
    (0, small_time_horizon].
    """
    y_tau, omega, k0, n0, s_m, s_p = _short_time_pieces(config, state, tau)
    sqI, sqW = math.sqrt(config.kappa_I), math.sqrt(config.kappa_W)
    z_m = math.pi * (np.asarray(x, float) - config.y_minus) / (y_tau - config.y_minus)
    z_p = math.pi * (config.y_plus - np.asarray(x, float)) / (config.y_plus - y_tau)
    val = (sqI * (config.T_l - config.T_s) / (4.0 * n0)) * (
        s_p * sqI * (theta3(z_m, omega) - 1.0)
        - s_m * sqW * k0 * (theta3(z_p, omega) - 1.0))
    if np.isscalar(x) or np.asarray(x).ndim == 0:
        return float(val)
    return val


def short_time_flux_series(config, state, tau, x, terms=64):
    """Direct truncated sum behind the theta form, for cross-checking."""
    y_tau, omega, k0, n0, s_m, s_p = _short_time_pieces(config, state, tau)
    sqI, sqW = math.sqrt(config.kappa_I), math.sqrt(config.kappa_W)
    z_m = math.pi * (np.asarray(x, float) - config.y_minus) / (y_tau - config.y_minus)
    z_p = math.pi * (config.y_plus - np.asarray(x, float)) / (config.y_plus - y_tau)
    n = np.arange(1, terms + 1)
    wn = omega ** (n * n)
    val = (sqI * (config.T_l - config.T_s) / (2.0 * n0)) * (
        s_p * sqI * (wn @ np.cos(2.0 * np.outer(n, np.atleast_1d(z_m))))
        - s_m * sqW * k0 * (wn @ np.cos(2.0 * np.outer(n, np.atleast_1d(z_p)))))
    if np.isscalar(x) or np.asarray(x).ndim == 0:
        return float(val[0])
    return val


def solve_front(config, t_end, terms=50, h0=0.01, ratio=1.2, h_max=15.0,
                collect_diagnostics=True):
    """March the front to t_end on a geometrically growing grid.

    Returns the state with per-step diagnostics rows (interface
    residual, flux-jump pair, wall seconds) when requested.
    """
    grid = volterra.geometric_grid(h0, ratio, t_end, h_max)
    state = StefanState(config, terms)
    for k in range(1, len(grid)):
        started = time.perf_counter()
        step(config, state, grid.nodes[k] - grid.nodes[k - 1])
        elapsed = time.perf_counter() - started
        if collect_diagnostics:
            jump, target = gradient_jump(config, state, k)
            state.diagnostics["residual"].append(interface_residual(config, state, k))
            state.diagnostics["jump"].append(jump)
            state.diagnostics["jump_target"].append(target)
            state.diagnostics["seconds"].append(elapsed)
    return state
