"""Discrete eigenfunction transform for a finite layered interval.

The medium is a partition y_0 < ... < y_N carrying one positive
coefficient sigma_i per layer. Basis functions vanish at both ends, are
continuous across interfaces, and match the sigma^2-weighted flux. On
layer i they read C_i cos(lam x / sigma_i) + D_i sin(lam x / sigma_i).
"""

import warnings

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .smallmat import rotation, stretch


class LayerGrid:
    """Interval partition plus per-layer coefficients.

    y: N+1 strictly increasing breakpoints.
    sigma: N positive coefficients, one per layer.
    """

    def __init__(self, y, sigma):
        y = np.asarray(y, dtype=float)
        sigma = np.asarray(sigma, dtype=float)
        if y.ndim != 1 or y.size < 2:
            raise ValueError("y must hold at least two breakpoints")
        if np.any(np.diff(y) <= 0):
            raise ValueError("breakpoints must increase strictly")
        if sigma.shape != (y.size - 1,):
            raise ValueError("need exactly one sigma per layer")
        if np.any(sigma <= 0):
            raise ValueError("sigma must be positive")
        self.y = y
        self.sigma = sigma

    @property
    def nlayers(self):
        return self.sigma.size

    @property
    def lengths(self):
        return np.diff(self.y)

    @property
    def ratios(self):
        """s_i = sigma_i / sigma_{i+1} at each interior interface."""
        return self.sigma[:-1] / self.sigma[1:]


def theta_coeffs(grid, lam):
    """Per-layer (C, D) rows for the basis branch at frequency lam.

    The first layer is pinned to sin(lam (x - y_0) / sigma_1); the rest
    follow from value continuity and flux matching at each interface.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    y = grid.y
    lb = lam / grid.sigma
    out = np.empty((grid.nlayers, 2))
    cd = np.array([-np.sin(lb[0] * y[0]), np.cos(lb[0] * y[0])])
    out[0] = cd
    ratios = grid.ratios
    for k in range(grid.nlayers - 1):
        x = y[k + 1]
        cd = rotation(lb[k + 1] * x) @ stretch(ratios[k]) @ rotation(-lb[k] * x) @ cd
        out[k + 1] = cd
    return out


def eigen_residual(grid, lam):
    """Value left over at y_N after matched continuation from y_0.

    Vanishes exactly at the transform frequencies. Accepts scalar or
    array lam; lam -> 0 gives 0 as well (the excluded trivial branch),
    so root scans must start strictly above zero.
    """
    lam = np.asarray(lam, dtype=float)
    phases = np.multiply.outer(grid.lengths / grid.sigma, lam.ravel())
    u = np.zeros(phases.shape[1])
    v = np.ones(phases.shape[1])
    ratios = grid.ratios
    for k in range(grid.nlayers):
        c, s = np.cos(phases[k]), np.sin(phases[k])
        u, v = c * u + s * v, -s * u + c * v
        if k < grid.nlayers - 1:
            v = ratios[k] * v
    out = u.reshape(lam.shape)
    return out[()] if out.ndim == 0 else out


def find_eigenvalues(grid, count, xtol=1e-13):
    """First `count` positive roots of eigen_residual, ascending.

    Scans with a step tied to the total phase rate sum(l_i/sigma_i),
    then polishes each sign change with brentq. A root where the slope
    of the residual nearly vanishes is reported via warnings.warn since
    a genuinely double root cannot be separated by a sign-change scan.
    """
    count = int(count)
    if count < 1:
        return np.empty(0)
    rate = float(np.sum(grid.lengths / grid.sigma))
    step = np.pi / rate / 8.0
    lo = 1e-9
    span = 2.0 * (count + 5) * np.pi / rate
    roots = []
    for attempt in range(40):
        hi = lo + span
        xs = np.arange(lo, hi + step, step)
        rs = eigen_residual(grid, xs)
        sgn = np.sign(rs)
        for j in np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]:
            r = brentq(lambda t: eigen_residual(grid, t), xs[j], xs[j + 1],
                       xtol=xtol, rtol=8.9e-16)
            if roots and abs(r - roots[-1]) < step * 1e-6:
                continue  # duplicate at a window seam
            roots.append(r)
            h = step / 64.0
            slope = (eigen_residual(grid, r + h) - eigen_residual(grid, r - h)) / (2 * h)
            if abs(slope) < 1e-8:
                warnings.warn("nearly double root at lam=%.12g" % r)
            if len(roots) == count:
                return np.array(roots)
        for j in np.nonzero(rs == 0.0)[0]:
            r = xs[j]
            if r > 1e-8 and not any(abs(r - q) < step * 1e-6 for q in roots):
                roots.append(r)
                roots.sort()
                if len(roots) == count:
                    return np.array(roots)
        lo = hi
        span *= 1.5
    raise RuntimeError(
        "found %d of %d roots scanning up to lam=%.6g" % (len(roots), count, lo))


def lambda_approx(sigma1, sigma2, l1, l2, n, order=1, denominator="plain"):
    """Closed-form approximations to two-layer transform frequencies.

    Zero order is pi n / (l1/sigma1 + l2/sigma2). First order adds a
    single correction step derived from the sum-angle form of the root
    condition. `denominator` picks how the correction is normalized:
    "plain" leaves the cosine term unweighted, "newton" multiplies it
    by the phase-difference slope (the exact Newton step). Both stay
    within a couple of percent; "plain" is the default.
    """
    n = np.asarray(n)
    if np.any(n < 1):
        raise ValueError("n starts at 1")
    total = l1 / sigma1 + l2 / sigma2
    diff = l2 / sigma2 - l1 / sigma1
    lam0 = np.pi * n / total
    if order == 0:
        return lam0
    if order != 1:
        raise ValueError("order must be 0 or 1")
    alpha = (sigma2 - sigma1) / (sigma2 + sigma1)
    sign = np.where(n % 2 == 0, 1.0, -1.0)
    if denominator == "plain":
        den = sign * total - alpha * np.cos(diff * lam0)
    elif denominator == "newton":
        den = sign * total - alpha * diff * np.cos(diff * lam0)
    else:
        raise ValueError("denominator must be 'plain' or 'newton'")
    return lam0 + alpha * np.sin(diff * lam0) / den


def basis_norm(grid, lam):
    """Integral of the squared basis branch over the whole interval.

    Exact per-layer antiderivatives, no quadrature.
    """
    cd = theta_coeffs(grid, lam)
    total = 0.0
    for i in range(grid.nlayers):
        p, q = grid.y[i], grid.y[i + 1]
        k = lam / grid.sigma[i]
        c, d = cd[i]
        half = 0.5 * (q - p)
        osc = (np.sin(2 * k * q) - np.sin(2 * k * p)) / (4 * k)
        cross = (np.cos(2 * k * p) - np.cos(2 * k * q)) / (4 * k)
        total += c * c * (half + osc) + d * d * (half - osc) + 2 * c * d * cross
    return total


def theta_eval(grid, lam, x):
    """Basis branch values at x; zero outside the interval."""
    x = np.asarray(x, dtype=float)
    cd = theta_coeffs(grid, lam)
    idx = np.clip(np.searchsorted(grid.y, x, side="right") - 1, 0, grid.nlayers - 1)
    k = lam / grid.sigma[idx]
    vals = cd[idx, 0] * np.cos(k * x) + cd[idx, 1] * np.sin(k * x)
    out = np.where((x >= grid.y[0]) & (x <= grid.y[-1]), vals, 0.0)
    return out[()] if out.ndim == 0 else out


def oscillating_series(grid, f, count):
    """Project f onto the first `count` basis branches.

    Returns (lams, coeffs, reconstruct). Coefficients are <f, Theta_n>
    divided by the squared norm, so reconstruct(x) partial-sums back
    toward f. Projections integrate layer by layer with quad.
    """
    lams = find_eigenvalues(grid, count)
    coeffs = np.empty(count)
    for j, lam in enumerate(lams):
        acc = 0.0
        for i in range(grid.nlayers):
            acc += quad(lambda t: f(t) * theta_eval(grid, lam, t),
                        grid.y[i], grid.y[i + 1], limit=200)[0]
        coeffs[j] = acc / basis_norm(grid, lam)

    def reconstruct(x):
        x = np.asarray(x, dtype=float)
        acc = np.zeros(x.shape)
        for j, lam in enumerate(lams):
            acc += coeffs[j] * theta_eval(grid, lam, x)
        return acc

    return lams, coeffs, reconstruct
