"""Oscillatory transform pair and heat kernels for a single diffusivity jump.

The medium is an infinite bar with coefficient sigma_minus left of the
interface and sigma_plus right of it. Positions feeding the kernel
routines are measured from the interface. Kernel matrices are indexed
(source side, observation side) with side 1 = left, side 2 = right.
"""

import numpy as np
from scipy.integrate import quad


class TwoLayerMedium:
    """One interface at y, sigma_minus to its left, sigma_plus to its right."""

    def __init__(self, y, sigma_minus, sigma_plus):
        if sigma_minus <= 0 or sigma_plus <= 0:
            raise ValueError("sigma must be positive")
        self.y = float(y)
        self.sigma_minus = float(sigma_minus)
        self.sigma_plus = float(sigma_plus)

    @property
    def contrast(self):
        """(sigma_minus - sigma_plus) / (sigma_minus + sigma_plus)."""
        return (self.sigma_minus - self.sigma_plus) / (self.sigma_minus + self.sigma_plus)


def forward_matrix(medium, zeta, omega):
    """diag of the two half-line phase factors at source offset zeta."""
    return np.array([
        [np.exp(1j * omega * zeta / medium.sigma_minus), 0.0],
        [0.0, np.exp(1j * omega * zeta / medium.sigma_plus)],
    ])


def backward_matrix(medium, z, omega):
    """Reconstruction weights at observation offset z.

    Row is the half-line transform being folded back, column the side
    the observation point sits on.
    """
    sm, sp_, big = medium.sigma_minus, medium.sigma_plus, medium.contrast
    em = np.exp(-1j * omega * z / sm)
    ep = np.exp(-1j * omega * z / sp_)
    return np.array([
        [(em + big * np.conj(em)) / sm, (1.0 + big) / sm * ep],
        [(1.0 - big) / sp_ * em, (ep - big * np.conj(ep)) / sp_],
    ])


def _gauss(alpha, delta):
    """Frequency integral of exp(-omega^2 delta + i alpha omega) / (2 pi)."""
    alpha = np.asarray(alpha, dtype=float)
    if delta == 0.0:
        return np.where(alpha == 0.0, np.inf, 0.0)
    return np.exp(-alpha * alpha / (4.0 * delta)) / (2.0 * np.sqrt(np.pi * delta))


def _dgauss(alpha, delta):
    """Same integral with an extra i omega factor."""
    alpha = np.asarray(alpha, dtype=float)
    if delta == 0.0:
        return np.zeros_like(alpha)
    return -alpha * np.exp(-alpha * alpha / (4.0 * delta)) / (4.0 * np.sqrt(np.pi * delta ** 3))


def _kernel(medium, z, tau, zeta, s, part):
    if tau <= s:
        raise ValueError("need tau > s")
    delta = tau - s
    sm, sp_, big = medium.sigma_minus, medium.sigma_plus, medium.contrast
    z = np.asarray(z, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    k11 = (part((zeta - z) / sm, delta) + big * part((zeta + z) / sm, delta)) / sm
    k12 = (1.0 + big) / sm * part(zeta / sm - z / sp_, delta)
    k21 = (1.0 - big) / sp_ * part(zeta / sp_ - z / sm, delta)
    k22 = (part((zeta - z) / sp_, delta) - big * part((zeta + z) / sp_, delta)) / sp_
    return np.array([[k11, k12], [k21, k22]])


def heat_kernel_P(z, tau, zeta, s, medium):
    """Propagator matrix between offsets zeta (at time s) and z (at tau).

    Entry (r, c) carries a source released on side r to an observation
    on side c. The column pair is continuous at z = 0 and the kernel
    conserves mass in z for every fixed source row.
    """
    return _kernel(medium, z, tau, zeta, s, _gauss)


def heat_kernel_eta(z, tau, zeta, s, medium):
    """Source-offset derivative of heat_kernel_P, row-weighted by sigma."""
    return _kernel(medium, z, tau, zeta, s, _dgauss)


def oit_forward(f, medium, omega, side_split=None):
    """Half-line phase transforms of f against the forward factors.

    Returns (fbar_minus, fbar_plus) at each omega: integrals of
    f(x) e^{i omega (x - y)/sigma} over the matching half-line. f must
    decay at infinity. `side_split` overrides the split point, which
    defaults to the interface.
    """
    y = medium.y if side_split is None else float(side_split)
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    out = np.empty((2, omega.size), dtype=complex)
    for j, w in enumerate(omega):
        km = w / medium.sigma_minus
        kp = w / medium.sigma_plus
        re_m = quad(lambda x: f(x) * np.cos(km * (x - y)), -np.inf, y, limit=400)[0]
        im_m = quad(lambda x: f(x) * np.sin(km * (x - y)), -np.inf, y, limit=400)[0]
        re_p = quad(lambda x: f(x) * np.cos(kp * (x - y)), y, np.inf, limit=400)[0]
        im_p = quad(lambda x: f(x) * np.sin(kp * (x - y)), y, np.inf, limit=400)[0]
        out[0, j] = re_m + 1j * im_m
        out[1, j] = re_p + 1j * im_p
    return out[0], out[1]


def oit_inverse(fbar, medium, x, omega_max, n_nodes=None):
    """Fold half-line transforms back to point values.

    fbar(omega) must return the pair (fbar_minus, fbar_plus). The
    omega integral runs over [-omega_max, omega_max] with a composite
    Gauss-Legendre rule; n_nodes defaults to a count tied to the
    largest phase omega_max |x - y| / sigma.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    span = np.max(np.abs(x - medium.y))
    sig_min = min(medium.sigma_minus, medium.sigma_plus)
    if n_nodes is None:
        n_nodes = int(80 + 8 * omega_max * max(span / sig_min, 1.0))
    nodes, weights = np.polynomial.legendre.leggauss(min(n_nodes, 6000))
    w = 0.5 * omega_max * (nodes + 1.0)  # positive half; use symmetry below
    ww = 0.5 * omega_max * weights
    vals = np.zeros(x.size)
    fb = np.array([fbar(om) for om in w])  # (m, 2)
    for i, xi in enumerate(x):
        z = xi - medium.y
        col = 0 if xi < medium.y else 1
        acc = 0.0
        for m, om in enumerate(w):
            b = backward_matrix(medium, z, om)[:, col]
            term = fb[m, 0] * b[0] + fb[m, 1] * b[1]
            # f real: the negative-omega half contributes the conjugate
            acc += ww[m] * 2.0 * term.real
        vals[i] = acc / (2.0 * np.pi)
    return vals if vals.size > 1 else vals[0]
