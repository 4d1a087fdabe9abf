"""Resolvent machinery for layered media with half-line end layers.

The medium has N interior layers between breakpoints y_0 < ... < y_N
plus two unbounded end media, so sigma holds N+2 entries. For a point
source at x0 the resolvent u solves lam u - sigma^2 u'' = delta(x - x0)
with value and sigma^2-weighted flux continuity at every interface.

Internally everything is parameterized by w = sqrt(lam). The physical
sheet is Re w > 0; evaluation at Re w < 0 continues the formulas onto
the second sheet, which is where the determinant zeros live for
positive coefficients. The continuous spectrum sits on lam <= 0, i.e.
w = i omega, and is reachable through u_from_w(medium, 1j * omega, ...).
"""

import numpy as np


class MixedMedium:
    """Breakpoints y (N+1 of them) and N+2 positive coefficients."""

    def __init__(self, y, sigma):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        sigma = np.asarray(sigma, dtype=float)
        if y.ndim != 1 or y.size < 1:
            raise ValueError("need at least one breakpoint")
        if np.any(np.diff(y) <= 0):
            raise ValueError("breakpoints must increase strictly")
        if sigma.shape != (y.size + 1,):
            raise ValueError("need len(y) + 1 coefficients")
        if np.any(sigma <= 0):
            raise ValueError("sigma must be positive")
        self.y = y
        self.sigma = sigma

    @property
    def ninterfaces(self):
        return self.y.size

    @property
    def ratios(self):
        """s_j = sigma_j / sigma_{j+1} for j = 0..N."""
        return self.sigma[:-1] / self.sigma[1:]


def _as_w(lam):
    lam = complex(lam)
    if lam.imag == 0.0 and lam.real <= 0.0:
        raise ValueError("lam on the cut (real, <= 0); use u_from_w for the cut")
    return np.sqrt(lam)


def source_jump(medium, w, x0, k):
    """Mismatch vector the local source terms leave at interface k.

    First entry is the value mismatch, second the flux mismatch
    normalized by sigma_{k+1} w. Equal coefficients on both sides give
    the zero vector.
    """
    w = complex(w)
    if w == 0.0:
        raise ValueError("w must be nonzero")
    a = medium.sigma[k]
    b = medium.sigma[k + 1]
    if a == b:
        return np.zeros(2, dtype=complex)
    z = x0 - medium.y[k]
    ea = np.exp(-abs(z) * w / a)
    eb = np.exp(-abs(z) * w / b)
    row1 = ea / (2.0 * w * a) - eb / (2.0 * w * b)
    row2 = np.sign(z) * (ea - eb) / (2.0 * w * b)
    return np.array([row1, row2])


def _hyper_c(phi):
    return np.array([[np.cosh(phi), np.sinh(phi)],
                     [np.sinh(phi), np.cosh(phi)]])


def _hyper_scaled(phi):
    """exp(-|Re phi|) * hyper(phi) and the removed log factor."""
    r = abs(phi.real)
    ep = np.exp(phi - r)
    em = np.exp(-phi - r)
    c = 0.5 * (ep + em)
    s = 0.5 * (ep - em)
    return np.array([[c, s], [s, c]]), r


def _factors_scaled(medium, w):
    """Interface-to-interface propagators A_j with their log scales."""
    lens = np.diff(medium.y)
    ratios = medium.ratios
    out = []
    for j in range(medium.ninterfaces):
        stretch = np.array([[1.0, 0.0], [0.0, ratios[j]]], dtype=complex)
        if j == 0:
            out.append((stretch, 0.0))
        else:
            h, r = _hyper_scaled(w * lens[j - 1] / medium.sigma[j])
            out.append((stretch @ h, r))
    return out


def _suffix_chain(medium, w):
    """T_k = scaled product A_N ... A_k with log scale, for k = 0..N+1."""
    factors = _factors_scaled(medium, w)
    mats = [np.eye(2, dtype=complex)]
    scales = [0.0]
    for a, r in reversed(factors):
        mats.append(mats[-1] @ a)
        scales.append(scales[-1] + r)
    mats.reverse()
    scales.reverse()
    return mats, scales


def det_w(medium, w):
    """Sum of all four entries of the full transfer chain at sqrt-parameter w.

    Its zeros (off the physical sheet Re w > 0 for positive
    coefficients) are the resolvent poles. May overflow for large |w|,
    in which case use _det_scaled.
    """
    dhat, logscale = _det_scaled(medium, complex(w))
    return dhat * np.exp(logscale)


def det_lambda_star(medium, lam):
    """det_w on the principal sheet at spectral parameter lam."""
    return det_w(medium, _as_w(lam))


def _det_scaled(medium, w):
    mats, scales = _suffix_chain(medium, w)
    return mats[0].sum(), scales[0]


def _solve_edges(medium, w, x0):
    """Left amplitude C_minus and the per-interface jump list."""
    mats, scales = _suffix_chain(medium, w)
    dhat = mats[0].sum()
    top = scales[0]
    jumps = [source_jump(medium, w, x0, k) for k in range(medium.ninterfaces)]
    acc = 0.0
    for k, g in enumerate(jumps):
        v = mats[k + 1] @ g
        acc = acc + np.exp(scales[k + 1] - top) * (v[0] + v[1])
    return -acc / dhat, jumps


def _forward_states(medium, w, c_minus, jumps):
    """State [h, sigma h'/w] at the left edge of media 1..N+1."""
    lens = np.diff(medium.y)
    ratios = medium.ratios
    states = []
    v = np.array([c_minus, c_minus])
    for j in range(medium.ninterfaces):
        if j > 0:
            v = _hyper_c(w * lens[j - 1] / medium.sigma[j]) @ v
        v = np.array([v[0], ratios[j] * v[1]]) + jumps[j]
        states.append(v.copy())
    return states


def u_from_w(medium, w, x0, x):
    """Resolvent at sqrt-parameter w, vectorized over x.

    Re w > 0 is the physical sheet; w = i omega reaches the continuous
    spectrum; Re w < 0 continues onto the second sheet.
    """
    w = complex(w)
    c_minus, jumps = _solve_edges(medium, w, x0)
    states = _forward_states(medium, w, c_minus, jumps)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    idx = np.searchsorted(medium.y, x, side="right")
    out = np.empty(x.shape, dtype=complex)
    last = medium.ninterfaces
    for j in np.unique(idx):
        sel = idx == j
        sig = medium.sigma[j]
        part = np.exp(-np.abs(x[sel] - x0) * w / sig) / (2.0 * w * sig)
        if j == 0:
            hom = c_minus * np.exp(w * (x[sel] - medium.y[0]) / sig)
        elif j == last:
            # growing component vanishes by construction; drop its
            # numerical residual instead of amplifying it
            st = states[-1]
            d_plus = 0.5 * (st[0] - st[1])
            hom = d_plus * np.exp(-w * (x[sel] - medium.y[-1]) / sig)
        else:
            st = states[j - 1]
            phi = w * (x[sel] - medium.y[j - 1]) / sig
            hom = np.cosh(phi) * st[0] + np.sinh(phi) * st[1]
        out[sel] = part + hom
    if not np.all(np.isfinite(out.view(float))):
        raise OverflowError("resolvent evaluation overflowed; |w| too large")
    return out if out.size > 1 else out[()]


def u_lambda_mixed(medium, lam, x0, x):
    """Resolvent on the physical sheet at spectral parameter lam."""
    return u_from_w(medium, _as_w(lam), x0, x)


def layer_coeffs(medium, lam, x0):
    """Per-medium amplitudes of the homogeneous part.

    Returns (c_minus, inner, d_plus) where inner[j] holds the
    cosh/sinh coefficients of interior medium j+1 in absolute x.
    """
    w = _as_w(lam)
    c_minus, jumps = _solve_edges(medium, w, x0)
    states = _forward_states(medium, w, c_minus, jumps)
    inner = []
    for j in range(1, medium.ninterfaces):
        st = states[j - 1]
        inner.append(_hyper_c(-w * medium.y[j - 1] / medium.sigma[j]) @ st)
    d_plus = states[-1][0]
    return c_minus, np.array(inner), d_plus


def find_det_zeros(medium, seeds, tol=1e-12, maxit=60):
    """Newton-polish complex w seeds toward zeros of the chain determinant."""
    out = []
    for w0 in np.atleast_1d(seeds):
        w = complex(w0)
        for _ in range(maxit):
            f, sc = _det_scaled(medium, w)
            h = 1e-6 * (1.0 + abs(w))
            fp, scp = _det_scaled(medium, w + h)
            fm, scm = _det_scaled(medium, w - h)
            der = (fp * np.exp(scp - sc) - fm * np.exp(scm - sc)) / (2.0 * h)
            if der == 0.0:
                break
            step = f / der
            w -= step
            if abs(step) <= tol * (1.0 + abs(w)):
                break
        out.append(w)
    return np.array(out)


def three_layer_poles(medium, nmax):
    """Closed-form determinant zeros for one interior layer.

    Returns (w values, lam values) for branch indices 0..nmax plus the
    conjugate branches, ordered by |lam|.
    """
    if medium.ninterfaces != 2:
        raise ValueError("closed form needs exactly one interior layer")
    s0, s1 = medium.ratios
    l1 = medium.y[1] - medium.y[0]
    sig1 = medium.sigma[1]
    t_eq = -(1.0 + s0 * s1) / (s0 + s1)
    chi = np.arctanh(t_eq + 0j)
    ns = np.concatenate([np.arange(0, nmax + 1), -np.arange(1, nmax + 1)])
    ws = (sig1 / l1) * (chi + 1j * np.pi * ns)
    lams = ws ** 2
    order = np.argsort(np.abs(lams))
    return ws[order], lams[order]


def residue_at(medium, w_k, x0, x):
    """Residue in lam of the resolvent at a determinant zero w_k."""
    w_k = complex(w_k)
    mats, scales = _suffix_chain(medium, w_k)
    top = scales[0]
    jumps = [source_jump(medium, w_k, x0, k) for k in range(medium.ninterfaces)]
    acc = 0.0
    for k, g in enumerate(jumps):
        v = mats[k + 1] @ g
        acc = acc + np.exp(scales[k + 1] - top) * (v[0] + v[1])
    c_num = -acc  # numerator of c_minus, determinant and e^top left out
    states = _forward_states(medium, w_k, 1.0 + 0j,
                             [np.zeros(2, complex)] * medium.ninterfaces)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    idx = np.searchsorted(medium.y, x, side="right")
    last = medium.ninterfaces
    hom = np.empty(x.shape, dtype=complex)
    for j in np.unique(idx):
        sel = idx == j
        sig = medium.sigma[j]
        if j == 0:
            hom[sel] = np.exp(w_k * (x[sel] - medium.y[0]) / sig)
        elif j == last:
            st = states[-1]
            d_plus = 0.5 * (st[0] - st[1])
            hom[sel] = d_plus * np.exp(-w_k * (x[sel] - medium.y[-1]) / sig)
        else:
            st = states[j - 1]
            phi = w_k * (x[sel] - medium.y[j - 1]) / sig
            hom[sel] = np.cosh(phi) * st[0] + np.sinh(phi) * st[1]
    h = 1e-6 * (1.0 + abs(w_k))
    fp, scp = _det_scaled(medium, w_k + h)
    fm, scm = _det_scaled(medium, w_k - h)
    der = (fp * np.exp(scp - top) - fm * np.exp(scm - top)) / (2.0 * h)
    res = 2.0 * w_k * hom * c_num / der
    return res if res.size > 1 else res[()]


def cut_measure(medium, omega, x0, x):
    """Spectral density on the continuous spectrum.

    Integrating this over omega in (0, inf) reconstructs delta(x - x0)
    weakly; the combination is -(2/pi) omega Im u at w = i omega.
    """
    u = u_from_w(medium, 1j * float(omega), x0, x)
    return -(2.0 / np.pi) * float(omega) * np.imag(u)
