"""Strip solver for layered media whose breakpoints move.

The field on a strip with cold walls is expanded, at every output
time, in the eigenbasis of the instantaneous layer configuration. The
expansion coefficients carry memory integrals over the interface value
and flux traces, but the kernels vanish on the diagonal because a
frozen basis is continuous, in value and in weighted flux, at its own
breakpoints. Each new trace row therefore follows explicitly from
already known history: no implicit solve, no singular quadrature.

Data that entered at an earlier time is projected with the branch of
the layer it sat in back then, while the trig coefficients stay those
of the current basis. Getting that membership time wrong leaves an
O(shift) error that no step refinement removes.

A static configuration makes every memory kernel vanish identically
and the scheme reduces to plain spectral decay in a fixed basis, which
is detected and shortcut.
"""

import warnings

import numpy as np

from .spectrum import (LayerGrid, basis_norm, eigen_residual,
                       find_eigenvalues, theta_coeffs)

_DECAY_CUT = 27.631  # -log(1e-12)
_RESCAN_EVERY = 16


class MovingLayerGrid:
    """Breakpoint paths and layer coefficients for a moving strip.

    paths has one entry per breakpoint, walls included: a float pins
    the breakpoint, a (y, yp) pair of callables moves it. sigma has one
    coefficient per layer. Ordering must stay strict over the horizon.
    """

    def __init__(self, paths, sigma, horizon):
        if horizon <= 0:
            raise ValueError("horizon must be positive")
        self.horizon = float(horizon)
        self.sigma = np.asarray(sigma, dtype=float)
        if self.sigma.ndim != 1 or self.sigma.size < 1:
            raise ValueError("sigma must be a nonempty vector")
        if np.any(self.sigma <= 0):
            raise ValueError("sigma entries must be positive")
        if len(paths) != self.sigma.size + 1:
            raise ValueError("need one more path than layers")
        self._y = []
        self._yp = []
        self._static = []
        for p in paths:
            if np.isscalar(p):
                val = float(p)
                self._y.append(lambda t, v=val: v)
                self._yp.append(lambda t: 0.0)
                self._static.append(True)
            else:
                yf, ypf = p
                self._y.append(yf)
                self._yp.append(ypf)
                self._static.append(False)
        self.nbreaks = len(paths)
        self.nlayers = self.sigma.size
        self._check_paths()

    def _check_paths(self):
        ts = np.linspace(0.0, self.horizon, 33)
        span = None
        for t in ts:
            pos = self.positions(t)
            if span is None:
                span = pos[-1] - pos[0]
            if np.any(np.diff(pos) <= 1e-12 * max(span, 1.0)):
                raise ValueError("breakpoints must stay strictly ordered")
        h = 1e-5 * max(self.horizon, 1.0)
        for t in np.linspace(2 * h, self.horizon - 2 * h, 5):
            num = (self.positions(t + h) - self.positions(t - h)) / (2 * h)
            vel = self.velocities(t)
            if np.any(np.abs(num - vel) > 1e-4 * np.maximum(1.0, np.abs(vel))):
                raise ValueError("stated velocities disagree with the paths")

    def positions(self, t):
        return np.array([y(t) for y in self._y], dtype=float)

    def velocities(self, t):
        return np.array([yp(t) for yp in self._yp], dtype=float)

    @property
    def is_static(self):
        return all(self._static)

    def grid(self, t):
        return LayerGrid(self.positions(t), self.sigma)


def _polish_roots(grid, seeds):
    # vectorized secant polish of a previous step's roots; returns None
    # whenever the result looks unsafe so the caller rescans
    x0 = np.asarray(seeds, dtype=float)
    x1 = x0 * (1 + 1e-7) + 1e-12
    f0 = eigen_residual(grid, x0)
    f1 = eigen_residual(grid, x1)
    for _ in range(60):
        d = f1 - f0
        step = np.where(np.abs(d) > 1e-300, f1 * (x1 - x0) / np.where(
            np.abs(d) > 1e-300, d, 1.0), 0.0)
        x2 = x1 - step
        if not np.all(np.isfinite(x2)):
            return None
        if np.max(np.abs(x2 - x1)) < 1e-13 * max(1.0, np.max(np.abs(x2))):
            x1 = x2
            break
        x0, f0 = x1, f1
        x1 = x2
        f1 = eigen_residual(grid, x1)
    else:
        return None
    gaps = np.diff(seeds)
    guard = 0.45 * np.min(gaps) if gaps.size else np.inf
    if np.max(np.abs(x1 - seeds)) > guard:
        return None
    if np.any(np.diff(x1) <= 0) or x1[0] <= 0:
        return None
    return x1


class _Basis:
    # frozen eigen data for one breakpoint configuration
    def __init__(self, positions, sigma, lam_cut, nmax, seeds=None):
        self.positions = positions
        self.sigma = sigma
        grid = LayerGrid(positions, sigma)
        dens = np.sum(grid.lengths / sigma) / np.pi
        count = min(int(np.ceil(lam_cut * dens)) + 3, nmax)
        count = max(count, 6)
        lams = None
        if seeds is not None and seeds.size == count:
            lams = _polish_roots(grid, seeds)
        if lams is None:
            lams = find_eigenvalues(grid, count)
        self.scan = lams
        if lams[-1] < lam_cut and count == nmax:
            warnings.warn("mode cap %d reached before the decay cutoff; "
                          "short-time content may be under-resolved" % nmax)
        keep = max(int(np.searchsorted(lams, lam_cut)), 6)
        self.lams = lams[:keep]
        self.norms = np.array([basis_norm(grid, l) for l in self.lams])
        self.coeffs = np.stack([theta_coeffs(grid, l) for l in self.lams])

    def branch_value(self, layer, x):
        # trig branch of every mode at the points x, extended freely
        lb = np.multiply.outer(self.lams / self.sigma[layer], x)
        C = self.coeffs[:, layer, 0, None]
        D = self.coeffs[:, layer, 1, None]
        return C * np.cos(lb) + D * np.sin(lb)

    def branch_flux(self, layer, x):
        # sigma^2 d/dx of the branch
        lb = np.multiply.outer(self.lams / self.sigma[layer], x)
        C = self.coeffs[:, layer, 0, None]
        D = self.coeffs[:, layer, 1, None]
        amp = (self.sigma[layer] * self.lams)[:, None]
        return amp * (D * np.cos(lb) - C * np.sin(lb))

    def value_jumps(self, pos_block):
        # pos_block (k, nbreaks) -> (k, modes, nbreaks), left minus
        # right branch at each breakpoint path point
        k, nb = pos_block.shape
        out = np.zeros((k, self.lams.size, nb))
        for i in range(nb):
            if i > 0:
                out[:, :, i] += self.branch_value(i - 1, pos_block[:, i]).T
            if i < nb - 1:
                out[:, :, i] -= self.branch_value(i, pos_block[:, i]).T
        return out

    def flux_jumps(self, pos_block):
        k, nb = pos_block.shape
        out = np.zeros((k, self.lams.size, nb))
        for i in range(nb):
            if i > 0:
                out[:, :, i] += self.branch_flux(i - 1, pos_block[:, i]).T
            if i < nb - 1:
                out[:, :, i] -= self.branch_flux(i, pos_block[:, i]).T
        return out

    def project(self, f, quad_n, intervals=None):
        # plain dx inner products against every mode, layer by layer.
        # intervals may pin each branch to segment endpoints other than
        # the basis breakpoints: data entering at an earlier time is
        # paired with the branch of the layer it sat in back then, even
        # where that layer has since moved away.
        if intervals is None:
            intervals = self.positions
        gl_x, gl_w = np.polynomial.legendre.leggauss(quad_n)
        fhat = np.zeros(self.lams.size)
        for k in range(self.sigma.size):
            a, b = intervals[k], intervals[k + 1]
            x = 0.5 * (b - a) * gl_x + 0.5 * (a + b)
            w = 0.5 * (b - a) * gl_w
            fhat += self.branch_value(k, x) @ (w * f(x))
        return fhat

    def eval_series(self, weights, x):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self.positions, x.ravel()) - 1,
                      0, self.sigma.size - 1)
        out = np.empty(x.size)
        m = len(weights)
        for k in np.unique(idx):
            sel = idx == k
            out[sel] = weights @ self.branch_value(k, x.ravel()[sel])[:m]
        return out.reshape(x.shape)


class InterfaceVectors:
    """Breakpoint samples of a solve at one time node.

    Phi_vec holds the weighted one-sided gradients, one entry per
    breakpoint: the two sides of an interior breakpoint share a single
    entry because the weighted gradients match there, so the system
    never carries duplicate unknowns. phi_vec holds the values, pinned
    to zero at the cold walls. Omega and omega hold, mode by mode, the
    value and weighted-gradient gaps of the frozen basis branches
    across each breakpoint sample, walls included with a one-sided
    virtual zero. theta_aux maps (layer, x) to the weighted gradient of
    that branch of the frozen basis.
    """

    def __init__(self, tau, positions, velocities, Phi_vec, phi_vec,
                 Omega, omega, theta_aux):
        phi_vec = np.asarray(phi_vec, dtype=float)
        if phi_vec[0] != 0.0 or phi_vec[-1] != 0.0:
            raise ValueError("wall values must be exactly zero")
        self.tau = tau
        self.positions = positions
        self.velocities = velocities
        self.Phi_vec = np.asarray(Phi_vec, dtype=float)
        self.phi_vec = phi_vec
        self.Omega = Omega
        self.omega = omega
        self.theta_aux = theta_aux


class StripSolution:
    """Trace history and reconstruction for one strip solve."""

    def __init__(self, layout, nodes, phi, flux, bases, ubars,
                 pos_hist, vel_hist):
        self.layout = layout
        self.nodes = nodes
        self.phi = phi
        self.flux = flux
        self._bases = bases
        self._ubars = ubars
        self._pos = pos_hist
        self._vel = vel_hist

    def _node(self, tau):
        if tau is None:
            return len(self.nodes) - 1
        k = int(np.argmin(np.abs(self.nodes - tau)))
        if abs(self.nodes[k] - tau) > 1e-12 * max(self.nodes[-1], 1.0):
            raise ValueError("tau must be one of the solve nodes")
        return k

    def evaluate(self, x, tau=None):
        """Field at the points x at one of the solve nodes."""
        k = self._node(tau)
        basis = self._bases[k]
        return basis.eval_series(self._ubars[k] / basis.norms, x)

    def interface_vectors(self, tau=None):
        """Breakpoint samples and their per-mode gap vectors at a node."""
        k = self._node(tau)
        basis = self._bases[k]
        block = self._pos[k][None, :]
        return InterfaceVectors(
            self.nodes[k], self._pos[k], self._vel[k],
            self.flux[k], self.phi[k],
            basis.value_jumps(block)[0], basis.flux_jumps(block)[0],
            basis.branch_flux)


def _trap_weights(nodes):
    w = np.zeros(nodes.size)
    d = np.diff(nodes)
    w[0] = d[0] / 2
    w[-1] = d[-1] / 2
    w[1:-1] = (d[:-1] + d[1:]) / 2
    return w


def _initial_rows(layout, init, point):
    pos = layout.positions(0.0)
    nb = layout.nbreaks
    phi0 = np.zeros(nb)
    flux0 = np.zeros(nb)
    if point is not None:
        return phi0, flux0
    for i in range(1, nb - 1):
        phi0[i] = init(np.array([pos[i]]))[0]
    h = 1e-6 * (pos[-1] - pos[0])
    for i in range(nb):
        sides = []
        if i > 0:
            sl = (init(np.array([pos[i]]))[0]
                  - init(np.array([pos[i] - h]))[0]) / h
            sides.append(layout.sigma[i - 1] ** 2 * sl)
        if i < nb - 1:
            sr = (init(np.array([pos[i] + h]))[0]
                  - init(np.array([pos[i]]))[0]) / h
            sides.append(layout.sigma[i] ** 2 * sr)
        flux0[i] = np.mean(sides)
    return phi0, flux0


def _check_point(layout, point):
    pos0 = layout.positions(0.0)
    if np.min(np.abs(pos0 - point)) < 1e-9 * (pos0[-1] - pos0[0]):
        raise ValueError("point source must avoid the breakpoints")
    if not pos0[0] < point < pos0[-1]:
        raise ValueError("point source must sit inside the strip")


def _split_init(layout, init):
    point = None
    if isinstance(init, tuple):
        tag, point = init
        if tag != "point":
            raise ValueError("tuple init must be ('point', x0)")
        _check_point(layout, point)
    return point


def _data_hat(basis, layout, init, point, pos0, quad_n):
    # membership at the starting time, branches of the current basis
    if point is not None:
        idx = int(np.clip(np.searchsorted(pos0, point) - 1,
                          0, layout.nlayers - 1))
        return basis.branch_value(idx, np.array([point]))[:, 0]
    return basis.project(init, quad_n, intervals=pos0)


def _history_sum(basis, tau, k, nodes, pos_hist, vel_hist, phi, flux):
    # trapezoid over the recorded trace rows strictly before node k;
    # the integrand vanishes at the diagonal so the endpoint is free
    lam2 = basis.lams ** 2
    w = _trap_weights(nodes[:k + 1])[:k]
    decay = np.exp(-np.outer(lam2, tau - nodes[:k]))
    Om = basis.value_jumps(pos_hist[:k])
    out = np.einsum("mj,jmi,ji,j->m", decay, Om, flux[:k], w)
    if pos_hist.shape[1] > 2:
        om = basis.flux_jumps(pos_hist[:k])[:, :, 1:-1]
        drive = vel_hist[:k, None, 1:-1] * Om[:, :, 1:-1] - om
        out = out + np.einsum("mj,jmi,ji,j->m", decay, drive,
                              phi[:k, 1:-1], w)
    return out


def _source_sum(basis, tau, k, nodes, pos_hist, source, quad_n,
                cache=None):
    lam2 = basis.lams ** 2

    def one(j):
        key = (id(basis), j)
        if cache is not None and key in cache:
            return cache[key]
        g = basis.project(lambda x, s=nodes[j]: source(x, s), quad_n,
                          intervals=pos_hist[j])
        if cache is not None:
            cache[key] = g
        return g

    ghat = np.stack([one(j) for j in range(k + 1)])
    wfull = _trap_weights(nodes[:k + 1])
    dfull = np.exp(-np.outer(tau - nodes[:k + 1], lam2))
    return (wfull[:, None] * dfull * ghat).sum(axis=0)


def interface_volterra(layout, init, grid, terms=200, source=None,
                       quad_n=48):
    """March the breakpoint traces of a moving layered strip.

    init is a callable of x, or ("point", x0) for a unit point source
    strictly inside a layer. grid is the time discretization; nodes
    must start at zero. source, if given, is a callable (x, s). terms
    caps the modes kept per basis. Returns a StripSolution whose phi
    and flux arrays hold the value and weighted-gradient rows, one
    column per breakpoint, walls included.
    """
    nodes = np.asarray(grid.nodes, dtype=float)
    if nodes[0] != 0.0:
        raise ValueError("time grid must start at zero")
    if nodes[-1] > layout.horizon * (1 + 1e-12):
        raise ValueError("time grid runs past the layout horizon")
    point = _split_init(layout, init)

    n = nodes.size
    nb = layout.nbreaks
    h_min = np.min(np.diff(nodes)) if n > 1 else layout.horizon
    lam_cut = np.sqrt(_DECAY_CUT / h_min)
    static = layout.is_static and source is None

    cache = {}
    state = {"misses": 0, "prev": None}

    def frozen(t):
        pos = layout.positions(t)
        key = tuple(np.round(pos / 1e-12).astype(np.int64))
        if key not in cache:
            seeds = None
            if state["prev"] is not None \
                    and state["misses"] % _RESCAN_EVERY != 0:
                seeds = state["prev"].scan
            cache[key] = _Basis(pos, layout.sigma, lam_cut, terms, seeds)
            state["misses"] += 1
            state["prev"] = cache[key]
        return cache[key]

    pos_hist = np.array([layout.positions(t) for t in nodes])
    vel_hist = np.array([layout.velocities(t) for t in nodes])

    fhat_cache = {}
    ghat_cache = {}
    phi = np.zeros((n, nb))
    flux = np.zeros((n, nb))
    bases = []
    ubars = []

    phi[0], flux[0] = _initial_rows(layout, init, point)

    for k in range(n):
        tau = nodes[k]
        basis = frozen(tau)
        bid = id(basis)
        if bid not in fhat_cache:
            fhat_cache[bid] = _data_hat(basis, layout, init, point,
                                        pos_hist[0], quad_n)
        ub = np.exp(-basis.lams ** 2 * tau) * fhat_cache[bid]

        if k > 0 and not static:
            ub = ub + _history_sum(basis, tau, k, nodes, pos_hist,
                                   vel_hist, phi, flux)
            if source is not None:
                ub = ub + _source_sum(basis, tau, k, nodes, pos_hist,
                                      source, quad_n, ghat_cache)

        bases.append(basis)
        ubars.append(ub)

        if k > 0:
            weights = ub / basis.norms
            pos = pos_hist[k]
            if nb > 2:
                V = np.concatenate([basis.branch_value(i, pos[i:i + 1])
                                    for i in range(1, nb - 1)], axis=1)
                phi[k, 1:-1] = weights @ V
            cols = [basis.branch_flux(0, pos[0:1])]
            for i in range(1, nb):
                cols.append(basis.branch_flux(i - 1, pos[i:i + 1]))
            flux[k] = weights @ np.concatenate(cols, axis=1)

    return StripSolution(layout, nodes, phi, flux, bases, ubars,
                         pos_hist, vel_hist)


def image_baru(layout, init, traces, lam, tau, source=None, quad_n=48):
    """Transform image of the field at one frequency.

    Assembles, for a single frequency lam, the decay-weighted data
    projection, the source history, and the trace history quadrature
    against the rows recorded in traces. lam need not be an eigenvalue
    of any configuration. tau must be one of the trace nodes.
    """
    nodes = traces.nodes
    k = traces._node(tau)
    tau = nodes[k]
    point = _split_init(layout, init)

    basis = _OneFreq(layout.positions(tau), layout.sigma, float(lam))
    fhat = _data_hat(basis, layout, init, point, traces._pos[0], quad_n)
    ub = np.exp(-lam ** 2 * tau) * fhat
    if k > 0:
        ub = ub + _history_sum(basis, tau, k, nodes, traces._pos,
                               traces._vel, traces.phi, traces.flux)
        if source is not None:
            ub = ub + _source_sum(basis, tau, k, nodes, traces._pos,
                                  source, quad_n)
    return float(ub[0])


class _OneFreq(_Basis):
    # basis machinery pinned to a single injected frequency
    def __init__(self, positions, sigma, lam):
        self.positions = positions
        self.sigma = sigma
        grid = LayerGrid(positions, sigma)
        self.lams = np.array([lam])
        self.scan = self.lams
        self.norms = np.array([basis_norm(grid, lam)])
        self.coeffs = np.stack([theta_coeffs(grid, lam)])


def solution_series(traces, tau, x, terms=None):
    """Eigen-series field values plus a crude tail gauge.

    Sums the recorded expansion at one node over at most `terms`
    modes. The gauge is the magnitude of the last kept term over the
    query points; a small value means later modes were already drowned
    by their decay factors.
    """
    k = traces._node(tau)
    basis = traces._bases[k]
    ub = traces._ubars[k]
    m = ub.size if terms is None else min(int(terms), ub.size)
    if m < 1:
        raise ValueError("terms must be at least one")
    weights = ub[:m] / basis.norms[:m]
    val = basis.eval_series(weights, x)
    x = np.asarray(x, dtype=float)
    idx = np.clip(np.searchsorted(basis.positions, x.ravel()) - 1,
                  0, basis.sigma.size - 1)
    tail = 0.0
    for kk in np.unique(idx):
        sel = idx == kk
        last = basis.branch_value(kk, x.ravel()[sel])[m - 1]
        tail = max(tail, np.max(np.abs(weights[m - 1] * last)))
    return val, tail
