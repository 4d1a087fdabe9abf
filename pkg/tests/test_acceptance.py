"""Full-system checks.

Each test pins one advertised guarantee of the toolkit, at the tolerance
the package promises, against an oracle that does not share code with the
implementation under test (frequency quadrature, finite differences,
Laplace inversion, closed forms, or a refinement of the method itself).
The freezing-front tests share two long solver runs through module-scoped
fixtures because those runs dominate the wall time of this file.
"""

import math
import time

import numpy as np
import pytest
from scipy.integrate import simpson

from heatlayers import harness, mixed, obm, oit, spectrum, stefan, volterra
from oracles import kernel_quad

FRONT_HORIZON = 6000.0  # seconds; the front crosses a third of the strip


@pytest.fixture(scope="module")
def front_runs():
    cfg = stefan.StefanConfig.table1()
    s50 = stefan.solve_front(cfg, FRONT_HORIZON, terms=50,
                             h0=0.01, ratio=1.2, h_max=15.0)
    s100 = stefan.solve_front(cfg, FRONT_HORIZON, terms=100,
                              h0=0.01, ratio=1.2, h_max=15.0)
    return cfg, s50, s100


def test_two_layer_eigenvalue_study_is_accurate_and_fast():
    t0 = time.perf_counter()
    g = spectrum.LayerGrid([0.0, 1.2, 2.2], [7.0, 0.7])
    exact = spectrum.find_eigenvalues(g, 30)
    n = np.arange(1, 31)
    lam0 = spectrum.lambda_approx(7.0, 0.7, 1.2, 1.0, n, order=0)
    lam1 = spectrum.lambda_approx(7.0, 0.7, 1.2, 1.0, n, order=1)
    elapsed = time.perf_counter() - t0
    rel0 = np.abs(lam0 - exact) / exact
    rel1 = np.abs(lam1 - exact) / exact
    assert rel0[:5].min() >= 0.03
    assert rel0[:5].max() <= 0.15
    assert rel1.max() <= 0.02
    assert np.all(rel1 <= rel0)
    assert elapsed < 1.0


def test_freezing_front_advances_monotonically_from_seed(front_runs):
    cfg, s50, _ = front_runs
    y = np.array(s50.y_trace)
    assert y[0] == cfg.y_minus == 1.0
    assert np.all(np.diff(y) > 0.0)


def test_freezing_front_holds_melting_temperature(front_runs):
    _, s50, _ = front_runs
    res = s50.diagnostics["residual"]
    assert res[0] < 1e-2
    assert max(res[1:]) < 1e-3


def test_freezing_front_trace_insensitive_to_term_count(front_runs):
    _, s50, s100 = front_runs
    t50 = np.array(s50.times)
    y50 = np.array(s50.y_trace)
    y100 = np.interp(t50, s100.times, s100.y_trace)
    assert np.max(np.abs(y50 - y100) / np.abs(y100)) <= 1e-4


def test_freezing_front_energy_balance_at_interface(front_runs):
    _, s50, _ = front_runs
    jump = np.array(s50.diagnostics["jump"])
    target = np.array(s50.diagnostics["jump_target"])
    assert np.max(np.abs(jump - target) / np.abs(target)) < 0.01


def test_freezing_front_steps_stay_cheap(front_runs):
    _, s50, s100 = front_runs
    assert max(s50.diagnostics["seconds"]) <= 1.0
    assert max(s100.diagnostics["seconds"]) <= 1.0


def test_interface_kernels_match_direct_frequency_quadrature():
    m = oit.TwoLayerMedium(0.0, 0.8, 1.7)
    zs = (-1.1, -0.45, 0.12, 0.7, 1.3)
    zetas = (-0.9, -0.3, 0.2, 0.55, 1.0)
    deltas = (0.15, 0.4, 0.9)
    for z in zs:
        for zeta in zetas:
            for delta in deltas:
                p = oit.heat_kernel_P(z, delta, zeta, 0.0, m)
                e = oit.heat_kernel_eta(z, delta, zeta, 0.0, m)
                p_ref = kernel_quad(z, delta, zeta, 0.0, 0.8, 1.7, moment=0)
                e_ref = kernel_quad(z, delta, zeta, 0.0, 0.8, 1.7, moment=1)
                assert np.max(np.abs(p - p_ref)) < 1e-8
                assert np.max(np.abs(e - e_ref)) < 1e-8


def test_constant_interface_density_matches_grid_solver():
    med = oit.TwoLayerMedium(0.0, 1.0, 2.0)
    motion = obm.MovingInterface.constant(0.0, 1.0)
    x0 = 0.5
    grid = volterra.uniform_grid(1.0, 400)
    tr = obm.solve_interface(med, motion, x0, grid)
    # the fast side spreads to std ~2.8 by the horizon, so the window
    # must reach +-16 before truncation drops below the mass tolerance
    x = np.linspace(-16.0, 16.0, 3201)
    for tau in (0.1, 0.5, 1.0):
        u = obm.green_function(med, motion, x0, tr, x, tau=tau)
        assert abs(simpson(u, x=x) - 1.0) < 1e-4
    tau0 = 0.1
    sigma = harness.piecewise_sigma([0.0], [1.0, 2.0])

    def init(xx):
        return obm.green_function(med, motion, x0, tr, xx, tau=tau0)

    xg, u_fd = harness.fd_solve((-12.0, 12.0), 2400, 1.0 - tau0, sigma, init)
    u_gr = obm.green_function(med, motion, x0, tr, xg, tau=1.0)
    assert np.max(np.abs(u_fd - u_gr)) < 1e-3


def test_pinned_kernels_collapse_at_interface_origin():
    for sm, sp in [(1.0, 2.0), (0.8, 1.7), (3.0, 0.4)]:
        m = oit.TwoLayerMedium(0.0, sm, sp)
        for tau, s in [(0.5, 0.2), (1.0, 0.99), (2.0, 0.0)]:
            p = oit.heat_kernel_P(0.0, tau, 0.0, s, m)
            assert abs(p[0, 0] - p[1, 0]) <= 1e-14
            assert abs(p[0, 1] - p[1, 1]) <= 1e-14
            e = oit.heat_kernel_eta(0.0, tau, 0.0, s, m)
            assert np.max(np.abs(e)) <= 1e-14


def test_three_layer_poles_match_closed_form_for_random_media():
    rng = np.random.default_rng(11)
    for _ in range(5):
        l1 = rng.uniform(0.5, 2.0)
        sig = rng.uniform(0.3, 3.0, size=3)
        med = mixed.MixedMedium([0.0, l1], sig)
        ws, _ = mixed.three_layer_poles(med, 10)
        seeds = ws * (1.0 + 1e-3) + 1e-3j
        polished = mixed.find_det_zeros(med, seeds)
        assert np.max(np.abs(polished - ws) / np.abs(ws)) < 1e-8


def test_random_layer_grids_give_orthogonal_modes():
    rng = np.random.default_rng(23)
    xg, wg = np.polynomial.legendre.leggauss(160)
    for trial in range(20):
        nlay = 2 if trial % 2 == 0 else 3
        widths = rng.uniform(0.4, 1.6, size=nlay)
        y = np.concatenate([[0.0], np.cumsum(widths)])
        sig = rng.uniform(0.3, 3.0, size=nlay)
        g = spectrum.LayerGrid(y, sig)
        lams = spectrum.find_eigenvalues(g, 12)
        norms = np.array([spectrum.basis_norm(g, lam) for lam in lams])
        # per-layer Gauss nodes; the modes are piecewise trig, so 160
        # points per layer integrate the products far below tolerance
        tt = np.concatenate([0.5 * (g.y[i + 1] - g.y[i]) * xg
                             + 0.5 * (g.y[i + 1] + g.y[i])
                             for i in range(g.nlayers)])
        ww = np.concatenate([0.5 * (g.y[i + 1] - g.y[i]) * wg
                             for i in range(g.nlayers)])
        theta = np.array([spectrum.theta_eval(g, lam, tt) for lam in lams])
        gram = (theta * ww) @ theta.T
        off = gram / np.sqrt(np.outer(norms, norms))
        np.fill_diagonal(off, 0.0)
        assert np.max(np.abs(off)) < 1e-8


def test_flat_media_recover_classical_solutions():
    from heatlayers.multilayer import MovingLayerGrid, interface_volterra
    lay = MovingLayerGrid([0.0, 1.0], [1.0], 1.0)
    sol = interface_volterra(lay, lambda x: np.sin(np.pi * x),
                             volterra.uniform_grid(0.5, 8))
    xq = np.linspace(0.0, 1.0, 101)
    exact = np.exp(-np.pi ** 2 * 0.5) * np.sin(np.pi * xq)
    assert np.max(np.abs(sol.evaluate(xq) - exact)) < 1e-8

    m = oit.TwoLayerMedium(0.0, 1.0, 1.0)

    def f(x):
        return np.exp(-((x - 0.4) ** 2) / 0.5)

    def fbar(om):
        fm, fp = oit.oit_forward(f, m, om)
        return np.array([fm[0], fp[0]])

    xs = np.linspace(-3.0, 3.0, 241)
    got = oit.oit_inverse(fbar, m, xs, omega_max=14.0)
    l2 = math.sqrt(np.trapezoid((got - f(xs)) ** 2, xs))
    assert l2 < 1e-6


def test_second_kind_solver_order_and_exponential_growth():
    # manufactured pair u = (1 + t^2, t^3) under K = [[1, s], [t, 1]]
    def forcing(t):
        return np.array([1 + t ** 2 - t - t ** 3 / 3 - t ** 5 / 5,
                         t ** 3 - t ** 2 - 7 * t ** 4 / 12])

    def kernel(t, s):
        out = np.empty((2, 2, s.size))
        out[0, 0] = 1.0
        out[0, 1] = s
        out[1, 0] = t
        out[1, 1] = 1.0
        return out

    sys2 = volterra.VolterraSystem(2, forcing, kernel=kernel)
    errs = []
    for m in (8, 16, 32, 64):
        u = volterra.solve_second_kind(sys2, volterra.uniform_grid(1.0, m),
                                       rule="simpson")
        exact = np.array([2.0, 1.0])
        errs.append(np.max(np.abs(u[-1] - exact)))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(3)]
    assert min(orders) >= 3.5, orders

    grow = volterra.VolterraSystem(
        1, lambda t: np.array([1.0]),
        kernel=lambda t, s: np.ones((1, 1, s.size)))
    grid = volterra.uniform_grid(1.0, 200)
    u = volterra.solve_second_kind(grow, grid, rule="simpson")
    assert np.max(np.abs(u[:, 0] - np.exp(grid.nodes))) < 1e-6


def test_linear_front_half_plane_routes_agree():
    med = oit.TwoLayerMedium(0.0, 1.0, 2.0)
    b, x0 = 0.1, 0.5
    motion = obm.MovingInterface.linear(0.0, b, 1.0)
    grid = volterra.uniform_grid(1.0, 400)
    tr = obm.solve_interface(med, motion, x0, grid)
    taus = np.array([0.2, 0.5, 0.8, 1.0])
    phi_l, _, flux_l = obm.laplace_route(med, 0.0, b, x0, taus)
    phi_m = np.interp(taus, grid.nodes, tr.phi)
    flux_m = np.interp(taus, grid.nodes, tr.flux)
    assert np.max(np.abs(phi_m - phi_l)) < 1e-4
    assert np.max(np.abs(flux_m - flux_l)) < 1e-4


def test_smeared_point_source_recovers_unit_mass():
    med = mixed.MixedMedium([0.0, 0.8], [1.0, 0.5, 1.5])
    x0 = 0.35
    width2 = 0.1
    xs = np.linspace(x0 - 1.6, x0 + 1.6, 801)
    phi = np.exp(-(xs - x0) ** 2 / width2)

    def smeared(om):
        dens = mixed.cut_measure(med, om, x0, xs)
        return simpson(dens * phi, x=xs)

    nodes, wts = np.polynomial.legendre.leggauss(24)
    total = 0.0
    lo = 0.0
    while lo < 60.0:
        hi = lo + 2.0
        om = 0.5 * (hi - lo) * (nodes + 1.0) + lo
        total += 0.5 * (hi - lo) * sum(
            wt * smeared(o) for o, wt in zip(om, wts))
        lo = hi
    assert abs(total - 1.0) < 1e-3
