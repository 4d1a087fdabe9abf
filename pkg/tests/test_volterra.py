import math
import warnings

import numpy as np
import pytest
from scipy.special import erf

from heatlayers import volterra as vt


def test_timegrid_validation():
    with pytest.raises(ValueError):
        vt.TimeGrid([0.5, 1.0])
    with pytest.raises(ValueError):
        vt.TimeGrid([0.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        vt.TimeGrid([0.0])
    g = vt.uniform_grid(1.0, 4)
    assert g.uniform and len(g) == 5


def test_geometric_grid_shape():
    g = vt.geometric_grid(0.01, 1.2, 10.0, h_max=1.0)
    assert g.nodes[0] == 0.0
    assert g.nodes[-1] == 10.0
    h = g.steps
    assert abs(h[0] - 0.01) < 1e-15
    # ratio respected before the cap kicks in
    assert np.all(h[1:6] / h[:5] <= 1.2 + 1e-12)
    assert h.max() <= 1.0 + 1e-12
    with pytest.raises(ValueError):
        vt.geometric_grid(-1.0, 1.2, 1.0)


def test_exponential_growth_simpson():
    sys = vt.VolterraSystem(
        1, lambda t: np.array([1.0]),
        kernel=lambda t, s: np.ones((1, 1, s.size)))
    grid = vt.uniform_grid(1.0, 200)
    u = vt.solve_second_kind(sys, grid, rule="simpson")
    assert abs(u[-1, 0] - math.e) < 1e-6
    assert np.max(np.abs(u[:, 0] - np.exp(grid.nodes))) < 1e-6


def test_exponential_growth_trapezoid():
    sys = vt.VolterraSystem(
        1, lambda t: np.array([1.0]),
        kernel=lambda t, s: np.ones((1, 1, s.size)))
    u = vt.solve_second_kind(sys, vt.uniform_grid(1.0, 400))
    assert abs(u[-1, 0] - math.e) < 2e-5


def _poly_system():
    # manufactured solution u = (1 + t^2, t^3) under K = [[1, s], [t, 1]]
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

    return vt.VolterraSystem(2, forcing, kernel=kernel)


def exact_poly(t):
    return np.array([1 + t ** 2, t ** 3])


def test_simpson_observed_order():
    sys = _poly_system()
    errs = []
    for m in (8, 16, 32, 64):
        u = vt.solve_second_kind(sys, vt.uniform_grid(1.0, m), rule="simpson")
        errs.append(np.max(np.abs(u[-1] - exact_poly(1.0))))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(3)]
    assert min(orders) >= 3.5, orders


def test_simpson_odd_step_counts():
    sys = _poly_system()
    for m in (9, 15, 33):
        u = vt.solve_second_kind(sys, vt.uniform_grid(1.0, m), rule="simpson")
        assert np.max(np.abs(u[-1] - exact_poly(1.0))) < 2e-4


def test_simpson_rejects_nonuniform_and_sqrt():
    sys = _poly_system()
    with pytest.raises(ValueError):
        vt.solve_second_kind(sys, vt.geometric_grid(0.01, 1.5, 1.0), rule="simpson")
    s2 = vt.VolterraSystem(1, lambda t: np.array([1.0]),
                           kernel_sqrt=lambda t, s: np.ones((1, 1, s.size)))
    with pytest.raises(ValueError):
        vt.solve_second_kind(s2, vt.uniform_grid(1.0, 4), rule="simpson")
    with pytest.raises(ValueError):
        vt.solve_second_kind(sys, vt.uniform_grid(1.0, 4), rule="midpoint")


def test_marching_equals_dense_solve():
    sys = _poly_system()
    grid = vt.geometric_grid(0.02, 1.15, 1.0, h_max=0.08)
    nodes = grid.nodes
    m = nodes.size
    if m > 41:
        nodes = nodes[:41]
        grid = vt.TimeGrid(nodes)
        m = 41
    u_march = vt.solve_second_kind(sys, grid)
    d = 2
    big = np.eye(m * d)
    rhs = np.zeros(m * d)
    rhs[:d] = sys.forcing(0.0)
    for k in range(1, m):
        hist = nodes[:k + 1]
        w = vt._trap_weights(hist)
        km = sys.kernel(nodes[k], hist)
        rhs[k * d:(k + 1) * d] = sys.forcing(nodes[k])
        for j in range(k + 1):
            big[k * d:(k + 1) * d, j * d:(j + 1) * d] -= w[j] * km[:, :, j]
    u_dense = np.linalg.solve(big, rhs).reshape(m, d)
    assert np.max(np.abs(u_dense - u_march)) < 1e-12


def test_linearity():
    sys = _poly_system()
    scaled = vt.VolterraSystem(2, lambda t: 2.0 * sys.forcing(t), kernel=sys.kernel)
    grid = vt.uniform_grid(1.0, 30)
    u1 = vt.solve_second_kind(sys, grid)
    u2 = vt.solve_second_kind(scaled, grid)
    assert np.max(np.abs(u2 - 2.0 * u1)) < 1e-12


def abel_exact(t):
    # u = 1 + integral u(s)/sqrt(t-s) ds  has solution e^{pi t}(1 + erf(sqrt(pi t)))
    return np.exp(np.pi * t) * (1.0 + erf(np.sqrt(np.pi * t)))


def test_sqrt_kernel_against_closed_form():
    # the solution picks up a sqrt(t) start, so a graded grid is the
    # natural pairing for the piecewise-linear product weights
    sys = vt.VolterraSystem(
        1, lambda t: np.array([1.0]),
        kernel_sqrt=lambda t, s: np.ones((1, 1, s.size)))
    grid = vt.geometric_grid(1e-6, 1.3, 1.0, h_max=0.005)
    u = vt.solve_second_kind(sys, grid)
    rel = np.abs(u[:, 0] - abel_exact(grid.nodes)) / abel_exact(grid.nodes)
    assert rel.max() < 2e-4


def test_sqrt_kernel_uniform_grid_still_converges():
    sys = vt.VolterraSystem(
        1, lambda t: np.array([1.0]),
        kernel_sqrt=lambda t, s: np.ones((1, 1, s.size)))
    u = vt.solve_second_kind(sys, vt.uniform_grid(1.0, 400))
    assert abs(u[-1, 0] - abel_exact(1.0)) / abel_exact(1.0) < 2e-4


def test_sqrt_weights_exact_on_linear():
    nodes = np.array([0.0, 0.3, 0.7, 1.1, 1.6])
    t = 1.6
    w = vt.sqrt_weights(nodes, t)
    # integral of (a + b s)/sqrt(t-s): closed form
    for a, b in [(1.0, 0.0), (0.0, 1.0), (2.0, -3.0)]:
        want = a * 2 * math.sqrt(t) + b * (t * 2 * math.sqrt(t) - (2 / 3) * t ** 1.5)
        got = np.dot(w, a + b * nodes)
        assert abs(got - want) < 1e-13


def test_nonfinite_diagonal_replaced_with_warning():
    def kernel(t, s):
        out = np.zeros((1, 1, s.size))
        out[0, 0, s >= t] = np.inf
        return out

    sys = vt.VolterraSystem(1, lambda t: np.array([1.0]), kernel=kernel)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        u = vt.solve_second_kind(sys, vt.uniform_grid(1.0, 4))
    assert any("non-finite" in str(r.message) for r in rec)
    assert np.all(np.isfinite(u))


def test_stehfest_on_decaying_exponential():
    got = vt.laplace_convolution_solve(
        lambda p: np.array([1.0 / (p + 1.0)]),
        lambda p: np.zeros((1, 1)),
        np.array([0.3, 1.0, 2.5]))
    assert np.allclose(got[:, 0], np.exp(-np.array([0.3, 1.0, 2.5])), atol=1e-7)


def test_laplace_solve_abel():
    # same Abel problem through the transform domain
    got = vt.laplace_convolution_solve(
        lambda p: np.array([1.0 / p]),
        lambda p: np.array([[np.sqrt(np.pi / p)]]),
        0.5)
    assert abs(got[0] - abel_exact(0.5)) < 1e-6


def test_talbot_oscillatory():
    # Stehfest struggles on sin t; the contour handles complex p fine
    got = vt._talbot(lambda p: 1.0 / (p * p + 1.0), 2.0)
    assert abs(got - math.sin(2.0)) < 1e-9


def test_laplace_requires_positive_time():
    with pytest.raises(ValueError):
        vt.laplace_convolution_solve(lambda p: np.array([1.0 / p]),
                                     lambda p: np.zeros((1, 1)), 0.0)
