import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nonlocal_traffic import kernel as K
from nonlocal_traffic.errors import GridError, InvalidKernel, ResolutionError, TruncationError
from nonlocal_traffic.grid import Grid1D, Profile, aligned_grid, total_variation

from conftest import make_profile

CONVEX_PL = K.piecewise_linear([-2.0, -1.0, 0.0], [0.0, 1 / 3, 4 / 3])


def test_exponential_passes_all_conditions_and_is_convex():
    rep = K.validate_kernel(K.exponential())
    assert rep.traffic_assumptions_hold
    assert rep.is_convex
    assert K.exponential().is_convex


def test_uniform_passes_traffic_conditions_but_is_not_convex():
    rep = K.validate_kernel(K.uniform())
    assert rep.traffic_assumptions_hold
    assert not rep["convex"].passed
    assert not K.uniform().is_convex


def test_decreasing_density_fails_monotonicity():
    spec = K.custom(lambda x: np.where((x > -1) & (x < 0), -2.0 * x, 0.0), support_radius=1.0)
    rep = K.validate_kernel(spec)
    assert not rep["nondecreasing"].passed
    assert rep["nondecreasing"].worst_point is not None
    assert rep["unit_mass"].passed  # mass of -2x on ]-1, 0[ is 1


def test_convex_piecewise_linear_kernel():
    rep = K.validate_kernel(CONVEX_PL)
    assert rep.traffic_assumptions_hold and rep.is_convex
    assert CONVEX_PL.is_convex
    assert CONVEX_PL.left_limit_at_zero == pytest.approx(4 / 3)
    assert float(CONVEX_PL.cumulative(np.array([0.0]))[0]) == pytest.approx(1.0, abs=1e-15)


def test_unnormalised_table_is_flagged():
    rep = K.validate_kernel(K.piecewise_linear([-1.0, 0.0], [1.0, 1.0]))
    assert rep["unit_mass"].passed
    rep = K.validate_kernel(K.piecewise_linear([-1.0, 0.0], [2.0, 2.0]))
    assert not rep["unit_mass"].passed


def test_positive_support_is_flagged():
    spec = K.custom(lambda x: np.where(np.abs(x) < 0.5, 1.0, 0.0), support_radius=0.5)
    assert not K.validate_kernel(spec)["support_in_negative_axis"].passed


def test_unevaluable_density_raises():
    def bad(x):
        raise RuntimeError("boom")

    with pytest.raises(InvalidKernel):
        K.validate_kernel(K.custom(bad, support_radius=1.0, left_limit_at_zero=1.0))


def test_first_moments():
    assert K.uniform().first_moment() == 0.5
    assert K.exponential().first_moment() == 1.0
    # int_{-2}^{0} |x| eta(x) for the convex table
    xs = np.linspace(-2, 0, 200001)
    expected = np.trapezoid(-xs * CONVEX_PL.density(xs), xs)
    assert CONVEX_PL.first_moment() == pytest.approx(expected, rel=1e-6)


def test_uniform_weights_exact():
    dk = K.discretize(K.uniform(), 1.0, 0.125)
    assert dk.n_weights == 8
    np.testing.assert_allclose(dk.weights, np.full(8, 0.125), rtol=0, atol=1e-16)


def test_uniform_quarter_cells_match_example_with_lowered_threshold():
    dk = K.discretize(K.uniform(), 1.0, 0.25, min_cells_per_eps=4)
    assert dk.n_weights == 4
    np.testing.assert_array_equal(dk.weights, [0.25, 0.25, 0.25, 0.25])


def test_uniform_coarse_raises_resolution_error():
    with pytest.raises(ResolutionError):
        K.discretize(K.uniform(), 1.0, 0.2)
    dk = K.discretize(K.uniform(), 1.0, 0.2, min_cells_per_eps=5)
    assert dk.n_weights == 5


@pytest.mark.parametrize("dx", [1 / 8, 1 / 32, 0.05])
def test_exponential_truncation_length(dx):
    dk = K.discretize(K.exponential(), 1.0, dx, tail_tol=1e-10)
    # tail mass after M cells is exp(-M dx)
    assert dk.n_weights == math.ceil(-math.log(1e-10) / dx - 1e-9)
    assert dk.truncation_mass <= 1e-10
    assert dk.weights.sum() == pytest.approx(1.0, abs=1e-15)


def test_exponential_weights_closed_form():
    dx, eps = 0.1, 1.0
    dk = K.discretize(K.exponential(), eps, dx)
    k = np.arange(dk.n_weights)
    raw = np.exp(-k * dx) * (1 - np.exp(-dx))
    np.testing.assert_allclose(dk.weights, raw / raw.sum(), rtol=1e-13)


def test_weights_nonincreasing_for_monotone_kernels():
    for spec in (K.exponential(), K.uniform(), CONVEX_PL):
        dk = K.discretize(spec, 0.5, 0.5 / 16)
        assert np.all(np.diff(dk.weights) <= 1e-16)
        assert np.all(dk.weights >= 0)


def test_truncation_cap():
    heavy = K.custom(lambda x: np.where(x < 0, 1.0 / (1.0 + x * x) / (math.pi / 2), 0.0),
                     left_limit_at_zero=2 / math.pi)
    with pytest.raises(TruncationError):
        K.discretize(heavy, 1.0, 0.1, tail_tol=1e-10)


def test_convolve_constant():
    p = make_profile(np.full(50, 0.3))
    dk = K.discretize(K.exponential(), 0.8, 0.1)
    np.testing.assert_allclose(K.convolve(p, dk).values, 0.3, atol=1e-15)


def test_convolve_step_uniform_is_clamp_at_left_edges():
    g = aligned_grid(-2.0, 2.0, 1 / 16, 0.0, 1.0)
    x = g.centers
    u = Profile(g, (x > 0).astype(float))
    w = K.convolve(u, K.discretize(K.uniform(), 1.0, g.dx))
    left_edges = g.edges[:-1]
    np.testing.assert_allclose(w.values, np.clip(1 + left_edges, 0, 1), atol=1e-14)


def test_convolve_grid_mismatch():
    p = make_profile(np.zeros(20), dx=0.1)
    dk = K.discretize(K.uniform(), 1.0, 0.05)
    with pytest.raises(GridError):
        K.convolve(p, dk)


def test_uniform_dx_w_constant_and_step():
    g = aligned_grid(-2.0, 2.0, 1 / 16, 0.0, 1.0)
    x = g.centers
    flat = Profile(g.with_boundaries(0.4, 0.4), np.full(g.n_cells, 0.4))
    assert np.all(K.uniform_dx_w(flat, 1.0).values == 0)
    d = K.uniform_dx_w(Profile(g, (x > 0).astype(float)), 1.0).values
    np.testing.assert_array_equal(d, np.where((x > -1) & (x < 0), 1.0, 0.0))


def test_uniform_dx_w_needs_multiple():
    p = make_profile(np.zeros(40), dx=0.1)
    with pytest.raises(GridError):
        K.uniform_dx_w(p, 0.85)


@given(st.lists(st.floats(0, 1), min_size=20, max_size=80), st.integers(8, 20))
def test_forward_difference_matches_uniform_oracle(vals, m):
    dx = 0.05
    p = make_profile(vals, dx=dx)
    eps = m * dx
    w = K.convolve(p, K.discretize(K.uniform(), eps, dx))
    edges = np.append(w.values, p.grid.boundary_right)
    fd = np.diff(edges) / dx
    np.testing.assert_allclose(fd, K.uniform_dx_w(p, eps).values, rtol=0, atol=1e-12)


@given(st.lists(st.floats(0, 1), min_size=10, max_size=60), st.sampled_from(["exp", "uni", "pl"]))
def test_convolution_bounds_and_tv_contraction(vals, fam):
    spec = {"exp": K.exponential(), "uni": K.uniform(), "pl": CONVEX_PL}[fam]
    p = make_profile(vals, dx=0.05)
    w = K.convolve(p, K.discretize(spec, 0.4, 0.05))
    lo = min(p.values.min(), p.grid.boundary_right)
    hi = max(p.values.max(), p.grid.boundary_right)
    assert w.values.min() >= lo - 1e-15 and w.values.max() <= hi + 1e-15
    assert total_variation(w) <= total_variation(p) + 1e-12


@given(st.lists(st.floats(0, 1), min_size=30, max_size=80))
def test_discrete_lipschitz_bound(vals):
    dx, eps = 0.01, 0.16
    p = make_profile(vals, dx=dx)
    for spec in (K.exponential(), CONVEX_PL, K.uniform()):
        dk = K.discretize(spec, eps, dx)
        e = K.lookahead_edges(p, dk)
        slope = np.max(np.abs(np.diff(e))) / dx
        assert slope <= spec.left_limit_at_zero / eps + 10 * dx / eps ** 2


def test_fft_and_direct_paths_agree(rng):
    from nonlocal_traffic import _backend

    u = rng.uniform(0, 1, 3000)
    dk = K.discretize(K.exponential(), 0.4, 0.4 / 32)
    a = _backend.lookahead(u, dk.weights, 0.3, method="direct")
    b = _backend.lookahead(u, dk.weights, 0.3, method="fft")
    np.testing.assert_allclose(a, b, atol=1e-13)


def test_kernel_from_config_and_csv(tmp_path):
    path = tmp_path / "k.csv"
    path.write_text("xi,eta\n-2,0\n-1,0.3333333333333333\n0,1.3333333333333333\n")
    spec = K.kernel_from_config({"family": "Custom", "table": str(path)})
    assert spec.family is K.KernelFamily.CUSTOM
    assert spec.is_convex
    assert K.kernel_from_config({"family": "Exponential"}).family is K.KernelFamily.EXPONENTIAL
    with pytest.raises(InvalidKernel):
        K.kernel_from_config({"family": "Gaussian"})


def test_kernel_specs_are_immutable():
    spec = K.uniform()
    with pytest.raises(Exception):
        spec.support_radius = 3.0
    dk = K.discretize(spec, 1.0, 0.1)
    with pytest.raises(ValueError):
        dk.weights[0] = 1.0
