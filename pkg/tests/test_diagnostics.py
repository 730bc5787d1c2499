import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nonlocal_traffic import kernel as K
from nonlocal_traffic import scenarios as S
from nonlocal_traffic.diagnostics import (BUMP_MASS, BUMP_SLOPE_MAX, TestFunction, TVSeries, bump_family,
                                          dissipation_bound_fit, entropy_residual, increase_interval,
                                          initial_growth_rate, monotonicity_verdict, predicted_growth_rate,
                                          rate_constant, rate_fit, tv_series, window_variation)
from nonlocal_traffic.errors import FitError, SupportError
from nonlocal_traffic.grid import aligned_grid, total_variation
from nonlocal_traffic.local_reference import LocalRunConfig, solve_local
from nonlocal_traffic.nonlocal_solver import NonlocalRunConfig, solve
from nonlocal_traffic.trajectory import Trajectory
from nonlocal_traffic.velocity import greenshields

GS = greenshields()
CONVEX_PL = K.piecewise_linear([-2.0, -1.0, 0.0], [0.0, 1 / 3, 4 / 3])


def _series(tv):
    tv = np.asarray(tv, dtype=float)
    t = np.linspace(0, 1, tv.size)
    return TVSeries(t, tv, tv, np.zeros_like(tv))


def _nonlocal(kind, spec, eps, t_end=0.5, n_snaps=21, dx=None):
    dx = eps / 16 if dx is None else dx
    dk = K.discretize(spec, eps, dx)
    g = S.grid_for_datum(kind, dx, t_end, 1.0, dk.reach, pad=0.5)
    u0 = S.standard_datum(kind, g)
    return solve(NonlocalRunConfig(g, spec, eps, GS, t_end, 0.5, np.linspace(0, t_end, n_snaps)), u0, dk)


# ------------------------------------------------------------------ TV series and verdicts


def test_tvseries_validation():
    with pytest.raises(ValueError):
        TVSeries([0, 1], [1, np.nan], [1, 1], [0, 0])
    with pytest.raises(ValueError):
        TVSeries([1, 0], [1, 1], [1, 1], [0, 0])


def test_monotonicity_verdict_examples():
    assert monotonicity_verdict(_series([3, 2, 1, 0.5]), 1e-12).passed
    noisy = _series([1.0, 1.0 + 1e-14, 1.0 - 1e-14, 1.0])
    assert monotonicity_verdict(noisy, 1e-12).passed
    v = monotonicity_verdict(_series([1.0, 0.9, 1.2, 1.0]), 1e-12)
    assert not v.passed and v.label == "FAIL"
    assert v.worst_violation == pytest.approx(0.3) and v.worst_time == pytest.approx(2 / 3)


@given(st.lists(st.floats(0, 10), min_size=1, max_size=30))
def test_non_increasing_series_always_pass(xs):
    tv = np.sort(np.asarray(xs))[::-1]
    assert monotonicity_verdict(_series(tv), 0.0).passed


def test_monotone_convex_run_keeps_tv_and_tv0_bound():
    for spec in (K.exponential(), CONVEX_PL):
        tr = _nonlocal(S.MonotoneRamp(), spec, 0.2)
        s = tv_series(tr)
        np.testing.assert_allclose(s.tv_w, 1.0, atol=1e-12)
        assert np.all(s.negative_part <= 1e-12)
        assert s.tv_w[0] <= total_variation(tr.u_profile(0)) + 1e-12


def test_tv_w0_bounded_by_tv_u0_random():
    tr = _nonlocal(S.RandomBV(5, 12), K.uniform(), 0.1, t_end=0.1, n_snaps=3)
    s = tv_series(tr)
    assert s.tv_w[0] <= s.tv_u[0] + 1e-12


def test_counterexample_series_fails_with_positive_slope():
    spec = S.CounterexampleSpec((1.0,), (0.5,), 1)
    dx = 1 / 128
    g = S.counterexample_grid(spec, dx, 1.0, 0.05, 0.1)
    u0 = S.counterexample_datum(spec, g)
    tr = solve(NonlocalRunConfig(g, K.uniform(), 1.0, GS, 0.05, 0.5, np.linspace(0, 0.05, 26)), u0)
    s = tv_series(tr)
    assert s.tv_w[0] == pytest.approx(1.0, abs=1e-12)
    v = monotonicity_verdict(s, 1e-9)
    assert not v.passed and v.worst_violation > 0
    rate = initial_growth_rate(s, 0.02)
    assert rate >= 0.8 * predicted_growth_rate(0.5)
    iv = increase_interval(s)
    assert iv["t_star"] > 0 and iv["max_excess"] > 0


def test_predicted_growth_rate():
    assert predicted_growth_rate(1.0) == 0.5
    assert predicted_growth_rate(0.5) == pytest.approx(0.375)
    assert predicted_growth_rate(0.25, 1 / 16) == pytest.approx(16 * 0.21875)


def test_increase_interval_cases():
    assert increase_interval(_series([1, 0.9, 1.1]))["t_star"] == 0.0
    iv = increase_interval(_series([1, 1.1, 1.05, 0.99, 1.2]))
    assert iv["t_star"] == pytest.approx(0.75) and not iv["censored"]
    iv = increase_interval(_series([1, 1.1, 1.2]))
    assert iv["censored"] and iv["t_star"] == 1.0
    with pytest.raises(FitError):
        initial_growth_rate(_series([1.0]))


def test_window_variation_lemma_setup():
    h, ell, eps = 0.5, 0.4, 0.1
    dx = 1 / 320  # block edges and eps fall on cell edges
    g = aligned_grid(-8 * ell - eps - 0.1, 0.5, dx, 0.0, 1.0)
    u0 = S.lemma55_datum(h, ell, eps, 0.0, g)
    tr = solve(NonlocalRunConfig(g, K.uniform(), eps, GS, 0.0), u0)
    assert window_variation(tr, 0, -7 * ell - eps, -2 * ell) == pytest.approx(4 * h, abs=1e-12)
    assert window_variation(tr, 0, 0.1, 0.05) == 0.0


# ------------------------------------------------------------------ entropy residuals


def test_test_function_norm_and_shape():
    phi = TestFunction(0.5, 0.5, 0.0, 0.25)
    assert phi(0.5, 0.0) == 1.0
    assert phi(0.0, 0.0) == 0.0 and phi(0.5, 0.25) == 0.0
    t = np.linspace(0, 1, 20001)
    xs = np.linspace(-0.25, 0.25, 20001)
    numeric = np.trapezoid(phi.psi(t), t) * np.max(np.abs(phi.chi_prime(xs)))
    assert phi.dx_norm == pytest.approx(numeric, rel=1e-6)
    assert BUMP_MASS == pytest.approx(32 / 35) and BUMP_SLOPE_MAX == pytest.approx(1.7173, abs=1e-4)
    with pytest.raises(ValueError):
        TestFunction(0.5, 0.0, 0.0, 1.0)


def test_bump_family_layout():
    fam = bump_family(-1.0, 1.0, 2.0)
    assert len(fam) == 15
    assert {phi.x_radius for phi in fam} == {0.25, 0.5, 1.0}
    assert all(phi.support[0] == 0.0 and phi.support[1] == 2.0 for phi in fam)


def _constant_traj(c=0.3, n_t=11):
    g = aligned_grid(-1, 1, 0.02, c, c)
    times = np.linspace(0, 1, n_t)
    u = np.full((n_t, g.n_cells), c)
    return Trajectory("nonlocal", g, times, u, u.copy(), epsilon=0.1)


def test_residual_of_constant_state_vanishes():
    tr = _constant_traj()
    phi = TestFunction(0.5, 0.5, 0.0, 0.5)
    for c in (0.1, 0.3, 0.9):
        assert abs(entropy_residual(tr, c, phi)) < 1e-14


def test_residual_support_violation():
    tr = _constant_traj()
    with pytest.raises(SupportError):
        entropy_residual(tr, 0.5, TestFunction(0.5, 0.5, 0.9, 0.5))
    with pytest.raises(SupportError):
        entropy_residual(tr, 0.5, TestFunction(0.8, 0.5, 0.0, 0.5))


def test_residual_linear_in_phi():
    tr = _nonlocal(S.Riemann(0.0, 1.0), K.exponential(), 0.2, t_end=0.5)
    p1 = TestFunction(0.25, 0.25, -0.2, 0.3)
    p2 = TestFunction(0.25, 0.25, 0.1, 0.2)
    for c in (0.3, 0.7):
        r1, r2 = entropy_residual(tr, c, p1), entropy_residual(tr, c, p2)
        from nonlocal_traffic.diagnostics import _residual_matrix
        both = _residual_matrix(tr, [c], [p1, p2], GS)[0]
        assert both.sum() == pytest.approx(r1 + r2, abs=1e-14)


def test_residual_continuous_in_c():
    tr = _nonlocal(S.Riemann(0.8, 0.2), K.exponential(), 0.2, t_end=0.5)
    phi = TestFunction(0.25, 0.25, 0.0, 0.4)
    d = 1e-4
    a, b = entropy_residual(tr, 0.5, phi), entropy_residual(tr, 0.5 + d, phi)
    # |d alpha/dc| <= 1 and |d beta/dc| <= max|f'| = 1, so the residual is 1-Lipschitz times the phi norms
    bound = d * 1.0 * (0.5 * BUMP_MASS * 0.8 * BUMP_MASS * 6.0 / 0.25 + 0.5 * BUMP_MASS * 0.8 * BUMP_MASS)
    assert abs(a - b) <= bound


def test_c_outside_range_matches_conservation_residual():
    tr = _nonlocal(S.Riemann(0.6, 0.2), K.exponential(), 0.2, t_end=0.5, n_snaps=51)
    phi = TestFunction(0.25, 0.25, 0.0, 0.4)
    # c above every value: |w - c| = c - w, sign = -1, so D = -(conservation residual of w) + const terms
    r_hi = entropy_residual(tr, 1.0, phi)
    r_lo = entropy_residual(tr, 0.0, phi)
    # their sum isolates the constant-c parts, which integrate to (nearly) zero against phi_t and phi_x
    assert abs(r_hi + r_lo) < 1e-3


def test_local_godunov_residuals_nonnegative():
    kind = S.Riemann(0.0, 1.0)
    g = aligned_grid(-2, 2, 0.01, 0.0, 1.0)
    u0 = S.standard_datum(kind, g)
    tr = solve_local(LocalRunConfig(g, GS, 0.5, 0.9, np.linspace(0, 0.5, 101)), u0)
    tr.epsilon = 1.0
    rep = dissipation_bound_fit(tr, phi_family=bump_family(-1, 1, 0.5))
    assert rep.worst["normalized_residual"] >= -1e-3


def test_convex_monotone_run_residual_scales_with_eps():
    # w obeys the local law only up to an O(eps) commutator, so the residual
    # shrinks linearly in eps and the implied constant stays bounded
    worst, khat = [], []
    for eps in (0.2, 0.1, 0.05):
        tr = _nonlocal(S.MonotoneRamp(), K.exponential(), eps, t_end=0.5, n_snaps=51)
        rep = dissipation_bound_fit(tr, phi_family=bump_family(-0.8, 0.8, 0.5))
        worst.append(-rep.worst["normalized_residual"])
        khat.append(rep.K_hat)
        assert rep.satisfies(rep.K_hat + 1e-12)
    assert max(khat) < 0.2 and max(khat) / min(khat) < 2
    assert worst[2] < 0.3 * worst[0]
    d = rep.to_dict()
    assert len(d["test_functions"]) == 15 and len(d["c_values"]) == 8


def test_entropy_report_satisfies_semantics():
    tr = _nonlocal(S.Riemann(0.8, 0.2), K.exponential(), 0.2, t_end=0.5, n_snaps=51)
    rep = dissipation_bound_fit(tr, phi_family=bump_family(-0.8, 1.0, 0.5))
    assert rep.satisfies(rep.K_hat * (1 + 1e-9) + 1e-15)
    if rep.K_hat > 0:
        assert not rep.satisfies(rep.K_hat * 0.5)


# ------------------------------------------------------------------ rate fits


@pytest.mark.parametrize("power", [0.5, 1.0, 0.73])
def test_rate_fit_recovers_planted_slope(power):
    eps = [0.4, 0.2, 0.1, 0.05]
    rep = rate_fit([(e, 3.0 * e ** power) for e in eps])
    assert rep.slope == pytest.approx(power, abs=1e-10)
    assert rep.intercept == pytest.approx(np.log(3.0), abs=1e-10)
    assert rep.residual < 1e-10
    np.testing.assert_allclose(rep.predict(eps), 3.0 * np.array(eps) ** power, rtol=1e-10)


def test_rate_fit_errors():
    with pytest.raises(FitError):
        rate_fit([(0.4, 1), (0.2, 1), (0.1, 1)])
    with pytest.raises(FitError):
        rate_fit([(0.4, 1), (0.2, 0.5), (0.1, 0.0), (0.05, 0.1)])
    with pytest.raises(FitError):
        rate_fit([(0.4, 1), (0.35, 1), (0.3, 1), (0.25, 1)])
    with pytest.raises(FitError):
        rate_fit([(0.4, 1), (0.4, 1), (0.1, 1), (0.05, 1)])


def test_rate_fit_sorts_and_serializes(tmp_path):
    rep = rate_fit([(0.05, 0.05), (0.4, 0.4), (0.1, 0.1), (0.2, 0.2)])
    assert rep.epsilons.tolist() == [0.4, 0.2, 0.1, 0.05]
    rep.to_csv(tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text().splitlines()[0] == "epsilon,l1_error"


def test_rate_constant():
    eps = np.array([0.25, 0.04])
    err = (eps + np.sqrt(eps)) * 2.0 * 0.3
    assert rate_constant(eps, err, 2.0) == pytest.approx(0.3)
    with pytest.raises(FitError):
        rate_constant(eps, err, 0.0)


def test_series_csv(tmp_path):
    s = _series([1.0, 0.5])
    s.to_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "t,tv_w,tv_u,neg_part" and len(lines) == 3
