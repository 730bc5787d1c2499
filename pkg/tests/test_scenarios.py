import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nonlocal_traffic import kernel as K
from nonlocal_traffic import scenarios as S
from nonlocal_traffic.errors import ResolutionError, ScaleError
from nonlocal_traffic.grid import aligned_grid, total_variation, tv_decomposition


def test_building_block_values():
    ell, h = 0.25, 0.5
    b = S.building_block(h, ell)
    assert b(-2.5 * ell) == h
    assert b(-6.5 * ell) == h
    assert b(-4 * ell) == 0.0
    assert b(ell) == 0.0
    assert b.table()["support"] == [-7 * ell, -2 * ell]


@pytest.mark.parametrize("h,ell", [(0.0, 0.2), (1.2, 0.2), (0.5, 0.0), (0.5, 1.0)])
def test_building_block_rejects(h, ell):
    with pytest.raises(ScaleError):
        S.BuildingBlock(h, ell)


def test_closure_case_flagged():
    assert S.BuildingBlock(1.0, 0.25).closure_case
    spec = S.CounterexampleSpec((1.0,), (1.0,), 1)
    assert spec.flags() == ["h=1 closure case"]
    assert S.CounterexampleSpec.default(2).flags() == []


def test_counterexample_single_block_tv():
    spec = S.CounterexampleSpec((1.0,), (1.0,), 1)
    g = S.counterexample_grid(spec, 1 / 64, 1.0)
    u0 = S.counterexample_datum(spec, g)
    assert total_variation(u0) == pytest.approx(5.0, abs=1e-12)
    assert spec.exact_tv() == 5.0
    assert u0.boundary_left == 0.0 and u0.boundary_right == 1.0


@pytest.mark.parametrize("n", [1, 2])
def test_counterexample_default_tv_and_range(n):
    spec = S.CounterexampleSpec.default(n)
    dx = spec.ells[-1] / 16
    g = S.counterexample_grid(spec, dx, 1.0)
    u0 = S.counterexample_datum(spec, g)
    assert total_variation(u0) == pytest.approx(spec.exact_tv(), abs=1e-12)
    assert u0.values.min() >= 0 and u0.values.max() <= 1


def test_default_sequences():
    spec = S.CounterexampleSpec.default(3, 2.0)
    assert spec.eps_seq == (2.0, 0.125, 2.0 / 256)
    assert spec.h_seq == (0.5, 0.25, 0.125)
    assert spec.ells == (0.5, 0.03125, 2.0 / 1024)


def test_scale_separation_enforced():
    with pytest.raises(ScaleError):
        S.CounterexampleSpec((1.0, 1 / 8), (0.5, 0.25))
    with pytest.raises(ScaleError):
        S.CounterexampleSpec((1.0,), (0.5,), 2)
    with pytest.raises(ScaleError):
        S.CounterexampleSpec((1.0,), (1.5,), 1)


def test_blocks_disjoint_and_separated():
    spec = S.CounterexampleSpec.default(3)
    blocks = spec.blocks()
    for k in range(len(blocks) - 1):
        outer, inner = blocks[k], blocks[k + 1]
        eps_inner = spec.eps_seq[k + 1]
        # the inner block's support starts to the right of the outer block's right rectangle
        assert -2 * outer.ell + eps_inner < -7 * inner.ell
        assert 8 * inner.ell + eps_inner < 2 * outer.ell


def test_unresolved_block_rejected():
    spec = S.CounterexampleSpec.default(2)
    g = S.counterexample_grid(spec, spec.ells[0] / 16, 1.0)
    with pytest.raises(ResolutionError, match=r"n=\[2\]"):
        S.counterexample_datum(spec, g)


def test_grid_must_cover_blocks():
    spec = S.CounterexampleSpec.default(1)
    g = aligned_grid(-1.0, 1.0, 1 / 128, 0.0, 1.0)
    with pytest.raises(ResolutionError):
        S.counterexample_datum(spec, g)


@pytest.mark.parametrize("n", [1, 2])
def test_initial_w_is_monotone_at_block_scale(n):
    spec = S.CounterexampleSpec.default(n)
    dx = spec.ells[-1] / 16
    g = S.counterexample_grid(spec, dx, spec.eps_seq[0])
    u0 = S.counterexample_datum(spec, g)
    for eps in spec.eps_seq[:n]:
        if n > 1 and eps == spec.eps_seq[0]:
            continue  # finer blocks are not flattened by the coarse kernel
        w = K.convolve(u0, K.discretize(K.uniform(), eps, dx))
        if n == 1:
            assert tv_decomposition(w)[1] <= 1e-12


def test_lemma55_datum_preconditions():
    g = aligned_grid(-3.5, 0.5, 1 / 320, 0.0, 1.0)
    S.lemma55_datum(0.5, 0.4, 0.1, 0.0, g)
    with pytest.raises(ScaleError):
        S.lemma55_datum(0.5, 0.15, 0.1, 0.0, g)  # ell <= 2 eps
    with pytest.raises(ScaleError):
        S.lemma55_datum(0.5, 0.4, 0.1, 0.35, g)  # ell <= eps + delta


def test_lemma55_perturbation():
    g = aligned_grid(-3.5, 0.5, 1 / 320, 0.0, 1.0)
    base = S.lemma55_datum(0.5, 0.4, 0.1, 0.05, g)
    zero = S.lemma55_datum(0.5, 0.4, 0.1, 0.05, g, s=lambda gg: np.zeros(gg.n_cells))
    np.testing.assert_array_equal(base.values, zero.values)

    def bump(gg):
        c = gg.centers
        return np.where((c > -0.04) & (c < -0.01), 0.3, 0.0)

    pert = S.lemma55_datum(0.5, 0.4, 0.1, 0.05, g, s=bump)
    assert pert.mass() > base.mass()
    with pytest.raises(ScaleError):
        S.lemma55_datum(0.5, 0.4, 0.1, 0.05, g, s=lambda gg: np.where(gg.centers < -0.2, 0.1, 0.0))


def test_standard_data():
    g = aligned_grid(-2, 2, 0.01)
    step = S.standard_datum(S.Riemann(0.0, 1.0), g)
    assert np.all(step.values[g.centers < 0] == 0) and np.all(step.values[g.centers > 0] == 1)
    ramp = S.standard_datum(S.MonotoneRamp(0.2, 0.9), g)
    assert np.all(np.diff(ramp.values) >= 0)
    assert total_variation(ramp) == pytest.approx(0.7, abs=1e-12)


@given(st.integers(0, 2**31 - 1), st.integers(1, 30))
def test_random_bv_reproducible(seed, n):
    a, b = S.RandomBV(seed, n), S.RandomBV(seed, n)
    g = aligned_grid(-1.5, 1.5, 0.01)
    pa, pb = S.standard_datum(a, g), S.standard_datum(b, g)
    np.testing.assert_array_equal(pa.values, pb.values)
    assert total_variation(pa) <= a.exact_tv + 1e-12
    assert 0 <= pa.values.min() and pa.values.max() <= 1


def test_random_bv_exact_tv_on_fine_grid():
    kind = S.RandomBV(7, 20)
    g = aligned_grid(-1.5, 1.5, 1e-5)
    assert total_variation(S.standard_datum(kind, g)) == pytest.approx(kind.exact_tv, rel=1e-2)


def test_datum_from_config():
    assert S.datum_from_config({"kind": "Riemann", "u_left": 0.1, "u_right": 0.9}) == S.Riemann(0.1, 0.9)
    assert S.datum_from_config({"kind": "RandomBV", "seed": 3}).n_jumps == 20
    with pytest.raises(ValueError):
        S.datum_from_config({"kind": "Nope"})


def test_grid_for_datum_covers_lookahead():
    kind = S.Riemann(0.3, 0.6)
    g = S.grid_for_datum(kind, 0.01, 1.0, 1.0, 0.5, pad=0.1)
    assert g.x_left <= -0.6 and g.x_right >= 1.6
    assert (g.boundary_left, g.boundary_right) == (0.3, 0.6)
