import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nonlocal_traffic.errors import DomainError
from nonlocal_traffic.velocity import from_table, flux, greenshields, kruzkov, kruzkov_flux, velocity_from_config

GS = greenshields()
CUSTOM = from_table([0.0, 0.3, 1.0], [1.0, 0.9, 0.0])


@pytest.mark.parametrize("u,f", [(0.0, 0.0), (1.0, 0.0), (0.5, 0.25)])
def test_greenshields_flux(u, f):
    assert flux(GS, u) == f


def test_flux_domain():
    with pytest.raises(DomainError):
        flux(GS, 1.2)
    with pytest.raises(DomainError):
        flux(GS, -0.1)


def test_flux_endpoints_custom():
    assert flux(CUSTOM, 0.0) == 0.0
    assert flux(CUSTOM, 1.0) == 0.0  # V(1) = 0
    slow = from_table([0, 1], [1.0, 0.2])
    assert flux(slow, 1.0) == pytest.approx(0.2)


def test_kruzkov_examples():
    u = np.linspace(0, 1, 11)
    np.testing.assert_allclose(kruzkov(GS, 0.0).beta(u[1:]), u[1:] * (1 - u[1:]))
    np.testing.assert_allclose(kruzkov(GS, 1.0).beta(u[:-1]), -u[:-1] * (1 - u[:-1]))
    pair = kruzkov(GS, 0.3)
    assert pair.alpha(0.3) == 0.0 and pair.beta(0.3) == 0.0
    assert kruzkov_flux(GS, 0.4, 0.4) == 0.0
    with pytest.raises(DomainError):
        kruzkov(GS, 1.5)


@given(st.floats(0, 1), st.floats(0, 1))
def test_kruzkov_flux_symmetry(a, b):
    for vm in (GS, CUSTOM):
        assert kruzkov_flux(vm, a, b) == pytest.approx(kruzkov_flux(vm, b, a), abs=1e-15)


@given(st.floats(0.01, 0.99), st.floats(0, 1))
def test_pair_consistency_by_finite_differences(u, c):
    d = 1e-6
    if abs(u - c) < 10 * d:
        return
    pair = kruzkov(GS, c)
    fd = (pair.beta(u + d) - pair.beta(u - d)) / (2 * d)
    assert fd == pytest.approx(float(pair.beta_prime(u)), abs=1e-6)


def test_table_model_properties():
    assert CUSTOM.lip_const == pytest.approx(9 / 7)
    assert CUSTOM.max_abs_V == 1.0
    assert CUSTOM.nonnegative
    assert not from_table([0, 1], [0.5, -0.5]).nonnegative
    with pytest.raises(ValueError):
        from_table([0, 1], [0.0, 1.0])  # increasing speed law
    with pytest.raises(ValueError):
        from_table([0.2, 1], [1.0, 0.0])  # does not cover [0, 1]


def test_velocity_from_config():
    assert velocity_from_config({"family": "Greenshields"}).is_greenshields
    vm = velocity_from_config({"family": "Custom", "u": [0, 1], "V": [1, 0]})
    assert vm.f(0.5) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        velocity_from_config({"family": "Other"})
