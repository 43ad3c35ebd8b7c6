import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fresnelwave import symbols
from fresnelwave.errors import IdentityViolation
from fresnelwave.materials import MaterialTensors

positive = st.floats(0.2, 20.0)
materials = st.builds(MaterialTensors, st.tuples(positive, positive, positive),
                      st.tuples(positive, positive, positive), st.floats(0.3, 3.0))


def test_identities_for_fixed_material(biaxial):
    rep = symbols.identity_suite(biaxial, 2000, rng_seed=0)
    assert rep.passed


def test_perturbed_coupling_is_detected(biaxial):
    with pytest.raises(IdentityViolation):
        symbols.identity_suite(biaxial, 200, rng_seed=0, perturb=(0, 1, 1e-3))


def test_curl_symbol_is_antisymmetric():
    xi = np.random.default_rng(0).standard_normal((10, 3))
    C = symbols.curl_symbol(xi)
    np.testing.assert_allclose(C, -np.swapaxes(C, -1, -2))
    np.testing.assert_allclose(np.einsum("nij,nj->ni", C, xi), 0, atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(materials, st.integers(0, 2**31))
def test_dispersion_is_even(m, seed):
    xi = np.random.default_rng(seed).standard_normal((8, 3))
    np.testing.assert_allclose(symbols.dispersion(m, xi), symbols.dispersion(m, -xi), rtol=1e-12, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(materials, st.integers(0, 2**31))
def test_gradient_and_hessian_match_differences(m, seed):
    xi = np.random.default_rng(seed).standard_normal((4, 3))
    h = 1e-5
    g = symbols.dispersion_gradient(m, xi)
    H = symbols.dispersion_hessian(m, xi)
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        fd = (symbols.dispersion(m, xi + e) - symbols.dispersion(m, xi - e)) / (2 * h)
        np.testing.assert_allclose(g[:, k], fd, rtol=1e-6, atol=1e-6 * np.abs(g).max())
        fd2 = (symbols.dispersion_gradient(m, xi + e) - symbols.dispersion_gradient(m, xi - e)) / (2 * h)
        np.testing.assert_allclose(H[:, :, k], fd2, rtol=1e-6, atol=1e-6 * np.abs(H).max())
    np.testing.assert_allclose(H, np.swapaxes(H, -1, -2))
