import numpy as np
import pytest

from fresnelwave import riesz
from fresnelwave.errors import BandViolation, QuadratureStall, ValidationError
from fresnelwave.smooth import plateau


def _compact(center, r):
    center = np.asarray(center, float)
    return lambda xi: plateau(np.linalg.norm(np.asarray(xi) - center, axis=-1) / r).astype(complex)


def test_fourier_transform_at_zero_is_mass():
    sphere = riesz.unit_sphere()
    assert riesz.surface_measure_ft(sphere, [0.0, 0.0, 0.0]).real == pytest.approx(4 * np.pi, rel=1e-9)
    patch = riesz.paraboloid_patch()
    assert riesz.surface_measure_ft(patch, [0.0, 0.0, 0.0]).real == pytest.approx(patch.mass(), rel=1e-8)


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
def test_radial_oracle_agrees_with_closed_form():
    for r in (0.5, 4.0, 17.0):
        assert riesz.sphere_radial_oracle(r) == pytest.approx(riesz.sphere_closed_form([0, 0, r])[0], abs=1e-10)


def test_quadrature_stall_is_reported():
    with pytest.raises(QuadratureStall):
        riesz.surface_measure_ft(riesz.cone_patch(), [0, 0, 80.0], tol=1e-15, max_level=0, raise_on_stall=True)


def test_restriction_extension_is_linear():
    patch = riesz.paraboloid_patch()
    pts = np.random.default_rng(0).uniform(-3, 3, (6, 3))
    f = riesz.gaussian_f_hat([0.1, 0.0, 0.0], 0.2)
    g = riesz.gaussian_f_hat([-0.2, 0.3, 0.1], 0.3)
    a, b = 2 - 1j, 0.5
    lhs = riesz.restriction_extension(patch, lambda x: a * f(x) + b * g(x), pts)
    rhs = a * riesz.restriction_extension(patch, f, pts) + b * riesz.restriction_extension(patch, g, pts)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-14)


def test_disjoint_support_is_annihilated():
    patch = riesz.paraboloid_patch()
    pts = np.random.default_rng(1).uniform(-3, 3, (4, 3))
    # the layers sit on the side xi_d > psi; a bump strictly below the surface never meets them
    out = riesz.bochner_riesz_apply(patch, 0.8, _compact([0, 0, -2.0], 0.5), pts)
    assert np.max(np.abs(out)) == 0.0


def test_dyadic_profile_vanishes_off_support():
    fam = riesz.dyadic_family(0.5)
    assert np.all(fam.profile(np.array([-1.0, -1e-3, -5.0])) == 0)
    with pytest.raises(ValidationError):
        riesz.dyadic_family(2.5)


def test_band_violation():
    cone = riesz.exact_cone(0.2)
    with pytest.raises(BandViolation):
        riesz.cone_multiplier_apply(cone, 1.0, riesz.gaussian_f_hat([0, 0, 0.1], 0.2), np.zeros((1, 3)))


def test_cone_annuli_are_local():
    cone = riesz.exact_cone(0.2)
    # supported in 0.07 <= |xi| <= 0.13, which only the two outermost annuli reach
    f = _compact(0.1 * np.array([1, 0, 1]) / np.sqrt(2), 0.015)
    pts = np.random.default_rng(2).uniform(-20, 20, (4, 3))
    app = riesz.cone_multiplier_apply(cone, 1.0, f, pts, ell_max=4, delta_floor=2.0**-6)
    mags = [np.max(np.abs(v)) for v in app.annulus_values]
    assert max(mags[:2]) > 0
    assert all(m == 0 for m in mags[3:])
    np.testing.assert_allclose(app.partial_sums[-1], app.values)


def test_corner_formula_rejects_bad_alpha():
    with pytest.raises(ValidationError):
        riesz.pentagon_corners(3.0, 2)
