import numpy as np
import pytest

from fresnelwave import geometry, symbols
from fresnelwave.errors import LevelTooFar, OutOfChart, ValidationError
from fresnelwave.materials import normalize
from fresnelwave.meshing import classify_and_mesh, default_singular_radius, singular_points_xi


def test_four_singular_points(biaxial):
    sp = geometry.singular_points(normalize(biaxial))
    assert len(sp.points) == 4
    assert sp.residual_N < 1e-10 and sp.residual_grad < 1e-10


def test_hessian_signature(biaxial):
    assert all(s.signature_p == (2, 1) for s in geometry.hessian_signature(normalize(biaxial)))


def test_circle_outside_window_is_rejected(biaxial):
    nm = normalize(biaxial)
    lo, hi = geometry.hamiltonian_circle_window(nm)
    geometry.hamiltonian_circle(nm, 0.5 * (lo + hi))
    with pytest.raises(OutOfChart):
        geometry.hamiltonian_circle(nm, 5.0)


def test_implicit_mean_curvature_matches_chart(biaxial):
    nm = normalize(biaxial)
    d = geometry.darboux_chart(nm, 3.0, 10.0)
    K, Km = geometry.implicit_curvatures(nm.as_material(), d.point)
    assert K == pytest.approx(d.gauss_K, rel=1e-8)
    assert abs(Km) == pytest.approx(abs(d.mean_Km), rel=1e-8)


@pytest.fixture(scope="module")
def coarse_mesh(biaxial):
    return classify_and_mesh(biaxial, 0.0, h=0.25)


def test_mesh_lies_on_surface(biaxial, coarse_mesh):
    p = symbols.dispersion(biaxial, coarse_mesh.vertices)
    g = np.linalg.norm(symbols.dispersion_gradient(biaxial, coarse_mesh.vertices), axis=1)
    assert np.max(np.abs(p) / g) < 1e-8
    assert coarse_mesh.area() > 0
    assert np.all(coarse_mesh.weights >= 0)


def test_mesh_regions(biaxial, coarse_mesh):
    regions = set(coarse_mesh.regions)
    assert regions == {"S1_elliptic", "S2_hamiltonian_band", "S3_singular_ball"}
    z = singular_points_xi(biaxial)
    near = np.min(np.linalg.norm(coarse_mesh.vertices[:, None] - z[None], axis=-1), axis=1)
    tagged = coarse_mesh.regions == "S3_singular_ball"
    assert np.all(near[tagged] < default_singular_radius(biaxial) + 1e-12)


def test_mesh_rejects_bad_parameters(biaxial):
    with pytest.raises(ValidationError):
        classify_and_mesh(biaxial, 0.0, h=-1)
    with pytest.raises(LevelTooFar):
        classify_and_mesh(biaxial, 1e3, h=0.3)
