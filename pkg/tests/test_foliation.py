import numpy as np
import pytest

from fresnelwave.errors import SupportViolation
from fresnelwave.foliation import SlabBump, block_weights, foliation_apply
from fresnelwave.meshing import classify_and_mesh, singular_points_xi


@pytest.mark.parametrize("delta", [0.3, 0.05, 1e-3])
def test_block_split_reconstructs_weight(delta):
    t = np.geomspace(delta * 1e-3, 0.3, 400)
    J, A, B, C = block_weights(t, delta)
    assert 2.0**J < delta
    total = A + sum(B.values()) + sum(C.values())
    np.testing.assert_allclose(total, t / (t**2 + delta**2), rtol=1e-12)


def test_support_on_singular_ball_is_rejected(biaxial):
    z = singular_points_xi(biaxial)[0]
    f = SlabBump(biaxial, tuple(z), 0.2, 0.3)
    mesh = classify_and_mesh(biaxial, 0.0, h=0.3, t0=0.3, curvatures=False)
    with pytest.raises(SupportViolation):
        foliation_apply(biaxial, f, 0.05, 0.3, 8, points=np.zeros((1, 3)), mesh=mesh)
