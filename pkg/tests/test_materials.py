import pickle
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from fresnelwave.errors import ValidationError
from fresnelwave.materials import (
    INF,
    AnisotropyClass,
    ExponentTriple,
    MaterialTensors,
    as_exponent,
    classify_anisotropy,
    normalize,
    validate_exponents,
)


@pytest.mark.parametrize("eps", [(1, 2), (1, -2, 3), (1, 0, 3), (1, np.nan, 3)])
def test_rejects_bad_permittivity(eps):
    with pytest.raises(ValidationError):
        MaterialTensors(eps)


def test_rejects_zero_frequency():
    with pytest.raises(ValidationError):
        MaterialTensors((1, 2, 3), omega=0)


def test_flag_parsing_and_dict_round_trip():
    m = MaterialTensors.from_flags("1,5,15", "1,2,1", "2")
    assert m == MaterialTensors.from_dict(m.to_dict())
    with pytest.raises(ValidationError):
        MaterialTensors.from_flags("1,five,15")


def test_anisotropy_classes():
    assert classify_anisotropy(MaterialTensors((1, 5, 15))) is AnisotropyClass.FULL
    assert classify_anisotropy(MaterialTensors((1, 1, 15))) is AnisotropyClass.PARTIAL
    assert classify_anisotropy(MaterialTensors((2, 2, 2), (1, 1, 1))) is AnisotropyClass.ISOTROPIC


def test_exponent_parsing_is_exact():
    assert as_exponent("1.2") == Fraction(6, 5)
    assert as_exponent("inf") is INF
    assert as_exponent(float("inf")) is INF
    assert pickle.loads(pickle.dumps(INF)) is INF
    with pytest.raises(ValidationError):
        as_exponent("0.5")
    with pytest.raises(ValidationError):
        as_exponent("abc")


def test_normalize_requires_full_anisotropy():
    with pytest.raises(ValidationError):
        normalize(MaterialTensors((1, 1, 15)))


def test_admissible_triple():
    rep = validate_exponents(ExponentTriple("1.2", 3, 6))
    assert rep.admissible, rep.conditions


def test_inadmissible_q():
    rep = validate_exponents(ExponentTriple("1.2", 3, 4))
    assert not rep.conditions["inv_q_lt_1_4"]
    assert not rep.admissible


def test_excluded_pair():
    rep = validate_exponents(ExponentTriple(1, INF, INF))
    assert not rep.conditions["pair_p2_q_not_excluded"]


positive = st.floats(0.2, 20.0)


@settings(max_examples=50, deadline=None)
@given(st.tuples(positive, positive, positive), st.tuples(positive, positive, positive), st.floats(0.3, 3.0))
def test_normalization_coordinates_round_trip(eps, mu, omega):
    m = MaterialTensors(eps, mu, omega)
    assume(classify_anisotropy(m) is AnisotropyClass.FULL)
    nm = normalize(m)
    x = np.array([[0.3, -1.1, 2.0]])
    np.testing.assert_allclose(nm.to_xi(nm.to_eta(x)), x, rtol=1e-12)
