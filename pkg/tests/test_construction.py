import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import bhattacharyya
from polarcraft.construction import (CRC_POLYNOMIALS, CodeSpec, ConstructionError, Family,
                                     bhattacharyya_table, bits_to_poly, build_crc_polar_spec,
                                     build_pac_spec, build_polar_spec, n2c_order, poly_to_bits,
                                     rm_order)

lengths = st.sampled_from([2, 4, 8, 16, 32, 64])


def test_polar_8_4_fixture():
    spec = build_polar_spec(8, 4, z0=0.5)
    assert spec.info_set == (4, 6, 7, 8)
    assert spec.reliability_order == (1, 2, 3, 5, 4, 6, 7, 8)


def test_polar_4_2_default_and_override():
    assert build_polar_spec(4, 2).info_set == (3, 4)
    z = bhattacharyya_table(4).z_values
    assert np.allclose(z, (0.9375, 0.5625, 0.4375, 0.0625))
    assert build_polar_spec(4, 2, override=(2, 4)).info_set == (2, 4)


def test_full_rate_and_small_cases():
    assert build_polar_spec(2, 2).info_set == (1, 2)
    for n in (2, 4, 8, 16, 32, 64):
        for z0 in (0.1, 0.5, 0.9):
            assert build_polar_spec(n, n, z0).info_set == tuple(range(1, n + 1))


@given(n=lengths, z0=st.floats(0.01, 0.99))
def test_z_values_match_recursive_oracle(n, z0):
    assert np.allclose(bhattacharyya_table(n, z0).z_values, bhattacharyya(n, z0))


@given(n=lengths, data=st.data())
def test_info_set_is_top_k_and_nested(n, data):
    k = data.draw(st.integers(1, n))
    spec = build_polar_spec(n, k)
    assert len(spec.info_set) == k
    assert set(spec.info_set) == set(spec.reliability_order[n - k:])
    if k > 1:
        assert set(build_polar_spec(n, k - 1).info_set) < set(spec.info_set)


def test_ties_go_to_larger_index():
    # z0 this small underflows m2, m3 and m4 to exactly 0, a three-way tie
    table = bhattacharyya_table(4, 1e-300)
    assert table.z_values[1:] == (0.0, 0.0, 0.0)
    assert table.order == (1, 2, 3, 4)
    assert build_polar_spec(4, 1, 1e-300).info_set == (4,)


def test_invalid_parameters():
    with pytest.raises(ConstructionError):
        build_polar_spec(6, 3)
    with pytest.raises(ConstructionError):
        build_polar_spec(8, 0)
    with pytest.raises(ConstructionError):
        build_polar_spec(8, 9)
    with pytest.raises(ConstructionError):
        build_polar_spec(8, 2, override=(1, 9))
    with pytest.raises(ConstructionError):
        build_polar_spec(8, 2, override=(1,))


def test_rm_profile_and_pac():
    order = rm_order(8)
    weights = [bin(i - 1).count("1") for i in order]
    assert weights == sorted(weights)
    spec = build_pac_spec(32, 16)
    assert spec.family is Family.PAC
    assert all(bin(i - 1).count("1") >= 3 for i in spec.info_set)
    assert spec.kernel == (1, 0, 1, 1, 0, 1, 1)
    with pytest.raises(ConstructionError):
        build_pac_spec(8, 4, kernel=(0, 1))


def test_crc_polar_spec():
    spec = build_crc_polar_spec(32, 16, CRC_POLYNOMIALS[8])
    assert spec.k_m == 8 and spec.crc_degree == 8 and spec.payload_len == 8
    assert spec.info_set == build_polar_spec(32, 16).info_set
    with pytest.raises(ConstructionError):
        build_crc_polar_spec(8, 3, CRC_POLYNOMIALS[8])


def test_n2c_order():
    assert n2c_order(build_polar_spec(8, 4)) == (4, 6, 7, 8)
    with pytest.raises(ConstructionError):
        n2c_order(build_pac_spec(8, 4))


def test_polynomial_helpers():
    assert poly_to_bits(0b1011) == (1, 1, 0, 1)
    assert bits_to_poly((1, 1, 0, 1)) == 0b1011


@settings(max_examples=30)
@given(n=lengths, data=st.data())
def test_spec_json_round_trip(n, data):
    k = data.draw(st.integers(1, n))
    family = data.draw(st.sampled_from(["polar", "pac", "crc"]))
    if family == "polar":
        spec = build_polar_spec(n, k)
    elif family == "pac":
        spec = build_pac_spec(n, k)
    else:
        if k <= 3:
            return
        spec = build_crc_polar_spec(n, k, CRC_POLYNOMIALS[3])
    again = CodeSpec.from_json(spec.to_json())
    assert again == spec
    assert again.to_json() == spec.to_json()


def test_frozen_mask_and_subcode():
    spec = build_polar_spec(8, 4)
    assert spec.frozen_mask.tolist() == [1, 1, 1, 0, 1, 0, 0, 0]
    sub = spec.with_info_set([6, 8])
    assert sub.info_set == (6, 8) and sub.k == 2


def test_pac_8_4_agrees_with_polar_construction():
    assert build_pac_spec(8, 4).info_set == build_polar_spec(8, 4, z0=0.5).info_set == (4, 6, 7, 8)


def test_construction_is_deterministic():
    assert build_polar_spec(64, 22) == build_polar_spec(64, 22)
    assert build_pac_spec(64, 22).to_json() == build_pac_spec(64, 22).to_json()


def test_small_codes_agree_with_gaussian_approximation():
    from oracles import ga_info_set
    for snr in (-2.0, 0.0, 2.0, 4.0):
        assert ga_info_set(8, 4, snr) == build_polar_spec(8, 4).info_set
    # at n = 32 the two constructions part ways at moderate design SNR
    assert ga_info_set(32, 16, 4.5) == build_polar_spec(32, 16, z0=0.1).info_set
    assert ga_info_set(32, 16, 4.5) != build_polar_spec(32, 16).info_set
