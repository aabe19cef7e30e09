import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import crc_bits, kron_generator, toeplitz_precoder
from polarcraft.construction import (CRC_POLYNOMIALS, build_crc_polar_spec, build_pac_spec,
                                     build_polar_spec)
from polarcraft.encoding import (EncodingError, crc_attach, crc_check, crc_remainder, embed, encode,
                                 encode_bits, extract, message_table, modulate, pac_precode,
                                 pac_unprecode, payload_from_source, plotkin, plotkin_tree,
                                 source_bits)

lengths = st.sampled_from([2, 4, 8, 16, 32, 64])


def bits(n):
    return st.lists(st.integers(0, 1), min_size=n, max_size=n).map(lambda b: np.array(b, dtype=np.uint8))


def test_plotkin_examples():
    assert plotkin([1, 0], [1, 1]).tolist() == [0, 1, 1, 1]
    assert plotkin_tree([0, 1, 0, 0]).tolist() == [1, 1, 0, 0]
    with pytest.raises(EncodingError):
        plotkin([1], [1, 0])
    with pytest.raises(EncodingError):
        plotkin_tree([1, 0, 1])


@given(n=lengths, data=st.data())
def test_plotkin_tree_matches_kronecker_oracle(n, data):
    m = data.draw(bits(n))
    assert plotkin_tree(m).tolist() == ((m.astype(np.int64) @ kron_generator(n)) % 2).tolist()


@given(n=lengths, data=st.data())
def test_plotkin_tree_is_involution_and_linear(n, data):
    a, b = data.draw(bits(n)), data.draw(bits(n))
    assert np.array_equal(plotkin_tree(plotkin_tree(a)), a)
    assert np.array_equal(plotkin_tree(a ^ b), plotkin_tree(a) ^ plotkin_tree(b))


def test_plotkin_tree_batches():
    m = message_table(4)
    assert np.array_equal(plotkin_tree(m), np.stack([plotkin_tree(r) for r in m]))


def test_polar_4_2_closed_form():
    spec = build_polar_spec(4, 2, override=(2, 4))
    for m2, m4 in itertools.product((0, 1), repeat=2):
        x = encode_bits([m2, m4], spec)
        assert x.tolist() == [m2 ^ m4, m2 ^ m4, m4, m4]
    assert encode([1, 0], spec).tolist() == [-1.0, -1.0, 1.0, 1.0]


@given(n=lengths, data=st.data())
def test_embed_extract_round_trip(n, data):
    k = data.draw(st.integers(1, n))
    spec = build_polar_spec(n, k)
    u = data.draw(bits(k))
    m = embed(u, spec)
    assert np.array_equal(extract(m, spec), u)
    assert not m[spec.frozen_mask.astype(bool)].any()
    with pytest.raises(EncodingError):
        embed(np.zeros(k + 1, dtype=np.uint8), spec)


def test_embed_example():
    spec = build_polar_spec(8, 4)
    assert embed([1, 0, 1, 1], spec).tolist() == [0, 0, 0, 1, 0, 0, 1, 1]


def test_pac_examples():
    spec = build_pac_spec(8, 4)
    kernel = (1, 0, 1, 1, 0, 1, 1)
    impulse = pac_precode([1, 0, 0, 0, 0, 0, 0, 0], kernel)
    assert impulse.tolist() == [1, 0, 1, 1, 0, 1, 1, 0]
    assert pac_precode([1, 0, 1], (1,)).tolist() == [1, 0, 1]
    assert spec.kernel == kernel
    with pytest.raises(EncodingError):
        pac_precode([1, 0], (0, 1))


@given(n=lengths, data=st.data())
def test_pac_precode_matches_toeplitz_and_inverts(n, data):
    kernel = (1, 0, 1, 1, 0, 1, 1)
    m = data.draw(bits(n))
    v = pac_precode(m, kernel)
    assert v.tolist() == ((m.astype(np.int64) @ toeplitz_precoder(n, kernel)) % 2).tolist()
    assert np.array_equal(pac_unprecode(v, kernel), m)


def test_crc_example_and_convention():
    # x^3 + x + 1 as 0b1011; u = 1 + x^2 + x^3
    assert crc_remainder([1, 0, 1, 1], 0b1011).tolist() == [1, 0, 0]
    assert crc_attach([1, 0, 1, 1], 0b1011).tolist() == [1, 0, 1, 1, 1, 0, 0]
    assert crc_check([1, 0, 1, 1, 1, 0, 0], 0b1011)


@given(data=st.data())
def test_crc_matches_long_division(data):
    poly = data.draw(st.sampled_from(list(CRC_POLYNOMIALS.values())))
    u = data.draw(st.lists(st.integers(0, 1), min_size=1, max_size=40))
    assert crc_remainder(u, poly).tolist() == crc_bits(u, poly)


@given(data=st.data())
def test_crc_round_trip_and_single_flip_detection(data):
    poly = data.draw(st.sampled_from(list(CRC_POLYNOMIALS.values())))
    u = np.array(data.draw(st.lists(st.integers(0, 1), min_size=1, max_size=40)), dtype=np.uint8)
    word = crc_attach(u, poly)
    assert crc_check(word, poly)
    pos = data.draw(st.integers(0, word.size - 1))
    word[pos] ^= 1
    assert not crc_check(word, poly)


def test_crc_polar_encoding_pipeline():
    spec = build_crc_polar_spec(16, 11, CRC_POLYNOMIALS[8])
    rng = np.random.default_rng(3)
    u = rng.integers(0, 2, size=(20, spec.payload_len), dtype=np.uint8)
    m = source_bits(u, spec)
    assert crc_check(extract(m, spec), spec.crc_poly).all()
    assert np.array_equal(payload_from_source(m, spec), u)
    assert np.array_equal(encode_bits(u, spec), plotkin_tree(m))


def test_modulate_and_message_table():
    assert modulate([0, 1]).tolist() == [1.0, -1.0]
    t = message_table(3)
    assert t.shape == (8, 3)
    assert t[1].tolist() == [0, 0, 1] and t[4].tolist() == [1, 0, 0]


def test_rejects_non_binary():
    with pytest.raises(EncodingError):
        plotkin_tree([0, 2])
