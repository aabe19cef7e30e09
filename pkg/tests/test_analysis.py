import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polarcraft.analysis import (AnalysisError, bitwise_diagnostics, generator_matrix, inverse_matrix,
                                 learning_difficulty, noiseless_ber, noiseless_rules)
from polarcraft.channels import ChannelModel
from polarcraft.construction import (CRC_POLYNOMIALS, build_crc_polar_spec, build_pac_spec,
                                     build_polar_spec)
from polarcraft.curriculum import make_schedule
from polarcraft.decoders import MAPDecoder, SCDecoder, SCLDecoder
from polarcraft.encoding import encode_bits, message_table


def schedule(spec, kind):
    return make_schedule(spec, kind, iters_per_step=1, snr_policy=0.0)


def test_polar_4_4_rules():
    rule = noiseless_rules(build_polar_spec(4, 4))
    assert rule.supports == {1: (1, 2, 3, 4), 2: (2, 4), 3: (3, 4), 4: (4,)}
    assert [rule.difficulty(i) for i in (1, 2, 3, 4)] == [4, 2, 2, 1]


def test_polar_4_4_difficulty_traces():
    spec = build_polar_spec(4, 4)
    assert learning_difficulty(spec, schedule(spec, "l2r")).of(1) == [1, 2, 3, 4]
    assert learning_difficulty(spec, schedule(spec, "r2l")).of(1) == [0, 0, 0, 4]
    trace = learning_difficulty(spec, [(1,), (1, 2)])
    assert trace.max_per_step() == [1, 2]
    assert trace.to_csv().splitlines()[0] == "step,active_set,m1,m2,m3,m4"


def test_matrices_are_inverse():
    for spec in (build_polar_spec(16, 8), build_pac_spec(16, 8)):
        prod = (inverse_matrix(spec).astype(int) @ generator_matrix(spec).T.astype(int)) % 2
        assert np.array_equal(prod, np.eye(16, dtype=int))


@pytest.mark.parametrize("spec", [build_polar_spec(8, 4), build_polar_spec(16, 8), build_polar_spec(16, 11),
                                  build_pac_spec(8, 4), build_pac_spec(16, 8),
                                  build_crc_polar_spec(16, 8, CRC_POLYNOMIALS[3])],
                         ids=["p8", "p16", "p16k11", "pac8", "pac16", "crc16"])
def test_rules_invert_every_codeword(spec):
    rule = noiseless_rules(spec)
    u = message_table(spec.payload_len)
    x = encode_bits(u, spec)
    info_bits = rule.apply(x)
    if spec.crc_poly is None:
        assert np.array_equal(info_bits, u)
    else:
        assert np.array_equal(info_bits[:, :spec.k_m], u)


@settings(max_examples=30, deadline=None)
@given(n=st.sampled_from([4, 8, 16]), data=st.data())
def test_subcode_rules_invert(n, data):
    spec = build_polar_spec(n, data.draw(st.integers(1, n)))
    active = data.draw(st.lists(st.sampled_from(spec.info_set), min_size=1, unique=True))
    sub = spec.with_info_set(sorted(active))
    rule = noiseless_rules(spec, active)
    u = message_table(len(active))
    assert np.array_equal(rule.apply(encode_bits(u, sub)), u)


@pytest.mark.parametrize("n,k", [(4, 4), (8, 4), (16, 8), (32, 16), (64, 22)])
def test_l2r_difficulty_grows_by_at_most_one(n, k):
    spec = build_polar_spec(n, k)
    trace = learning_difficulty(spec, schedule(spec, "l2r"))
    for values in trace.values.values():
        assert all(b - a <= 1 for a, b in zip(values, values[1:]))
    full = noiseless_rules(spec)
    for kind in ("r2l", "n2c", "c2n", "random"):
        other = learning_difficulty(spec, schedule(spec, kind))
        assert {i: v[-1] for i, v in other.values.items()} == {i: full.difficulty(i) for i in spec.info_set}


def test_rule_validation():
    spec = build_polar_spec(8, 4)
    with pytest.raises(AnalysisError):
        noiseless_rules(spec, [1])
    with pytest.raises(AnalysisError):
        noiseless_rules(spec, [])
    assert noiseless_rules(spec, [8]).to_dict() == {"active_set": [8], "supports": {"8": [8]}}


def test_noiseless_ber_of_classical_decoders():
    for spec in (build_polar_spec(16, 8), build_pac_spec(16, 8)):
        assert noiseless_ber(SCDecoder(spec), spec, 1000) == 0.0
        assert noiseless_ber(SCLDecoder(spec, 4), spec, 1000) == 0.0
        assert noiseless_ber(MAPDecoder(spec), spec, 1000) == 0.0


def test_bitwise_diagnostics_partition_bler():
    spec = build_polar_spec(8, 4)
    rep = bitwise_diagnostics(SCDecoder(spec), spec, ChannelModel.from_snr(0.0), 20000, seed=1)
    assert np.all(rep.conditional_share >= 0)
    assert rep.conditional_share.sum() == pytest.approx(rep.bler, abs=1e-15)
    assert np.all(rep.marginal_ber <= rep.bler)
    # SC on this code makes most of its first errors on the least reliable bit
    assert np.argmax(rep.conditional_share) == 0
    lines = rep.to_csv().splitlines()
    assert lines[0] == "bit_index,marginal_ber,conditional_bler_share"
    assert [ln.split(",")[0] for ln in lines[1:]] == ["4", "6", "7", "8"]
    again = bitwise_diagnostics(SCDecoder(spec), spec, ChannelModel.from_snr(0.0), 20000, seed=1)
    assert np.array_equal(rep.marginal_ber, again.marginal_ber)
