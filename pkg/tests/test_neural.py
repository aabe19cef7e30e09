import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polarcraft.channels import ChannelModel, ReceivedWord, derive_rng
from polarcraft.construction import CRC_POLYNOMIALS, build_crc_polar_spec, build_polar_spec
from polarcraft.encoding import encode, source_bits
from polarcraft.neural import (CrispDecoder, NeuralError, checkpoint_bytes, crisp_forward, crisp_loss,
                               crisp_loss_and_grads, gru_cell, hard_decide, init_params, layer_flops,
                               load_checkpoint, load_params, model_flops, save_params, sigmoid)


def small_problem(seed, n=4, k=2, h=8, layers=2, batch=5):
    spec = build_polar_spec(n, k)
    rng = np.random.default_rng(seed)
    params = init_params(n, h, layers, rng=rng)
    for name in params.names():
        # nonzero biases so their gradients are exercised too
        params.arrays[name] = params[name] + 0.1 * rng.standard_normal(params[name].shape)
    u = rng.integers(0, 2, (batch, spec.k), dtype=np.uint8)
    m = source_bits(u, spec)
    y = encode(u, spec) + rng.normal(0, 0.8, (batch, n))
    return spec, params, y, m


def five_point(f, x, h=1e-3):
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h)


def numeric_grads(spec, params, y, m, active=None):
    out = {}
    for name in params.names():
        arr = params.arrays[name]
        g = np.empty_like(arr)
        for idx in np.ndindex(arr.shape):
            base = arr[idx]

            def f(v):
                arr[idx] = v
                return crisp_loss(crisp_forward(y, spec, params, "teacher", m), m, active)

            g[idx] = five_point(f, base)
            arr[idx] = base
        out[name] = g
    return out


@pytest.mark.parametrize("seed", range(10))
def test_gradients_match_finite_differences(seed):
    spec, params, y, m = small_problem(seed)
    trace = crisp_forward(y, spec, params, "teacher", m)
    loss, grads = crisp_loss_and_grads(trace, m)
    assert loss == pytest.approx(crisp_loss(trace, m), rel=1e-14)
    num = numeric_grads(spec, params, y, m)
    num_all = np.concatenate([num[k].ravel() for k in params.names()])
    ana_all = np.concatenate([grads[k].ravel() for k in params.names()])
    rel = np.abs(ana_all - num_all) / np.maximum(np.abs(ana_all) + np.abs(num_all), 1e-8)
    assert rel.max() < 1e-4


def test_gradients_with_partial_active_set_and_three_layers():
    spec = build_polar_spec(4, 3)
    rng = np.random.default_rng(1)
    params = init_params(4, 5, 3, head_dim=3, rng=rng)
    m = source_bits(rng.integers(0, 2, (3, 3), dtype=np.uint8), spec)
    y = rng.normal(0, 1, (3, 4))
    active = spec.info_set[1:]
    _, grads = crisp_loss_and_grads(crisp_forward(y, spec, params, "teacher", m), m, active)
    num = numeric_grads(spec, params, y, m, active)
    for name in params.names():
        assert np.allclose(grads[name], num[name], rtol=1e-4, atol=1e-9), name


def test_forward_matches_textbook_cell():
    spec, params, y, m = small_problem(3, n=8, k=4, h=6, layers=2, batch=4)
    trace = crisp_forward(y, spec, params, "teacher", m)
    hs = [np.zeros((4, 6)) for _ in range(2)]
    prev = np.zeros(4)
    probs = []
    for t in range(8):
        x = np.concatenate([(1 - 2 * prev)[:, None], y], axis=1)
        for l in range(2):
            hs[l] = gru_cell(hs[l], x, params, l)
            x = hs[l]
        q = np.tanh(x @ params["head.W1"].T + params["head.b1"])
        if t in spec.info_positions:
            probs.append(sigmoid(q @ params["head.W2"].T + params["head.b2"])[:, 0])
        prev = m[:, t].astype(np.float64)
    assert np.allclose(trace.p, np.stack(probs, axis=1), atol=1e-13)


def test_zero_parameters_give_one_half():
    spec = build_polar_spec(8, 4)
    params = init_params(8, 4, 2, zero=True)
    trace = crisp_forward(np.ones((3, 8)), spec, params, "student")
    assert np.all(trace.p == 0.5)
    # p = 0.5 is not > 0.5, so every decision is zero
    assert not hard_decide(trace).any()
    m = np.zeros((3, 8), dtype=np.uint8)
    assert crisp_loss(trace, m) == pytest.approx(0.25)


def test_batch_rows_are_independent():
    spec, params, y, m = small_problem(4, n=8, k=4, batch=6)
    full = crisp_forward(y, spec, params, "student").p
    rows = np.concatenate([crisp_forward(y[i], spec, params, "student").p for i in range(6)])
    assert np.allclose(full, rows, atol=1e-14)


def test_student_equals_teacher_on_own_decisions():
    spec, params, y, _ = small_problem(5, n=8, k=4, batch=6)
    student = crisp_forward(y, spec, params, "student")
    teacher = crisp_forward(y, spec, params, "teacher", student.feedback_bits)
    assert np.array_equal(student.p, teacher.p)


def test_student_active_set_masks_feedback():
    spec, params, y, _ = small_problem(6, n=8, k=4, batch=6)
    trace = crisp_forward(y, spec, params, "student", active_set=[spec.info_set[0]])
    fed = trace.feedback_bits
    others = [i - 1 for i in spec.info_set[1:]]
    assert not fed[:, others].any()


def test_forward_validation():
    spec, params, y, m = small_problem(0)
    with pytest.raises(NeuralError):
        crisp_forward(y, spec, params, "teacher")
    with pytest.raises(NeuralError):
        crisp_forward(y, spec, params, "beam")
    with pytest.raises(NeuralError):
        crisp_forward(np.zeros((2, 8)), spec, params, "student")
    trace = crisp_forward(y, spec, params, "teacher", m)
    with pytest.raises(NeuralError):
        crisp_loss(trace, m, active_set=[1])
    with pytest.raises(NeuralError):
        crisp_loss(trace, m, reduction="max")


def test_sum_reduction_scales_mean():
    spec, params, y, m = small_problem(7)
    trace = crisp_forward(y, spec, params, "teacher", m)
    lm, gm = crisp_loss_and_grads(trace, m)
    ls, gs = crisp_loss_and_grads(trace, m, reduction="sum")
    scale = y.shape[0] * spec.k
    assert ls == pytest.approx(lm * scale)
    assert np.allclose(gs["l0.W_z"], gm["l0.W_z"] * scale)


def test_param_and_flop_counts():
    params = init_params(8, 64, 2)
    h, d = 64, 9
    expected = 3 * h * (d + h) + 3 * h + 3 * h * (2 * h) + 3 * h + h * h + h + h + 1
    assert params.param_count() == expected
    assert sum(a.size for a in params.arrays.values()) == expected
    assert layer_flops(8, 64) == 8 * (2 * 64 * 9 + 6 * 64 * 64)
    assert layer_flops(8, 64, convention="full") == 8 * (6 * 64 * (9 + 64) + 10 * 64)
    assert model_flops(params) == layer_flops(8, 64) + layer_flops(8, 64, 64) + 8 * 2 * 64 * 65
    with pytest.raises(NeuralError):
        layer_flops(8, 64, convention="other")


def test_init_params_bounds():
    params = init_params(8, 16, 2, rng=np.random.default_rng(0))
    w = params["l0.W_z"]
    assert np.abs(w).max() <= 1 / np.sqrt(w.shape[1])
    assert not params["l1.b_h"].any()
    bad = params.copy()
    bad.arrays["head.b2"] = np.zeros(2)
    with pytest.raises(NeuralError):
        bad.validate()


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2 ** 31), n=st.sampled_from([4, 8]), h=st.integers(1, 9),
       layers=st.integers(1, 3))
def test_checkpoint_round_trip_is_bit_exact(tmp_path_factory, seed, n, h, layers):
    rng = np.random.default_rng(seed)
    params = init_params(n, h, layers, rng=rng)
    params.arrays["head.b2"] = np.array([rng.standard_normal() * 1e-300])
    spec = build_crc_polar_spec(n, n - 1, CRC_POLYNOMIALS[3]) if n == 8 else build_polar_spec(n, 2)
    path = tmp_path_factory.mktemp("ck") / "ck.json"
    save_params(path, params, spec, seed=seed, curriculum_step=2)
    ck = load_checkpoint(path)
    assert ck.spec == spec and ck.seed == seed and ck.curriculum_step == 2
    for name in params.names():
        assert ck.params[name].tobytes() == params[name].tobytes()
    assert checkpoint_bytes(ck.params, ck.spec, ck.seed, ck.curriculum_step) == path.read_bytes()


def test_checkpoint_rejects_bad_files(tmp_path):
    params = init_params(4, 3, 1)
    path = save_params(tmp_path / "ok.json", params)
    doc = json.loads(path.read_text())
    cases = {
        "garbage": "not json",
        "version": json.dumps({**doc, "format_version": 99}),
        "missing": json.dumps({k: v for k, v in doc.items() if k != "arrays"}),
    }
    short = json.loads(path.read_text())
    short["arrays"]["head.b2"]["shape"] = [2]
    cases["shape"] = json.dumps(short)
    for name, text in cases.items():
        p = tmp_path / f"{name}.json"
        p.write_text(text)
        with pytest.raises(NeuralError):
            load_params(p)


def test_crisp_decoder_handle():
    spec = build_polar_spec(8, 4)
    params = init_params(8, 4, 1, rng=np.random.default_rng(0))
    dec = CrispDecoder(spec, params, batch_size=3)
    y = encode(derive_rng(0).integers(0, 2, (7, 4), dtype=np.uint8), spec)
    out = dec.decode(ReceivedWord(y), ChannelModel(sigma=0.0))
    assert out.shape == (7, 4)
    assert np.array_equal(out, hard_decide(crisp_forward(y, spec, params, "student")))
    with pytest.raises(NeuralError):
        CrispDecoder(build_polar_spec(16, 4), params)
