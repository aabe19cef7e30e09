"""Sequential GRU bit decoder with hand-written backpropagation through time.

The network reads the whole received word at every step together with the
previous bit, ``x_i = [1 - 2 b_{i-1}, y]``, runs a stack of GRU layers and
emits ``p_i = P(m_i = 1 | y, m_<i)`` through a small fully connected head at
the information indices only.

Everything is float64 numpy so finite-difference gradient checks are sharp.
"""
from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Optional

import numpy as np

from .channels import ChannelModel, ReceivedWord
from .construction import CodeSpec, Family

FORMAT_VERSION = 1
GATES = ("z", "r", "h")


class NeuralError(ValueError):
    pass


def sigmoid(x):
    # exp overflow for very negative x gives inf, and 1/inf = 0 is the right limit
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


@dataclass
class GruDecoderParams:
    """Named float64 arrays of a ``num_layers``-deep GRU plus a one-hidden-layer head.

    Layer ``l`` owns ``l{l}.W_g`` of shape (h, in_l + h) and ``l{l}.b_g`` for
    g in z, r, h; the head owns ``head.W1`` (h_fc, h), ``head.b1``,
    ``head.W2`` (1, h_fc) and ``head.b2``.
    """

    n: int
    hidden_dim: int
    num_layers: int
    head_dim: int
    arrays: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def input_dim(self) -> int:
        return self.n + 1

    def layer_input_dim(self, layer: int) -> int:
        return self.input_dim if layer == 0 else self.hidden_dim

    def expected_shapes(self) -> Dict[str, tuple]:
        h = self.hidden_dim
        shapes = {}
        for l in range(self.num_layers):
            cols = self.layer_input_dim(l) + h
            for g in GATES:
                shapes[f"l{l}.W_{g}"] = (h, cols)
                shapes[f"l{l}.b_{g}"] = (h,)
        shapes["head.W1"] = (self.head_dim, h)
        shapes["head.b1"] = (self.head_dim,)
        shapes["head.W2"] = (1, self.head_dim)
        shapes["head.b2"] = (1,)
        return shapes

    def validate(self):
        if min(self.n, self.hidden_dim, self.num_layers, self.head_dim) < 1:
            raise NeuralError("all dimensions must be positive")
        shapes = self.expected_shapes()
        if set(shapes) != set(self.arrays):
            raise NeuralError(f"parameter names differ: {sorted(set(shapes) ^ set(self.arrays))}")
        for name, shape in shapes.items():
            if self.arrays[name].shape != shape:
                raise NeuralError(f"{name} has shape {self.arrays[name].shape}, expected {shape}")

    def names(self):
        return list(self.expected_shapes())

    def param_count(self) -> int:
        return sum(int(np.prod(s)) for s in self.expected_shapes().values())

    def copy(self) -> "GruDecoderParams":
        return GruDecoderParams(self.n, self.hidden_dim, self.num_layers, self.head_dim,
                                {k: v.copy() for k, v in self.arrays.items()})

    def zeros_like(self) -> "GruDecoderParams":
        return GruDecoderParams(self.n, self.hidden_dim, self.num_layers, self.head_dim,
                                {k: np.zeros_like(v) for k, v in self.arrays.items()})

    def __getitem__(self, name):
        return self.arrays[name]


def init_params(n: int, hidden_dim: int = 64, num_layers: int = 2, head_dim: Optional[int] = None,
                rng: Optional[np.random.Generator] = None, zero: bool = False) -> GruDecoderParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and zero biases; ``zero`` gives all zeros."""
    params = GruDecoderParams(n, hidden_dim, num_layers, head_dim or hidden_dim)
    rng = rng if rng is not None else np.random.default_rng(0)
    for name, shape in params.expected_shapes().items():
        if zero or ".b" in name:
            params.arrays[name] = np.zeros(shape)
        else:
            bound = 1.0 / np.sqrt(shape[1])
            params.arrays[name] = rng.uniform(-bound, bound, size=shape)
    params.validate()
    return params


def gru_cell(h_prev, x, params: GruDecoderParams, layer: int):
    """One GRU update for a single layer; works on vectors or (B, .) batches."""
    h_prev = np.asarray(h_prev, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    W = {g: params[f"l{layer}.W_{g}"] for g in GATES}
    b = {g: params[f"l{layer}.b_{g}"] for g in GATES}
    d_in = params.layer_input_dim(layer)
    if x.shape[-1] != d_in or h_prev.shape[-1] != params.hidden_dim:
        raise NeuralError(f"layer {layer} expects input {d_in} and state {params.hidden_dim}")
    xh = np.concatenate([x, h_prev], axis=-1)
    z = sigmoid(xh @ W["z"].T + b["z"])
    r = sigmoid(xh @ W["r"].T + b["r"])
    c = np.tanh(np.concatenate([x, r * h_prev], axis=-1) @ W["h"].T + b["h"])
    return (1.0 - z) * h_prev + z * c


@dataclass
class ForwardTrace:
    """Cached activations of one batched forward pass.

    Per layer the arrays are (n, B, .): ``h`` holds each step's new state,
    ``zr`` the update and reset gates side by side, ``c`` the candidate state.
    ``q`` (k, B, h_fc) and ``p`` (B, k) are the head activations at the
    information indices.
    """

    y: np.ndarray
    info: np.ndarray
    signal: np.ndarray
    feedback_bits: np.ndarray
    h: list
    zr: list
    c: list
    q: np.ndarray
    p: np.ndarray
    params: GruDecoderParams
    spec: CodeSpec

    @property
    def n_steps(self) -> int:
        return self.signal.shape[0]


def _samples(y) -> np.ndarray:
    if isinstance(y, ReceivedWord):
        y = y.samples
    return np.asarray(y, dtype=np.float64)


def _stacked(params: GruDecoderParams, layer: int):
    """(W_in for z|r|h, W_rec for z|r, W_rec for h, bias z|r|h) of one layer."""
    d = params.layer_input_dim(layer)
    W = [params[f"l{layer}.W_{g}"] for g in GATES]
    w_in = np.concatenate([w[:, :d] for w in W], axis=0)
    w_zr = np.concatenate([W[0][:, d:], W[1][:, d:]], axis=0)
    b = np.concatenate([params[f"l{layer}.b_{g}"] for g in GATES])
    return w_in, w_zr, W[2][:, d:], b


def crisp_forward(y, spec: CodeSpec, params: GruDecoderParams, feedback: str = "teacher",
                  teacher=None, active_set: Optional[Iterable[int]] = None) -> ForwardTrace:
    """Unroll the decoder over all n positions.

    ``feedback="teacher"`` feeds the given source bits ``teacher`` (B, n);
    ``"student"`` feeds the model's own hard decisions. In student mode only
    positions in ``active_set`` (1-based, default the information set) feed
    decisions back; every other position feeds the known zero.
    """
    Y = np.atleast_2d(_samples(y))
    B, n = Y.shape
    if n != spec.n or params.n != n:
        raise NeuralError(f"received length {n} does not match code length {spec.n} / model {params.n}")
    if feedback not in ("teacher", "student"):
        raise NeuralError(f"unknown feedback mode {feedback!r}")
    if feedback == "teacher":
        if teacher is None:
            raise NeuralError("teacher forcing needs the source bits")
        T = np.atleast_2d(np.asarray(teacher, dtype=np.uint8))
        if T.shape != Y.shape:
            raise NeuralError(f"teacher bits have shape {T.shape}, expected {Y.shape}")
    info = np.asarray(spec.info_positions)
    fb_mask = np.zeros(n, dtype=bool)
    if active_set is None:
        fb_mask[info] = True
    else:
        fb_mask[np.asarray(sorted(active_set), dtype=np.intp) - 1] = True
    out_slot = -np.ones(n, dtype=np.intp)
    out_slot[info] = np.arange(info.size)

    Lnum, h = params.num_layers, params.hidden_dim
    stacks = [_stacked(params, l) for l in range(Lnum)]
    W1, b1, W2, b2 = params["head.W1"], params["head.b1"], params["head.W2"], params["head.b2"]
    # y enters every step unchanged, so its projection is computed once
    w_in0 = stacks[0][0]
    yproj = Y @ w_in0[:, 1:].T + stacks[0][3]
    w_sig = w_in0[:, 0]

    hs = [np.empty((n, B, h)) for _ in range(Lnum)]
    zrs = [np.empty((n, B, 2 * h)) for _ in range(Lnum)]
    cs = [np.empty((n, B, h)) for _ in range(Lnum)]
    q = np.empty((info.size, B, params.head_dim))
    p = np.empty((B, info.size))
    signal = np.empty((n, B))
    fed = np.zeros((B, n), dtype=np.uint8)
    prev = np.zeros(B, dtype=np.uint8)
    zero_state = np.zeros((B, h))
    for t in range(n):
        s = 1.0 - 2.0 * prev
        signal[t] = s
        x = None
        for l in range(Lnum):
            hp = hs[l][t - 1] if t else zero_state
            w_in, w_zr, w_hh, b = stacks[l]
            if l == 0:
                gx = yproj + np.outer(s, w_sig)
            else:
                gx = x @ w_in.T + b
            zr = sigmoid(gx[:, :2 * h] + hp @ w_zr.T)
            z, r = zr[:, :h], zr[:, h:]
            c = np.tanh(gx[:, 2 * h:] + (r * hp) @ w_hh.T)
            hn = hp + z * (c - hp)
            zrs[l][t], cs[l][t], hs[l][t] = zr, c, hn
            x = hn
        j = out_slot[t]
        if j >= 0:
            qj = np.tanh(x @ W1.T + b1)
            q[j] = qj
            p[:, j] = sigmoid(qj @ W2[0] + b2[0])
        if feedback == "teacher":
            prev = T[:, t]
        elif fb_mask[t] and j >= 0:
            prev = (p[:, j] > 0.5).astype(np.uint8)
        else:
            prev = np.zeros(B, dtype=np.uint8)
        fed[:, t] = prev
    return ForwardTrace(Y, info, signal, fed, hs, zrs, cs, q, p, params, spec)


def _active_slots(trace: ForwardTrace, active_set) -> np.ndarray:
    info1 = list(trace.info + 1)
    if active_set is None:
        return np.arange(len(info1))
    slots = []
    for i in sorted(set(int(a) for a in active_set)):
        if i not in info1:
            raise NeuralError(f"active index {i} is not an information index")
        slots.append(info1.index(i))
    if not slots:
        raise NeuralError("active set is empty")
    return np.asarray(slots)


def crisp_loss(trace: ForwardTrace, targets, active_set=None, reduction: str = "mean") -> float:
    """Squared error over the active information bits.

    ``reduction="mean"`` divides by batch size times |active_set|; ``"sum"`` does not.
    """
    slots = _active_slots(trace, active_set)
    T = np.atleast_2d(np.asarray(targets, dtype=np.float64))[:, trace.info[slots]]
    sq = (trace.p[:, slots] - T) ** 2
    return float(sq.sum() / _denominator(sq.shape, reduction))


def _denominator(shape, reduction):
    if reduction == "mean":
        return shape[0] * shape[1]
    if reduction == "sum":
        return 1.0
    raise NeuralError(f"unknown reduction {reduction!r}")


def crisp_loss_and_grads(trace: ForwardTrace, targets, active_set=None, reduction: str = "mean"):
    """Loss and exact reverse-mode gradients through the head and the GRU recursion.

    Fed-back bits are treated as constants, so student-forced traces get the
    straight-through gradient with no path through the hard decisions.
    """
    params = trace.params
    slots = _active_slots(trace, active_set)
    Y = trace.y
    B, n = Y.shape
    Lnum, h = params.num_layers, params.hidden_dim
    info = trace.info
    T = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    if T.shape != (B, n):
        raise NeuralError(f"targets have shape {T.shape}, expected {(B, n)}")

    err = trace.p[:, slots] - T[:, info[slots]]
    denom = _denominator(err.shape, reduction)
    loss = float((err ** 2).sum() / denom)

    grads = params.zeros_like()
    G = grads.arrays
    W1, W2 = params["head.W1"], params["head.W2"]
    P = trace.p[:, slots]
    do = (2.0 / denom) * err * P * (1.0 - P)           # (B, a)
    qa = trace.q[slots]                                 # (a, B, hfc)
    top = trace.h[Lnum - 1]
    G["head.W2"][0] = np.einsum("ba,abf->f", do, qa)
    G["head.b2"][0] = do.sum()
    dqpre = do.T[:, :, None] * W2[0] * (1.0 - qa ** 2)  # (a, B, hfc)
    htop_info = top[info[slots]]
    G["head.W1"] = np.einsum("abf,abh->fh", dqpre, htop_info)
    G["head.b1"] = dqpre.sum(axis=(0, 1))
    dtop = np.zeros((n, B, h))
    dtop[info[slots]] = dqpre @ W1

    stacks = [_stacked(params, l) for l in range(Lnum)]
    dpre = [np.empty((n, B, 3 * h)) for _ in range(Lnum)]
    dh_next = [np.zeros((B, h)) for _ in range(Lnum)]
    zero_state = np.zeros((B, h))
    for t in range(n - 1, -1, -1):
        dx_above = dtop[t]
        for l in range(Lnum - 1, -1, -1):
            w_in, w_zr, w_hh, _ = stacks[l]
            dh = dh_next[l] + dx_above
            hp = trace.h[l][t - 1] if t else zero_state
            zr, c = trace.zr[l][t], trace.c[l][t]
            z, r = zr[:, :h], zr[:, h:]
            d = dpre[l][t]
            dpc = dh * z * (1.0 - c * c)
            drh = dpc @ w_hh
            d[:, :h] = dh * (c - hp) * z * (1.0 - z)
            d[:, h:2 * h] = drh * hp * r * (1.0 - r)
            d[:, 2 * h:] = dpc
            dh_next[l] = dh * (1.0 - z) + drh * r + d[:, :2 * h] @ w_zr
            if l > 0:
                dx_above = d @ w_in

    for l in range(Lnum):
        d_in = params.layer_input_dim(l)
        hprev = np.concatenate([np.zeros((1, B, h)), trace.h[l][:-1]], axis=0).reshape(n * B, h)
        rh = trace.zr[l][:, :, h:].reshape(n * B, h) * hprev
        dflat = dpre[l].reshape(n * B, 3 * h)
        if l == 0:
            g_in = np.empty((3 * h, d_in))
            g_in[:, 0] = np.einsum("tbg,tb->g", dpre[l], trace.signal)
            g_in[:, 1:] = dpre[l].sum(axis=0).T @ Y
        else:
            g_in = dflat.T @ trace.h[l - 1].reshape(n * B, h)
        g_zr = dflat[:, :2 * h].T @ hprev
        g_hh = dflat[:, 2 * h:].T @ rh
        g_b = dflat.sum(axis=0)
        for gi, g in enumerate(GATES):
            rows = slice(gi * h, (gi + 1) * h)
            gW = G[f"l{l}.W_{g}"]
            gW[:, :d_in] = g_in[rows]
            gW[:, d_in:] = g_zr[rows] if g != "h" else g_hh
            G[f"l{l}.b_{g}"] = g_b[rows].copy()
    return loss, grads


def hard_decide(trace: ForwardTrace) -> np.ndarray:
    """Payload estimates: 1 where p > 0.5 (p = 0.5 decides 0); CRC bits stripped."""
    u = (trace.p > 0.5).astype(np.uint8)
    if trace.spec.family is Family.CRC_POLAR:
        u = u[:, : trace.spec.k_m]
    return u


def layer_flops(n: int, h: int, input_dim: Optional[int] = None, convention: str = "compact") -> int:
    """Floating-point operations of one GRU layer unrolled over n steps.

    ``compact``: n * (2 h * input_dim + 6 h^2). A multiply-add is 2 FLOPs; the
    input projection is counted once per step (as for a fused input matrix)
    and the three h x h recurrent products in full; nonlinearities, biases and
    elementwise gate arithmetic are not counted. With input_dim = n + 1 this
    is n(2h(n+1) + 6h^2).
    ``full``: n * (6 h (input_dim + h) + 10 h), every gate's matrix product
    plus the elementwise update.
    """
    d = n + 1 if input_dim is None else input_dim
    if convention == "compact":
        return n * (2 * h * d + 6 * h * h)
    if convention == "full":
        return n * (6 * h * (d + h) + 10 * h)
    raise NeuralError(f"unknown FLOP convention {convention!r}")


def model_flops(params: GruDecoderParams, convention: str = "compact") -> int:
    """Per-block forward FLOPs of all layers plus the head (head counted as 2 per MAC)."""
    total = sum(layer_flops(params.n, params.hidden_dim, params.layer_input_dim(l), convention)
                for l in range(params.num_layers))
    return total + params.n * 2 * params.head_dim * (params.hidden_dim + 1)


@dataclass
class Checkpoint:
    params: GruDecoderParams
    spec: Optional[CodeSpec] = None
    seed: Optional[int] = None
    curriculum_step: Optional[int] = None


def _encode_array(a: np.ndarray) -> dict:
    raw = np.ascontiguousarray(a, dtype="<f8").tobytes()
    return {"shape": list(a.shape), "data": base64.b64encode(raw).decode("ascii")}


def checkpoint_bytes(params: GruDecoderParams, spec: Optional[CodeSpec] = None,
                     seed: Optional[int] = None, curriculum_step: Optional[int] = None) -> bytes:
    params.validate()
    doc = {
        "format_version": FORMAT_VERSION,
        "code_spec": spec.to_dict() if spec is not None else None,
        "n": params.n,
        "hidden_dim": params.hidden_dim,
        "num_layers": params.num_layers,
        "head_dims": [params.head_dim, 1],
        "seed": seed,
        "curriculum_step": curriculum_step,
        "arrays": {k: _encode_array(v) for k, v in params.arrays.items()},
    }
    return (json.dumps(doc, sort_keys=True, indent=1) + "\n").encode("utf-8")


def save_params(path, params: GruDecoderParams, spec: Optional[CodeSpec] = None,
                seed: Optional[int] = None, curriculum_step: Optional[int] = None) -> Path:
    path = Path(path)
    path.write_bytes(checkpoint_bytes(params, spec, seed, curriculum_step))
    return path


def load_checkpoint(path) -> Checkpoint:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise NeuralError(f"corrupt checkpoint {path}: {exc}") from None
    if doc.get("format_version") != FORMAT_VERSION:
        raise NeuralError(f"unsupported checkpoint version {doc.get('format_version')!r}")
    try:
        head_dim = int(doc["head_dims"][0])
        params = GruDecoderParams(int(doc["n"]), int(doc["hidden_dim"]), int(doc["num_layers"]), head_dim)
        for name, entry in doc["arrays"].items():
            raw = base64.b64decode(entry["data"], validate=True)
            shape = tuple(entry["shape"])
            if len(raw) != 8 * int(np.prod(shape)):
                raise NeuralError(f"array {name} payload does not match its shape {shape}")
            params.arrays[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, NeuralError):
            raise
        raise NeuralError(f"corrupt checkpoint {path}: {exc}") from None
    params.validate()
    spec = CodeSpec.from_dict(doc["code_spec"]) if doc.get("code_spec") else None
    if spec is not None and spec.n != params.n:
        raise NeuralError(f"checkpoint code length {spec.n} disagrees with model length {params.n}")
    return Checkpoint(params, spec, doc.get("seed"), doc.get("curriculum_step"))


def load_params(path) -> GruDecoderParams:
    return load_checkpoint(path).params


class CrispDecoder:
    """Decoder handle running the network with its own decisions fed back."""

    name = "crisp"

    def __init__(self, spec: CodeSpec, params: GruDecoderParams, batch_size: int = 4096):
        if params.n != spec.n:
            raise NeuralError(f"model length {params.n} does not match code length {spec.n}")
        self.spec, self.params, self.batch_size = spec, params, batch_size

    def decode(self, rx, channel: Optional[ChannelModel] = None) -> np.ndarray:
        Y = np.atleast_2d(_samples(rx))
        out = []
        for start in range(0, Y.shape[0], self.batch_size):
            trace = crisp_forward(Y[start:start + self.batch_size], self.spec, self.params, "student")
            out.append(hard_decide(trace))
        return np.concatenate(out, axis=0)

    def describe(self):
        return {"decoder": self.name, "hidden_dim": self.params.hidden_dim,
                "num_layers": self.params.num_layers}
