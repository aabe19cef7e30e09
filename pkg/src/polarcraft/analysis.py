"""Noiseless decoding rules, learning difficulty and bitwise error diagnostics.

With no noise the received word is the codeword itself and decoding is a
linear map over GF(2): ``m = PlotkinTree(x)`` for polar codes, followed by
the inverse convolution for PAC codes. Each message bit is therefore the XOR
of a subset of codeword coordinates; under BPSK the same rule reads as a
product of the corresponding +/-1 symbols.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Dict, List

import numpy as np

from .channels import ChannelModel, ReceivedWord, derive_rng, transmit
from .construction import CodeSpec, Family
from .encoding import encode, message_table, pac_precode, pac_unprecode, plotkin_tree


class AnalysisError(ValueError):
    pass


@dataclass
class NoiselessRule:
    """``supports[i]`` lists the 1-based codeword coordinates XORed to recover bit i."""

    active_set: tuple
    supports: Dict[int, tuple]

    def difficulty(self, i: int) -> int:
        return len(self.supports.get(i, ()))

    def apply(self, x_bits) -> np.ndarray:
        """Recover the active message bits (columns in active-set order) from codeword bits."""
        x = np.atleast_2d(np.asarray(x_bits, dtype=np.uint8))
        out = np.zeros((x.shape[0], len(self.active_set)), dtype=np.uint8)
        for col, i in enumerate(self.active_set):
            idx = np.asarray(self.supports[i], dtype=np.intp) - 1
            out[:, col] = np.bitwise_xor.reduce(x[:, idx], axis=1) if idx.size else 0
        return out

    def to_dict(self) -> dict:
        return {"active_set": list(self.active_set),
                "supports": {str(i): list(s) for i, s in self.supports.items()}}


def _check_active(spec: CodeSpec, active_set) -> tuple:
    active = tuple(sorted(int(i) for i in (spec.info_set if active_set is None else active_set)))
    if not active or not set(active) <= set(spec.info_set):
        raise AnalysisError(f"active set {active} must be a nonempty subset of {spec.info_set}")
    return active


def inverse_matrix(spec: CodeSpec) -> np.ndarray:
    """A with m = A x over GF(2), found by pushing unit vectors through the inverse map."""
    eye = np.eye(spec.n, dtype=np.uint8)
    cols = plotkin_tree(eye)
    if spec.family is Family.PAC:
        cols = pac_unprecode(cols, spec.pac_kernel)
    # row j of ``cols`` is the image of e_j, i.e. column j of A
    return cols.T.copy()


def generator_matrix(spec: CodeSpec) -> np.ndarray:
    """G with x = m G over GF(2) (rows indexed by source position)."""
    eye = np.eye(spec.n, dtype=np.uint8)
    if spec.family is Family.PAC:
        eye = pac_precode(eye, spec.pac_kernel)
    return plotkin_tree(eye)


def noiseless_rules(spec: CodeSpec, active_set=None) -> NoiselessRule:
    """Decoding rule of every active bit for the subcode where only ``active_set`` varies.

    Coordinates that are identically zero on the subcode are dropped, since
    XORing them changes nothing.
    """
    active = _check_active(spec, active_set)
    A = inverse_matrix(spec)
    G = generator_matrix(spec)
    live = G[np.asarray(active) - 1].any(axis=0)
    supports = {}
    for i in active:
        coords = np.flatnonzero(A[i - 1].astype(bool) & live) + 1
        if coords.size == 0:
            raise AnalysisError(f"bit {i} has an empty rule")
        supports[i] = tuple(int(c) for c in coords)
    return NoiselessRule(active, supports)


@dataclass
class DifficultyTrace:
    steps: List[tuple]
    values: Dict[int, List[int]]

    def of(self, i: int) -> List[int]:
        return self.values[i]

    def max_per_step(self) -> List[int]:
        return [max(v[t] for v in self.values.values()) for t in range(len(self.steps))]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        bits = sorted(self.values)
        w.writerow(["step", "active_set"] + [f"m{i}" for i in bits])
        for t, a in enumerate(self.steps):
            w.writerow([t + 1, " ".join(map(str, a))] + [self.values[i][t] for i in bits])
        return buf.getvalue()


def learning_difficulty(spec: CodeSpec, schedule) -> DifficultyTrace:
    """Rule size of every information bit at every curriculum step (0 while inactive)."""
    steps = [tuple(s) for s in (schedule.active_sets() if hasattr(schedule, "active_sets") else schedule)]
    values = {i: [] for i in spec.info_set}
    for active in steps:
        rule = noiseless_rules(spec, active)
        for i in spec.info_set:
            values[i].append(rule.difficulty(i))
    return DifficultyTrace(steps, values)


def noiseless_ber(decoder, spec: CodeSpec, num_blocks: int = 1000, seed: int = 0) -> float:
    """BER with y equal to the transmitted codeword; exhaustive when 2^k <= num_blocks."""
    k = spec.payload_len
    if 2 ** k <= num_blocks:
        u = message_table(k)
    else:
        u = derive_rng(seed, 0xB1).integers(0, 2, size=(num_blocks, k), dtype=np.uint8)
    rx = ReceivedWord(encode(u, spec))
    u_hat = decoder.decode(rx, ChannelModel(sigma=0.0))
    return float((u_hat != u).mean())


@dataclass
class BitwiseReport:
    info_set: tuple
    marginal_ber: np.ndarray
    conditional_share: np.ndarray
    bler: float
    num_blocks: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bit_index", "marginal_ber", "conditional_bler_share"])
        for i, b, c in zip(self.info_set, self.marginal_ber, self.conditional_share):
            w.writerow([i, repr(float(b)), repr(float(c))])
        return buf.getvalue()


def bitwise_diagnostics(decoder, spec: CodeSpec, channel: ChannelModel, num_blocks: int = 10_000,
                        seed: int = 0) -> BitwiseReport:
    """Per-bit marginal BER and share of blocks whose first error falls on each bit.

    The shares partition the block-error event, so they sum to the BLER.
    """
    rng = derive_rng(seed, 0xD1A)
    k = spec.payload_len
    u = rng.integers(0, 2, size=(num_blocks, k), dtype=np.uint8)
    rx = transmit(encode(u, spec), channel, rng)
    wrong = decoder.decode(rx, channel) != u
    any_wrong = wrong.any(axis=1)
    first = np.argmax(wrong, axis=1)
    counts = np.bincount(first[any_wrong], minlength=k)
    info = tuple(spec.info_set[:k])
    return BitwiseReport(info, wrong.mean(axis=0), counts / num_blocks,
                         float(any_wrong.mean()), num_blocks)
