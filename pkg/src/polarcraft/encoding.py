"""Polar/PAC encoding: Plotkin tree transform, embedding, precoding, CRC and BPSK.

Every function accepts a single bit vector or a batch with bits on the last
axis. Bits are ``uint8`` arrays holding 0/1.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .construction import CodeSpec, Family


class EncodingError(ValueError):
    pass


def as_bits(bits) -> np.ndarray:
    arr = np.asarray(bits)
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise EncodingError("bit vectors may only contain 0 and 1")
    return arr.astype(np.uint8, copy=False)


def plotkin(u, v) -> np.ndarray:
    """(u, v) -> (u XOR v, v)."""
    u, v = as_bits(u), as_bits(v)
    if u.shape != v.shape:
        raise EncodingError(f"Plotkin halves differ in shape: {u.shape} vs {v.shape}")
    return np.concatenate([u ^ v, v], axis=-1)


def plotkin_tree(m) -> np.ndarray:
    """Apply the Plotkin map at every internal node of the complete binary tree.

    Leaves carry ``m`` in natural order; the transform is its own inverse.
    """
    x = as_bits(m).copy()
    n = x.shape[-1]
    if n < 1 or n & (n - 1):
        raise EncodingError(f"length must be a power of two, got {n}")
    lead = x.shape[:-1]
    half = 1
    while half < n:
        blocks = x.reshape(*lead, n // (2 * half), 2, half)
        blocks[..., 0, :] ^= blocks[..., 1, :]
        half *= 2
    return x


def embed(u, spec: CodeSpec) -> np.ndarray:
    """Scatter k message bits into the information positions of an n-vector."""
    u = as_bits(u)
    if u.shape[-1] != spec.k:
        raise EncodingError(f"expected {spec.k} message bits, got {u.shape[-1]}")
    m = np.zeros(u.shape[:-1] + (spec.n,), dtype=np.uint8)
    m[..., spec.info_positions] = u
    return m


def extract(m, spec: CodeSpec) -> np.ndarray:
    return as_bits(m)[..., spec.info_positions]


def pac_precode(m, kernel: Sequence[int]) -> np.ndarray:
    """Rate-1 convolution over GF(2): v_i = XOR_j c_j m_{i-j+1}, zero initial state."""
    m = as_bits(m)
    c = as_bits(kernel)
    if c.ndim != 1 or c.size == 0 or c[0] != 1:
        raise EncodingError("kernel must be a nonempty bit vector with leading 1")
    v = m.copy()
    n = m.shape[-1]
    for j in range(1, min(c.size, n)):
        if c[j]:
            v[..., j:] ^= m[..., : n - j]
    return v


def pac_unprecode(v, kernel: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`pac_precode` by feedback division."""
    v = as_bits(v)
    c = as_bits(kernel)
    m = np.zeros_like(v)
    n = v.shape[-1]
    for i in range(n):
        acc = v[..., i].copy()
        for j in range(1, min(c.size, i + 1)):
            if c[j]:
                acc ^= m[..., i - j]
        m[..., i] = acc
    return m


def crc_remainder(u, poly: int) -> np.ndarray:
    """Remainder of u(x) * x^deg modulo poly, as a length-deg bit vector (x^0 first).

    Bit j of ``u`` is the coefficient of x^j. Implemented as a shift register
    that feeds the highest-degree coefficients first.
    """
    u = as_bits(u)
    deg = poly.bit_length() - 1
    taps = np.array([(poly >> j) & 1 for j in range(deg)], dtype=np.uint8)
    reg = np.zeros(u.shape[:-1] + (deg,), dtype=np.uint8)
    for j in range(u.shape[-1] - 1, -1, -1):
        feedback = reg[..., deg - 1] ^ u[..., j]
        reg[..., 1:] = reg[..., :-1].copy()
        reg[..., 0] = 0
        reg ^= feedback[..., None] * taps
    return reg


def crc_attach(u, poly: int) -> np.ndarray:
    """Systematic CRC codeword (u, r)."""
    u = as_bits(u)
    return np.concatenate([u, crc_remainder(u, poly)], axis=-1)


def crc_check(word, poly: int) -> np.ndarray | bool:
    """True where the trailing deg(poly) bits equal the CRC of the leading bits."""
    word = as_bits(word)
    deg = poly.bit_length() - 1
    ok = (crc_remainder(word[..., :-deg], poly) == word[..., -deg:]).all(axis=-1)
    return bool(ok) if np.ndim(ok) == 0 else ok


def modulate(x) -> np.ndarray:
    """BPSK: bit 0 -> +1.0, bit 1 -> -1.0."""
    return 1.0 - 2.0 * as_bits(x).astype(np.float64)


def source_bits(u, spec: CodeSpec) -> np.ndarray:
    """Message bits (k, or k_m for CRC codes) -> the n-bit source vector m."""
    u = as_bits(u)
    if u.shape[-1] != spec.payload_len:
        raise EncodingError(f"expected {spec.payload_len} message bits, got {u.shape[-1]}")
    if spec.family is Family.CRC_POLAR:
        u = crc_attach(u, spec.crc_poly)
    return embed(u, spec)


def encode_bits(u, spec: CodeSpec) -> np.ndarray:
    """Message -> unmodulated codeword bits x."""
    m = source_bits(u, spec)
    if spec.family is Family.PAC:
        m = pac_precode(m, spec.pac_kernel)
    return plotkin_tree(m)


def encode(u, spec: CodeSpec) -> np.ndarray:
    """Message -> BPSK codeword symbols in {+1, -1}."""
    return modulate(encode_bits(u, spec))


def payload_from_source(m, spec: CodeSpec) -> np.ndarray:
    """Decoded source vector m -> user payload (CRC bits stripped)."""
    u = extract(m, spec)
    if spec.family is Family.CRC_POLAR:
        u = u[..., : spec.k_m]
    return u


def message_table(k: int) -> np.ndarray:
    """All 2^k messages, ordered with u_1 as the most significant bit."""
    ints = np.arange(2 ** k, dtype=np.int64)
    shifts = np.arange(k - 1, -1, -1)
    return ((ints[:, None] >> shifts) & 1).astype(np.uint8)
