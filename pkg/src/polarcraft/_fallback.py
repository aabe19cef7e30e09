"""Pure numpy SC / SCL kernels, batched over blocks.

Same contract as the compiled ``_kernels`` module. Tree state for a block is
kept in flat buffers of length 2n: the active node at the level of length
``l`` lives in ``[l, 2l)``. ``alpha`` holds LLRs, ``ps`` holds the partial
sums of completed left children.
"""
from __future__ import annotations

import numpy as np

LLR_CLAMP = 40.0


def f_exact(a, b):
    a = np.clip(a, -LLR_CLAMP, LLR_CLAMP)
    b = np.clip(b, -LLR_CLAMP, LLR_CLAMP)
    return (np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))
            + np.log1p(np.exp(-np.abs(a + b))) - np.log1p(np.exp(-np.abs(a - b))))


def f_minsum(a, b):
    return np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))


def penalty(lam, v, approx):
    """Path-metric increment for deciding tree bit ``v`` against leaf LLR ``lam``."""
    t = np.where(v == 0, -lam, lam)
    if approx:
        return np.where(t > 0, np.abs(lam), 0.0)
    return np.maximum(t, 0.0) + np.log1p(np.exp(-np.abs(t)))


def _trailing_zeros(i: int) -> int:
    return (i & -i).bit_length() - 1


def _descend(alpha, ps, i, n, f):
    """Fill LLRs down to leaf ``i``; arrays are (..., 2n)."""
    if i == 0:
        l = n // 2
    else:
        l = 1 << _trailing_zeros(i)
        sign = 1.0 - 2.0 * ps[..., l:2 * l]
        alpha[..., l:2 * l] = alpha[..., 2 * l:3 * l] * sign + alpha[..., 3 * l:4 * l]
        l //= 2
    while l >= 1:
        alpha[..., l:2 * l] = f(alpha[..., 2 * l:3 * l], alpha[..., 3 * l:4 * l])
        l //= 2


def _ascend(ps, tmp, i, n, v):
    """Propagate decided tree bit ``v`` at leaf ``i`` into the partial sums."""
    cur = tmp
    cur[..., 0] = v
    l = 1
    while l < n:
        if not (i & l):
            ps[..., l:2 * l] = cur[..., :l]
            return
        left = ps[..., l:2 * l]
        cur[..., l:2 * l] = cur[..., :l]
        cur[..., :l] ^= left
        l *= 2


def sc_decode_batch(llr, frozen, minsum=False):
    llr = np.ascontiguousarray(llr, dtype=np.float64)
    B, n = llr.shape
    f = f_minsum if minsum else f_exact
    alpha = np.zeros((B, 2 * n))
    alpha[:, n:] = llr
    ps = np.zeros((B, 2 * n), dtype=np.uint8)
    tmp = np.zeros((B, n), dtype=np.uint8)
    bits = np.zeros((B, n), dtype=np.uint8)
    leaf = np.zeros((B, n))
    for i in range(n):
        _descend(alpha, ps, i, n, f)
        lam = alpha[:, 1]
        leaf[:, i] = lam
        v = np.zeros(B, dtype=np.uint8) if frozen[i] else (lam < 0).astype(np.uint8)
        bits[:, i] = v
        _ascend(ps, tmp, i, n, v)
    return bits, leaf


def scl_decode_batch(llr, frozen, list_size, approx_metric=False, minsum=False, taps=(1,)):
    """List decoding with per-path convolution register (identity taps = plain polar).

    Returns the source bits of all surviving paths and their metrics, sorted
    by ascending metric (stable in candidate order: parent slot, then bit).
    """
    llr = np.ascontiguousarray(llr, dtype=np.float64)
    B, n = llr.shape
    taps = np.asarray(taps, dtype=np.uint8)
    f = f_minsum if minsum else f_exact
    mem = taps.size - 1
    tap_mask = sum(int(taps[j + 1]) << j for j in range(mem))
    reg_mask = (1 << mem) - 1

    P = 1
    alpha = np.zeros((B, 1, 2 * n))
    alpha[:, 0, n:] = llr
    ps = np.zeros((B, 1, 2 * n), dtype=np.uint8)
    mbits = np.zeros((B, 1, n), dtype=np.uint8)
    reg = np.zeros((B, 1), dtype=np.int64)
    metric = np.zeros((B, 1))
    rows = np.arange(B)[:, None]

    for i in range(n):
        _descend(alpha, ps, i, n, f)
        lam = alpha[:, :, 1]
        s = _parity(reg & tap_mask)
        if frozen[i]:
            v = s.astype(np.uint8)
            metric = metric + penalty(lam, v, approx_metric)
            m_new = np.zeros((B, P), dtype=np.uint8)
        else:
            cand = np.empty((B, 2 * P))
            cand[:, 0::2] = metric + penalty(lam, s, approx_metric)
            cand[:, 1::2] = metric + penalty(lam, s ^ 1, approx_metric)
            keep = min(list_size, 2 * P)
            order = np.argsort(cand, axis=1, kind="stable")[:, :keep]
            parent = order // 2
            m_new = (order % 2).astype(np.uint8)
            metric = np.take_along_axis(cand, order, axis=1)
            alpha = alpha[rows, parent]
            ps = ps[rows, parent]
            mbits = mbits[rows, parent]
            reg = np.take_along_axis(reg, parent, axis=1)
            s = np.take_along_axis(s, parent, axis=1)
            v = (s ^ m_new).astype(np.uint8)
            P = keep
        mbits[:, :, i] = m_new
        reg = ((reg << 1) | m_new) & reg_mask
        tmp = np.zeros((B, P, n), dtype=np.uint8)
        _ascend(ps, tmp, i, n, v)

    order = np.argsort(metric, axis=1, kind="stable")
    return (np.take_along_axis(mbits, order[:, :, None], axis=1),
            np.take_along_axis(metric, order, axis=1))


def _parity(x):
    x = np.asarray(x, dtype=np.int64)
    p = np.zeros_like(x)
    while np.any(x):
        p ^= x & 1
        x = x >> 1
    return p
