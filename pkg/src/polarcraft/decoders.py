"""Classical decoders: successive cancellation, SC-list (CRC-aided, PAC-aware) and a brute-force MAP oracle.

Single-block functions return :class:`DecodeResult`. The ``*_batch`` variants
take (B, n) arrays and are what the simulation harness uses; the heavy lifting
happens in the compiled core selected by :mod:`polarcraft._backend`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _backend
from ._fallback import f_exact, f_minsum
from .channels import ChannelKind, ChannelModel, ReceivedWord, llr as channel_llr
from .construction import CodeSpec, Family
from .encoding import crc_check, encode, message_table, payload_from_source, source_bits

MAX_ORACLE_K = 20
_ORACLE_CHUNK = 1 << 14


class DecoderError(ValueError):
    pass


def lse(a: float, b: float, mode: str = "exact") -> float:
    """Check-node combination log((1 + e^(a+b)) / (e^a + e^b)), or its min-sum approximation."""
    f = f_minsum if _minsum(mode) else f_exact
    return float(f(np.float64(a), np.float64(b)))


@dataclass
class DecodeResult:
    u_hat: np.ndarray
    m_hat: np.ndarray
    bit_llrs: Optional[np.ndarray] = None
    path_metric: Optional[float] = None


def _check_llrs(llrs, spec: CodeSpec) -> np.ndarray:
    arr = np.asarray(llrs, dtype=np.float64)
    if arr.shape[-1] != spec.n:
        raise DecoderError(f"expected {spec.n} LLRs per block, got {arr.shape[-1]}")
    return arr


def _minsum(mode: str) -> bool:
    if mode not in ("exact", "minsum"):
        raise DecoderError(f"unknown LSE mode {mode!r}")
    return mode == "minsum"


def sc_decode_batch(llrs, spec: CodeSpec, mode: str = "exact"):
    """Returns (u_hat, m_hat, leaf_llrs) for a (B, n) LLR batch."""
    if spec.family is Family.PAC:
        raise DecoderError("PAC codes need the precoder-aware decoder (pac_sc_decode)")
    arr = np.atleast_2d(_check_llrs(llrs, spec))
    m_hat, leaf = _backend.sc_decode_batch(arr, spec.frozen_mask, _minsum(mode))
    return payload_from_source(m_hat, spec), m_hat, leaf


def sc_decode(llrs, spec: CodeSpec, mode: str = "exact") -> DecodeResult:
    u, m, leaf = sc_decode_batch(np.asarray(llrs)[None, :], spec, mode)
    return DecodeResult(u[0], m[0], bit_llrs=leaf[0, spec.info_positions])


def _select_paths(paths, metrics, spec: CodeSpec):
    """Best path per block; for CRC codes the best CRC-passing path if any."""
    B = paths.shape[0]
    choice = np.zeros(B, dtype=np.intp)
    if spec.family is Family.CRC_POLAR:
        info = paths[:, :, spec.info_positions]
        ok = crc_check(info, spec.crc_poly) & np.isfinite(metrics)
        has = ok.any(axis=1)
        choice[has] = np.argmax(ok[has], axis=1)
    rows = np.arange(B)
    return paths[rows, choice], metrics[rows, choice]


def scl_decode_batch(llrs, spec: CodeSpec, list_size: int, metric: str = "exact",
                     lse_mode: str = "exact"):
    """Returns (u_hat, m_hat, path_metric) for a (B, n) LLR batch."""
    if list_size < 1:
        raise DecoderError(f"list size must be >= 1, got {list_size}")
    if metric not in ("exact", "approx"):
        raise DecoderError(f"unknown path metric {metric!r}")
    arr = np.atleast_2d(_check_llrs(llrs, spec))
    paths, metrics = _backend.scl_decode_batch(
        arr, spec.frozen_mask, int(list_size), metric == "approx", _minsum(lse_mode),
        np.asarray(spec.kernel, dtype=np.uint8),
    )
    m_hat, pm = _select_paths(paths, metrics, spec)
    return payload_from_source(m_hat, spec), m_hat, pm


def scl_decode(llrs, spec: CodeSpec, list_size: int, metric: str = "exact",
               lse_mode: str = "exact") -> DecodeResult:
    u, m, pm = scl_decode_batch(np.asarray(llrs)[None, :], spec, list_size, metric, lse_mode)
    return DecodeResult(u[0], m[0], path_metric=float(pm[0]))


def pac_sc_decode(llrs, spec: CodeSpec, list_size: int = 1, metric: str = "exact",
                  lse_mode: str = "exact") -> DecodeResult:
    """SC (list_size=1) or SC-list decoding of a PAC code, tracking each path's shift register."""
    if spec.family is not Family.PAC:
        raise DecoderError(f"pac_sc_decode needs a PAC spec, got {spec.family.value}")
    return scl_decode(llrs, spec, list_size, metric, lse_mode)


def codebook(spec: CodeSpec, start: int = 0, stop: Optional[int] = None):
    """Messages start..stop (u_1 most significant) and their BPSK codewords."""
    if spec.payload_len > MAX_ORACLE_K:
        raise DecoderError(f"codebook enumeration capped at k <= {MAX_ORACLE_K}")
    msgs = message_table(spec.payload_len)[start:stop]
    return msgs, encode(msgs, spec)


def map_decode_batch(rx: ReceivedWord | np.ndarray, spec: CodeSpec,
                     channel: Optional[ChannelModel] = None) -> np.ndarray:
    """Minimum-distance decoding by enumerating all 2^k codewords.

    Ties go to the smallest message (u_1 most significant).
    """
    if spec.payload_len > MAX_ORACLE_K:
        raise DecoderError(f"MAP oracle enumerates 2^k codewords; k <= {MAX_ORACLE_K} required")
    if isinstance(rx, ReceivedWord):
        y, gains = rx.samples, rx.fading_gains
    else:
        y, gains = np.asarray(rx, dtype=np.float64), None
    y = np.atleast_2d(y)
    if y.shape[-1] != spec.n:
        raise DecoderError(f"expected {spec.n} samples per block, got {y.shape[-1]}")
    if channel is not None and channel.kind is ChannelKind.RAYLEIGH and gains is None:
        raise DecoderError("Rayleigh MAP decoding needs the fading gains")
    if gains is not None:
        gains = np.atleast_2d(gains)
    total = 2 ** spec.payload_len
    best = np.full(y.shape[0], -np.inf)
    best_idx = np.zeros(y.shape[0], dtype=np.int64)
    for start in range(0, total, _ORACLE_CHUNK):
        _, cw = codebook(spec, start, start + _ORACLE_CHUNK)
        if gains is None:
            # ||y - x||^2 = ||y||^2 + n - 2<y, x>
            score = y @ cw.T
        else:
            score = (gains * y) @ cw.T - 0.5 * (gains ** 2) @ (cw ** 2).T
        idx = np.argmax(score, axis=1)
        val = score[np.arange(y.shape[0]), idx]
        better = val > best
        best[better] = val[better]
        best_idx[better] = idx[better] + start
    shifts = np.arange(spec.payload_len - 1, -1, -1)
    return ((best_idx[:, None] >> shifts) & 1).astype(np.uint8)


def map_oracle(y: ReceivedWord | np.ndarray, spec: CodeSpec,
               channel: Optional[ChannelModel] = None) -> DecodeResult:
    rx = y if isinstance(y, ReceivedWord) else ReceivedWord(np.asarray(y, dtype=np.float64))
    u = map_decode_batch(rx, spec, channel)[0]
    return DecodeResult(u, source_bits(u, spec))


class Decoder:
    """Batch decoder handle: received words in, payload estimates out."""

    name = "decoder"

    def __init__(self, spec: CodeSpec):
        self.spec = spec

    def decode(self, rx: ReceivedWord, channel: ChannelModel) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"decoder": self.name}


class SCDecoder(Decoder):
    name = "sc"

    def __init__(self, spec: CodeSpec, lse_mode: str = "exact"):
        super().__init__(spec)
        self.lse_mode = lse_mode
        _minsum(lse_mode)

    def decode(self, rx, channel):
        llrs = channel_llr(rx, channel)
        if self.spec.family is Family.PAC:
            return scl_decode_batch(llrs, self.spec, 1, "exact", self.lse_mode)[0]
        return sc_decode_batch(llrs, self.spec, self.lse_mode)[0]

    def describe(self):
        return {"decoder": self.name, "lse": self.lse_mode}


class SCLDecoder(Decoder):
    name = "scl"

    def __init__(self, spec: CodeSpec, list_size: int = 8, metric: str = "exact",
                 lse_mode: str = "exact"):
        super().__init__(spec)
        if list_size < 1:
            raise DecoderError(f"list size must be >= 1, got {list_size}")
        self.list_size, self.metric, self.lse_mode = int(list_size), metric, lse_mode

    def decode(self, rx, channel):
        llrs = channel_llr(rx, channel)
        return scl_decode_batch(llrs, self.spec, self.list_size, self.metric, self.lse_mode)[0]

    def describe(self):
        return {"decoder": self.name, "list_size": self.list_size, "metric": self.metric,
                "lse": self.lse_mode}


class MAPDecoder(Decoder):
    name = "map"

    def decode(self, rx, channel):
        return map_decode_batch(rx, self.spec, channel)
