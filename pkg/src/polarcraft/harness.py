"""Monte Carlo BER/BLER simulation, experiment configs, result files and throughput benchmarks."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from .channels import ChannelKind, ChannelModel, derive_rng, snr_to_sigma, transmit
from .construction import (DEFAULT_PAC_KERNEL, DEFAULT_Z0, CodeSpec, Family, build_crc_polar_spec,
                           build_pac_spec, build_polar_spec)
from .decoders import MAPDecoder, SCDecoder, SCLDecoder
from .encoding import encode

SHARD_SIZE = 1024
CSV_COLUMNS = ("snr_db", "blocks", "bit_errors", "block_errors", "ber", "bler")


class HarnessError(ValueError):
    pass


def spec_from_config(cfg: dict) -> CodeSpec:
    """Build a code from ``{"family", "n", "k", ...}`` or load ``{"spec_file": path}``."""
    if "spec_file" in cfg:
        return CodeSpec.from_json(Path(cfg["spec_file"]).read_text())
    try:
        family = Family(cfg.get("family", "polar"))
        n, k = int(cfg["n"]), int(cfg["k"])
    except (KeyError, ValueError) as exc:
        raise HarnessError(f"invalid code config {cfg}: {exc}") from None
    override = cfg.get("override")
    if family is Family.POLAR:
        return build_polar_spec(n, k, float(cfg.get("z0", DEFAULT_Z0)), override)
    if family is Family.PAC:
        return build_pac_spec(n, k, tuple(cfg.get("kernel", DEFAULT_PAC_KERNEL)))
    return build_crc_polar_spec(n, k, int(cfg.get("crc_poly", 0b1011)),
                                float(cfg.get("z0", DEFAULT_Z0)), override)


def make_decoder(spec: CodeSpec, cfg: dict):
    """Decoder handle from ``{"kind": sc|scl|map|crisp, ...}``."""
    kind = cfg.get("kind", "sc")
    if kind == "sc":
        return SCDecoder(spec, cfg.get("lse", "exact"))
    if kind == "scl":
        return SCLDecoder(spec, int(cfg.get("list_size", 8)), cfg.get("metric", "exact"),
                          cfg.get("lse", "exact"))
    if kind == "map":
        return MAPDecoder(spec)
    if kind == "crisp":
        from .neural import CrispDecoder, load_checkpoint
        if "checkpoint" not in cfg:
            raise HarnessError("the crisp decoder needs a checkpoint path")
        ck = load_checkpoint(cfg["checkpoint"])
        if ck.spec is not None and ck.spec.info_set != spec.info_set:
            raise HarnessError("checkpoint was trained for a different code")
        return CrispDecoder(spec, ck.params)
    raise HarnessError(f"unknown decoder kind {kind!r}")


@dataclass
class ExperimentConfig:
    code: dict
    decoder: dict = field(default_factory=lambda: {"kind": "sc"})
    channel: dict = field(default_factory=lambda: {"kind": "awgn"})
    snr_start: float = 0.0
    snr_stop: float = 4.0
    snr_step: float = 0.5
    snr_points: Optional[List[float]] = None
    min_block_errors: int = 100
    max_blocks: int = 1_000_000
    seed: int = 0
    output: Optional[str] = None
    workers: Optional[int] = None

    def __post_init__(self):
        if self.snr_points is None and not self.snr_step > 0:
            raise HarnessError("snr_step must be > 0")
        if self.min_block_errors < 1:
            raise HarnessError("min_block_errors must be >= 1")
        if self.max_blocks < 1:
            raise HarnessError("max_blocks must be >= 1")

    def snrs(self) -> List[float]:
        if self.snr_points is not None:
            return [float(s) for s in self.snr_points]
        count = int(math.floor((self.snr_stop - self.snr_start) / self.snr_step + 1e-9)) + 1
        return [round(self.snr_start + i * self.snr_step, 10) for i in range(count)]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise HarnessError(f"unknown config keys: {sorted(unknown)}")
        if "code" not in d:
            raise HarnessError("config needs a 'code' section")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise HarnessError(f"invalid JSON in {path}: {exc}") from None

    def config_hash(self) -> str:
        d = self.to_dict()
        d.pop("output", None)
        d.pop("workers", None)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class SimPoint:
    snr_db: float
    blocks: int
    bit_errors: int
    block_errors: int
    k: int
    stop_reason: str

    @property
    def ber(self) -> float:
        return self.bit_errors / (self.blocks * self.k)

    @property
    def bler(self) -> float:
        return self.block_errors / self.blocks

    def csv_row(self):
        return [repr(float(self.snr_db)), self.blocks, self.bit_errors, self.block_errors,
                repr(self.ber), repr(self.bler)]


@dataclass
class SimResult:
    points: List[SimPoint]
    decoder: dict
    spec_hash: str
    seed: int
    wall_time: float = 0.0
    config_hash: str = ""

    @property
    def snr_db(self) -> np.ndarray:
        return np.array([p.snr_db for p in self.points])

    @property
    def ber(self) -> np.ndarray:
        return np.array([p.ber for p in self.points])

    @property
    def bler(self) -> np.ndarray:
        return np.array([p.bler for p in self.points])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for p in self.points:
            w.writerow(p.csv_row())
        return buf.getvalue()

    def sidecar(self) -> dict:
        return {
            "decoder": self.decoder, "spec_hash": self.spec_hash, "seed": self.seed,
            "config_hash": self.config_hash, "wall_time_s": self.wall_time,
            "points": [{"snr_db": p.snr_db, "stop_reason": p.stop_reason} for p in self.points],
        }


def spec_hash(spec: CodeSpec) -> str:
    return hashlib.sha256(spec.to_json().encode()).hexdigest()[:16]


def default_workers() -> int:
    cap = os.environ.get("POLARCRAFT_THREADS")
    n = os.cpu_count() or 1
    return max(1, min(n, int(cap))) if cap else n


def _run_shard(spec, decoder, channel, seed, snr_idx, shard_idx, blocks):
    rng = derive_rng(seed, snr_idx, shard_idx)
    u = rng.integers(0, 2, size=(blocks, spec.payload_len), dtype=np.uint8)
    rx = transmit(encode(u, spec), channel, rng)
    wrong = decoder.decode(rx, channel) != u
    per_block = wrong.sum(axis=1)
    return int(per_block.sum()), int((per_block > 0).sum()), blocks


def simulate_point(spec: CodeSpec, decoder, channel: ChannelModel, snr_idx: int, seed: int,
                   min_block_errors: int, max_blocks: int, workers: int = 1,
                   shard_size: int = SHARD_SIZE) -> SimPoint:
    """Run shards until ``min_block_errors`` block errors or ``max_blocks`` blocks.

    Shards are reduced in index order and the run stops at the first shard
    where the running error count reaches the threshold, so the result does
    not depend on how many shards were in flight.
    """
    n_shards = -(-max_blocks // shard_size)
    bits = blocks = blk_err = 0
    shard = 0
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        while shard < n_shards:
            wave = range(shard, min(n_shards, shard + workers))
            sizes = [min(shard_size, max_blocks - s * shard_size) for s in wave]
            args = [(spec, decoder, channel, seed, snr_idx, s, b) for s, b in zip(wave, sizes)]
            if pool is None:
                outs = [_run_shard(*a) for a in args]
            else:
                outs = list(pool.map(lambda a: _run_shard(*a), args))
            for be, ble, b in outs:
                bits, blk_err, blocks = bits + be, blk_err + ble, blocks + b
                shard += 1
                if blk_err >= min_block_errors:
                    return SimPoint(channel_snr(channel), blocks, bits, blk_err, spec.payload_len, "errors")
    finally:
        if pool is not None:
            pool.shutdown()
    return SimPoint(channel_snr(channel), blocks, bits, blk_err, spec.payload_len, "max_blocks")


def channel_snr(channel: ChannelModel) -> float:
    return math.inf if channel.noiseless else float(-20.0 * math.log10(channel.sigma))


def simulate(config: ExperimentConfig, spec: Optional[CodeSpec] = None, decoder=None,
             output: Optional[str] = None, workers: Optional[int] = None) -> SimResult:
    """BER/BLER sweep over the configured SNR points.

    When an output path is given the CSV is rewritten after every point so an
    interrupted run keeps what it finished; a JSON sidecar holds provenance.
    """
    spec = spec or spec_from_config(config.code)
    decoder = decoder or make_decoder(spec, config.decoder)
    workers = workers or config.workers or default_workers()
    output = output or config.output
    kind = ChannelKind(config.channel.get("kind", "awgn"))
    nu = float(config.channel.get("nu", 3.0))
    noiseless = bool(config.channel.get("noiseless", False))
    result = SimResult([], decoder.describe(), spec_hash(spec), config.seed,
                       config_hash=config.config_hash())
    t0 = time.perf_counter()
    for idx, snr in enumerate(config.snrs()):
        channel = ChannelModel(kind, 0.0 if noiseless else snr_to_sigma(snr), nu)
        point = simulate_point(spec, decoder, channel, idx, config.seed, config.min_block_errors,
                               config.max_blocks, workers)
        point.snr_db = float(snr)
        result.points.append(point)
        result.wall_time = time.perf_counter() - t0
        if output:
            write_result(result, output)
    return result


def write_result(result: SimResult, path) -> None:
    path = Path(path)
    path.write_text(result.to_csv())
    Path(str(path) + ".json").write_text(json.dumps(result.sidecar(), indent=1, sort_keys=True) + "\n")


def snr_at_ber(snr, ber, target: float) -> float:
    """SNR where a BER curve crosses ``target``, interpolating log10(BER) linearly in SNR."""
    snr = np.asarray(snr, dtype=np.float64)
    ber = np.asarray(ber, dtype=np.float64)
    for i in range(len(snr) - 1):
        a, b = ber[i], ber[i + 1]
        if a >= target >= b and b > 0:
            if a == b:
                return float(snr[i])
            frac = (math.log10(a) - math.log10(target)) / (math.log10(a) - math.log10(b))
            return float(snr[i] + frac * (snr[i + 1] - snr[i]))
    raise HarnessError(f"BER curve does not bracket {target:g}")


def gap_at_ber(result_a, result_b, target_ber: float = 1e-3) -> float:
    """SNR(a) - SNR(b) at ``target_ber``; positive when b needs less SNR."""
    return snr_at_ber(result_a.snr_db, result_a.ber, target_ber) - \
        snr_at_ber(result_b.snr_db, result_b.ber, target_ber)


@dataclass
class BenchResult:
    decoder: dict
    batch_size: int
    trials: List[float]

    @property
    def mean_mbps(self) -> float:
        return float(np.mean(self.trials))

    @property
    def std_mbps(self) -> float:
        return float(np.std(self.trials))


def throughput_bench(decoder, spec: CodeSpec, duration: float = 1.0, batch_size: int = 1024,
                     trials: int = 5, snr_db: float = 2.0, seed: int = 0) -> BenchResult:
    """Decoded information bits per second (in Mbps) over ``trials`` timed runs of >= ``duration`` s each."""
    if not duration > 0:
        raise HarnessError("benchmark duration must be positive")
    rng = derive_rng(seed, 0xBE)
    channel = ChannelModel.from_snr(snr_db)
    u = rng.integers(0, 2, size=(batch_size, spec.payload_len), dtype=np.uint8)
    rx = transmit(encode(u, spec), channel, rng)
    decoder.decode(rx, channel)
    rates = []
    for _ in range(trials):
        done = 0
        t0 = time.perf_counter()
        while True:
            decoder.decode(rx, channel)
            done += batch_size
            elapsed = time.perf_counter() - t0
            if elapsed >= duration:
                break
        rates.append(done * spec.payload_len / elapsed / 1e6)
    return BenchResult(decoder.describe(), batch_size, rates)
