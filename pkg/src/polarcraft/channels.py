"""Channel models (AWGN, coherent Rayleigh fading, Student-t) and LLR demodulation."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np


class ChannelKind(str, enum.Enum):
    AWGN = "awgn"
    RAYLEIGH = "rayleigh"
    STUDENT_T = "student_t"


# Stand-in LLR scale for sigma = 0; only the sign matters for noiseless decoding.
NOISELESS_LLR_SCALE = 40.0


def snr_to_sigma(snr_db: float) -> float:
    """Noise standard deviation for SNR = -10 log10(sigma^2)."""
    return float(10.0 ** (-snr_db / 20.0))


def sigma_to_snr(sigma: float) -> float:
    return float(-20.0 * np.log10(sigma))


def derive_rng(master_seed: int, *keys: int) -> np.random.Generator:
    """Independent PCG64 stream for (master_seed, *keys)."""
    seq = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, *[int(k) for k in keys]])
    return np.random.Generator(np.random.PCG64(seq))


@dataclass(frozen=True)
class ChannelModel:
    """Memoryless channel; ``sigma == 0`` is the noiseless override (y = x)."""

    kind: ChannelKind = ChannelKind.AWGN
    sigma: float = 1.0
    nu: float = 3.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ChannelKind(self.kind))
        if not self.sigma >= 0.0 or not np.isfinite(self.sigma):
            raise ValueError(f"sigma must be finite and >= 0, got {self.sigma}")
        if self.kind is ChannelKind.STUDENT_T and not self.nu > 2.0:
            raise ValueError(f"Student-t degrees of freedom must exceed 2, got {self.nu}")

    @classmethod
    def from_snr(cls, snr_db: float, kind=ChannelKind.AWGN, nu: float = 3.0) -> "ChannelModel":
        return cls(ChannelKind(kind), snr_to_sigma(snr_db), nu)

    @classmethod
    def from_config(cls, cfg: dict) -> "ChannelModel":
        kind = ChannelKind(cfg.get("kind", "awgn"))
        if cfg.get("noiseless"):
            sigma = 0.0
        elif "sigma" in cfg:
            sigma = float(cfg["sigma"])
        else:
            sigma = snr_to_sigma(float(cfg["snr_db"]))
        return cls(kind, sigma, float(cfg.get("nu", 3.0)))

    @property
    def noiseless(self) -> bool:
        return self.sigma == 0.0

    def with_sigma(self, sigma: float) -> "ChannelModel":
        return ChannelModel(self.kind, sigma, self.nu)

    def to_config(self) -> dict:
        cfg = {"kind": self.kind.value, "sigma": self.sigma}
        if self.kind is ChannelKind.STUDENT_T:
            cfg["nu"] = self.nu
        return cfg


@dataclass
class ReceivedWord:
    samples: np.ndarray
    fading_gains: Optional[np.ndarray] = None

    def __len__(self):
        return self.samples.shape[-1]


def transmit(x, channel: ChannelModel, rng: np.random.Generator) -> ReceivedWord:
    """Pass BPSK symbols (single word or batch) through the channel."""
    x = np.asarray(x, dtype=np.float64)
    kind = channel.kind
    gains = None
    if kind is ChannelKind.RAYLEIGH:
        # E[a^2] = 1 so the SNR definition is unchanged
        g = rng.standard_normal((2,) + x.shape)
        gains = np.sqrt(0.5 * (g[0] ** 2 + g[1] ** 2))
        clean = gains * x
    else:
        clean = x.copy()
    if channel.noiseless:
        return ReceivedWord(clean, gains)
    if kind is ChannelKind.STUDENT_T:
        noise = rng.standard_t(channel.nu, size=x.shape) * np.sqrt((channel.nu - 2.0) / channel.nu)
    else:
        noise = rng.standard_normal(x.shape)
    return ReceivedWord(clean + channel.sigma * noise, gains)


def llr(y: ReceivedWord | np.ndarray, channel: ChannelModel) -> np.ndarray:
    """Per-coordinate LLR log P(y|x=0)/P(y|x=1).

    Student-t noise is demodulated with the Gaussian metric on purpose.
    """
    if isinstance(y, ReceivedWord):
        samples, gains = y.samples, y.fading_gains
    else:
        samples, gains = np.asarray(y, dtype=np.float64), None
    if channel.kind is ChannelKind.RAYLEIGH:
        if gains is None:
            raise ValueError("Rayleigh LLRs need the fading gains of the received word")
        samples = gains * samples
    if channel.noiseless:
        return NOISELESS_LLR_SCALE * samples
    return 2.0 * samples / channel.sigma ** 2
