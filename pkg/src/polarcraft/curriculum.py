"""Curriculum training of the neural decoder on a chain of subcodes.

A curriculum unfreezes one information bit per step. Each step trains on the
subcode whose only free bits are the active set, starting from the weights
left by the previous step.
"""
from __future__ import annotations

import csv
import enum
import io
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Union

import numpy as np

from .channels import ChannelModel, derive_rng, snr_to_sigma
from .construction import CodeSpec, Family, n2c_order
from .decoders import scl_decode_batch, sc_decode_batch
from .encoding import crc_attach, embed, modulate, pac_precode, plotkin_tree
from .neural import GruDecoderParams, crisp_forward, crisp_loss_and_grads, init_params

log = logging.getLogger(__name__)

SNR_GRID = (-4.0, 8.0, 0.25)
BER_BAND = (1e-2, 1e-1)
BER_TARGET = 3e-2


class CurriculumError(ValueError):
    pass


class CurriculumKind(str, enum.Enum):
    L2R = "l2r"
    R2L = "r2l"
    N2C = "n2c"
    C2N = "c2n"
    RANDOM = "random"
    NONE = "none"


@dataclass(frozen=True)
class CurriculumStep:
    active_set: tuple
    iterations: int
    train_snr_db: float


@dataclass
class CurriculumSchedule:
    kind: CurriculumKind
    steps: List[CurriculumStep]
    seed: Optional[int] = None

    @property
    def total_iterations(self) -> int:
        return sum(s.iterations for s in self.steps)

    def active_sets(self):
        return [s.active_set for s in self.steps]


def curriculum_order(spec: CodeSpec, kind, seed: int = 0) -> tuple:
    """Order in which information bits are unfrozen."""
    kind = CurriculumKind(kind)
    info = tuple(spec.info_set)
    if kind in (CurriculumKind.L2R, CurriculumKind.NONE):
        return info
    if kind is CurriculumKind.R2L:
        return info[::-1]
    if kind is CurriculumKind.N2C:
        return n2c_order(spec)
    if kind is CurriculumKind.C2N:
        return n2c_order(spec)[::-1]
    rng = derive_rng(seed, 0xC0DE)
    return tuple(int(i) for i in rng.permutation(np.asarray(info)))


def make_schedule(spec: CodeSpec, kind, iters_per_step: int = 2000, final_iters: Optional[int] = None,
                  snr_policy: Union[float, str] = "auto", seed: int = 0,
                  probe_blocks: int = 10_000) -> CurriculumSchedule:
    """Build the chain of active sets, each with an iteration budget and training SNR.

    ``snr_policy`` is a fixed SNR in dB or ``"auto"`` (per-step search with
    :func:`select_train_snr`). ``NONE`` is a single full-code step whose
    budget equals the whole curriculum's so paired runs are comparable.
    """
    try:
        kind = CurriculumKind(kind)
    except ValueError:
        raise CurriculumError(f"unknown curriculum kind {kind!r}") from None
    if iters_per_step < 1:
        raise CurriculumError("iters_per_step must be positive")
    final_iters = iters_per_step if final_iters is None else int(final_iters)

    def snr_for(active):
        if snr_policy == "auto":
            return select_train_snr(spec, active, probe_blocks=probe_blocks, seed=seed)
        return float(snr_policy)

    k = spec.k
    if kind is CurriculumKind.NONE:
        total = (k - 1) * iters_per_step + final_iters
        full = tuple(spec.info_set)
        return CurriculumSchedule(kind, [CurriculumStep(full, total, snr_for(full))], None)
    order = curriculum_order(spec, kind, seed)
    steps = []
    for j in range(1, k + 1):
        active = tuple(order[:j])
        iters = final_iters if j == k else iters_per_step
        steps.append(CurriculumStep(active, iters, snr_for(active)))
    return CurriculumSchedule(kind, steps, seed if kind is CurriculumKind.RANDOM else None)


def subcode_spec(spec: CodeSpec, active_set) -> CodeSpec:
    """The code whose free bits are exactly ``active_set`` (the full spec when it is the info set)."""
    active = tuple(sorted(int(i) for i in active_set))
    if not active:
        raise CurriculumError("active set is empty")
    if not set(active) <= set(spec.info_set):
        raise CurriculumError(f"active set {active} is not inside the information set")
    if active == tuple(spec.info_set):
        return spec
    return spec.with_info_set(active)


def holdout_subset(num_active: int, keep_fraction: float, seed: int) -> np.ndarray:
    """Seeded set of message patterns (as integers, first active bit most significant) kept for training."""
    if num_active > 20:
        raise CurriculumError("codebook holdout needs at most 2^20 patterns")
    total = 2 ** num_active
    keep = max(1, int(round(keep_fraction * total)))
    rng = derive_rng(seed, 0x401D)
    return np.sort(rng.permutation(total)[:keep])


def _patterns_to_bits(ints: np.ndarray, width: int) -> np.ndarray:
    shifts = np.arange(width - 1, -1, -1)
    return ((ints[:, None] >> shifts) & 1).astype(np.uint8)


def gen_training_batch(spec: CodeSpec, active_set, snr_db: Optional[float], batch_size: int,
                       rng: np.random.Generator, allowed: Optional[np.ndarray] = None):
    """Random subcode messages through the channel; returns (y, m) with m the n-bit source vectors.

    Bits outside ``active_set`` are zero. ``allowed`` restricts the active
    bit patterns to the given integers (see :func:`holdout_subset`).
    ``snr_db=None`` sends noiseless codewords.
    """
    sub = subcode_spec(spec, active_set)
    if batch_size < 1:
        raise CurriculumError("batch_size must be positive")
    if sub.family is Family.CRC_POLAR:
        width = sub.k_m
    else:
        width = sub.k
    if allowed is not None:
        picks = rng.choice(np.asarray(allowed, dtype=np.int64), size=batch_size)
        u = _patterns_to_bits(picks, width)
    else:
        u = rng.integers(0, 2, size=(batch_size, width), dtype=np.uint8)
    if sub.family is Family.CRC_POLAR:
        u = crc_attach(u, sub.crc_poly)
    m = embed(u, sub)
    v = pac_precode(m, sub.pac_kernel) if sub.family is Family.PAC else m
    x = modulate(plotkin_tree(v))
    if snr_db is None:
        return x, m
    return x + snr_to_sigma(snr_db) * rng.standard_normal(x.shape), m


def reference_ber(spec: CodeSpec, active_set, snr_db: float, num_blocks: int, seed: int = 0) -> float:
    """SC bit error rate of the subcode, counted over its information bits."""
    sub = spec.with_info_set(subcode_spec(spec, active_set).info_set)
    rng = derive_rng(seed, 0x5C)
    y, m = gen_training_batch(sub, sub.info_set, snr_db, num_blocks, rng)
    ch = ChannelModel(sigma=snr_to_sigma(snr_db))
    llrs = 2.0 * y / ch.sigma ** 2
    if sub.family is Family.PAC:
        m_hat = scl_decode_batch(llrs, sub, 1)[1]
    else:
        m_hat = sc_decode_batch(llrs, sub)[1]
    pos = sub.info_positions
    return float((m_hat[:, pos] != m[:, pos]).mean())


def select_train_snr(spec: CodeSpec, active_set, probe_blocks: int = 10_000, seed: int = 0,
                     grid=SNR_GRID, target: float = BER_TARGET, band=BER_BAND) -> float:
    """Grid SNR at which the subcode's SC decoder has BER closest to ``target``.

    Bisects the grid for the first point with BER <= target (BER falls with
    SNR), then picks whichever neighbour is closer to the target in log BER.
    Falls back to a grid edge with a logged warning if the target is not
    bracketed.
    """
    lo, hi, step = grid
    points = np.round(np.arange(lo, hi + step / 2, step), 6)
    cache = {}
    floor = 0.5 / (probe_blocks * len(tuple(active_set)))

    def ber(i):
        if i not in cache:
            cache[i] = reference_ber(spec, active_set, float(points[i]), probe_blocks, seed)
        return cache[i]

    if ber(0) <= target:
        log.warning("SC BER at %.2f dB is already below target for %s; using grid edge",
                    points[0], tuple(active_set))
        return float(points[0])
    if ber(len(points) - 1) > target:
        log.warning("SC BER at %.2f dB is still above target for %s; using grid edge",
                    points[-1], tuple(active_set))
        return float(points[-1])
    a, b = 0, len(points) - 1          # ber(a) > target >= ber(b)
    while b - a > 1:
        mid = (a + b) // 2
        if ber(mid) > target:
            a = mid
        else:
            b = mid
    dist = {i: abs(math.log(max(ber(i), floor)) - math.log(target)) for i in (a, b)}
    best = min((a, b), key=lambda i: (dist[i], i))
    if not band[0] <= ber(best) <= band[1]:
        log.warning("selected %.2f dB has SC BER %.3g outside %s", points[best], ber(best), band)
    return float(points[best])


@dataclass
class AdamState:
    m: dict
    v: dict
    t: int = 0

    @classmethod
    def zeros(cls, params: GruDecoderParams) -> "AdamState":
        return cls({k: np.zeros_like(a) for k, a in params.arrays.items()},
                   {k: np.zeros_like(a) for k, a in params.arrays.items()})


def adamw_step(params: GruDecoderParams, grads: GruDecoderParams, state: AdamState, lr: float,
               betas=(0.9, 0.999), eps: float = 1e-8, weight_decay: float = 0.01):
    """One AdamW update in place with decoupled weight decay; returns (params, state)."""
    b1, b2 = betas
    state.t += 1
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, theta in params.arrays.items():
        g = grads.arrays[name]
        if g.shape != theta.shape or state.m[name].shape != theta.shape:
            raise CurriculumError(f"shape mismatch for {name}")
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        theta -= lr * ((m / c1) / (np.sqrt(v / c2) + eps) + weight_decay * theta)
    return params, state


@dataclass
class TrainConfig:
    batch_size: int = 512
    learning_rate: float = 1e-3
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.01
    iters_per_step: int = 2000
    final_iters: Optional[int] = None
    lr_decay: str = "step"
    feedback: str = "teacher"
    eval_every: int = 250
    val_blocks: int = 10_000
    noiseless_blocks: int = 1000
    hidden_dim: int = 64
    num_layers: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise CurriculumError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise CurriculumError("learning_rate must be > 0")
        if self.lr_decay not in ("step", "cosine", "none"):
            raise CurriculumError(f"unknown lr_decay {self.lr_decay!r}")
        if self.feedback not in ("teacher", "student"):
            raise CurriculumError(f"unknown feedback mode {self.feedback!r}")
        self.betas = tuple(self.betas)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["betas"] = list(self.betas)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise CurriculumError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**d)


def lr_at(config: TrainConfig, it: int, iters: int, final: bool) -> float:
    """Learning rate at 0-based iteration ``it`` of a step; only the final step decays."""
    lr = config.learning_rate
    if not final or config.lr_decay == "none":
        return lr
    if config.lr_decay == "step":
        return lr * 0.5 ** min(3, (4 * it) // iters)
    return lr * 0.5 * (1.0 + math.cos(math.pi * it / iters))


@dataclass
class HistoryRow:
    iteration: int
    step: int
    loss: float
    val_ber: float
    noiseless_ber: float
    bit_ber: np.ndarray


@dataclass
class TrainHistory:
    info_set: tuple
    rows: List[HistoryRow] = field(default_factory=list)

    def columns(self):
        return ["iteration", "loss", "val_ber", "noiseless_ber"] + [f"ber_m{i}" for i in self.info_set]

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns())
        for r in self.rows:
            w.writerow([r.iteration, repr(r.loss), repr(r.val_ber), repr(r.noiseless_ber)]
                       + [repr(float(b)) for b in r.bit_ber])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @property
    def final(self) -> HistoryRow:
        return self.rows[-1]


def evaluate(params: GruDecoderParams, spec: CodeSpec, active_set, snr_db: Optional[float],
             num_blocks: int, rng: np.random.Generator, batch: int = 5000):
    """Student-forced BER over the active bits and per-information-bit BER (inactive bits vs 0)."""
    active = tuple(sorted(active_set))
    slots = [list(spec.info_set).index(i) for i in active]
    errs = np.zeros(spec.k)
    done = 0
    while done < num_blocks:
        b = min(batch, num_blocks - done)
        y, m = gen_training_batch(spec, active, snr_db, b, rng)
        trace = crisp_forward(y, spec, params, "student", active_set=active)
        decided = (trace.p > 0.5).astype(np.uint8)
        errs += (decided != m[:, spec.info_positions]).sum(axis=0)
        done += b
    bit_ber = errs / num_blocks
    return float(bit_ber[slots].mean()), bit_ber


def run_curriculum(spec: CodeSpec, schedule: CurriculumSchedule, config: TrainConfig,
                   params: Optional[GruDecoderParams] = None,
                   callback: Optional[Callable[[HistoryRow], None]] = None):
    """Train through every schedule step, warm-starting each from the last.

    Returns the final parameters and the evaluation history.
    """
    if params is None:
        params = init_params(spec.n, config.hidden_dim, config.num_layers,
                             rng=derive_rng(config.seed, 0))
    if params.n != spec.n:
        raise CurriculumError(f"model length {params.n} does not match code length {spec.n}")
    history = TrainHistory(tuple(spec.info_set))
    state = AdamState.zeros(params)
    it_global = 0
    last_step = len(schedule.steps) - 1
    for j, step in enumerate(schedule.steps):
        data_rng = derive_rng(config.seed, 1, j)
        eval_count = 0
        loss = float("nan")
        for it in range(step.iterations):
            y, m = gen_training_batch(spec, step.active_set, step.train_snr_db, config.batch_size, data_rng)
            trace = crisp_forward(y, spec, params, config.feedback, teacher=m,
                                  active_set=step.active_set)
            loss, grads = crisp_loss_and_grads(trace, m, step.active_set)
            lr = lr_at(config, it, step.iterations, j == last_step)
            adamw_step(params, grads, state, lr, config.betas, config.eps, config.weight_decay)
            it_global += 1
            if (it + 1) % config.eval_every == 0 or it + 1 == step.iterations:
                eval_rng = derive_rng(config.seed, 2, j, eval_count)
                eval_count += 1
                val, bit_ber = evaluate(params, spec, step.active_set, step.train_snr_db,
                                        config.val_blocks, eval_rng)
                noiseless, _ = evaluate(params, spec, step.active_set, None,
                                        config.noiseless_blocks, eval_rng)
                row = HistoryRow(it_global, j, loss, val, noiseless, bit_ber)
                history.rows.append(row)
                log.info("step %d it %d loss %.5f val_ber %.4g noiseless %.4g",
                         j, it_global, loss, val, noiseless)
                if callback is not None:
                    callback(row)
    return params, history

