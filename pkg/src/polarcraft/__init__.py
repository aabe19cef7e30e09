"""Polar and PAC codes: construction, encoding, classical decoders, a GRU decoder and its curriculum."""
from ._backend import BACKEND
from .analysis import bitwise_diagnostics, learning_difficulty, noiseless_ber, noiseless_rules
from .channels import ChannelKind, ChannelModel, ReceivedWord, derive_rng, llr, snr_to_sigma, transmit
from .construction import (CRC_POLYNOMIALS, CodeSpec, Family, build_crc_polar_spec, build_pac_spec,
                           build_polar_spec)
from .curriculum import CurriculumKind, TrainConfig, make_schedule, run_curriculum
from .decoders import (MAPDecoder, SCDecoder, SCLDecoder, map_oracle, pac_sc_decode, sc_decode,
                       scl_decode)
from .encoding import crc_attach, crc_check, embed, encode, extract, pac_precode, plotkin_tree
from .harness import ExperimentConfig, gap_at_ber, simulate, throughput_bench
from .neural import CrispDecoder, crisp_forward, crisp_loss_and_grads, init_params, load_params, save_params

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "bitwise_diagnostics", "learning_difficulty", "noiseless_ber", "noiseless_rules",
    "ChannelKind", "ChannelModel", "ReceivedWord", "derive_rng", "llr", "snr_to_sigma", "transmit",
    "CRC_POLYNOMIALS", "CodeSpec", "Family", "build_crc_polar_spec", "build_pac_spec", "build_polar_spec",
    "CurriculumKind", "TrainConfig", "make_schedule", "run_curriculum",
    "MAPDecoder", "SCDecoder", "SCLDecoder", "map_oracle", "pac_sc_decode", "sc_decode", "scl_decode",
    "crc_attach", "crc_check", "embed", "encode", "extract", "pac_precode", "plotkin_tree",
    "ExperimentConfig", "gap_at_ber", "simulate", "throughput_bench",
    "CrispDecoder", "crisp_forward", "crisp_loss_and_grads", "init_params", "load_params", "save_params",
]
