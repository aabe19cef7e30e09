"""Command line entry point: construct | encode | decode | simulate | train | analyze | bench."""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .channels import ChannelModel, ReceivedWord, derive_rng, snr_to_sigma, transmit
from .construction import CodeSpec
from .encoding import encode, encode_bits

log = logging.getLogger("polarcraft")


class CliError(Exception):
    pass


def _load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise CliError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"invalid JSON in {path}: {exc}") from None


def _int_list(text):
    if text is None:
        return None
    return [int(t) for t in text.replace(",", " ").split()]


def parse_message(text: str, k: int) -> np.ndarray:
    """Message bits from '1 0 1 1', '1011', '0b1011' or '0xB' (hex/0b forms padded to k, MSB first)."""
    t = text.strip().lower()
    if t.startswith(("0x", "0b")):
        value = int(t, 0)
        if value >> k:
            raise CliError(f"message {text!r} does not fit in {k} bits")
        return np.array([(value >> (k - 1 - i)) & 1 for i in range(k)], dtype=np.uint8)
    digits = t.replace(",", " ").split()
    if len(digits) == 1:
        digits = list(digits[0])
    if any(d not in ("0", "1") for d in digits):
        raise CliError(f"message {text!r} is not a bit string")
    if len(digits) != k:
        raise CliError(f"message has {len(digits)} bits, the code carries {k}")
    return np.array([int(d) for d in digits], dtype=np.uint8)


def parse_llrs(text: str) -> np.ndarray:
    """LLR vector from a JSON array, whitespace-separated floats, a file path or '-' for stdin."""
    if text == "-":
        text = sys.stdin.read()
    elif Path(text).is_file():
        text = Path(text).read_text()
    t = text.strip()
    try:
        vals = json.loads(t) if t.startswith("[") else [float(v) for v in t.replace(",", " ").split()]
    except (json.JSONDecodeError, ValueError):
        raise CliError("LLRs must be a JSON array or whitespace-separated floats") from None
    return np.asarray(vals, dtype=np.float64)


def add_code_args(p):
    p.add_argument("--family", default="polar", choices=["polar", "pac", "crc_polar"])
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--z0", type=float)
    p.add_argument("--override", help="explicit information set, e.g. '2,4'")
    p.add_argument("--kernel", help="PAC convolution taps, e.g. '1,0,1,1,0,1,1'")
    p.add_argument("--crc-poly", help="CRC generator as an integer (0b/0x prefixes allowed)")
    p.add_argument("--spec-file", help="code spec JSON written by 'construct --out'")


def code_config(args) -> dict:
    if args.spec_file:
        return {"spec_file": args.spec_file}
    if args.n is None or args.k is None:
        raise CliError("--n and --k are required (or --spec-file)")
    cfg = {"family": args.family, "n": args.n, "k": args.k}
    if args.z0 is not None:
        cfg["z0"] = args.z0
    if args.override:
        cfg["override"] = _int_list(args.override)
    if args.kernel:
        cfg["kernel"] = _int_list(args.kernel)
    if args.crc_poly:
        cfg["crc_poly"] = int(args.crc_poly, 0)
    return cfg


def build_spec(args) -> CodeSpec:
    from .harness import spec_from_config
    return spec_from_config(code_config(args))


def add_decoder_args(p):
    p.add_argument("--decoder", default="sc", choices=["sc", "scl", "map", "crisp"])
    p.add_argument("--list-size", type=int, default=8)
    p.add_argument("--metric", default="exact", choices=["exact", "approx"])
    p.add_argument("--lse", default="exact", choices=["exact", "minsum"])
    p.add_argument("--checkpoint")


def decoder_config(args) -> dict:
    cfg = {"kind": args.decoder}
    if args.decoder == "scl":
        cfg.update(list_size=args.list_size, metric=args.metric)
    if args.decoder in ("sc", "scl"):
        cfg["lse"] = args.lse
    if args.decoder == "crisp":
        if not args.checkpoint:
            raise CliError("--checkpoint is required for the crisp decoder")
        cfg["checkpoint"] = args.checkpoint
    return cfg


def cmd_construct(args):
    spec = build_spec(args)
    print("info_set {" + ",".join(map(str, spec.info_set)) + "}")
    print("reliability_order " + " < ".join(f"m{i}" for i in spec.reliability_order))
    if args.out:
        Path(args.out).write_text(spec.to_json() + "\n")
    return 0


def cmd_encode(args):
    spec = build_spec(args)
    u = parse_message(args.bits, spec.payload_len)
    x = encode_bits(u, spec)
    print(" ".join(map(str, x.tolist())))
    if args.symbols:
        print(" ".join(f"{s:+.0f}" for s in encode(u, spec)))
    return 0


def cmd_decode(args):
    from .harness import make_decoder
    spec = build_spec(args)
    decoder = make_decoder(spec, decoder_config(args))
    if args.llrs is not None:
        llrs = parse_llrs(args.llrs)
        if llrs.ndim != 1 or llrs.size != spec.n:
            raise CliError(f"expected {spec.n} LLRs, got {llrs.size}")
        # with sigma^2 = 2 the channel LLR 2y/sigma^2 is y itself
        u_hat = decoder.decode(ReceivedWord(llrs[None, :]), ChannelModel(sigma=math.sqrt(2.0)))[0]
        print(" ".join(map(str, u_hat.tolist())))
        return 0
    rng = derive_rng(args.seed, 0xDEC)
    channel = ChannelModel(sigma=0.0) if args.noiseless else ChannelModel(sigma=snr_to_sigma(args.snr))
    u = rng.integers(0, 2, size=(args.blocks, spec.payload_len), dtype=np.uint8)
    rx = transmit(encode(u, spec), channel, rng)
    wrong = decoder.decode(rx, channel) != u
    print(json.dumps({"blocks": args.blocks, "snr_db": None if args.noiseless else args.snr,
                      "ber": float(wrong.mean()), "bler": float(wrong.any(axis=1).mean())}))
    return 0


def cmd_simulate(args):
    from .harness import ExperimentConfig, simulate
    if args.config:
        cfg = ExperimentConfig.from_dict(_load_json(args.config))
    else:
        cfg = ExperimentConfig(code=code_config(args), decoder=decoder_config(args),
                               snr_start=args.snr_start, snr_stop=args.snr_stop, snr_step=args.snr_step,
                               min_block_errors=args.min_errors, max_blocks=args.max_blocks,
                               seed=args.seed)
    result = simulate(cfg, output=args.out)
    sys.stdout.write(result.to_csv())
    return 0


def cmd_train(args):
    from .curriculum import TrainConfig, make_schedule, run_curriculum
    from .harness import spec_from_config
    from .neural import save_params
    cfg = _load_json(args.config) if args.config else {}
    code = cfg.pop("code", None)
    spec = spec_from_config(code) if code else build_spec(args)
    kind = cfg.pop("curriculum", args.curriculum)
    snr_policy = cfg.pop("snr_policy", args.snr if args.snr is not None else "auto")
    out_dir = Path(cfg.pop("output_dir", args.out_dir))
    tc = TrainConfig.from_dict(cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    schedule = make_schedule(spec, kind, tc.iters_per_step, tc.final_iters, snr_policy, tc.seed)
    params, history = run_curriculum(spec, schedule, tc)
    save_params(out_dir / "checkpoint.json", params, spec, tc.seed, len(schedule.steps))
    history.to_csv(out_dir / "history.csv")
    final = history.final
    print(json.dumps({"checkpoint": str(out_dir / "checkpoint.json"),
                      "history": str(out_dir / "history.csv"),
                      "train_snr_db": schedule.steps[-1].train_snr_db,
                      "final_val_ber": final.val_ber, "final_noiseless_ber": final.noiseless_ber}))
    return 0


def cmd_analyze(args):
    from .analysis import bitwise_diagnostics, learning_difficulty, noiseless_rules
    from .curriculum import make_schedule
    from .harness import make_decoder
    spec = build_spec(args)
    out = Path(args.out_dir) if args.out_dir else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    rules = noiseless_rules(spec)
    rules_json = json.dumps(rules.to_dict(), indent=1)
    schedule = make_schedule(spec, args.curriculum, 1, snr_policy=0.0)
    trace_csv = learning_difficulty(spec, schedule).to_csv()
    if out:
        (out / "rules.json").write_text(rules_json + "\n")
        (out / "difficulty.csv").write_text(trace_csv)
    else:
        print(rules_json)
        sys.stdout.write(trace_csv)
    if args.diagnostics:
        decoder = make_decoder(spec, decoder_config(args))
        channel = ChannelModel.from_snr(args.snr)
        report = bitwise_diagnostics(decoder, spec, channel, args.blocks, args.seed)
        if out:
            (out / "bitwise.csv").write_text(report.to_csv())
        else:
            sys.stdout.write(report.to_csv())
    return 0


def cmd_bench(args):
    from .harness import make_decoder, throughput_bench
    spec = build_spec(args)
    kinds = args.decoders.split(",")
    for kind in kinds:
        cfg = {"kind": kind, "lse": args.lse}
        if kind.startswith("scl"):
            cfg = {"kind": "scl", "list_size": int(kind[3:] or args.list_size), "metric": args.metric,
                   "lse": args.lse}
        elif kind == "crisp":
            cfg = {"kind": "crisp", "checkpoint": args.checkpoint}
        res = throughput_bench(make_decoder(spec, cfg), spec, args.duration, args.batch_size,
                               args.trials, args.snr)
        print(json.dumps({"decoder": res.decoder, "mbps_mean": res.mean_mbps, "mbps_std": res.std_mbps}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polarcraft", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", help="build a code and print its information set")
    add_code_args(p)
    p.add_argument("--out", help="write the spec as JSON")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("encode", help="encode one message")
    add_code_args(p)
    p.add_argument("--bits", required=True, help="message, e.g. '1 0 1 1', '1011' or '0xB'")
    p.add_argument("--symbols", action="store_true", help="also print BPSK symbols")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode an LLR vector, or random blocks with a BER/BLER report")
    add_code_args(p)
    add_decoder_args(p)
    p.add_argument("--llrs", help="LLR vector: JSON array, whitespace floats, a file, or '-' for stdin")
    p.add_argument("--snr", type=float, default=2.0)
    p.add_argument("--noiseless", action="store_true")
    p.add_argument("--blocks", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("simulate", help="BER/BLER sweep")
    add_code_args(p)
    add_decoder_args(p)
    p.add_argument("--config")
    p.add_argument("--snr-start", type=float, default=0.0)
    p.add_argument("--snr-stop", type=float, default=4.0)
    p.add_argument("--snr-step", type=float, default=0.5)
    p.add_argument("--min-errors", type=int, default=100)
    p.add_argument("--max-blocks", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV path (JSON sidecar written next to it)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="curriculum training of the neural decoder")
    add_code_args(p)
    p.add_argument("--config", help="JSON with TrainConfig fields plus code/curriculum/snr_policy")
    p.add_argument("--curriculum", default="l2r", choices=["l2r", "r2l", "n2c", "c2n", "random", "none"])
    p.add_argument("--snr", type=float, help="fixed training SNR (default: automatic)")
    p.add_argument("--out-dir", default="train_out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("analyze", help="noiseless rules, difficulty trace, bitwise diagnostics")
    add_code_args(p)
    add_decoder_args(p)
    p.add_argument("--curriculum", default="l2r", choices=["l2r", "r2l", "n2c", "c2n", "random", "none"])
    p.add_argument("--diagnostics", action="store_true")
    p.add_argument("--snr", type=float, default=0.0)
    p.add_argument("--blocks", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("bench", help="decoder throughput in Mbps")
    add_code_args(p)
    p.add_argument("--decoders", default="sc,scl", help="comma list: sc, scl, scl32, map, crisp")
    p.add_argument("--list-size", type=int, default=8)
    p.add_argument("--metric", default="exact", choices=["exact", "approx"])
    p.add_argument("--lse", default="exact", choices=["exact", "minsum"])
    p.add_argument("--checkpoint")
    p.add_argument("--duration", type=float, default=1.0)
    p.add_argument("--batch-size", type=int, default=1024)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--snr", type=float, default=2.0)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, ValueError, KeyError, OSError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"polarcraft {args.command}: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
