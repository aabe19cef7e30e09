"""Compare the compiled decoder core against the numpy fallback.

Runs SC and SCL on the same LLR batches through both backends, checks that
the decisions agree and prints blocks per second for each.

    python3 benchmarks/bench_backends.py --n 64 --k 32 --blocks 2000
"""
import argparse
import json
import time

import numpy as np

from polarcraft import _backend
from polarcraft.channels import ChannelModel, derive_rng, llr, transmit
from polarcraft.construction import build_polar_spec
from polarcraft.encoding import encode


def timed(fn, repeats):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--k", type=int, default=32)
    p.add_argument("--blocks", type=int, default=2000)
    p.add_argument("--lists", default="1,8,32")
    p.add_argument("--snr", type=float, default=2.0)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--json", action="store_true", help="one JSON object per line")
    args = p.parse_args(argv)

    spec = build_polar_spec(args.n, args.k)
    rng = derive_rng(0, 0xBE)
    ch = ChannelModel.from_snr(args.snr)
    u = rng.integers(0, 2, (args.blocks, args.k), dtype=np.uint8)
    L = llr(transmit(encode(u, spec), ch, rng), ch)
    taps = np.array([1], dtype=np.uint8)

    try:
        fast = _backend.get("cython")
    except ImportError:
        print("compiled core not built; nothing to compare")
        return 1
    slow = _backend.get("python")

    cases = [("sc", None)] + [("scl", int(s)) for s in args.lists.split(",")]
    for name, lsize in cases:
        if name == "sc":
            run = lambda mod: mod.sc_decode_batch(L, spec.frozen_mask, False)[0]
        else:
            run = lambda mod: mod.scl_decode_batch(L, spec.frozen_mask, lsize, False, False, taps)[0]
        t_fast, a = timed(lambda: run(fast), args.repeats)
        t_slow, b = timed(lambda: run(slow), args.repeats)
        row = {"decoder": name, "list_size": lsize, "n": args.n, "k": args.k, "blocks": args.blocks,
               "cython_blocks_per_s": args.blocks / t_fast, "python_blocks_per_s": args.blocks / t_slow,
               "speedup": t_slow / t_fast, "identical": bool(np.array_equal(a, b))}
        if args.json:
            print(json.dumps(row))
        else:
            label = name if lsize is None else f"scl L={lsize}"
            print(f"{label:10s} cython {row['cython_blocks_per_s']:10.0f} blk/s   "
                  f"python {row['python_blocks_per_s']:10.0f} blk/s   "
                  f"x{row['speedup']:.1f}   identical={row['identical']}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
