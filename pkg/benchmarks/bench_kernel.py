"""Time the compiled simulation kernel against the pure-Python one.

    python3 benchmarks/bench_kernel.py --events 1000000 --repeat 3

Both kernels run on the same event stream; their tallies must agree exactly.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from stubborn_mining.domain import make_params, strategy_flags
from stubborn_mining.montecarlo import _kernel_py
from stubborn_mining.montecarlo.simulator import DEFAULT_OCC_CAP, _flag_tuple, draw_events


def _time(fn, ev, flags, honest, batches, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(ev, flags, honest, 0, 0, len(ev) // batches, batches, DEFAULT_OCC_CAP)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--events", type=int, default=1_000_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--strategies", default="SM,LFT-s,HONEST")
    ap.add_argument("--alpha", type=float, default=0.3)
    ap.add_argument("--gamma", type=float, default=0.5)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)

    try:
        from stubborn_mining.montecarlo import _kernel
    except ImportError:
        print("compiled kernel not built; run `pip install -e . --no-build-isolation`", file=sys.stderr)
        return 1

    params = make_params(args.alpha, args.gamma)
    ev = draw_events(params, args.events, args.seed)
    print(f"{'strategy':<8} {'python_s':>10} {'cython_s':>10} {'speedup':>8}  identical")
    for name in args.strategies.split(","):
        flags = strategy_flags(name)
        ft = _flag_tuple(flags)
        tp, a = _time(_kernel_py.run_kernel, ev, ft, int(flags.is_honest), 100, args.repeat)
        tc, b = _time(_kernel.run_kernel, ev, ft, int(flags.is_honest), 100, args.repeat)
        same = all(np.array_equal(np.asarray(x), np.asarray(y)) for x, y in zip(a[:2], b[:2]))
        print(f"{flags.name:<8} {tp:>10.3f} {tc:>10.4f} {tp / tc:>8.1f}  {same}")
        if not same:
            return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
