"""Benchmark the compiled recurrent core against the pure-numpy fallback.

Runs forward and forward+backward passes over a batch of synthetic
sequences with both implementations and prints per-pass timings plus the
speedup. The two backends are also cross-checked for numerical agreement
so a timing win never hides a correctness regression.

Usage: python benchmarks/bench_core.py [--repeats N]
"""

import argparse
import time

import numpy as np

from kifa.net import _core_py
from kifa.net import model as netmod

try:
    from kifa.net import _core_cy
except ImportError:
    _core_cy = None


def _instances(n=20, t=24, k=30, h=64, m=16, seed=0):
    rng = np.random.default_rng(seed)
    cfg = netmod.NetConfig(hidden_size=h, joint_embed_size=m)
    params = netmod.init_params(cfg, k, rng)
    a = params.arrays
    seqs = [np.ascontiguousarray(rng.normal(size=(t, k, 3)))
            for _ in range(n)]
    args = (a["embed"], a["attn_w"], a["attn_u"], a["attn_b"], a["attn_v"],
            a["lstm_wx"], a["lstm_wh"], a["lstm_b"])
    return args, seqs, rng


def _run(core, args, seqs, rng, backward):
    outs = []
    t0 = time.perf_counter()
    for X in seqs:
        res = core.recurrent_forward(*args, X)
        if backward:
            dh = np.ones_like(res["h"])
            da = np.ones_like(res["aprime"])
            core.recurrent_backward(*args, X, res, dh, da)
        outs.append(res)
    return time.perf_counter() - t0, outs


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    bench = parser.parse_args()

    args, seqs, rng = _instances()
    cores = [("python", _core_py)]
    if _core_cy is not None:
        cores.append(("cython", _core_cy))
    else:
        print("compiled extension not available; benchmarking fallback only")

    for backward in (False, True):
        label = "forward+backward" if backward else "forward"
        print(f"\n{label} ({len(seqs)} sequences, best of {bench.repeats}):")
        results = {}
        for name, core in cores:
            best = min(_run(core, args, seqs, rng, backward)[0]
                       for _ in range(bench.repeats))
            results[name] = best
            print(f"  {name:>7}: {best * 1e3:8.2f} ms")
        if len(results) == 2:
            print(f"  speedup: {results['python'] / results['cython']:.2f}x")

    if _core_cy is not None:
        _, ref = _run(_core_py, args, seqs, rng, False)
        _, got = _run(_core_cy, args, seqs, rng, False)
        worst = max(float(np.max(np.abs(a[k] - b[k])))
                    for a, b in zip(ref, got) for k in a)
        print(f"\nmax |python - cython| over forward outputs: {worst:.2e}")


if __name__ == "__main__":
    main()
