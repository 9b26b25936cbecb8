"""Time the compiled core against the numpy fallback.

Kernel timings call both modules directly on identical inputs. The end-to-end
GBDT fit runs in a subprocess per backend because the backend is picked at
import time.

    python3 benchmarks/bench_kernels.py [--rows 20000] [--features 100] [--repeat 5]
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from hybridcast import _pycore

try:
    from hybridcast import _core
except ImportError:
    _core = None

FIT_SNIPPET = """
import json, time, numpy as np
from hybridcast.gbdt import BoostConfig, fit_gbdt
from hybridcast.kernels import BACKEND
rng = np.random.default_rng(0)
X = rng.normal(size=({rows}, {features}))
y = X[:, 0] - 2 * X[:, 1] ** 2 + rng.normal(size={rows})
out = {{}}
for mode in ("leafwise", "oblivious"):
    start = time.perf_counter()
    fit_gbdt(X, y, BoostConfig(mode=mode, n_iterations={iters}, goss=None))
    out[mode] = time.perf_counter() - start
print(json.dumps({{"backend": BACKEND, **out}}))
"""


def kernel_inputs(rows, features, n_bins, seed=0):
    rng = np.random.default_rng(seed)
    binned = rng.integers(0, n_bins, size=(features, rows)).astype(np.int32)
    idx = np.sort(rng.choice(rows, size=rows // 2, replace=False)).astype(np.int64)
    wg, wh = rng.normal(size=rows), np.ones(rows)
    X = rng.normal(size=(rows, features))
    # complete depth-8 tree over random features
    n_internal = 2 ** 8 - 1
    n_nodes = 2 * n_internal + 1
    feature = np.full(n_nodes, -1, dtype=np.int32)
    feature[:n_internal] = rng.integers(0, features, size=n_internal)
    threshold = np.zeros(n_nodes)
    threshold[:n_internal] = rng.normal(size=n_internal)
    left = np.full(n_nodes, -1, dtype=np.int32)
    right = np.full(n_nodes, -1, dtype=np.int32)
    left[:n_internal] = 2 * np.arange(n_internal) + 1
    right[:n_internal] = 2 * np.arange(n_internal) + 2
    value = rng.normal(size=n_nodes)
    return binned, idx, wg, wh, X, (feature, threshold, left, right, value)


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def time_kernels(mod, inputs, n_bins, repeat, threads=1):
    binned, idx, wg, wh, X, tree = inputs
    features = binned.shape[0]
    hist = mod.build_histograms(binned, idx, wg, wh, n_bins, threads)
    nb = np.full(features, n_bins, dtype=np.int32)
    col, off = np.arange(features, dtype=np.int32), np.zeros(features, dtype=np.int32)
    g, h, n = float(wg[idx].sum()), float(wh[idx].sum()), int(idx.size)
    unpacked = mod.unpack_histograms(*hist, col, off, nb, n_bins, g, h, n)
    return {
        "build_histograms": best_of(
            lambda: mod.build_histograms(binned, idx, wg, wh, n_bins, threads), repeat),
        "unpack_histograms": best_of(
            lambda: mod.unpack_histograms(*hist, col, off, nb, n_bins, g, h, n), repeat),
        "split_gains": best_of(
            lambda: mod.split_gains(*unpacked, nb, g, h, n, 1.0, 0.0, 1), repeat),
        "predict_tree": best_of(lambda: mod.predict_tree(X, *tree), repeat),
    }


def time_fit(pure, rows, features, iters):
    env = dict(os.environ, HYBRIDCAST_PURE_PYTHON="1" if pure else "0")
    code = FIT_SNIPPET.format(rows=rows, features=features, iters=iters)
    done = subprocess.run([sys.executable, "-c", code], env=env, check=True,
                          capture_output=True, text=True)
    return json.loads(done.stdout)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=20000)
    parser.add_argument("--features", type=int, default=100)
    parser.add_argument("--bins", type=int, default=256)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--threads", type=int, default=4)
    parser.add_argument("--fit-rows", type=int, default=5000)
    parser.add_argument("--fit-iters", type=int, default=20)
    args = parser.parse_args(argv)
    if _core is None:
        sys.exit("compiled core not built; run `pip install -e . --no-build-isolation` first")

    inputs = kernel_inputs(args.rows, args.features, args.bins)
    slow = time_kernels(_pycore, inputs, args.bins, args.repeat)
    fast = time_kernels(_core, inputs, args.bins, args.repeat)
    fast_mt = time_kernels(_core, inputs, args.bins, args.repeat, args.threads)

    print(f"kernels: {args.rows} rows x {args.features} features, {args.bins} bins, "
          f"best of {args.repeat}")
    print(f"{'kernel':<20}{'numpy ms':>12}{'cython ms':>12}{'speedup':>10}"
          f"{f'cython x{args.threads} ms':>18}")
    for name in slow:
        print(f"{name:<20}{slow[name] * 1e3:>12.2f}{fast[name] * 1e3:>12.2f}"
              f"{slow[name] / fast[name]:>9.1f}x{fast_mt[name] * 1e3:>18.2f}")

    print(f"\nend-to-end fit: {args.fit_rows} rows x {args.features} features, "
          f"{args.fit_iters} iterations")
    py = time_fit(True, args.fit_rows, args.features, args.fit_iters)
    cy = time_fit(False, args.fit_rows, args.features, args.fit_iters)
    for mode in ("leafwise", "oblivious"):
        print(f"{mode:<20}{py[mode]:>11.2f}s{cy[mode]:>11.2f}s{py[mode] / cy[mode]:>9.1f}x"
              f"   ({py['backend']} vs {cy['backend']})")


if __name__ == "__main__":
    main()
