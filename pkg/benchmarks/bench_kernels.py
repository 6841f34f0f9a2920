"""Compiled vs numpy backends for the hot kernels.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--threads N]

Prints one CSV row per kernel: median seconds for each backend and the speedup.
Both backends are also checked for identical output on the benchmark inputs.
"""

import argparse
import importlib
import statistics
import time

import numpy as np

from subbitsnn import _ext
from subbitsnn._ext import _conv_py, _quant_py
from subbitsnn.codebook import sample_codebook


def median_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def cases(rng):
    s = (rng.random((8, 64, 16, 16)) < 0.2).astype(np.uint8)
    signs = np.where(rng.random((128, 64, 3, 3)) < 0.5, -1, 1).astype(np.int8)
    cb = sample_codebook(3, 3, 4, 0)
    idx = rng.integers(0, 16, size=(128, 64))
    kernels = rng.standard_cauchy(size=(128 * 64, 3, 3))
    flat = kernels.reshape(len(kernels), 9)
    cw = cb.codewords.reshape(16, 9).astype(np.float64)
    return {
        "binary_conv 8x64x16x16 -> 128": ("conv", "binary_conv_int", (s, signs)),
        "subbit_conv eta=4 8x64x16x16 -> 128": ("conv", "subbit_conv_int", (s, idx, cb.codewords)),
        "osquant_scale 8192 kernels": ("quant", "osquant_scale", (kernels, 1.5)),
        "nearest_codeword 8192 x 16": ("quant", "nearest_codeword", (flat, cw)),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--threads", type=int, default=None, help="OpenMP threads for the compiled kernels")
    args = ap.parse_args(argv)

    if not (_ext.compiled_available("conv") and _ext.compiled_available("quant")):
        raise SystemExit("compiled extensions are not built; run `pip install -e . --no-build-isolation` first")
    if args.threads:
        _ext.set_num_threads(args.threads)
    compiled = {
        "conv": importlib.import_module("subbitsnn._ext._conv_ext"),
        "quant": importlib.import_module("subbitsnn._ext._quant_ext"),
    }
    reference = {"conv": _conv_py, "quant": _quant_py}

    print("kernel,cython_s,numpy_s,speedup,identical")
    for name, (group, fn_name, fn_args) in cases(np.random.default_rng(0)).items():
        fast = getattr(compiled[group], fn_name)
        slow = getattr(reference[group], fn_name)
        same = all(np.array_equal(np.asarray(a), np.asarray(b)) for a, b in zip(fast(*fn_args), slow(*fn_args)))
        t_fast = median_time(lambda: fast(*fn_args), args.repeat)
        t_slow = median_time(lambda: slow(*fn_args), args.repeat)
        print(f"{name},{t_fast:.6f},{t_slow:.6f},{t_slow / t_fast:.2f},{same}")


if __name__ == "__main__":
    main()
