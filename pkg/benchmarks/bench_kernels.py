#!/usr/bin/env python3
"""Benchmark the hot kernels on the Numba and pure-NumPy backends.

Runs each kernel in a subprocess per backend (the backend is chosen at
import time via FIBERKEY_DISABLE_NUMBA), reports timings and the speedup,
and checks that both backends agree: bit-exact for the integer counting
kernels, to float round-off for the mixture-entropy kernel.
"""
import json
import os
import subprocess
import sys
import time

import numpy as np

N_SAMPLES = 400_000
N_SYMBOLS = 36
N_FRAMES = 1_000_000


def run_benchmarks():
    from fiberkey._backend import BACKEND
    from fiberkey import _kernels as kernels

    rng = np.random.default_rng(0)
    out = {"backend": BACKEND}

    x = np.sqrt(0.5) * rng.standard_normal((N_SAMPLES, N_SYMBOLS))
    sent = rng.integers(0, N_SYMBOLS, N_SAMPLES)
    kernels.log1p_mixture_ratio(x[:256], sent[:256], 1.0)  # JIT warm-up
    t0 = time.perf_counter()
    ratios = kernels.log1p_mixture_ratio(x, sent, 1.0)
    out["log1p_mixture_ratio"] = {
        "seconds": time.perf_counter() - t0,
        "checksum": float(ratios.sum()),
    }

    means = np.full(N_SYMBOLS, 0.05)
    means[0] = 2.0
    counts = rng.poisson(means, size=(N_FRAMES, N_SYMBOLS))
    kernels.count_argmax_hits(counts[:256], 0)
    t0 = time.perf_counter()
    hits = kernels.count_argmax_hits(counts, 0)
    out["count_argmax_hits"] = {"seconds": time.perf_counter() - t0, "hits": int(hits)}

    kernels.count_threshold_outcomes(counts[:256], 2, 0)
    t0 = time.perf_counter()
    accepted, thr_hits = kernels.count_threshold_outcomes(counts, 2, 0)
    out["count_threshold_outcomes"] = {
        "seconds": time.perf_counter() - t0,
        "accepted": int(accepted),
        "hits": int(thr_hits),
    }
    return out


def run_in_subprocess(disable_numba):
    env = dict(os.environ, FIBERKEY_DISABLE_NUMBA="1" if disable_numba else "0")
    raw = subprocess.check_output([sys.executable, __file__, "--json"], env=env)
    return json.loads(raw)


def main():
    if "--json" in sys.argv:
        print(json.dumps(run_benchmarks()))
        return 0

    numba_res = run_in_subprocess(disable_numba=False)
    numpy_res = run_in_subprocess(disable_numba=True)
    if numba_res["backend"] == numpy_res["backend"]:
        print("numba unavailable: both runs used the numpy backend")

    print(f"{'kernel':<28} {'numba [s]':>10} {'numpy [s]':>10} {'speedup':>8}")
    for name in ("log1p_mixture_ratio", "count_argmax_hits", "count_threshold_outcomes"):
        a, b = numba_res[name], numpy_res[name]
        speed = b["seconds"] / a["seconds"] if a["seconds"] > 0 else float("inf")
        print(f"{name:<28} {a['seconds']:>10.4f} {b['seconds']:>10.4f} {speed:>7.1f}x")

    mix_drift = abs(
        numba_res["log1p_mixture_ratio"]["checksum"]
        - numpy_res["log1p_mixture_ratio"]["checksum"]
    ) / max(1.0, abs(numpy_res["log1p_mixture_ratio"]["checksum"]))
    ok = (
        mix_drift < 1e-12
        and numba_res["count_argmax_hits"]["hits"] == numpy_res["count_argmax_hits"]["hits"]
        and numba_res["count_threshold_outcomes"]["accepted"]
        == numpy_res["count_threshold_outcomes"]["accepted"]
        and numba_res["count_threshold_outcomes"]["hits"]
        == numpy_res["count_threshold_outcomes"]["hits"]
    )
    print(f"backend agreement: {'ok' if ok else 'MISMATCH'} (mixture drift {mix_drift:.2e})")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
