"""Time the numba-compiled kernels against their numpy twins.

    python benchmarks/bench_kernels.py [--repeat 20]

Both variants are imported directly from ``onlineaug.kernels.IMPLEMENTATIONS``,
so the result does not depend on ``ONLINEAUG_DISABLE_NUMBA``. Compilation time
is excluded by one warm-up call per kernel.
"""

import argparse
import timeit

import numpy as np

from onlineaug._jit import HAS_NUMBA
from onlineaug.kernels import IMPLEMENTATIONS


def cases(rng):
    img = rng.uniform(0, 255, size=(32, 32, 3))
    coeffs = np.array([0.96, 0.26, -3.1, -0.26, 0.96, 4.4])
    x = rng.normal(size=(64, 16, 16, 16))
    w = rng.normal(size=(32, 16, 3, 3))
    b = rng.normal(size=32)
    dout = rng.normal(size=(64, 32, 16, 16))
    pool_in = rng.normal(size=(64, 16, 32, 32))
    _, arg = IMPLEMENTATIONS["maxpool2_forward"][1](pool_in)
    pool_dout = rng.normal(size=(64, 16, 16, 16))
    return {
        "warp_affine": (img, coeffs, 128.0),
        "smooth3x3": (img,),
        "conv2d_forward": (x, w, b),
        "conv2d_backward": (x, w, dout),
        "maxpool2_forward": (pool_in,),
        "maxpool2_backward": (pool_dout, arg, 32, 32),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    if not HAS_NUMBA:
        print("numba is not installed; only the numpy column is meaningful")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<20}{'numba ms':>10}{'numpy ms':>10}{'speedup':>9}")
    for name, call_args in cases(rng).items():
        loop_fn, numpy_fn = IMPLEMENTATIONS[name]
        loop_fn(*call_args)  # compile
        t_jit = min(timeit.repeat(lambda: loop_fn(*call_args), number=1, repeat=args.repeat)) * 1e3
        t_np = min(timeit.repeat(lambda: numpy_fn(*call_args), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<20}{t_jit:>10.3f}{t_np:>10.3f}{t_np / t_jit:>8.1f}x")


if __name__ == "__main__":
    main()
