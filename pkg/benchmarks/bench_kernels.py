"""Wall-clock comparison of the numba kernels and their numpy fallbacks.

    python benchmarks/bench_kernels.py [--gaussians 500] [--height 256] [--width 384] [--repeat 3]

The first numba call includes JIT compilation and is reported separately.
"""

import argparse
import time

import numpy as np

from uars.filters import sep_filter, ssim_terms
from uars.harness import SynthConfig, camera_ring, random_scene
from uars.raster.render import render, render_backward

BACKENDS = ("numba", "numpy")


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--gaussians", type=int, default=500)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--width", type=int, default=384)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)

    cfg = SynthConfig(gaussian_count=args.gaussians, height=args.height, width=args.width)
    scene = random_scene(cfg, np.random.default_rng(0))
    cam = camera_ring(cfg)[0]
    rng = np.random.default_rng(1)
    grad = rng.normal(size=(args.height, args.width, 3))
    stack = rng.uniform(size=(args.height, args.width, 15))
    k = np.exp(-0.5 * (np.arange(11) - 5) ** 2 / 1.5**2)
    k /= k.sum()

    cases = {
        "render": lambda b: render(scene, cam, backend=b),
        "render_backward": lambda b: render_backward(scene, cam, grad, backend=b),
        "sep_filter": lambda b: sep_filter(stack, k, backend=b),
        "ssim_terms": lambda b: ssim_terms(stack, 3, 1e-4, 9e-4, 1.0, backend=b),
    }
    print(f"{args.gaussians} Gaussians, {args.height}x{args.width}, best of {args.repeat}")
    print(f"{'kernel':<18}{'first numba':>12}{'numba':>10}{'numpy':>10}{'speedup':>9}")
    for name, fn in cases.items():
        t0 = time.perf_counter()
        fn("numba")
        first = time.perf_counter() - t0
        tn, tp = (best_of(lambda b=b: fn(b), args.repeat) for b in BACKENDS)
        print(f"{name:<18}{first:>11.3f}s{tn:>9.3f}s{tp:>9.3f}s{tp / tn:>8.1f}x")


if __name__ == "__main__":
    main()
