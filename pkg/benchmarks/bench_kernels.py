"""Time each hot kernel under numba and under plain numpy.

    python benchmarks/bench_kernels.py [--repeat 5]

Both backends are imported side by side from ``emotraj.kernels``; the
environment flag only decides which one the package itself uses. Every
numba kernel is called once before timing so compilation is excluded.
"""
import argparse
import timeit

import numpy as np

from emotraj import kernels
from emotraj.haarlite import _pack, enumerate_features
from emotraj.imagecore import eye_similarity


def cases(rng):
    img = rng.integers(0, 256, (64, 64)).astype(np.int64)
    table = kernels.integral_table_np(img).astype(np.float64)
    n = 20_000
    xs = rng.integers(0, 32, n)
    ys = rng.integers(0, 32, n)
    ws = rng.integers(0, 33, n)
    hs = rng.integers(0, 33, n)

    feats = enumerate_features(16, step=2)
    rx, ry, rw, rh, rwt, white = _pack(feats)
    windows = np.stack([kernels.integral_table_np(rng.integers(0, 256, (16, 16))).astype(np.float64)
                        for _ in range(200)])

    values = kernels.haar_matrix_np(windows, rx, ry, rw, rh, rwt)
    order = np.ascontiguousarray(np.argsort(values, axis=0, kind="mergesort"), dtype=np.int64)
    sorted_vals = np.ascontiguousarray(np.take_along_axis(values, order, axis=0))
    labels = np.where(np.arange(200) < 100, 1.0, -1.0)
    weights = np.full(200, 1 / 200)

    stumps = feats[:20]
    srx, sry, srw, srh, srwt, _ = _pack(stumps)
    oy, ox = np.mgrid[0:49, 0:49]
    ox = np.ascontiguousarray(ox.ravel(), dtype=np.int64)
    oy = np.ascontiguousarray(oy.ravel(), dtype=np.int64)
    thr = rng.normal(0, 500, 20)
    pol = np.where(rng.random(20) < 0.5, 1.0, -1.0)
    alphas = rng.uniform(0.1, 1.0, 20)

    a = rng.normal(size=(64, 64))
    gram = a @ a.T

    src = rng.uniform(0, 255, (96, 96))
    fwd = eye_similarity((30.0, 40.0), (66.0, 38.0), (64, 64))
    inv = np.linalg.inv(np.vstack([fwd, [0, 0, 1]]))[:2]

    coeffs = rng.normal(size=(4, 10, 9))
    x = rng.uniform(-1, 1, (10, 8))

    return {
        "integral_table 64x64": ("integral_table", (img,)),
        "rect_sums 20k": ("rect_sums", (table, xs, ys, ws, hs)),
        f"haar_matrix 200x{len(feats)}": ("haar_matrix", (windows, rx, ry, rw, rh, rwt)),
        f"best_stump 200x{len(feats)}": ("best_stump", (sorted_vals, order, labels, weights)),
        "window_votes 49x49, 20 stumps": ("window_votes", (table, ox, oy, srx, sry, srw, srh, srwt,
                                                           np.ones(20), thr, pol, alphas)),
        "jacobi_eigh 64x64": ("jacobi_eigh", (gram, 1e-12, 100)),
        "warp_bilinear 96->64": ("warp_bilinear", (src, np.ascontiguousarray(inv), 64, 64)),
        "poly_residuals 4x10x8": ("poly_residuals", (coeffs, x)),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':<32} {'numba ms':>10} {'numpy ms':>10} {'speedup':>8}")
    for label, (name, inputs) in cases(rng).items():
        nb, np_ = kernels.NUMBA_KERNELS[name], kernels.NUMPY_KERNELS[name]
        nb(*inputs)
        timings = []
        for fn in (nb, np_):
            timer = timeit.Timer(lambda fn=fn: fn(*inputs))
            loops, _ = timer.autorange()
            timings.append(min(timer.repeat(args.repeat, loops)) / loops * 1e3)
        print(f"{label:<32} {timings[0]:>10.3f} {timings[1]:>10.3f} {timings[1] / timings[0]:>7.1f}x")


if __name__ == "__main__":
    main()
