"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--repeat N] [--T 64] [--dim 17]

The first numba call compiles (or loads from the on-disk cache) and is
excluded. Both implementations are checked to agree before timing.
"""

import argparse
import timeit

import numpy as np

from dsrl import kernels
from dsrl.manifold import lift_from_euclidean


def _cases(T, dim, rng):
    X = lift_from_euclidean(rng.normal(0, 1.0, (T, dim - 1)))
    Y = lift_from_euclidean(rng.normal(0, 1.0, (T, dim - 1)))
    n = 20 * T
    scores = rng.random(n).round(3)  # rounded so the AP tie groups are exercised
    labels = (rng.random(n) < 0.3).astype(np.int64)
    labels[0] = 1
    labels[1] = 0
    return {
        "lorentz_gram": ((X, Y), {}),
        "pairwise_distance": ((X, Y, -1.0), {}),
        "dirichlet_energy": ((X, -1.0), {}),
        "membership_residual": ((X, -1.0), {}),
        "temporal_adjacency": ((T, float(np.e)), {}),
        "grouped_ap": ((scores, labels), {}),
        "pair_auc": ((scores, labels), {}),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--T", type=int, default=64, help="snippets per video")
    ap.add_argument("--dim", type=int, default=17, help="ambient dimension n+1")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if kernels.lorentz_gram_nb is None:
        print("numba is not installed; nothing to compare")
        return 1
    rng = np.random.default_rng(args.seed)
    print(f"T={args.T} dim={args.dim} repeat={args.repeat} (selected backend: {kernels.BACKEND})")
    print(f"{'kernel':<22}{'numpy us':>12}{'numba us':>12}{'speedup':>10}")
    for name, (a, kw) in _cases(args.T, args.dim, rng).items():
        f_np = getattr(kernels, f"{name}_np")
        f_nb = getattr(kernels, f"{name}_nb")
        ref, got = f_np(*a, **kw), f_nb(*a, **kw)  # also triggers compilation
        np.testing.assert_allclose(got, ref, rtol=1e-10, atol=1e-9, err_msg=name)
        t_np = min(timeit.repeat(lambda: f_np(*a, **kw), number=args.repeat, repeat=3)) / args.repeat
        t_nb = min(timeit.repeat(lambda: f_nb(*a, **kw), number=args.repeat, repeat=3)) / args.repeat
        print(f"{name:<22}{t_np * 1e6:>12.1f}{t_nb * 1e6:>12.1f}{t_np / t_nb:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
