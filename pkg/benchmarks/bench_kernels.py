"""Time one smoothing replicate on the compiled and NumPy backends.

    python benchmarks/bench_kernels.py [--n 864] [--m 15] [--K 1000] [--repeat 20]

Sizes default to one dataset-1 population at desk scale.
"""
import argparse
import timeit

import numpy as np
from scipy.spatial import cKDTree

from drfs._backend import BACKENDS


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=864)
    ap.add_argument("--m", type=int, default=15)
    ap.add_argument("--K", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    X = rng.standard_normal((args.n, args.m))
    eps = rng.standard_normal((args.n, args.m))
    alpha = rng.uniform(0.5, 2.0, args.m)
    mu = rng.standard_normal(args.n)
    nbr = None
    if args.K < args.n:
        _, nbr = cKDTree(X).query(X + np.sqrt(alpha) * eps, k=args.K)
        nbr = np.asarray(nbr, dtype=np.intp)

    ref = None
    print(f"n={args.n} m={args.m} K={min(args.K, args.n)}")
    for name, mod in sorted(BACKENDS.items()):
        sq, g = mod.replicate_terms(X, eps, alpha, mu, nbr)
        if ref is None:
            ref = (sq, g)
        else:
            assert np.isclose(sq, ref[0], rtol=1e-10) and np.allclose(g, ref[1], rtol=1e-8)
        t = min(timeit.repeat(lambda: mod.replicate_terms(X, eps, alpha, mu, nbr),
                              number=1, repeat=args.repeat))
        print(f"{name:>8}: {1e3 * t:8.2f} ms per replicate (loss + gradient)")
    if len(BACKENDS) == 1:
        print("compiled extension not built; only the NumPy backend ran")


if __name__ == "__main__":
    main()
