"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_backends.py [--n 21] [--rows 10000] [--repeat 3]
"""

import argparse
import time

import numpy as np

from ktreebn import _backend
from ktreebn.baseline import sample_ktree, s_l
from ktreebn.exact import exact_learn
from ktreebn.scoring import build_cache
from ktreebn.search import kastar_learn, kg_learn
from ktreebn.synth import forward_sample, inverted_tree_network


def _best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=21)
    ap.add_argument("--rows", type=int, default=10000)
    ap.add_argument("--k", type=int, default=2)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    table = forward_sample(inverted_tree_network(args.k, args.n, rng), args.rows, rng)
    orders = [rng.permutation(args.n) for _ in range(50)]
    ktrees = [sample_ktree(rng, args.n, args.k) for _ in range(200)]
    cache = build_cache(table, args.k)

    def cases():
        yield "build_cache", lambda: build_cache(table, args.k)
        yield "kg x50", lambda: [kg_learn(o, cache, args.k) for o in orders]
        yield "kastar x5", lambda: [kastar_learn(o, cache, args.k, node_budget=20000) for o in orders[:5]]
        yield "s_l x200", lambda: [s_l(t, cache) for t in ktrees]
        yield "exact 16 vars", lambda: exact_learn(cache, range(min(16, args.n)))

    results = {}
    for name in _backend.available():
        _backend.set_backend(name)
        results[name] = {case: _best_of(fn, args.repeat) for case, fn in cases()}
    names = _backend.available()
    print(f"n={args.n} rows={args.rows} k={args.k} best of {args.repeat}")
    print(f"{'case':<16}" + "".join(f"{b:>12}" for b in names) + ("     speedup" if len(names) > 1 else ""))
    for case in results[names[0]]:
        row = f"{case:<16}" + "".join(f"{results[b][case]:>11.4f}s" for b in names)
        if "cython" in results and "python" in results:
            row += f"{results['python'][case] / results['cython'][case]:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
