"""Time the compiled kernels against their pure-Python twins.

    python3 benchmarks/bench_kernels.py [--size N] [--repeat R] [--json]

Each kernel runs on the same seeded inputs under both backends; results are
checked for bit-identity before any timing is reported.
"""
import argparse
import json
import random
import sys
import timeit

from dfbench import kernels


def inputs(n, seed=0):
    rng = random.Random(seed)
    values = [rng.uniform(-1e6, 1e6) for _ in range(n)]
    weights = [rng.uniform(1e-3, 1e3) for _ in range(n)]
    units = [rng.randint(1, 10_000) for _ in range(n)]
    return values, weights, units


def as_plain(x):
    return list(x) if hasattr(x, "__len__") else x


def cases(values, weights, units):
    total = sum(units)
    return {
        "neumaier_sum": lambda k: k.neumaier_sum(values),
        "weighted_mean": lambda k: k.weighted_mean(values, weights),
        "load_imbalance": lambda k: k.load_imbalance(units, weights),
        "split_even": lambda k: k.split_even(total, 64),
        "max_load_index": lambda k: k.max_load_index(units),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", action="store_true", help="machine-readable output")
    args = ap.parse_args(argv)

    compiled = kernels.compiled_backend
    if compiled is None:
        print("compiled backend not built; install with a C compiler to compare", file=sys.stderr)
        return 1
    py = kernels.python_backend
    rows = []
    for name, fn in cases(*inputs(args.size)).items():
        a, b = as_plain(fn(py)), as_plain(fn(compiled))
        if a != b:
            print(f"{name}: backends disagree ({a!r} vs {b!r})", file=sys.stderr)
            return 2
        t_py = min(timeit.repeat(lambda: fn(py), number=1, repeat=args.repeat))
        t_c = min(timeit.repeat(lambda: fn(compiled), number=1, repeat=args.repeat))
        rows.append({"kernel": name, "python_s": t_py, "cython_s": t_c, "speedup": t_py / t_c if t_c else float("inf")})

    if args.json:
        print(json.dumps({"size": args.size, "repeat": args.repeat, "results": rows}, indent=2))
    else:
        print(f"n = {args.size}, best of {args.repeat}")
        print(f"{'kernel':<16}{'python ms':>12}{'cython ms':>12}{'speedup':>10}")
        for r in rows:
            print(f"{r['kernel']:<16}{r['python_s'] * 1e3:>12.3f}{r['cython_s'] * 1e3:>12.3f}{r['speedup']:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
