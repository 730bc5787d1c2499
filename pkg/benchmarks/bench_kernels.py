"""Compare the compiled and numpy backends on the solver's inner loops.

    python benchmarks/bench_kernels.py [--repeat 5] [--sizes 1000 4000 16000]

Prints one line per (operation, size) with the best-of-N time of each backend
and the speed-up.  A whole nonlocal run is timed as well.
"""
import argparse
import timeit

import numpy as np

from nonlocal_traffic import _backend, _pykernels
from nonlocal_traffic import kernel as K
from nonlocal_traffic import scenarios as S
from nonlocal_traffic.nonlocal_solver import NonlocalRunConfig, solve
from nonlocal_traffic.velocity import greenshields


def best(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def bench_loops(sizes, n_weights, repeat):
    from nonlocal_traffic import _ckernels

    rng = np.random.default_rng(0)
    rows = []
    for n in sizes:
        u = rng.random(n)
        g = rng.random(n_weights)
        g /= g.sum()
        speeds = 1.0 - rng.random(n + 1)
        number = max(1, 200000 // n)
        for name, args in (("lookahead_direct", (u, g, 0.0)), ("upwind_update", (u, speeds, 0.3, 0.4))):
            t_py = best(lambda: getattr(_pykernels, name)(*args), repeat, number)
            t_c = best(lambda: getattr(_ckernels, name)(*args), repeat, number)
            rows.append((name, n, t_py, t_c))
    return rows


def bench_solve(repeat):
    kind = S.RandomBV(1, 20)
    eps, dx = 0.1, 0.1 / 32
    spec = K.uniform()
    dk = K.discretize(spec, eps, dx)
    g = S.grid_for_datum(kind, dx, 1.0, 1.0, dk.reach)
    u0 = S.standard_datum(kind, g)
    cfg = NonlocalRunConfig(g, spec, eps, greenshields(), 1.0, 0.5)
    out = {}
    prev = _backend.NAME
    try:
        for name in ("python", "cython"):
            _backend.use(name)
            out[name] = best(lambda: solve(cfg, u0, dk), repeat, 1)
    finally:
        _backend.use(prev)
    return g.n_cells, dk.weights.size, out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--sizes", type=int, nargs="+", default=[1000, 4000, 16000])
    p.add_argument("--weights", type=int, default=64, help="kernel length for the direct look-ahead")
    args = p.parse_args(argv)
    if not _backend.compiled_available():
        raise SystemExit("compiled kernels not built; run `pip install -e . --no-build-isolation` first")

    print(f"{'operation':<18}{'cells':>8}{'numpy [s]':>14}{'cython [s]':>14}{'speed-up':>10}")
    for name, n, t_py, t_c in bench_loops(args.sizes, args.weights, args.repeat):
        print(f"{name:<18}{n:>8}{t_py:>14.3e}{t_c:>14.3e}{t_py / t_c:>10.2f}")
    n, m, t = bench_solve(max(1, args.repeat // 2))
    print(f"{'solve (uniform)':<18}{n:>8}{t['python']:>14.3e}{t['cython']:>14.3e}"
          f"{t['python'] / t['cython']:>10.2f}   ({m} weights, t_end=1)")


if __name__ == "__main__":
    main()
