"""Time the compiled kernels against the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Each kernel runs on a fixed random workload of the size it sees in the
pressure and separated-set computations; the table reports the best of
``--repeat`` runs and the speedup of the compiled path.
"""

import argparse
import json
import sys
import timeit

import numpy as np

from thurston import _kernels_py as py
from thurston.sphere import fibonacci_sphere
from thurston.sphere_map import shipped_map

try:
    from thurston import _kernels as cy
except ImportError:
    cy = None


def workloads(rng):
    n, d = 4096, 6
    coeffs = rng.standard_normal((n, d + 1)) + 1j * rng.standard_normal((n, d + 1))
    roots = np.stack([np.roots(c[::-1])[:d] for c in coeffs]) + 1e-6
    t = rng.standard_normal((n, 4)) + 1j * rng.standard_normal((n, 4))
    theta = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    poly = (1 + 0.3 * np.cos(5 * theta)) * np.exp(1j * theta)
    pts = rng.standard_normal(20_000) + 1j * rng.standard_normal(20_000)
    backend = shipped_map()
    z, w = fibonacci_sphere(20_000)
    coords = backend.f.orbit_xyz(z, w, 3)
    return {
        "poly_eval": (lambda m: m.poly_eval(coeffs, t)),
        "polish_roots": (lambda m: m.polish_roots(coeffs, roots)),
        "polygon_test": (lambda m: m.polygon_test(poly, pts)),
        "greedy_separated": (lambda m: m.greedy_separated(coords, 0.1)),
    }


def best_time(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write the timings to this file")
    args = ap.parse_args(argv)
    if cy is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation`", file=sys.stderr)
        return 1
    rows = []
    print(f"{'kernel':<18} {'python [ms]':>12} {'cython [ms]':>12} {'speedup':>8}")
    for name, run in workloads(np.random.default_rng(0)).items():
        t_py = best_time(lambda: run(py), args.repeat)
        t_cy = best_time(lambda: run(cy), args.repeat)
        rows.append({"kernel": name, "python_s": t_py, "cython_s": t_cy, "speedup": t_py / t_cy})
        print(f"{name:<18} {1e3 * t_py:12.2f} {1e3 * t_cy:12.2f} {t_py / t_cy:8.1f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
