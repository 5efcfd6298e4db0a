"""Compare the compiled kernels with the numpy fallback.

Times each hot loop on identical inputs with both backends, checks that the
results agree, and prints one row per kernel::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

The end-to-end rows time public functions in a fresh interpreter with and
without ``INFOPRICING_PURE=1``.
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from infopricing import _pykernels
from infopricing.numerics import legendre_nodes, normal_nodes

try:
    from infopricing import _ckernels
except ImportError:
    _ckernels = None


def whk_args(rng, n=4000):
    x = 2.0 * rng.normal(size=n)
    tau = rng.uniform(0.1, 5.0, n)
    lx, lw = legendre_nodes(32)
    s = 0.5 * (lx + 1)
    W = np.ascontiguousarray(tau[:, None] * 0.5 * lw[None, :] * np.exp(-0.3 * tau[:, None] * s[None, :]))
    hz, hw = normal_nodes(3)
    return (x, tau, W, s, hz, hw, np.array([1.0, 0.5, 1.0, 0.0, 0.2]))


def bridge_args(rng, paths=2000, steps=500):
    z = rng.normal(size=(paths, steps))
    grid = np.linspace(2.0 / steps, 2.0 * (1 - 1.0 / steps), steps)
    return (z, grid, 2.0 + 1e-9, 0.0, 0.0)


def spread_args(rng, paths=800, steps=500):
    xi = rng.normal(size=(paths, steps))
    times = np.arange(steps) * (2.0 / steps)
    return (xi, times, 2.0, 1.0, 0.0, 1.0, np.log(4.0), 10.0)


CASES = {
    "whk_poly_eval (4000 points x 32 nodes)": ("whk_poly_eval", whk_args),
    "bridge_fill (2000 paths x 500 steps)": ("bridge_fill", bridge_args),
    "digital_spreads (800 paths x 500 steps)": ("digital_spreads", spread_args),
}

END_TO_END = {
    "spread figure, 200 paths/panel": (
        "from infopricing import SpreadExperiment, RandomStream, spread_paths\n"
        "spread_paths(SpreadExperiment(), RandomStream(1))"),
    "whk kernel, 20000 evaluations": (
        "import numpy as np\nfrom infopricing import whk_quadratic_kernel\n"
        "k = whk_quadratic_kernel(1.0, 0.5, 5.0)\n"
        "k(np.linspace(0, 4.5, 20000), np.linspace(-2, 2, 20000))"),
}


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def agree(a, b):
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    return max(float(np.max(np.abs(np.asarray(u, dtype=float) - np.asarray(v, dtype=float))))
               for u, v in zip(a, b))


def end_to_end(snippet, pure, repeat):
    env = dict(os.environ)
    if pure:
        env["INFOPRICING_PURE"] = "1"
    timer = f"import timeit\nprint(min(timeit.repeat({snippet!r}, number=1, repeat={repeat})))"
    out = subprocess.run([sys.executable, "-c", timer], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write the rows to this file")
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not built; only the numpy fallback is available")
        return 1
    rng = np.random.default_rng(0)
    rows = []
    print(f"{'kernel':44s} {'numpy s':>10s} {'cython s':>10s} {'speed-up':>9s} {'max |diff|':>11s}")
    for label, (name, make) in CASES.items():
        a = make(rng)
        py, cy = getattr(_pykernels, name), getattr(_ckernels, name)
        t_py = best_of(lambda: py(*a), args.repeat)
        t_cy = best_of(lambda: cy(*a), args.repeat)
        diff = agree(py(*a), cy(*a))
        rows.append(dict(kernel=label, numpy=t_py, cython=t_cy, speedup=t_py / t_cy, max_abs_diff=diff))
        print(f"{label:44s} {t_py:10.4f} {t_cy:10.4f} {t_py / t_cy:8.1f}x {diff:11.1e}")
    for label, snippet in END_TO_END.items():
        t_py = end_to_end(snippet, True, args.repeat)
        t_cy = end_to_end(snippet, False, args.repeat)
        rows.append(dict(kernel=label, numpy=t_py, cython=t_cy, speedup=t_py / t_cy, max_abs_diff=None))
        print(f"{label:44s} {t_py:10.4f} {t_cy:10.4f} {t_py / t_cy:8.1f}x {'':>11s}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)
            fh.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
