"""Regenerate tests/data/frozen_oracle.json from the Monte Carlo oracle.

The frozen numbers are simulation estimates only; quadrature prices are
never written here, so the tests compare two independent routes.

    python3 tools/freeze_oracle_values.py [--paths N] [--workers W]
"""
import argparse
import json
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

import oracle_cases  # noqa: E402
from infopricing import McConfig, RandomStream, bridge_coefficients, mc_price  # noqa: E402


def alpha_pin(paths, seed):
    """Sample variance of Z_st = xi_t/(T - t) - xi_s/(T - s) under the bridge law."""
    s, t, T = 0.5, 1.0, 2.0
    g = RandomStream(seed).substream(0)
    # xi_u = sigma u X + beta_u; the X terms cancel in Z_st so only the bridge matters
    b_s = np.sqrt(s * (T - s) / T) * g.normal(paths)
    nu, kappa = bridge_coefficients(s, t, T)
    b_t = kappa * b_s + nu * g.normal(paths)
    z = b_t / (T - t) - b_s / (T - s)
    return {"s": s, "t": t, "T": T, "variance": float(z.var(ddof=1)),
            "stderr": float(z.var(ddof=1) * np.sqrt(2.0 / (paths - 1))), "paths": paths}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--paths", type=int, default=1_000_000)
    ap.add_argument("--workers", type=int, default=8)
    ap.add_argument("--seed", type=int, default=20240611)
    args = ap.parse_args()
    out = {"seed": args.seed, "cases": {}}
    names = list(oracle_cases.TARGETS) + ["two_factor"]
    for i, name in enumerate(names):
        _, target, state = oracle_cases.fixed_case(name)
        cfg = McConfig(paths=args.paths, seed=args.seed, workers=args.workers, block_size=50_000)
        r = mc_price(target, state, cfg, stream_id=i)
        out["cases"][name] = {"estimate": r.estimate, "stderr": r.stderr, "paths": args.paths}
        print(f"{name:18s} {r.estimate:.8f} +- {r.stderr:.2e}")
    out["alpha"] = alpha_pin(args.paths, args.seed)
    path = ROOT / "tests" / "data" / "frozen_oracle.json"
    path.write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
