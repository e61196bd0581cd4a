"""Tabulate c_d for the polynomial derivative floor.

For each degree d, draws 10^4 random polynomials (see ``sample_poly``) and centres s in [-1, 1], records the smallest ratio

    max_k min_{[-1,1]} |P^(k)|  /  (sum_i |P^(i)(s)|^2)^(1/2),

and stores half of it as c_d.  The factor 1/2 is headroom for polynomials
the sample did not reach.

    python scripts/compute_poly_floor_constants.py [--samples N] [--seed S]
"""
from __future__ import annotations

import argparse
import json
from pathlib import Path

import numpy as np
from numpy.polynomial import polynomial as npoly

from ckl.sublevel import poly_floor_raw

SAFETY = 0.5
OUT = Path(__file__).resolve().parents[1] / "src" / "ckl" / "data" / "poly_floor_constants.json"


def sample_poly(rng, d: int) -> np.ndarray:
    # three kinds: real-rooted in [-1.2, 1.2] (every lower derivative then
    # vanishes inside the interval), scaled Gaussian coefficients, and Gaussian
    # coefficients in a basis centred at a random point
    kind = rng.integers(3)
    if kind == 0:
        return npoly.polyfromroots(rng.uniform(-1.2, 1.2, d)) * rng.uniform(0.1, 10)
    if kind == 1:
        return rng.standard_normal(d + 1) * rng.uniform(0.1, 10) ** np.arange(d + 1) / np.maximum(1, np.arange(d + 1))
    centre = rng.uniform(-1, 1)
    shifted = rng.standard_normal(d + 1)
    coef = np.zeros(d + 1)
    for i, c in enumerate(shifted):
        coef[: i + 1] += c * npoly.polypow([-centre, 1.0], i)
    return coef


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--samples", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=20240511)
    ap.add_argument("--max-degree", type=int, default=20)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    table = {0: 1.0}
    for d in range(1, args.max_degree + 1):
        worst = np.inf
        for _ in range(args.samples):
            coef = sample_poly(rng, d)
            if coef[-1] == 0:
                continue
            s = rng.uniform(-1, 1)
            _, floor, jet = poly_floor_raw(coef, s)
            worst = min(worst, floor / jet)
        # degree <= d contains every lower degree, so c_d cannot grow with d
        table[d] = min(SAFETY * worst, table[d - 1])
        print(f"d={d:2d}  sampled min ratio={worst:.4e}  c_d={table[d]:.4e}", flush=True)
    payload = {
        "description": "c_d such that max_k min_[-1,1] |P^(k)| >= c_d * (sum_i |P^(i)(s)|^2)^(1/2)",
        "samples_per_degree": args.samples,
        "seed": args.seed,
        "safety_factor": SAFETY,
        "c_d": {str(d): c for d, c in sorted(table.items())},
    }
    OUT.write_text(json.dumps(payload, indent=2) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
