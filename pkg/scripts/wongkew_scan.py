"""Neighbourhood volumes of a sphere, a circle and the empty variety in a fixed box.

    python scripts/wongkew_scan.py [--kmin 3] [--kmax 7]
"""
import argparse

import numpy as np

from ckl.grains import circle_polynomials, neighborhood_volume_fit, sphere_polynomial


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--kmin", type=int, default=3)
    ap.add_argument("--kmax", type=int, default=6)
    args = ap.parse_args()
    deltas = [2.0**-k for k in range(args.kmin, args.kmax + 1)]
    box = (np.full(3, -0.7), np.full(3, 0.7))
    for label, funcs in [("sphere", [sphere_polynomial()]), ("circle", circle_polynomials()), ("box", [])]:
        res = neighborhood_volume_fit(funcs, deltas, box)
        vols = " ".join(f"{m:.4g}" for m in res.measures)
        print(f"{label:<7} codim {len(funcs)}  slope {res.fit.slope:+.3f}  volumes {vols}")


if __name__ == "__main__":
    main()
