"""Lower-bound ratios ||K g||_1 / ||g||_p for the compressed family along a delta ladder.

    python scripts/compression_ladder.py [--kmin 4] [--kmax 8] [--p 2 3]
"""
import argparse

from ckl.compression import compression_lower_bound, compression_volume_scan


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--kmin", type=int, default=4)
    ap.add_argument("--kmax", type=int, default=8)
    ap.add_argument("--p", type=float, nargs="+", default=[2.0, 3.0])
    args = ap.parse_args()
    deltas = [2.0**-k for k in range(args.kmin, args.kmax + 1)]

    scan = compression_volume_scan(deltas)
    print("delta      |N_delta M| lattice   strip oracle")
    for d, m, o in zip(scan.deltas, scan.measures, scan.oracle):
        print(f"{d:<10.6g} {m:<19.6g} {o:.6g}")
    print(f"volume slope {scan.fit.slope:+.3f}\n")

    lad = compression_lower_bound(args.p, deltas)
    for p, ratios in lad.ratios.items():
        print(f"p = {p:g}: ratios " + " ".join(f"{r:.4g}" for r in ratios))
        print(f"  slope {lad.fits[p].slope:+.3f} (unbounded-loss prediction {-1 / p:+.3f})")


if __name__ == "__main__":
    main()
