"""Worst-case sublevel profiles and fitted kappa for the built-in ensembles.

    python scripts/sublevel_profiles.py [--y-samples 512]
"""
import argparse

from ckl.sublevel import kappa_experiment

RUNS = [("t2_ty", "Averaged"), ("t2_ty", "Slice"), ("slice_example", "Averaged"), ("slice_example", "Slice"),
        ("star_minors", "Slice")]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--y-samples", type=int, default=512)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    for name, mode in RUNS:
        prof = kappa_experiment(name, mode, y_samples=args.y_samples, seed=args.seed)
        flag = "non-power-law" if prof.non_power_law else f"residual {prof.max_log_residual:.2f}"
        print(f"{name:<14} {mode:<9} kappa {prof.fitted_kappa:6.3f}  C {prof.fitted_C:8.3g}  {flag}")


if __name__ == "__main__":
    main()
