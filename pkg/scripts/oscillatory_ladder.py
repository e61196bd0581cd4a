"""Norm ratios of S^lambda along a lambda ladder, per test function, with local slopes.

    python scripts/oscillatory_ladder.py --phase ConstCoeff --q 4 --rho 1 --lambdas 8 16 32
"""
import argparse

import numpy as np

from ckl.oscillatory import SUITE_NAMES, norm_scaling_experiment
from ckl.phases import phase


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--phase", default="ConstCoeff")
    ap.add_argument("--rho", type=float, default=1.0)
    ap.add_argument("--q", type=float, default=4.0)
    ap.add_argument("--lambdas", type=float, nargs="+", default=[8, 16, 32])
    ap.add_argument("--suite", nargs="+", default=["ConstantOne", "CapFunctions", "RandomSigns(0)"],
                    help=f"entries from {sorted(SUITE_NAMES)}")
    ap.add_argument("--mode", default="Hormander", choices=["Hormander", "LocalSmoothing"])
    ap.add_argument("--input-norm", default="L2", choices=["L2", "Linf"])
    args = ap.parse_args()

    ph = phase(args.phase, 3, rho=args.rho)
    res = norm_scaling_experiment(ph, args.q, args.lambdas, args.suite, args.mode, args.input_norm)
    logs = np.log(res.lambdas)
    print("lambda  " + " ".join(f"{lam:>9g}" for lam in res.lambdas))
    for label, ratios in res.per_function.items():
        print(f"{label:<24}" + " ".join(f"{r:9.4g}" for r in ratios))
    print(f"{'best':<24}" + " ".join(f"{r:9.4g}" for r in res.ratios))
    local = np.diff(np.log(res.ratios)) / np.diff(logs)
    print("local slopes " + " ".join(f"{s:+.3f}" for s in local))
    print(f"fitted slope {res.fit.slope:+.3f}")


if __name__ == "__main__":
    main()
