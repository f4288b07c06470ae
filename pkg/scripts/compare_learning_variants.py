"""Compare dictionary-learning variants on the preset scenarios: atom reuse
on/off, signed vs absolute OMP selection, and tighter OMP tolerances."""

import argparse

from netsparse.harness import PRESETS, run_scenario

VARIANTS = {
    "default": {},
    "no-reuse": {"atom_reuse": False},
    "signed": {"omp_signed_correlation": True},
    "tol=1e-9*sqrt(n)": {"omp_tol": 1e-9 * 30**0.5},
    "omp-recovery": {"recovery": "omp"},
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print(f"{'scenario':<10} {'variant':<18} {'max NSR dB':>11} {'mean s':>7} {'ratio':>6} {'viol':>5}")
    for name in ("scenario1", "scenario2"):
        for label, kw in VARIANTS.items():
            cfg = PRESETS[name].with_(steps=args.steps, seed=args.seed, **kw)
            s = run_scenario(cfg).summary
            print(
                f"{name:<10} {label:<18} {s['max_nsr_db']:>11.1f} {s['mean_s']:>7.2f} "
                f"{s['compression_ratio']:>6.3f} {s['dominance_violations']:>5}"
            )


if __name__ == "__main__":
    main()
