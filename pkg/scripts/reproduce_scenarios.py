"""Run both preset scenarios over several seeds, write traces and per-figure
CSVs under OUT/<scenario>/seed<k>/, and print a summary table."""

import argparse
from pathlib import Path

from netsparse.harness import PRESETS, emit_plot_data, run_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs")
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    args = ap.parse_args()

    print(f"{'scenario':<10} {'seed':>4} {'max NSR dB':>11} {'mean s':>7} {'mean s_hat':>10} {'ratio':>6} {'viol':>5}")
    for name in ("scenario1", "scenario2"):
        for seed in args.seeds:
            out = Path(args.out) / name / f"seed{seed}"
            res = run_scenario(PRESETS[name].with_(steps=args.steps, seed=seed), out_dir=out)
            emit_plot_data(res.paths["trace"], out / "plots")
            s = res.summary
            print(
                f"{name:<10} {seed:>4} {s['max_nsr_db']:>11.1f} {s['mean_s']:>7.2f} "
                f"{s['mean_s_hat']:>10.2f} {s['compression_ratio']:>6.3f} {s['dominance_violations']:>5}"
            )


if __name__ == "__main__":
    main()
