"""Success rate of a strategy and its open-loop baseline as the estimate noise grows.

    python demos/noise_sweep.py PCT cover --trials 50
"""

from __future__ import annotations

import argparse

from tactigrasp.harness import Campaign, report_table, run_campaign


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("scene")
    ap.add_argument("object")
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--scales", default="0,0.5,1,2,4")
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    from tactigrasp.world import load_scene, shipped_scene_path

    strategy = load_scene(shipped_scene_path(args.scene)).object(args.object).strategies[0]
    scales = tuple(float(x) for x in args.scales.split(","))
    c = Campaign(args.scene, trials=args.trials, sigma_scales=scales, strategies=(strategy, "baseline"),
                 master_seed=args.seed, targets=(args.object,))
    print(report_table(run_campaign(c)), end="")


if __name__ == "__main__":
    main()
