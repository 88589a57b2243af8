"""Quality of both systems on the default swarm as the erasure rate grows.

Run: python3 demos/cliff_effect.py [--trials N]
"""

import argparse

import numpy as np

from uavsense.harness import BASELINE, OPTIMAL, HarnessConfig, default_scenario, sweep_reliability


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=300)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    grid = np.round(np.arange(0, 0.2001, 0.02), 2)
    res = sweep_reliability(default_scenario(), grid, HarnessConfig(trials=args.trials), args.seed)
    by = {(r.sweep_var, r.system): r for r in res.rows}
    print(f"{'eps':>5} {'Optimal':>9} {'Baseline':>9}")
    for e in grid:
        o, b = by[(e, OPTIMAL)], by[(e, BASELINE)]
        print(f"{e:5.2f} {o.quality:9.3f} {b.quality:9.3f}")


if __name__ == "__main__":
    main()
