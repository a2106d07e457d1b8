"""Compare every agent profile on the desk scenario.

Prints global peak, mean of daily means, overloaded substations and the
first-vs-last-day reward change per profile and seed, and writes the same
table as CSV.

    python3 scripts/compare_profiles.py --seeds 0 1 2 --out runs/profiles.csv
"""

import argparse
import csv
import time
from pathlib import Path

from evcharge.config import AgentConfig, BehaviorConfig
from evcharge.engine import run
from evcharge.scenarios import desk_scenario

PROFILES = ["ConstantLoading", "WorkloadProportional", "Random", "LinUCB_Disjunct", "LinUCB_Hybrid", "QLearning"]


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--days", type=int, default=10)
    ap.add_argument("--alpha", type=float, default=0.3)
    ap.add_argument("--gamma", type=float, default=0.01)
    ap.add_argument("--diversion", default="DivertToHighestPower")
    ap.add_argument("--out", default="runs/profiles.csv")
    args = ap.parse_args()

    header = ["seed", "profile", "peak", "mean_daily_mean", "overloaded", "reward_day1", "reward_last", "seconds"]
    rows = []
    for seed in args.seeds:
        base = desk_scenario(seed=seed, days=args.days)
        for profile in PROFILES:
            diversion = "DoNotDivert" if profile == "ConstantLoading" else args.diversion
            cfg = base.replace(
                agents=AgentConfig(profile=profile, alpha=args.alpha, gamma=args.gamma),
                behavior=BehaviorConfig("AlwaysLoad", diversion),
                name=f"desk-{profile}",
            )
            t0 = time.perf_counter()
            m = run(cfg)
            rows.append([
                seed, profile, round(m.global_max(), 4), round(m.mean_daily_mean(), 5),
                sum(1 for n in m.overload_counts().values() if n),
                round(m.day_mean_reward(0), 4), round(m.day_mean_reward(args.days - 1), 4),
                round(time.perf_counter() - t0, 2),
            ])
            print("  ".join(f"{v!s:>20}" if i == 1 else f"{v!s:>9}" for i, v in enumerate(rows[-1])))

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    print(out)


if __name__ == "__main__":
    main()
