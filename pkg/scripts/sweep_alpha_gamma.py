"""Grid over LinUCB exploration width and the utility's income weight.

Neither value is fixed by the model; this reports how peak and mean loading
react on the desk scenario, relative to the uncontrolled run of the same seed.

    python3 scripts/sweep_alpha_gamma.py --seeds 0 1 2 -j 4
"""

import argparse
import itertools
from concurrent.futures import ProcessPoolExecutor

from evcharge.engine import run
from evcharge.scenarios import controlled, desk_scenario, uncontrolled


def one(job):
    seed, alpha, gamma = job
    cfg = desk_scenario(seed=seed)
    ref = run(uncontrolled(cfg))
    m = run(controlled(cfg, alpha=alpha, gamma=gamma))
    return (
        seed, alpha, gamma,
        m.global_max() - ref.global_max(),
        m.mean_daily_mean() - ref.mean_daily_mean(),
        m.day_mean_reward(9) - m.day_mean_reward(0),
    )


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--alphas", type=float, nargs="+", default=[0.1, 0.3, 1.0])
    ap.add_argument("--gammas", type=float, nargs="+", default=[0.0, 0.01, 0.1])
    ap.add_argument("-j", "--parallelism", type=int, default=1)
    args = ap.parse_args()

    jobs = list(itertools.product(args.seeds, args.alphas, args.gammas))
    with ProcessPoolExecutor(args.parallelism) as pool:
        results = list(pool.map(one, jobs))
    print("seed  alpha  gamma   d_peak    d_mean    d_reward")
    for seed, a, g, dp, dm, dr in results:
        print(f"{seed:>4}  {a:5.2f}  {g:5.2f}  {dp:+.4f}  {dm:+.5f}  {dr:+.4f}")


if __name__ == "__main__":
    main()
