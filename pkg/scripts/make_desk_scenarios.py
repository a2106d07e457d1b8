"""Write the desk scenario files used by the acceptance suite and README examples.

    python3 scripts/make_desk_scenarios.py --out scenarios --seed 0
"""

import argparse
from pathlib import Path

from evcharge.config import dump_config
from evcharge.scenarios import base_case, controlled, desk_scenario, uncontrolled


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="scenarios")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--days", type=int, default=10)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = desk_scenario(seed=args.seed, days=args.days)
    for variant in (base_case(cfg), uncontrolled(cfg), controlled(cfg)):
        path = out / f"{variant.name}.yaml"
        dump_config(variant, path)
        print(path)


if __name__ == "__main__":
    main()
