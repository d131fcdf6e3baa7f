#!/usr/bin/env python3
"""Fork-contest experiment: honest majority vs a low-credibility coalition.

Each trial builds two competing forks of equal length on a shared base chain
and asks the fork-choice rule to pick one.  Trials where the honest side's
accumulated score is at least twice the coalition's are counted; the honest
side should win essentially all of them.
"""

import argparse

from cidnsim.experiments import fork_contest


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--min-ratio", type=float, default=2.0)
    args = ap.parse_args()

    qualified = wins = 0
    for seed in range(args.trials):
        res = fork_contest(seed)
        if res is None or res.ratio < args.min_ratio:
            continue
        qualified += 1
        wins += res.honest_won
    frac = wins / qualified if qualified else float("nan")
    print(f"qualified={qualified}/{args.trials}  honest_wins={wins}  fraction={frac:.3f}")


if __name__ == "__main__":
    main()
