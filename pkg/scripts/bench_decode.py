"""Brute vs pruned decoding across grid sizes and background densities.

    python scripts/bench_decode.py --sizes 8 12 16 20 --active 0.01 0.04 0.1
"""

import argparse
import csv
import sys

from pln.cli import bench_decode


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[8, 12, 16, 20])
    p.add_argument("--active", type=float, nargs="+", default=[0.01, 0.04, 0.1])
    p.add_argument("--B", type=int, default=2)
    p.add_argument("--N", type=int, default=20)
    p.add_argument("--objects", type=int, default=5)
    p.add_argument("--threshold", type=float, default=0.1)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", help="also write the table as CSV")
    args = p.parse_args()

    rows = []
    print(f"{'S':>4}{'active':>8}{'strong':>9}{'brute ms':>11}{'pruned ms':>11}{'speedup':>9}{'dets':>7}  same")
    for S in args.sizes:
        for a in args.active:
            r = bench_decode(S, args.B, args.N, a, args.threshold, args.repeats, args.seed, args.objects)
            rows.append({"S": S, "active": a, **r})
            print(f"{S:>4}{a:>8.2f}{r['strong_fraction']:>9.2%}{r['brute_s'] * 1e3:>11.2f}"
                  f"{r['pruned_s'] * 1e3:>11.2f}{r['speedup']:>8.1f}x{r['detections'] / args.repeats:>7.1f}  {r['identical']}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    return 0 if all(r["identical"] for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
