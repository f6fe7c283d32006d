#!/usr/bin/env python3
"""Expected values for the Bernoulli-calibrated sample.

The sample is a pure function of the index: conf_i and u_i come from the
splitmix64 finalizer of i and of i + 2^32, taking the top 53 bits as a
double in [0, 1). correct_i = u_i < conf_i. Brier and ECE are computed
exactly with Fractions and rounded to the nearest double once.
"""

import argparse
import json
from fractions import Fraction

MASK = (1 << 64) - 1
OFFSET = 1 << 32


def splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK
    return x ^ (x >> 31)


def unit(x):
    return Fraction(splitmix64(x) >> 11, 1 << 53)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=100000)
    ap.add_argument("--bins", type=int, default=10)
    ap.add_argument("--out", required=True)
    args = ap.parse_args()

    n, bins = args.n, args.bins
    sq = Fraction(0)
    conf_sum = [Fraction(0)] * bins
    hits = [0] * bins
    counts = [0] * bins
    first = []
    for i in range(n):
        c = unit(i)
        y = 1 if unit(i + OFFSET) < c else 0
        if i < 4:
            first.append([float(c), y])
        sq += (c - y) ** 2
        m = max(1, -(-c.numerator * bins // c.denominator))  # ceil(c * bins), 0 -> 1
        conf_sum[m - 1] += c
        hits[m - 1] += y
        counts[m - 1] += 1
    e = Fraction(0)
    for k in range(bins):
        if counts[k]:
            e += Fraction(counts[k], n) * abs(Fraction(hits[k], counts[k]) - conf_sum[k] / counts[k])
    out = {"n": n, "bins": bins, "offset": OFFSET, "brier": float(sq / n), "ece": float(e), "first": first}
    with open(args.out, "w", newline="\n") as fh:
        json.dump(out, fh, indent=2)
        fh.write("\n")


if __name__ == "__main__":
    main()
