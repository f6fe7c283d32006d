#!/usr/bin/env python3
"""Independent oracle for the regression fixture.

Reads every decimal as an exact Fraction, assigns bins by exact rational
comparison against (m-1)/M < c <= m/M (c = 0 in bin 1), computes AUROC by
counting all correct/incorrect pairs with ties worth one half, and writes
the expected per-language and per-layer values as JSON.
"""

import argparse
import json
from fractions import Fraction

BINS = 10


def bin_of(c, bins):
    if c == 0:
        return 1
    for m in range(1, bins + 1):
        if Fraction(m - 1, bins) < c <= Fraction(m, bins):
            return m
    raise ValueError(c)


def ece(conf, correct, bins):
    groups = {}
    for c, y in zip(conf, correct):
        groups.setdefault(bin_of(c, bins), []).append((c, y))
    total = Fraction(0)
    for members in groups.values():
        acc = Fraction(sum(y for _, y in members), len(members))
        mean = sum((c for c, _ in members), Fraction(0)) / len(members)
        total += Fraction(len(members), len(conf)) * abs(acc - mean)
    return total


def brier(conf, correct):
    return sum(((c - y) ** 2 for c, y in zip(conf, correct)), Fraction(0)) / len(conf)


def auroc(conf, correct):
    pos = [c for c, y in zip(conf, correct) if y]
    neg = [c for c, y in zip(conf, correct) if not y]
    if not pos or not neg:
        return None
    wins = Fraction(0)
    for p in pos:
        for n in neg:
            if p > n:
                wins += 1
            elif p == n:
                wins += Fraction(1, 2)
    return wins / (len(pos) * len(neg))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("fixture")
    ap.add_argument("--out", required=True)
    args = ap.parse_args()

    with open(args.fixture) as fh:
        header = json.loads(fh.readline())
        records = [json.loads(line, parse_float=Fraction) for line in fh if line.strip()]
    K, L = header["K"], header["L"]

    langs = sorted({r["lang"] for r in records})
    per_language = {}
    profile = {str(layer): {} for layer in range(1, L + 1)}
    for lang in langs:
        rows = [r for r in records if r["lang"] == lang]
        correct = [1 if r["gold"] == r["pred"] else 0 for r in rows]
        for r in rows:
            assert all(len(layer) == K for layer in r["layers"])
        for layer in range(1, L + 1):
            conf = [Fraction(r["layers"][layer - 1][r["pred"]]) for r in rows]
            profile[str(layer)][lang] = float(ece(conf, correct, BINS))
        conf = [Fraction(r["layers"][L - 1][r["pred"]]) for r in rows]
        a = auroc(conf, correct)
        per_language[lang] = {
            "n": len(rows),
            "accuracy": float(Fraction(sum(correct), len(rows))),
            "ece": float(ece(conf, correct, BINS)),
            "brier": float(brier(conf, correct)),
            "auroc": None if a is None else float(a),
        }

    out = {
        "bins": BINS,
        "records": len(records),
        "languages": per_language,
        "layer_ece": profile,
    }
    with open(args.out, "w", newline="\n") as fh:
        json.dump(out, fh, indent=2, sort_keys=True)
        fh.write("\n")


if __name__ == "__main__":
    main()
