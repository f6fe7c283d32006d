#!/usr/bin/env python3
"""Generate the frozen regression fixture: 1000 records, 3 languages, K=4, L=8.

Masses are raw vocabulary masses (summing below 1) written with at most
6 decimals so the expected values can be computed exactly from the text.
Run once; the output is checked in and must not be regenerated casually.
"""

import argparse
import json

import numpy as np

K = 4
L = 8
LANGS = {"en": (334, 6), "de": (333, 6), "sw": (333, 3)}  # count, decimals


def layer_masses(rng, gold, sharp, scale, decimals):
    alpha = np.full(K, 1.0)
    alpha[gold] += sharp
    p = rng.dirichlet(alpha) * scale
    q = 10.0 ** decimals
    return [float(v) for v in np.floor(p * q) / q]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", required=True)
    ap.add_argument("--seed", type=int, default=20240611)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    header = {
        "format_version": 1,
        "K": K,
        "L": L,
        "normalized": False,
        "model": "fixture",
        "benchmark": "fixture",
        "choice_labels": ["A", "B", "C", "D"],
    }
    lines = [json.dumps(header, separators=(",", ":"))]
    for lang, (count, decimals) in LANGS.items():
        for i in range(count):
            gold = int(rng.integers(K))
            layers = []
            for layer in range(1, L + 1):
                sharp = 0.4 * layer * rng.uniform(0.2, 1.0)
                scale = rng.uniform(0.55, 0.98)
                layers.append(layer_masses(rng, gold, sharp, scale, decimals))
            final = layers[-1]
            pred = int(np.argmax(final))
            rec = {
                "id": f"{lang}-{i:04d}",
                "lang": lang,
                "gold": gold,
                "pred": pred,
                "split": "validation" if i % 2 == 0 else "test",
                "layers": layers,
            }
            lines.append(json.dumps(rec, separators=(",", ":")))
    with open(args.out, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
