#!/usr/bin/env python3
"""Regenerates the BRIEF sampling table in src/orb_pattern.inc.

Points are drawn from an isotropic Gaussian (sigma = 31/5) and kept only
inside the radius-15 disk so that any rotation stays within the patch.
"""
import sys

import numpy as np

SEED = 20200911
SIGMA = 31 / 5.0
RADIUS = 15


def main() -> None:
    rng = np.random.default_rng(SEED)

    def point():
        while True:
            x, y = np.rint(rng.normal(0, SIGMA, 2)).astype(int)
            if x * x + y * y <= RADIUS * RADIUS:
                return int(x), int(y)

    pairs = []
    while len(pairs) < 256:
        a, b = point(), point()
        if a != b:
            pairs.append(a + b)

    out = sys.stdout
    out.write("// Generated by tools/gen_orb_pattern.py; do not edit.\n")
    for i in range(0, 256, 4):
        out.write("    " + " ".join("{%d, %d, %d, %d}," % p for p in pairs[i:i + 4]) + "\n")


if __name__ == "__main__":
    main()
