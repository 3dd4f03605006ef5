"""Recompute the frozen reference brackets used by the test suite.

Weyl: count / t^3 over t in [5, 20] (step 0.05) by direct mode summation.
Square function: per-spin extremes of the LP square function over the
H^s norm on spins 2j <= 64.  Brackets are rounded outward to 4 decimals.
"""
import math

import numpy as np

from su2para import littlewood_paley as lp
from su2para import spectral


def outward(lo, hi, digits=4):
    k = 10 ** digits
    return math.floor(lo * k) / k, math.ceil(hi * k) / k


def main():
    ts = np.linspace(5.0, 20.0, 301)
    r = [spectral.weyl_count(t)[1] for t in ts]
    print("WEYL_BRACKET observed", (min(r), max(r)), "frozen", outward(min(r), max(r), 3))
    for s in (-2, -1, 0, 1, 2):
        lo, hi = lp.square_function_bracket(64, s)
        print(f"SQUARE_BRACKETS[{s}] observed ({lo:.6f}, {hi:.6f}) frozen {outward(lo, hi)}")


if __name__ == "__main__":
    main()
