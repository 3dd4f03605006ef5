"""Composition remainder across delta: where the calculus leaves the multiplier regime.

For each delta, print the bounded-column ratio (band 16 / band 8) and the
fitted contrast exponent, plus the smallest doubled spin at which a spin-1/2
x-frequency survives the cutoff.
"""
import argparse
from dataclasses import replace

import numpy as np

from su2para import paradiff
from su2para.irreps import bracket, size


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--deltas", type=float, nargs="+", default=[1 / 32, 1 / 16, 1 / 8, 1 / 4, 0.45])
    ap.add_argument("--bands", type=int, nargs=2, default=paradiff.PARADIFF.bands)
    args = ap.parse_args()
    cfg = replace(paradiff.PARADIFF, bands=tuple(args.bands))
    lo, hi = cfg.bands
    tj = np.arange(200)
    print(f"{'delta':>8s} {'onset 2j':>9s} {'s':>4s} {'ratio':>8s} {'contrast exp':>13s}")
    for d in args.deltas:
        onset = int(tj[size(1) < d * bracket(tj)][0])
        rows = paradiff.composition_probe(replace(cfg, delta=d))
        for s in cfg.s_values:
            b = {r.band: r.measured_norm for r in rows if r.s == s and r.probe == "compose"}
            c = {r.band: r.measured_norm for r in rows if r.s == s and r.probe == "compose_contrast"}
            ratio = b[hi] / b[lo] if b[lo] > 0 else np.inf
            expo = np.log(c[hi] / c[lo]) / np.log(hi / lo) if c[lo] > 0 and c[hi] > 0 else np.nan
            print(f"{d:8.4f} {onset:9d} {s:+4.0f} {ratio:8.3f} {expo:13.3f}")


if __name__ == "__main__":
    main()
