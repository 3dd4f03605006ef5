"""Run the para-differential probe suite and write one CSV of probe rows.

    python scripts/run_probes.py --out probes.csv [--delta 0.0625] [--bands 8 16]
"""
import argparse
import time
from dataclasses import replace

from su2para import paradiff

PROBES = {
    "paraproduct": paradiff.paraproduct_probe,
    "remainder": paradiff.remainder_probe,
    "composition": paradiff.composition_probe,
    "commutator": paradiff.commutator_probe,
    "adjoint": paradiff.adjoint_probe,
    "cutoff_freedom": paradiff.cutoff_freedom_probe,
    "a_minus_achi": paradiff.regularization_op_probe,
    "stein": paradiff.stein_probe,
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="probes.csv")
    ap.add_argument("--delta", type=float, default=paradiff.PARADIFF.delta)
    ap.add_argument("--bands", type=int, nargs=2, default=paradiff.PARADIFF.bands)
    ap.add_argument("--only", nargs="*", choices=sorted(PROBES), default=None)
    args = ap.parse_args()
    cfg = replace(paradiff.PARADIFF, delta=args.delta, bands=tuple(args.bands))
    rows = []
    for name in args.only or PROBES:
        t0 = time.perf_counter()
        out = PROBES[name](cfg)
        rows += out
        bad = sum(r.passed is False for r in out)
        print(f"{name:15s} {len(out):3d} rows  {bad:2d} failing  {time.perf_counter() - t0:6.1f} s")
    with open(args.out, "w") as fh:
        fh.write(paradiff.rows_to_csv(rows))
    print(f"wrote {len(rows)} rows to {args.out}")


if __name__ == "__main__":
    main()
