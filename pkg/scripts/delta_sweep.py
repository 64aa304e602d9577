"""Sweep the size of C^2-small and C^1-small/C^2-large bumps and record verify_boundary_map verdicts.

    python3 scripts/delta_sweep.py [--csv sweep.csv]
"""
import argparse
import time

import numpy as np

from collar.boundary import verify_boundary_map
from collar.perturbation import c1_small_c2_large, c2_small, ck_norm, make_family
from collar.report import Trace, emit_csv


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--csv", default="delta_sweep.csv")
    args = ap.parse_args()

    rows = []
    cases = [("c2_small", d, None, c2_small(d)) for d in np.geomspace(1e-5, 1e-2, 7)]
    cases += [("c1_small_c2_large", 1e-3, m2, c1_small_c2_large(1e-3, m2)) for m2 in (0.1, 0.3, 1.0)]
    for kind, a, b, fam in cases:
        t0 = time.perf_counter()
        G = make_family(fam)
        rep = verify_boundary_map(G)
        row = (kind, float(a), b, ck_norm(G, 1), ck_norm(G, 2), rep.verdict, rep.failed_condition)
        rows.append(row)
        print(f"{kind:18s} {a:9.2e} {b if b is not None else '':>5} "
              f"C1 {row[3]:.2e} C2 {row[4]:.2e} -> {rep.verdict} "
              f"(cond {rep.failed_condition}) {time.perf_counter() - t0:.1f} s")
    emit_csv(Trace(("family", "param1", "param2", "c1_norm", "c2_norm", "verdict", "failed_condition"), rows),
             args.csv)


if __name__ == "__main__":
    main()
