#!/usr/bin/env python3
"""Full-scale alternating-minimization sweep on the high-energy-physics
citation graph (cit-HepPh, 34546 nodes): ranks 2000..3500 step 250.

Not part of CI: the dense reference alone needs ~9.5 GB and the sweep
runs for hours. Supply the SNAP edge list and a machine with enough
memory, then:

    SRLPM_DENSE_CAP=40000 python scripts/hepph_table1_sweep.py \
        --graph data/cit-HepPh.txt --work-dir hepph_out
"""

import argparse
import os
import sys

from srlpm.cli import main as srlpm_main


def run(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--graph", required=True, help="cit-HepPh edge list")
    parser.add_argument("--work-dir", default="hepph_out")
    parser.add_argument("--seeds", default="0")
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args(argv)

    os.makedirs(args.work_dir, exist_ok=True)
    reference = os.path.join(args.work_dir, "hepph.srds")
    if not os.path.exists(reference):
        code = srlpm_main([
            "dense", "--graph", args.graph, "--c", "0.8",
            "--tol", "1e-12", "--max-iter", "200", "--out", reference,
        ])
        if code != 0:
            return code
    return srlpm_main([
        "sweep", "altmin", "--graph", args.graph, "--reference", reference,
        "--ranks", "2000,2250,2500,2750,3000,3250,3500",
        "--seeds", args.seeds, "--jobs", str(args.jobs),
        "--out-dir", os.path.join(args.work_dir, "sweep"),
    ])


if __name__ == "__main__":
    sys.exit(run())
