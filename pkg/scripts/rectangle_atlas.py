"""Sample CP^3, push through p and u, and tabulate where the images land.

Writes a CSV of (H2, 64 C^2, edge class, distance to the coordinate lines,
|quadric|) for each sample, plus a summary of the edge classes and of how the
missing vertex is approached.  Usage:
    python scripts/rectangle_atlas.py --samples 100000 --out atlas.csv
"""

import argparse
import collections
import csv

import numpy as np

from toda_twistor import atlas, cp3
from toda_twistor.cp3 import WeightPair


def line_distance(z):
    a2 = np.abs(z) ** 2
    return np.min([np.sqrt(np.clip(1 - a2[:, i] - a2[:, j], 0, None)) for i, j in cp3.SINGULAR_LINES.values()], axis=0)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k", type=int, default=1)
    ap.add_argument("--m", type=int, default=2)
    ap.add_argument("--samples", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out")
    args = ap.parse_args()
    w = WeightPair(args.k, args.m)
    rng = np.random.default_rng(args.seed)

    z = np.vstack([cp3.random_unit_c4(rng, args.samples), atlas.sample_T(rng, w, 200), atlas.sample_quadric(rng, w, 200)])
    scan = atlas.scan_points(z, w)
    keep = scan["keep"]
    x, y = scan["closed"]["H2"], 64 * scan["closed"]["C2"]
    dist_vertex = np.hypot(x - w.rect_a, y) / w.rect_a
    dist_lines = line_distance(z)
    quad = np.abs(w.k * z[:, 0] * z[:, 1] + w.m * z[:, 2] * z[:, 3])

    print(f"points kept {int(keep.sum())}/{len(z)}, containment {float(np.mean(scan['inside'][keep])):.6f}")
    print(f"max two-path deviation {np.nanmax(scan['deviation']):.2e}")
    for cls, n in sorted(collections.Counter(scan["edge_class"]).items()):
        print(f"  {cls or '(skipped)':14s} {n}")
    near = keep & (dist_vertex < 1e-2)
    print(f"{int(near.sum())} points within 1e-2 of the missing vertex;")
    if near.any():
        print(f"  their distance to the coordinate lines ranges {dist_lines[near].min():.3f} .. {dist_lines[near].max():.3f}")
        vmin = np.min(scan["closed"]["p"][near, :2], axis=1)
        print(f"  the largest min(v-, v+) among them is {vmin.max():.3e}")

    if args.out:
        with open(args.out, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["H2", "C2x64", "edge_class", "dist_vertex", "dist_lines", "quadric"])
            for i in np.flatnonzero(keep):
                out.writerow([repr(float(x[i])), repr(float(y[i])), scan["edge_class"][i], repr(float(dist_vertex[i])),
                              repr(float(dist_lines[i])), repr(float(quad[i]))])


if __name__ == "__main__":
    main()
