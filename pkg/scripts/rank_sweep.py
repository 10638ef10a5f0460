#!/usr/bin/env python3
"""Emit the rank-sweep parameter-count comparison CSV (TT / TR / BT / HT)
for a tensorized 57,600 x 256 weight matrix."""

import argparse
import sys

from fdht.complexity import emit_rank_sweep

M_SHAPE = (4, 4, 2, 4, 2)     # 256 outputs over 5 modes
N_SHAPE = (8, 10, 10, 9, 8)   # 57,600 inputs over 5 modes


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rank-min", type=int, default=1)
    parser.add_argument("--rank-max", type=int, default=16)
    parser.add_argument("--out", help="output path (default: stdout)")
    args = parser.parse_args()
    csv = emit_rank_sweep(M_SHAPE, N_SHAPE, range(args.rank_min, args.rank_max + 1))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(csv)
        print(f"wrote {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(csv)


if __name__ == "__main__":
    main()
