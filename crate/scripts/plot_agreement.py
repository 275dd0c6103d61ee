#!/usr/bin/env python3
"""Plot agreement against checkpoint from one or more summary CSV files."""

import argparse
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def load(path):
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    if not rows:
        raise SystemExit(f"{path}: no rows")
    xs = [int(r["checkpoint"]) for r in rows]
    ys = [float(r["agreement"]) for r in rows]
    return rows[0]["set"], xs, ys


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("summaries", nargs="+", type=Path)
    ap.add_argument("-o", "--out", type=Path, default=Path("agreement.png"))
    args = ap.parse_args()

    fig, ax = plt.subplots(figsize=(6, 4))
    for path in args.summaries:
        name, xs, ys = load(path)
        ax.plot(xs, ys, marker="o", label=f"{path.stem} ({name})")
    ax.set_xscale("log", base=2)
    ax.set_ylim(-0.02, 1.02)
    ax.set_xlabel("N")
    ax.set_ylabel("agreement with ground truth")
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)
    print(args.out)


if __name__ == "__main__":
    main()
