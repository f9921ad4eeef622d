#!/usr/bin/env python3
"""Optional: turn scenario CSV artifacts into figures.

Reads the summary.csv (and openloop.csv when present) written by
``statesecrecy run`` / ``statesecrecy verify figures`` and plots the
log(1 + x) error curves.  Requires matplotlib, which the core package
deliberately does not depend on.

    python scripts/plot_runs.py out/state_code out/state_random --out fig.png
"""
import argparse
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def read_summary(run_dir: Path) -> dict:
    with open(run_dir / "summary.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = {"k": np.array([int(r["k"]) for r in rows])}
    for col in ("median_tr_P_user", "median_tr_P_eve", "tr_P_openloop"):
        out[col] = np.array([float(r[col]) for r in rows])
    return out


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("run_dirs", nargs="+", type=Path,
                        help="scenario output directories (each with summary.csv)")
    parser.add_argument("--out", type=Path, default=Path("errors.png"))
    args = parser.parse_args()

    fig, (ax_eve, ax_user) = plt.subplots(1, 2, figsize=(11, 4), sharex=True)
    for run_dir in args.run_dirs:
        data = read_summary(run_dir)
        label = run_dir.name
        ax_eve.plot(data["k"], np.log1p(data["median_tr_P_eve"]), label=label)
        ax_user.plot(data["k"], np.log1p(data["median_tr_P_user"]), label=label)
    data = read_summary(args.run_dirs[0])
    ax_eve.plot(data["k"], np.log1p(data["tr_P_openloop"]), "k--", label="open loop")
    ax_eve.set_title("eavesdropper error (median over runs)")
    ax_user.set_title("user error (median over runs)")
    for ax in (ax_eve, ax_user):
        ax.set_xlabel("k")
        ax.set_ylabel("log(1 + trace of error covariance)")
        ax.legend()
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
