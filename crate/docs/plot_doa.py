"""Plot the output of `robust-classo doa-repro`.

    robust-classo doa-repro --out out
    python docs/plot_doa.py out            # writes out/doa.png

Top row: |s| against angle at the selected lambda, with the true DoAs marked.
Bottom row: coefficient paths |s_j| against lambda / lambda_max.
"""

import csv
import json
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read_csv(path):
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    return {k: [float(r[k]) for r in rows] for k in rows[0]}


def main(out):
    runs = sorted(p.name[: -len("_doa.json")] for p in out.glob("*_doa.json"))
    if not runs:
        sys.exit(f"no *_doa.json files in {out}")
    fig, axes = plt.subplots(2, len(runs), figsize=(4 * len(runs), 6), squeeze=False)
    for col, run in enumerate(runs):
        record = json.loads((out / f"{run}_doa.json").read_text())
        spec = read_csv(out / f"{run}_spectrum.csv")
        path = read_csv(out / f"{run}_path.csv")

        ax = axes[0][col]
        ax.plot(spec["angle_deg"], spec["abs_coefficient"], "o-", ms=3)
        for theta in record["true_doas_deg"]:
            ax.axvline(theta, color="k", ls=":", lw=1)
        ax.set_title(f"{run} ({'ok' if record['success'] else 'miss'})")
        ax.set_xlabel("angle [deg]")
        ax.set_ylabel("|s|")

        ax = axes[1][col]
        x = path["lambda"]
        lmax = record["lambda_max"]
        rel = [v / lmax for v in x]
        for key in (k for k in path if k.startswith("abs_s_")):
            ax.plot(rel, path[key], lw=0.8)
        ax.axvline(record["lambda_star_rel"], color="k", ls="--", lw=1)
        ax.set_xscale("log")
        ax.invert_xaxis()
        ax.set_xlabel("lambda / lambda_max")
        ax.set_ylabel("|s_j|")

    fig.tight_layout()
    target = out / "doa.png"
    fig.savefig(target, dpi=120)
    print(target)


if __name__ == "__main__":
    main(Path(sys.argv[1] if len(sys.argv) > 1 else "out"))
