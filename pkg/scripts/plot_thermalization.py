"""Render fidelity-versus-collisions curves from a ``postmarkov thermalize`` CSV.

    python scripts/plot_thermalization.py thermalize.csv -o thermalization.png

Needs matplotlib, which the package itself does not depend on.
"""

import argparse
import csv
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("csv", help="output of `postmarkov thermalize`")
    p.add_argument("-o", "--out", default="thermalization.png")
    p.add_argument("--threshold", type=float, default=0.99, help="horizontal guide line")
    args = p.parse_args()

    series = defaultdict(lambda: ([], []))
    with open(args.csv, newline="") as fh:
        for row in csv.DictReader(fh):
            n, f = series[row["scenario"]]
            n.append(int(row["n"]))
            f.append(float(row["fidelity"]))

    fig, ax = plt.subplots(figsize=(6, 4))
    for name, (n, f) in series.items():
        ax.plot(n, f, label=name)
    ax.axhline(args.threshold, color="grey", lw=0.8, ls="--")
    ax.set_xlabel("collisions n")
    ax.set_ylabel("fidelity to ancilla state")
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)


if __name__ == "__main__":
    main()
