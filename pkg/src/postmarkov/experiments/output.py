"""CSV emission: header row, 17 significant digits, LF line endings."""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from postmarkov.pmme import CPScanResult

__all__ = [
    "format_value",
    "csv_text",
    "write_csv",
    "thermalization_table",
    "cp_scan_table",
    "solver_compare_table",
    "simulate_table",
]


def format_value(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_value(v) for v in row])
    return buf.getvalue()


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    Path(path).write_text(csv_text(header, rows), newline="")


def thermalization_table(trajectories) -> tuple[list[str], list[tuple]]:
    rows = [(n, f, sc) for tr in trajectories for (n, f, sc) in tr.rows()]
    return ["n", "fidelity", "scenario"], rows


def cp_scan_table(result: CPScanResult) -> tuple[list[str], list[tuple]]:
    rows = [(t, lo, "cp" if lo >= -result.tol else "not-cp") for t, lo in result.rows()]
    return ["t", "min_eigenvalue", "verdict"], rows


def solver_compare_table(result) -> tuple[list[str], list[tuple]]:
    return ["t", "trace_distance"], result.rows()


def simulate_table(states: dict[str, np.ndarray]) -> tuple[list[str], list[tuple]]:
    """One row per (scenario, collision) with the density matrix flattened row-major."""
    d = next(iter(states.values())).shape[-1]
    header = ["n", "scenario"]
    for i in range(d):
        for j in range(d):
            header += [f"rho_{i}_{j}_re", f"rho_{i}_{j}_im"]
    rows = []
    for sc, traj in states.items():
        for n, rho in enumerate(traj):
            flat = rho.ravel()
            vals = [v for z in flat for v in (z.real, z.imag)]
            rows.append((n, sc, *vals))
    return header, rows
