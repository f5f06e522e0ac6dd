"""Command-line entry point.

Exit codes: 0 success, 2 invalid input, 3 numerical tolerance failure.
Log verbosity comes from ``POSTMARKOV_LOG_LEVEL`` (default ``WARNING``).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from postmarkov import __version__
from postmarkov.errors import NumericalError, ValidationError
from postmarkov.experiments import output, runs
from postmarkov.experiments.config import ExperimentConfig, load_config

__all__ = ["main", "build_parser", "EXIT_OK", "EXIT_INVALID", "EXIT_NUMERICAL"]

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3
LOG_ENV = "POSTMARKOV_LOG_LEVEL"

_DEFAULTS = ExperimentConfig()

_EPILOG = f"""\
defaults (used for every key missing from --config):
  initial state      amplitudes (1/sqrt5, 2/sqrt5)
  ancilla state      diag(0.6, 0.4)
  alpha, beta        {_DEFAULTS.alpha}, {_DEFAULTS.beta} (collision / pre-measurement partial swap)
  measurement basis  sigma_x eigenbasis
  collisions N       {_DEFAULTS.collisions}; early weights centre ceil(0.1 N), intermediate ceil(0.5 N), width 0.05 N
  weight index       {_DEFAULTS.orientation} (measured ancilla; 'elapsed' counts back from collision N)
  kernel             exponential, rate {_DEFAULTS.kernel.rate}
  generator          amplitude damping, rate {_DEFAULTS.generator.rate}
  solver grid        t in [0, {_DEFAULTS.solver.t_max}] step {_DEFAULTS.solver.dt}; integrator step {_DEFAULTS.solver.integrator_dt}

exit codes: 0 success, 2 invalid input, 3 numerical tolerance failure.
Set {LOG_ENV}=INFO or DEBUG for progress messages.
"""

_COMMANDS = {
    "thermalize": "fidelity to the ancilla state along the markov, pm-early and pm-intermediate chains",
    "cp-scan": "smallest Choi eigenvalue of the continuum dynamical map on the solver grid",
    "solve-compare": "trace distance between the Laplace-domain and direct-integrator solutions",
    "simulate": "raw density matrices of the three discrete chains",
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="postmarkov",
        description="Collision-model thermalization and post-Markovian master equation experiments.",
        epilog=_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, help_text in _COMMANDS.items():
        sp = sub.add_parser(name, help=help_text, description=help_text, epilog=_EPILOG,
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.add_argument("--config", type=Path, default=None,
                        help="YAML config; missing keys take the defaults below")
        sp.add_argument("--out", type=Path, default=None,
                        help=f"CSV destination (default: the config's output key, else {name}.csv)")
    return p


def _configure_logging() -> None:
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _run(command: str, cfg: ExperimentConfig, out: Path) -> int:
    if command == "thermalize":
        trajs = runs.run_thermalization(cfg)
        header, rows = output.thermalization_table(trajs)
        output.write_csv(out, header, rows)
        for tr in trajs:
            print(f"{tr.scenario}: final fidelity {tr.fidelity[-1]:.6f}, "
                  f"first >= 0.99 at n={tr.first_crossing(0.99)}")
        return EXIT_OK
    if command == "cp-scan":
        res = runs.run_cp_scan(cfg)
        header, rows = output.cp_scan_table(res)
        output.write_csv(out, header, rows)
        verdict = "CP" if res.is_cp else "NOT CP"
        print(f"verdict: {verdict} (min eigenvalue {res.min_eigenvalues.min():.3e}, "
              f"construction mismatch {res.construction_mismatch:.2e})")
        return EXIT_OK
    if command == "solve-compare":
        res = runs.run_solver_compare(cfg)
        header, rows = output.solver_compare_table(res)
        output.write_csv(out, header, rows)
        print(f"max trace distance {res.max_distance:.3e} (tolerance {res.tolerance:.1e})")
        return EXIT_OK if res.passed else EXIT_NUMERICAL
    states = runs.run_simulate(cfg)
    header, rows = output.simulate_table(states)
    output.write_csv(out, header, rows)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        out = args.out or Path(cfg.output or f"{args.command}.csv")
        return _run(args.command, cfg, out)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
