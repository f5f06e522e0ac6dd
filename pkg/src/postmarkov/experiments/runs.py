"""Experiment drivers built on a validated :class:`ExperimentConfig`.

* thermalization: fidelity to the ancilla state along the plain collision
  chain and along two measured chains whose measurement position is drawn
  from early- or intermediate-peaked Gaussian weights;
* CP scan: smallest Choi eigenvalue of the continuum dynamical map on a grid;
* solver comparison: Laplace-domain solution against the direct integrator;
* simulate: the raw states of the three discrete chains.

All runs are deterministic functions of the config.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from postmarkov import collision, kernels, lindblad, pmme, qcore
from postmarkov.errors import ValidationError
from postmarkov.experiments.config import ExperimentConfig, KernelSpec

log = logging.getLogger(__name__)

__all__ = [
    "SCENARIOS",
    "FidelityTrajectory",
    "SolverComparison",
    "collision_setup",
    "build_kernel",
    "build_problem",
    "time_grid",
    "scenario_weights",
    "thermalization_states",
    "run_thermalization",
    "run_cp_scan",
    "run_solver_compare",
    "run_simulate",
]

SCENARIOS = ("markov", "pm-early", "pm-intermediate")


@dataclass(frozen=True)
class FidelityTrajectory:
    """Fidelity to a target state after each collision (or at each time)."""

    scenario: str
    index: np.ndarray = field(repr=False)
    fidelity: np.ndarray = field(repr=False)
    index_name: str = "n"

    def __post_init__(self):
        f = np.asarray(self.fidelity, dtype=float)
        if np.any(np.diff(self.index) <= 0):
            raise ValidationError("trajectory index must increase")
        if np.any((f < 0) | (f > 1)):
            raise ValidationError("fidelity outside [0, 1]")

    def first_crossing(self, threshold: float = 0.99) -> int | None:
        """Index of the first entry with fidelity ``>= threshold``, or ``None``."""
        hit = np.nonzero(self.fidelity >= threshold)[0]
        return int(self.index[hit[0]]) if hit.size else None

    def rows(self) -> list[tuple]:
        return [(int(n), float(f), self.scenario) for n, f in zip(self.index, self.fidelity)]


@dataclass(frozen=True)
class SolverComparison:
    times: np.ndarray = field(repr=False)
    distances: np.ndarray = field(repr=False)
    tolerance: float

    @property
    def max_distance(self) -> float:
        return float(np.max(self.distances))

    @property
    def passed(self) -> bool:
        return self.max_distance <= self.tolerance

    def rows(self) -> list[tuple]:
        return list(zip(self.times.tolist(), self.distances.tolist()))


# ---------------------------------------------------------------- builders


def collision_setup(cfg: ExperimentConfig) -> tuple[collision.CollisionSpec, collision.MeasurementSpec]:
    d = cfg.system_dim
    spec = collision.CollisionSpec(d, d, collision.pswap(cfg.alpha, d), cfg.tau)
    if cfg.measurement_basis == "x":
        B = collision.sigma_x_basis()
    elif cfg.measurement_basis == "z":
        B = collision.sigma_z_basis()
    else:
        # config lists basis vectors; MeasurementSpec wants them as columns
        B = np.array(cfg.custom_basis, dtype=complex).T
    return spec, collision.MeasurementSpec(B, collision.pswap(cfg.beta, d))


def build_kernel(k: KernelSpec) -> kernels.MemoryKernel:
    if k.type == "delta":
        return kernels.DiracDeltaAtZero()
    if k.type == "exponential":
        return kernels.Exponential(k.rate)
    if k.type == "truncated_gaussian":
        return kernels.TruncatedGaussian(k.center, k.width, k.support)
    return kernels.Tabulated(k.samples, k.spacing)


def build_problem(cfg: ExperimentConfig) -> pmme.PMMEProblem:
    """Continuum problem: generator per ``cfg.generator``, measurement map from the collision setup."""
    spec, mspec = collision_setup(cfg)
    eta = cfg.eta()
    if cfg.generator.type == "amplitude_damping":
        L = lindblad.build_superoperator(lindblad.amplitude_damping(cfg.generator.rate, cfg.generator.omega))
    else:
        L = lindblad.from_collision_map(collision.collision_map(spec, eta), cfg.tau)
    E = collision.measurement_channel(spec, mspec, eta)
    return pmme.PMMEProblem.build(L, E, build_kernel(cfg.kernel))


def time_grid(cfg: ExperimentConfig) -> np.ndarray:
    s = cfg.solver
    n = s.t_max / s.dt
    if abs(n - round(n)) > 1e-9 * max(1.0, n):
        raise ValidationError(f"solver.dt: t_max {s.t_max} is not a multiple of dt {s.dt}")
    return np.linspace(0.0, s.t_max, int(round(n)) + 1)


def scenario_weights(cfg: ExperimentConfig, scenario: str) -> np.ndarray:
    """Probability that ancilla ``m`` is the measured one, ``m = 1..N``.

    The Gaussian is laid over the ancilla index when ``cfg.orientation`` is
    ``"ancilla"`` and over collisions elapsed since the measurement, counted
    back from collision ``N``, when it is ``"elapsed"``.
    """
    if scenario == "pm-early":
        center, width = cfg.early_weights_params()
    elif scenario == "pm-intermediate":
        center, width = cfg.intermediate_weights_params()
    else:
        raise ValidationError(f"scenario {scenario!r} has no measurement weights")
    w = collision.gaussian_weights(center, width, cfg.collisions)
    return w[::-1].copy() if cfg.orientation == "elapsed" else w


# ---------------------------------------------------------------- runs


def thermalization_states(cfg: ExperimentConfig) -> dict[str, np.ndarray]:
    """System states after ``n = 0..N`` collisions for each scenario."""
    spec, mspec = collision_setup(cfg)
    eta, rho0, N = cfg.eta(), cfg.rho0(), cfg.collisions
    out = {"markov": collision.markov_evolve(spec, eta, rho0, N)}
    for sc in SCENARIOS[1:]:
        out[sc] = collision.probabilistic_trajectory(spec, mspec, eta, rho0, scenario_weights(cfg, sc), N)
    return out


def run_thermalization(cfg: ExperimentConfig) -> tuple[FidelityTrajectory, ...]:
    """Fidelity to the ancilla state for the markov, pm-early and pm-intermediate chains."""
    eta = cfg.eta()
    states = thermalization_states(cfg)
    n = np.arange(cfg.collisions + 1)
    trajs = tuple(
        FidelityTrajectory(sc, n, np.array([qcore.fidelity(r, eta) for r in states[sc]]))
        for sc in SCENARIOS
    )
    for tr in trajs:
        log.info("%s: first 0.99 crossing at n=%s", tr.scenario, tr.first_crossing(0.99))
    return trajs


def run_cp_scan(cfg: ExperimentConfig) -> pmme.CPScanResult:
    problem = build_problem(cfg)
    W = pmme.solve_W(problem, time_grid(cfg), nodes=cfg.solver.nodes, method=cfg.solver.method)
    return pmme.cp_scan(problem, W)


def run_solver_compare(cfg: ExperimentConfig) -> SolverComparison:
    """Trace distance between the Laplace-domain and direct solutions on the solver grid."""
    s = cfg.solver
    grid = time_grid(cfg)
    stride = s.dt / s.integrator_dt
    if abs(stride - round(stride)) > 1e-9 * max(1.0, stride):
        raise ValidationError(
            f"solver.integrator_dt: {s.integrator_dt} does not divide the grid spacing {s.dt}"
        )
    stride = int(round(stride))
    problem = build_problem(cfg)
    rho0 = cfg.rho0()
    W = pmme.solve_W(problem, grid, nodes=s.nodes, method=s.method)
    laplace = pmme.propagate_all(problem, W, rho0)
    direct = pmme.integrate_pmme_direct(problem, rho0, s.t_max, s.integrator_dt)
    dist = np.array([qcore.trace_distance(a, b) for a, b in zip(laplace, direct.states[::stride])])
    return SolverComparison(grid, dist, s.tolerance)


def run_simulate(cfg: ExperimentConfig) -> dict[str, np.ndarray]:
    """Raw density matrices of the three discrete chains."""
    return thermalization_states(cfg)
