"""Experiment configuration: YAML in, validated dataclasses out, and back.

An empty file yields the default qubit thermalization setup. Every key is
optional; unknown keys are rejected. Complex numbers are written as
``[re, im]`` pairs, real numbers as plain scalars.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from postmarkov import qcore
from postmarkov.errors import ValidationError

__all__ = [
    "StateSpec",
    "ScenarioSpec",
    "KernelSpec",
    "GeneratorSpec",
    "SolverSpec",
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "serialize_config",
    "config_to_dict",
    "config_from_dict",
    "with_initial_state",
]

STATE_KINDS = ("amplitudes", "diagonal", "matrix")
KERNEL_TYPES = ("delta", "exponential", "truncated_gaussian", "tabulated")
GENERATOR_TYPES = ("amplitude_damping", "collision")
BASIS_TAGS = ("x", "z", "custom")
ORIENTATIONS = ("elapsed", "ancilla")
METHODS = ("auto", "talbot", "dehoog")


@dataclass(frozen=True)
class StateSpec:
    """A state given as pure amplitudes, a diagonal of populations, or a full matrix."""

    kind: str
    values: tuple

    def density_matrix(self) -> np.ndarray:
        if self.kind == "amplitudes":
            return qcore.projector(np.array(self.values, dtype=complex))
        if self.kind == "diagonal":
            return np.diag(np.array(self.values, dtype=complex))
        return np.array(self.values, dtype=complex)

    @property
    def dim(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class ScenarioSpec:
    """Discrete Gaussian weights over the measured ancilla; ``None`` picks the default."""

    center: float | None = None
    width: float | None = None


@dataclass(frozen=True)
class KernelSpec:
    type: str = "exponential"
    rate: float = 1.0
    center: float = 1.0
    width: float = 0.3
    support: float = 3.0
    samples: tuple[float, ...] = ()
    spacing: float = 0.01


@dataclass(frozen=True)
class GeneratorSpec:
    """``amplitude_damping`` (qubit decay) or ``collision`` (log of the one-step map over ``tau``)."""

    type: str = "amplitude_damping"
    rate: float = 1.0
    omega: float = 0.0


@dataclass(frozen=True)
class SolverSpec:
    t_max: float = 10.0
    dt: float = 0.01
    integrator_dt: float = 0.0025
    method: str = "auto"
    nodes: int = 64
    tolerance: float = 1e-5


@dataclass(frozen=True)
class ExperimentConfig:
    system_dim: int = 2
    ancilla_dim: int = 2
    initial_state: StateSpec = StateSpec("amplitudes", (1 / math.sqrt(5), 2 / math.sqrt(5)))
    ancilla_state: StateSpec = StateSpec("diagonal", (0.6, 0.4))
    alpha: float = 0.1
    beta: float = 0.9
    measurement_basis: str = "x"
    custom_basis: tuple | None = None
    collisions: int = 200
    tau: float = 1.0
    orientation: str = "ancilla"
    early: ScenarioSpec = field(default_factory=ScenarioSpec)
    intermediate: ScenarioSpec = field(default_factory=ScenarioSpec)
    kernel: KernelSpec = field(default_factory=KernelSpec)
    generator: GeneratorSpec = field(default_factory=GeneratorSpec)
    solver: SolverSpec = field(default_factory=SolverSpec)
    seed: int = 0
    output: str | None = None

    def early_weights_params(self) -> tuple[float, float]:
        return self._scenario_params(self.early, 0.1)

    def intermediate_weights_params(self) -> tuple[float, float]:
        return self._scenario_params(self.intermediate, 0.5)

    def _scenario_params(self, sc: ScenarioSpec, frac: float) -> tuple[float, float]:
        N = self.collisions
        center = math.ceil(frac * N) if sc.center is None else sc.center
        width = 0.05 * N if sc.width is None else sc.width
        return float(center), float(width)

    def rho0(self) -> np.ndarray:
        return self.initial_state.density_matrix()

    def eta(self) -> np.ndarray:
        return self.ancilla_state.density_matrix()


# ---------------------------------------------------------------- parsing


def _scalar(x, key: str, complex_ok: bool = True):
    if isinstance(x, bool):
        raise ValidationError(f"{key}: expected a number, got a boolean")
    if isinstance(x, (int, float)):
        return float(x)
    if complex_ok and isinstance(x, (list, tuple)) and len(x) == 2 and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in x
    ):
        z = complex(float(x[0]), float(x[1]))
        return z if z.imag != 0 else z.real
    raise ValidationError(f"{key}: expected a number or an [re, im] pair, got {x!r}")


def _real(x, key: str, positive: bool = False, nonneg: bool = False) -> float:
    v = _scalar(x, key, complex_ok=False)
    if not math.isfinite(v):
        raise ValidationError(f"{key}: must be finite, got {v}")
    if positive and not v > 0:
        raise ValidationError(f"{key}: must be positive, got {v}")
    if nonneg and v < 0:
        raise ValidationError(f"{key}: must be non-negative, got {v}")
    return v


def _int(x, key: str, minimum: int) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise ValidationError(f"{key}: expected an integer, got {x!r}")
    if x < minimum:
        raise ValidationError(f"{key}: must be >= {minimum}, got {x}")
    return x


def _choice(x, key: str, options: tuple[str, ...]) -> str:
    if x not in options:
        raise ValidationError(f"{key}: expected one of {', '.join(options)}, got {x!r}")
    return x


def _mapping(x, key: str) -> dict:
    if x is None:
        return {}
    if not isinstance(x, dict):
        raise ValidationError(f"{key}: expected a mapping, got {type(x).__name__}")
    return x


def _reject_unknown(data: dict, allowed, prefix: str = "") -> None:
    extra = sorted(set(data) - set(allowed))
    if extra:
        raise ValidationError(f"unknown key {prefix}{extra[0]!s}")


def _matrix(x, key: str) -> tuple:
    if not isinstance(x, (list, tuple)) or not x or not all(isinstance(r, (list, tuple)) for r in x):
        raise ValidationError(f"{key}: expected a square matrix as a list of rows")
    n = len(x)
    if any(len(r) != n for r in x):
        raise ValidationError(f"{key}: matrix is not square")
    return tuple(tuple(_scalar(v, key) for v in row) for row in x)


def _state(x, key: str) -> StateSpec:
    d = _mapping(x, key)
    if len(d) != 1:
        raise ValidationError(f"{key}: give exactly one of {', '.join(STATE_KINDS)}")
    kind, raw = next(iter(d.items()))
    _choice(kind, key, STATE_KINDS)
    if kind == "matrix":
        values = _matrix(raw, key)
        rho = np.array(values, dtype=complex)
        qcore.check_density_matrix(rho, trace_tol=1e-9, herm_tol=1e-9, name=key)
        return StateSpec(kind, values)
    if not isinstance(raw, (list, tuple)) or len(raw) < 1:
        raise ValidationError(f"{key}: {kind} must be a non-empty list")
    values = tuple(_scalar(v, key, complex_ok=(kind == "amplitudes")) for v in raw)
    arr = np.array(values, dtype=complex)
    if kind == "amplitudes":
        norm2 = float(np.vdot(arr, arr).real)
        if abs(norm2 - 1.0) > 1e-9:
            raise ValidationError(f"{key}: amplitudes are not normalized (squared norm {norm2:.6g})")
    else:
        if np.any(arr.real < 0):
            raise ValidationError(f"{key}: populations must be non-negative")
        if abs(arr.real.sum() - 1.0) > 1e-9:
            raise ValidationError(f"{key}: populations sum to {arr.real.sum():.6g}, expected 1")
    return StateSpec(kind, values)


def _dataclass_from(cls, data: dict, key: str, converters: dict):
    _reject_unknown(data, [f.name for f in fields(cls)], prefix=f"{key}.")
    kwargs = {}
    for name, value in data.items():
        kwargs[name] = converters[name](value, f"{key}.{name}")
    return cls(**kwargs)


def _opt(conv):
    return lambda v, k: None if v is None else conv(v, k)


_SCENARIO = {
    "center": _opt(lambda v, k: _real(v, k)),
    "width": _opt(lambda v, k: _real(v, k, positive=True)),
}
_KERNEL = {
    "type": lambda v, k: _choice(v, k, KERNEL_TYPES),
    "rate": lambda v, k: _real(v, k, positive=True),
    "center": lambda v, k: _real(v, k),
    "width": lambda v, k: _real(v, k, positive=True),
    "support": lambda v, k: _real(v, k, positive=True),
    "samples": lambda v, k: tuple(_real(x, k, nonneg=True) for x in _list(v, k)),
    "spacing": lambda v, k: _real(v, k, positive=True),
}
_GENERATOR = {
    "type": lambda v, k: _choice(v, k, GENERATOR_TYPES),
    "rate": lambda v, k: _real(v, k, nonneg=True),
    "omega": lambda v, k: _real(v, k),
}
_SOLVER = {
    "t_max": lambda v, k: _real(v, k, positive=True),
    "dt": lambda v, k: _real(v, k, positive=True),
    "integrator_dt": lambda v, k: _real(v, k, positive=True),
    "method": lambda v, k: _choice(v, k, METHODS),
    "nodes": lambda v, k: _int(v, k, 4),
    "tolerance": lambda v, k: _real(v, k, positive=True),
}


def _list(v, k):
    if not isinstance(v, (list, tuple)):
        raise ValidationError(f"{k}: expected a list")
    return v


def config_from_dict(data: dict | None) -> ExperimentConfig:
    """Validate a plain mapping (as loaded from YAML) into a config."""
    data = _mapping(data, "config")
    _reject_unknown(data, [f.name for f in fields(ExperimentConfig)])
    kw: dict[str, Any] = {}
    top = {
        "system_dim": lambda v, k: _int(v, k, 2),
        "ancilla_dim": lambda v, k: _int(v, k, 2),
        "initial_state": _state,
        "ancilla_state": _state,
        "alpha": lambda v, k: _real(v, k),
        "beta": lambda v, k: _real(v, k),
        "measurement_basis": lambda v, k: _choice(v, k, BASIS_TAGS),
        "custom_basis": _opt(_matrix),
        "collisions": lambda v, k: _int(v, k, 1),
        "tau": lambda v, k: _real(v, k, positive=True),
        "orientation": lambda v, k: _choice(v, k, ORIENTATIONS),
        "seed": lambda v, k: _int(v, k, 0),
        "output": _opt(lambda v, k: str(v)),
    }
    nested = {
        "early": (ScenarioSpec, _SCENARIO),
        "intermediate": (ScenarioSpec, _SCENARIO),
        "kernel": (KernelSpec, _KERNEL),
        "generator": (GeneratorSpec, _GENERATOR),
        "solver": (SolverSpec, _SOLVER),
    }
    for name, value in data.items():
        if name in nested:
            cls, conv = nested[name]
            kw[name] = _dataclass_from(cls, _mapping(value, name), name, conv)
        else:
            kw[name] = top[name](value, name)
    cfg = ExperimentConfig(**kw)
    _cross_validate(cfg)
    return cfg


def _cross_validate(cfg: ExperimentConfig) -> None:
    if cfg.system_dim != cfg.ancilla_dim:
        raise ValidationError(
            f"system_dim: the partial swap needs equal system and ancilla dimensions, "
            f"got {cfg.system_dim} and {cfg.ancilla_dim}"
        )
    if cfg.initial_state.dim != cfg.system_dim:
        raise ValidationError(f"initial_state: dimension {cfg.initial_state.dim} != system_dim {cfg.system_dim}")
    if cfg.ancilla_state.dim != cfg.ancilla_dim:
        raise ValidationError(f"ancilla_state: dimension {cfg.ancilla_state.dim} != ancilla_dim {cfg.ancilla_dim}")
    if cfg.measurement_basis in ("x", "z") and cfg.ancilla_dim != 2:
        raise ValidationError(
            f"measurement_basis: tag {cfg.measurement_basis!r} needs a qubit ancilla; use 'custom'"
        )
    if cfg.measurement_basis == "custom":
        if cfg.custom_basis is None:
            raise ValidationError("custom_basis: required when measurement_basis is 'custom'")
        if len(cfg.custom_basis) != cfg.ancilla_dim:
            raise ValidationError(f"custom_basis: expected a {cfg.ancilla_dim}x{cfg.ancilla_dim} matrix")
    elif cfg.custom_basis is not None:
        raise ValidationError("custom_basis: only allowed with measurement_basis 'custom'")
    if cfg.generator.type == "amplitude_damping" and cfg.system_dim != 2:
        raise ValidationError("generator.type: amplitude_damping is defined for a qubit only")
    k = cfg.kernel
    if k.type == "truncated_gaussian" and k.support <= 0:
        raise ValidationError("kernel.support: must be positive")
    if k.type == "tabulated" and len(k.samples) < 2:
        raise ValidationError("kernel.samples: a tabulated kernel needs at least two samples")
    s = cfg.solver
    if s.dt > s.t_max:
        raise ValidationError(f"solver.dt: {s.dt} exceeds t_max {s.t_max}")
    if s.nodes % 2:
        raise ValidationError(f"solver.nodes: must be even, got {s.nodes}")


def parse_config(text: str) -> ExperimentConfig:
    """Parse YAML text. Empty text gives the defaults."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ValidationError(f"malformed config: {exc}") from None
    return config_from_dict(data)


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config {p}: {exc.strerror}") from None
    return parse_config(text)


# ---------------------------------------------------------------- serializing


def _plain(x):
    if isinstance(x, complex):
        return [x.real, x.imag] if x.imag != 0 else x.real
    if isinstance(x, (tuple, list)):
        return [_plain(v) for v in x]
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    return x


def config_to_dict(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    for key in ("initial_state", "ancilla_state"):
        st = getattr(cfg, key)
        d[key] = {st.kind: _plain(st.values)}
    return _plain(d)


def serialize_config(cfg: ExperimentConfig) -> str:
    """YAML text that parses back to an equal config."""
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)


def with_initial_state(cfg: ExperimentConfig, rho: np.ndarray) -> ExperimentConfig:
    """Copy of ``cfg`` starting from the density matrix ``rho``."""
    rho = np.asarray(rho, dtype=complex)
    values = tuple(tuple(complex(v) if v.imag else float(v.real) for v in row) for row in rho)
    return replace(cfg, initial_state=StateSpec("matrix", values))
