"""Discrete collisional models.

A system of dimension ``d_S`` meets a stream of fresh ancillas (dimension
``d_A``, each prepared in ``eta``) one at a time. Each collision is a joint
unitary ``U``; tracing the ancilla out gives the one-step map ``xi``.

The measured variant inserts, on exactly one ancilla ``m``, an extra
pre-measurement unitary ``U_M`` followed by a non-selective projective
measurement of that ancilla. On the system this is the CPTP map ``E`` with
Kraus operators ``<M^l| U_M U |chi>``. Averaging the measured chain over
``m`` with a weight vector gives the probabilistic run whose continuum limit
motivates the post-Markovian master equation.

Ancilla states may be mixed. Kraus operators are then built from the
eigen-decomposition ``eta = sum_k p_k |chi_k><chi_k|``, which is the convex
extension of the pure-ancilla construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
import scipy.linalg

from postmarkov import qcore
from postmarkov.errors import ValidationError

__all__ = [
    "CollisionSpec",
    "MeasurementSpec",
    "collision_unitary_from_hamiltonians",
    "pswap",
    "sigma_x_basis",
    "sigma_z_basis",
    "ancilla_kraus",
    "collision_map",
    "markov_step",
    "markov_evolve",
    "measurement_channel",
    "deterministic_run",
    "brute_force_deterministic_run",
    "probabilistic_run",
    "probabilistic_trajectory",
    "gaussian_weights",
    "check_weights",
]

Orientation = Literal["elapsed", "ancilla"]


def _as_array(U) -> np.ndarray:
    return np.asarray(U, dtype=complex)


@dataclass(frozen=True)
class CollisionSpec:
    """One system-ancilla collision: joint unitary on ``S (x) A`` and its duration."""

    system_dim: int
    ancilla_dim: int
    unitary: np.ndarray = field(repr=False)
    tau: float = 1.0

    def __post_init__(self):
        U = _as_array(self.unitary)
        n = self.system_dim * self.ancilla_dim
        if U.shape != (n, n):
            raise ValidationError(
                f"collision unitary has shape {U.shape}, expected {(n, n)}"
            )
        if not qcore.is_unitary(U):
            raise ValidationError("collision unitary is not unitary")
        if not self.tau > 0:
            raise ValidationError(f"tau must be positive, got {self.tau}")
        object.__setattr__(self, "unitary", U)

    @classmethod
    def from_hamiltonians(cls, H_S, H_B, V, tau: float) -> "CollisionSpec":
        H_S = _as_array(H_S)
        H_B = _as_array(H_B)
        U = collision_unitary_from_hamiltonians(H_S, H_B, V, tau)
        return cls(H_S.shape[0], H_B.shape[0], U, tau)

    @classmethod
    def pswap(cls, alpha: float, dim: int = 2, tau: float = 1.0) -> "CollisionSpec":
        return cls(dim, dim, pswap(alpha, dim), tau)


@dataclass(frozen=True)
class MeasurementSpec:
    """Ancilla measurement basis (columns of ``basis``) and the unitary ``U_M`` applied before it."""

    basis: np.ndarray = field(repr=False)
    pre_measurement_unitary: np.ndarray = field(repr=False)

    def __post_init__(self):
        B = _as_array(self.basis)
        if B.ndim != 2 or B.shape[0] != B.shape[1]:
            raise ValidationError(f"measurement basis must be a square matrix of column vectors, got {B.shape}")
        d = B.shape[0]
        if not np.allclose(B.conj().T @ B, np.eye(d), atol=1e-10, rtol=0):
            raise ValidationError("measurement basis vectors are not orthonormal")
        if not np.allclose(B @ B.conj().T, np.eye(d), atol=1e-10, rtol=0):
            raise ValidationError("measurement basis is incomplete")
        W = _as_array(self.pre_measurement_unitary)
        if W.ndim != 2 or W.shape[0] != W.shape[1] or W.shape[0] % d:
            raise ValidationError(f"pre-measurement unitary of shape {W.shape} does not fit a {d}-dim ancilla")
        if not qcore.is_unitary(W):
            raise ValidationError("pre-measurement unitary is not unitary")
        object.__setattr__(self, "basis", B)
        object.__setattr__(self, "pre_measurement_unitary", W)

    @property
    def ancilla_dim(self) -> int:
        return self.basis.shape[0]

    @classmethod
    def pswap(cls, beta: float, basis: Literal["x", "z"] = "x") -> "MeasurementSpec":
        B = sigma_x_basis() if basis == "x" else sigma_z_basis()
        return cls(B, pswap(beta, 2))


def collision_unitary_from_hamiltonians(H_S, H_B, V, tau: float) -> np.ndarray:
    """``exp(-i (H_S (x) 1 + 1 (x) H_B + V) tau)``."""
    H_S, H_B, V = _as_array(H_S), _as_array(H_B), _as_array(V)
    for name, H in (("H_S", H_S), ("H_B", H_B), ("V", V)):
        if not qcore.is_hermitian(H, 1e-10):
            raise ValidationError(f"{name} is not Hermitian")
    d_s, d_b = H_S.shape[0], H_B.shape[0]
    if V.shape != (d_s * d_b, d_s * d_b):
        raise ValidationError(f"V has shape {V.shape}, expected {(d_s * d_b,) * 2}")
    H = np.kron(H_S, np.eye(d_b)) + np.kron(np.eye(d_s), H_B) + V
    return scipy.linalg.expm(-1j * tau * H)


def pswap(alpha: float, subsystem_dim: int = 2) -> np.ndarray:
    """Partial swap ``cos(alpha) 1 + i sin(alpha) S``."""
    if subsystem_dim < 2:
        raise ValidationError("pswap needs subsystem dimension >= 2")
    S = qcore.swap_operator(subsystem_dim)
    return np.cos(alpha) * np.eye(subsystem_dim**2) + 1j * np.sin(alpha) * S


def sigma_x_basis() -> np.ndarray:
    return np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def sigma_z_basis() -> np.ndarray:
    return np.eye(2, dtype=complex)


def _ancilla_purification(ancilla) -> list[tuple[float, np.ndarray]]:
    """Split an ancilla state (ket or density matrix) into weighted pure components."""
    a = np.asarray(ancilla, dtype=complex)
    if a.ndim == 1:
        n = np.linalg.norm(a)
        if abs(n - 1) > 1e-10:
            raise ValidationError(f"ancilla ket has norm {n:.6g}, expected 1")
        return [(1.0, a)]
    a = qcore.check_density_matrix(a, name="ancilla state")
    p, V = np.linalg.eigh(a)
    return [(float(pk), V[:, k]) for k, pk in enumerate(p) if pk > 1e-14]


def ancilla_kraus(W: np.ndarray, ancilla, basis: np.ndarray, system_dim: int) -> list[np.ndarray]:
    """Kraus operators ``sqrt(p_k) <b_l| W |chi_k>`` on the system for a joint unitary ``W``."""
    W = _as_array(W)
    basis = _as_array(basis)
    d_a = basis.shape[0]
    W4 = W.reshape(system_dim, d_a, system_dim, d_a)
    ops = []
    for p, chi in _ancilla_purification(ancilla):
        if chi.shape != (d_a,):
            raise ValidationError(f"ancilla dimension {chi.shape[0]} does not match {d_a}")
        for l in range(d_a):
            A = np.einsum("a,iajb,b->ij", basis[:, l].conj(), W4, chi)
            ops.append(np.sqrt(p) * A)
    return ops


def collision_map(spec: CollisionSpec, eta) -> np.ndarray:
    """Superoperator of ``xi[rho] = Tr_B{U (rho (x) eta) U^dagger}``."""
    basis = np.eye(spec.ancilla_dim, dtype=complex)
    return qcore.superop_from_kraus(ancilla_kraus(spec.unitary, eta, basis, spec.system_dim))


def markov_step(spec: CollisionSpec, eta, rho) -> np.ndarray:
    eta = _ancilla_state(eta)
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (spec.system_dim, spec.system_dim) or eta.shape != (spec.ancilla_dim,) * 2:
        raise ValidationError("state dimensions do not match the collision spec")
    U = spec.unitary
    joint = U @ np.kron(rho, eta) @ U.conj().T
    return qcore.partial_trace(joint, (spec.system_dim, spec.ancilla_dim), keep="A")


def _ancilla_state(eta) -> np.ndarray:
    eta = np.asarray(eta, dtype=complex)
    return qcore.projector(eta) if eta.ndim == 1 else eta


def markov_evolve(spec: CollisionSpec, eta, rho0, N: int) -> np.ndarray:
    """States ``xi^n[rho0]`` for ``n = 0..N`` stacked along axis 0."""
    if N < 0:
        raise ValidationError(f"N must be >= 0, got {N}")
    xi = collision_map(spec, eta)
    out = np.empty((N + 1, spec.system_dim, spec.system_dim), dtype=complex)
    v = qcore.vec(np.asarray(rho0, dtype=complex))
    for n in range(N + 1):
        out[n] = qcore.unvec(v)
        v = xi @ v
    return out


def measurement_channel(spec: CollisionSpec, mspec: MeasurementSpec, ancilla) -> np.ndarray:
    """Superoperator ``E`` of the measured collision, built from its Kraus operators."""
    if mspec.ancilla_dim != spec.ancilla_dim:
        raise ValidationError("measurement basis dimension does not match the ancilla")
    if mspec.pre_measurement_unitary.shape != spec.unitary.shape:
        raise ValidationError("pre-measurement unitary does not act on system (x) ancilla")
    W = mspec.pre_measurement_unitary @ spec.unitary
    ops = ancilla_kraus(W, ancilla, mspec.basis, spec.system_dim)
    completeness = sum(A.conj().T @ A for A in ops)
    if not np.allclose(completeness, np.eye(spec.system_dim), atol=1e-10, rtol=0):
        raise ValidationError("measurement Kraus operators are not complete")
    return qcore.superop_from_kraus(ops)


def _power_apply(S: np.ndarray, v: np.ndarray, n: int) -> np.ndarray:
    for _ in range(n):
        v = S @ v
    return v


def deterministic_run(spec: CollisionSpec, mspec: MeasurementSpec, eta, rho0, m: int, N: int) -> np.ndarray:
    """State after ``N`` collisions when ancilla ``m`` (1-based) is measured."""
    if not 1 <= m <= N:
        raise ValidationError(f"measured ancilla m={m} outside 1..{N}")
    xi = collision_map(spec, eta)
    E = measurement_channel(spec, mspec, eta)
    v = qcore.vec(np.asarray(rho0, dtype=complex))
    v = _power_apply(xi, v, m - 1)
    v = E @ v
    v = _power_apply(xi, v, N - m)
    return qcore.unvec(v)


def _apply_site(T: np.ndarray, op: np.ndarray, axes: tuple[int, ...]) -> np.ndarray:
    """Contract ``op`` (output indices first) into tensor axes ``axes`` of ``T``."""
    k = len(axes)
    op_t = op.reshape([T.shape[a] for a in axes] * 2)
    out = np.tensordot(op_t, T, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(out, list(range(k)), list(axes))


def brute_force_deterministic_run(
    spec: CollisionSpec, mspec: MeasurementSpec, eta, rho0, m: int, N: int
) -> np.ndarray:
    """Full-tensor simulation of the measured chain on ``S (x) B_1 (x) ... (x) B_N``.

    Builds the joint state, applies every collision and the non-selective
    projective measurement of ancilla ``m`` literally, then traces the bath.
    Memory grows as ``d_A**(2N)``, so this is an oracle for small ``N`` only.
    """
    if not 1 <= m <= N:
        raise ValidationError(f"measured ancilla m={m} outside 1..{N}")
    if N > 6:
        raise ValidationError("brute-force oracle is limited to N <= 6 ancillas")
    d_s, d_a = spec.system_dim, spec.ancilla_dim
    eta = _ancilla_state(eta)
    dims = [d_s] + [d_a] * N
    n = N + 1
    state = np.asarray(rho0, dtype=complex)
    for _ in range(N):
        state = np.kron(state, eta)
    T = state.reshape(dims + dims)
    U = spec.unitary
    for j in range(1, N + 1):
        W = mspec.pre_measurement_unitary @ U if j == m else U
        T = _apply_site(T, W, (0, j))
        T = _apply_site(T, W.conj(), (n, n + j))
        if j == m:
            acc = np.zeros_like(T)
            for l in range(d_a):
                P = qcore.projector(mspec.basis[:, l])
                acc += _apply_site(_apply_site(T, P, (j,)), P.conj(), (n + j,))
            T = acc
    # trace out every ancilla
    letters = "abcdefghijklmnopqrstuvwxyz"
    ket = ["i"] + [letters[k] for k in range(N)]
    bra = ["j"] + [letters[k] for k in range(N)]
    return np.einsum("".join(ket + bra) + "->ij", T)


def check_weights(weights: Sequence[float], N: int | None = None, atol: float = 1e-9) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or (N is not None and w.size != N):
        raise ValidationError(f"expected {N} weights, got shape {w.shape}")
    if np.any(w < 0):
        raise ValidationError("kernel weights must be non-negative")
    if abs(w.sum() - 1.0) > atol:
        raise ValidationError(f"kernel weights sum to {w.sum():.12g}, expected 1")
    return w


def probabilistic_run(
    spec: CollisionSpec,
    mspec: MeasurementSpec,
    eta,
    rho0,
    weights: Sequence[float],
    N: int,
    orientation: Orientation = "elapsed",
) -> np.ndarray:
    """Weighted average of deterministic runs over the measured ancilla.

    With ``orientation="elapsed"`` (default) ``weights[m-1]`` is the weight
    of the run in which ``m`` collisions, counting the measured one, have
    taken place since the measurement; the measured ancilla is ``N - m + 1``.
    ``orientation="ancilla"`` makes ``weights[m-1]`` the weight of measuring
    ancilla ``m`` directly.
    """
    w = check_weights(weights, N)
    xi = collision_map(spec, eta)
    E = measurement_channel(spec, mspec, eta)
    v0 = qcore.vec(np.asarray(rho0, dtype=complex))
    # before[j] = xi^j v0 for j = 0..N-1
    before = [v0]
    for _ in range(N - 1):
        before.append(xi @ before[-1])
    if orientation == "elapsed":
        w_ancilla = w[::-1]
    elif orientation == "ancilla":
        w_ancilla = w
    else:
        raise ValidationError(f"unknown orientation {orientation!r}")
    # Horner-style accumulation: acc_m = xi acc_{m-1} + w_m E before[m-1]
    acc = np.zeros_like(v0)
    for m in range(1, N + 1):
        acc = xi @ acc
        if w_ancilla[m - 1] != 0.0:
            acc = acc + w_ancilla[m - 1] * (E @ before[m - 1])
    return qcore.unvec(acc)


def probabilistic_trajectory(
    spec: CollisionSpec,
    mspec: MeasurementSpec,
    eta,
    rho0,
    weights: Sequence[float],
    N: int,
) -> np.ndarray:
    """System state after each collision ``n = 0..N`` of the probabilistic chain.

    ``weights[m-1]`` is the probability that ancilla ``m`` is the measured
    one. At step ``n`` the runs with ``m > n`` have not been measured yet
    and contribute ``xi^n[rho0]``. The last entry equals
    ``probabilistic_run(..., orientation="ancilla")``.
    """
    w = check_weights(weights, N)
    xi = collision_map(spec, eta)
    E = measurement_channel(spec, mspec, eta)
    d = spec.system_dim
    v = qcore.vec(np.asarray(rho0, dtype=complex))  # unmeasured branch, xi^n rho0
    measured = np.zeros_like(v)  # sum over m <= n of w_m xi^{n-m} E xi^{m-1} rho0
    out = np.empty((N + 1, d, d), dtype=complex)
    out[0] = qcore.unvec(v)
    # tail[n] = sum of w_m over m > n
    tail = np.append(np.cumsum(w[::-1])[::-1], 0.0)
    for n in range(1, N + 1):
        measured = xi @ measured + w[n - 1] * (E @ v)
        v = xi @ v
        out[n] = qcore.unvec(measured + tail[n] * v)
    return out


def gaussian_weights(center: float, width: float, N: int) -> np.ndarray:
    """``k_m ~ exp(-(m - center)^2 / (2 width^2))`` on ``m = 1..N``, normalized."""
    if N < 1:
        raise ValidationError(f"N must be >= 1, got {N}")
    if not width > 0:
        raise ValidationError(f"width must be positive, got {width}")
    m = np.arange(1, N + 1, dtype=float)
    logw = -((m - center) ** 2) / (2.0 * width**2)
    w = np.exp(logw - logw.max())
    return w / w.sum()
