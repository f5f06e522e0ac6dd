"""GKSL generators and their damping basis.

The damping basis of a diagonalizable Lindbladian is the pair of operator
families ``{R_i}`` (right eigen-operators) and ``{L_i}`` (left
eigen-operators) with ``Tr(L_i R_j) = delta_ij``. Any operator expands as
``X = sum_i Tr(L_i X) R_i``.

Left eigen-operators are read off the rows of the inverse of the
right-eigenvector matrix, so biorthonormality holds to solver precision by
construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from postmarkov import qcore
from postmarkov.errors import NumericalError, ValidationError

__all__ = [
    "LindbladGenerator",
    "SpectralDecomposition",
    "build_superoperator",
    "amplitude_damping",
    "from_collision_map",
    "spectral_decompose",
    "verify_biorthonormality",
    "is_gksl",
]

MAX_CONDITION = 1e8


@dataclass(frozen=True)
class LindbladGenerator:
    """``L X = -i[H, X] + sum_a a_a (L_a X L_a^dag - {L_a^dag L_a, X} / 2)``."""

    hamiltonian: np.ndarray = field(repr=False)
    jump_ops: tuple[tuple[np.ndarray, float], ...] = ()

    def __post_init__(self):
        H = np.asarray(self.hamiltonian, dtype=complex)
        if not qcore.is_hermitian(H, 1e-10):
            raise ValidationError("Hamiltonian is not Hermitian")
        jumps = []
        for L, rate in self.jump_ops:
            if rate < 0:
                raise ValidationError(f"negative dissipation rate {rate}")
            L = np.asarray(L, dtype=complex)
            if L.shape != H.shape:
                raise ValidationError(f"jump operator shape {L.shape} does not match H {H.shape}")
            jumps.append((L, float(rate)))
        object.__setattr__(self, "hamiltonian", H)
        object.__setattr__(self, "jump_ops", tuple(jumps))

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]


def build_superoperator(gen: LindbladGenerator) -> np.ndarray:
    """Column-stacked matrix of the generator."""
    d = gen.dim
    I = np.eye(d)
    H = gen.hamiltonian
    S = -1j * (np.kron(I, H) - np.kron(H.T, I))
    for L, a in gen.jump_ops:
        LdL = L.conj().T @ L
        # [L, X L^dag] + [L X, L^dag] = 2 L X L^dag - L^dag L X - X L^dag L
        S = S + a * (np.kron(L.conj(), L) - 0.5 * np.kron(I, LdL) - 0.5 * np.kron(LdL.T, I))
    return S


def amplitude_damping(rate: float, omega: float = 0.0) -> LindbladGenerator:
    """Qubit decay ``|1> -> |0>`` at ``rate`` with optional level splitting ``H = omega |1><1|``."""
    sigma_minus = np.array([[0, 1], [0, 0]], dtype=complex)
    H = np.diag([0.0, omega]).astype(complex)
    return LindbladGenerator(H, ((sigma_minus, rate),))


def from_collision_map(xi: np.ndarray, tau: float, residual_tol: float = 1e-10) -> np.ndarray:
    """Generator ``log(xi) / tau`` of the semigroup interpolating a collision map.

    Uses the principal logarithm; raises if an eigenvalue of ``xi`` lies on
    the negative real axis (reduce ``tau`` or the coupling so that ``xi`` is
    closer to the identity).
    """
    if not tau > 0:
        raise ValidationError(f"tau must be positive, got {tau}")
    xi = np.asarray(xi, dtype=complex)
    qcore.superop_dim(xi)
    w = np.linalg.eigvals(xi)
    scale = max(1.0, float(np.max(np.abs(w))))
    if np.any((w.real <= 0) & (np.abs(w.imag) <= 1e-12 * scale)):
        raise NumericalError(
            "collision map has an eigenvalue on the non-positive real axis; "
            "its logarithm is ambiguous. Use a shorter collision or weaker coupling."
        )
    L = scipy.linalg.logm(xi) / tau
    residual = np.max(np.abs(scipy.linalg.expm(L * tau) - xi))
    if residual > residual_tol:
        raise NumericalError(f"exp(L tau) reproduces xi only to {residual:.2e}")
    return L


def is_gksl(L: np.ndarray, atol: float = 1e-9) -> bool:
    """Trace-annihilating, Hermiticity-preserving and conditionally completely positive."""
    d = qcore.superop_dim(L)
    t = qcore.trace_functional(d)
    if np.max(np.abs(t @ L)) > atol:
        return False
    C = qcore.choi_of(L)
    if not qcore.is_hermitian(C, atol):
        return False
    omega = qcore.vec(np.eye(d)) / np.sqrt(d)
    P = np.eye(d * d) - np.outer(omega, omega.conj())
    return qcore.min_eigenvalue_hermitian(P @ C @ P, atol) >= -atol


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues and biorthonormal right/left eigen-operators of a superoperator.

    ``right`` has the vectorized ``R_i`` as columns; ``left`` has rows
    ``vec(L_i^T)`` so that ``left @ vec(X)`` gives the coefficients
    ``Tr(L_i X)``. Both are ``d^2 x d^2`` and ``left @ right == 1``.
    """

    eigenvalues: np.ndarray
    right: np.ndarray = field(repr=False)
    left: np.ndarray = field(repr=False)
    condition_number: float

    @property
    def dim(self) -> int:
        return qcore.superop_dim(self.right)

    @property
    def right_ops(self) -> list[np.ndarray]:
        return [qcore.unvec(self.right[:, i]) for i in range(self.right.shape[1])]

    @property
    def left_ops(self) -> list[np.ndarray]:
        return [qcore.unvec(self.left[i]).T for i in range(self.left.shape[0])]

    def coefficients(self, X: np.ndarray) -> np.ndarray:
        """``mu_i = Tr(L_i X)``."""
        return self.left @ qcore.vec(np.asarray(X, dtype=complex))

    def expand(self, mu: np.ndarray) -> np.ndarray:
        """``sum_i mu_i R_i``."""
        return qcore.unvec(self.right @ np.asarray(mu))

    def reconstruct(self) -> np.ndarray:
        return (self.right * self.eigenvalues) @ self.left

    def propagator(self, t: float) -> np.ndarray:
        """``exp(L t)`` assembled from the spectrum."""
        return (self.right * np.exp(self.eigenvalues * t)) @ self.left


def spectral_decompose(L: np.ndarray, max_condition: float = MAX_CONDITION) -> SpectralDecomposition:
    L = np.asarray(L, dtype=complex)
    qcore.superop_dim(L)
    if not np.any(L):
        n = L.shape[0]
        I = np.eye(n, dtype=complex)
        return SpectralDecomposition(np.zeros(n, dtype=complex), I, I.copy(), 1.0)
    w, V = np.linalg.eig(L)
    # normalize columns so the conditioning estimate is scale-free
    V = V / np.linalg.norm(V, axis=0)
    cond = float(np.linalg.cond(V))
    if not np.isfinite(cond) or cond > max_condition:
        raise NumericalError(
            f"generator is not diagonalizable to working precision (eigenvector condition {cond:.2e})"
        )
    left = np.linalg.inv(V)
    return SpectralDecomposition(w, V, left, cond)


def verify_biorthonormality(sd: SpectralDecomposition) -> float:
    """``max |Tr(L_i R_j) - delta_ij|`` computed from the operator forms."""
    Ls = sd.left_ops
    Rs = sd.right_ops
    n = len(Rs)
    G = np.array([[np.trace(Ls[i] @ Rs[j]) for j in range(n)] for i in range(n)])
    return float(np.max(np.abs(G - np.eye(n))))
