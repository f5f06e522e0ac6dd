"""Dense linear algebra for finite-dimensional states, channels and superoperators.

Conventions
-----------
* Operators are vectorized by stacking columns, so ``vec(A @ X @ B) ==
  kron(B.T, A) @ vec(X)`` and composing superoperators is plain matrix
  multiplication.
* Kronecker products put the first factor on the outer (slow) index.
* hbar = 1; all times are dimensionless.

Every function is pure. Inputs are never modified in place.
"""

from __future__ import annotations

from math import isqrt
from typing import Literal, Sequence

import numpy as np
import scipy.linalg

from postmarkov.errors import NumericalError, ValidationError

__all__ = [
    "PSD_CLIP",
    "vec",
    "unvec",
    "tensor_product",
    "partial_trace",
    "swap_operator",
    "ket",
    "projector",
    "is_hermitian",
    "is_unitary",
    "check_density_matrix",
    "fidelity",
    "trace_distance",
    "superop_from_kraus",
    "superop_from_unitary",
    "identity_superop",
    "apply_superop",
    "superop_dim",
    "trace_functional",
    "is_trace_preserving",
    "choi_of",
    "min_eigenvalue_hermitian",
    "matrix_function",
    "random_density_matrix",
    "random_unitary",
]

# Eigenvalues in (-PSD_CLIP, 0) are rounding noise and are set to zero.
PSD_CLIP = 1e-10


def vec(X: np.ndarray) -> np.ndarray:
    """Column-stack a matrix into a vector."""
    X = np.asarray(X)
    return X.reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    """Inverse of :func:`vec` for a square operator."""
    v = np.asarray(v)
    d = isqrt(v.size)
    if d * d != v.size:
        raise ValidationError(f"vector of length {v.size} is not a vectorized square matrix")
    return v.reshape((d, d), order="F")


def tensor_product(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product of any number of matrices, first factor outermost."""
    if not ops:
        raise ValidationError("tensor_product needs at least one operand")
    out = np.asarray(ops[0])
    for op in ops[1:]:
        out = np.kron(out, np.asarray(op))
    return out


def partial_trace(
    M: np.ndarray,
    dims: tuple[int, int],
    keep: Literal["A", "B"] = "A",
) -> np.ndarray:
    """Reduce an operator on ``A (x) B`` to one subsystem.

    ``keep="A"`` traces out B (the environment, in collision-model usage).
    """
    M = np.asarray(M)
    d_a, d_b = dims
    if M.shape != (d_a * d_b, d_a * d_b):
        raise ValidationError(
            f"matrix of shape {M.shape} does not act on a {d_a}x{d_b} bipartite space"
        )
    T = M.reshape(d_a, d_b, d_a, d_b)
    if keep == "A":
        return np.einsum("ibjb->ij", T)
    if keep == "B":
        return np.einsum("aiaj->ij", T)
    raise ValidationError(f"keep must be 'A' or 'B', got {keep!r}")


def swap_operator(d: int) -> np.ndarray:
    """The swap ``S|i>|j> = |j>|i>`` on ``C^d (x) C^d``."""
    S = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            S[j * d + i, i * d + j] = 1.0
    return S


def ket(amplitudes: Sequence[complex]) -> np.ndarray:
    return np.asarray(amplitudes, dtype=complex).reshape(-1)


def projector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    return np.outer(psi, psi.conj())


def is_hermitian(M: np.ndarray, atol: float = 1e-10) -> bool:
    M = np.asarray(M)
    return bool(np.max(np.abs(M - M.conj().T), initial=0.0) <= atol)


def is_unitary(U: np.ndarray, atol: float = 1e-10) -> bool:
    U = np.asarray(U)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        return False
    return bool(np.allclose(U.conj().T @ U, np.eye(U.shape[0]), atol=atol, rtol=0))


def check_density_matrix(
    rho: np.ndarray,
    *,
    trace_tol: float = 1e-10,
    herm_tol: float = 1e-10,
    psd_tol: float = 1e-9,
    name: str = "rho",
) -> np.ndarray:
    """Return ``rho`` as a complex array, raising if it is not a valid state."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValidationError(f"{name} must be a square matrix, got shape {rho.shape}")
    if not is_hermitian(rho, herm_tol):
        raise ValidationError(f"{name} is not Hermitian")
    tr = np.trace(rho)
    if abs(tr - 1) > trace_tol:
        raise ValidationError(f"{name} has trace {tr.real:.3e}, expected 1")
    lo = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
    if lo < -psd_tol:
        raise ValidationError(f"{name} has negative eigenvalue {lo:.3e}")
    return rho


def _psd_sqrt(M: np.ndarray, name: str) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (M + M.conj().T))
    if w[0] < -PSD_CLIP:
        raise ValidationError(f"{name} is not positive semidefinite (eigenvalue {w[0]:.3e})")
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)) @ V.conj().T


def fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))**2``.

    Evaluated as the squared trace norm of ``sqrt(rho) sqrt(sigma)``, which
    avoids square roots of round-off eigenvalues when either state is
    rank-deficient.
    """
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    if rho.shape != sigma.shape:
        raise ValidationError(f"shape mismatch: {rho.shape} vs {sigma.shape}")
    a = _psd_sqrt(rho, "rho")
    b = _psd_sqrt(sigma, "sigma")
    f = float(np.sum(np.linalg.svd(a @ b, compute_uv=False)) ** 2)
    return min(max(f, 0.0), 1.0)


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Half the trace norm of ``rho - sigma``."""
    diff = np.asarray(rho, dtype=complex) - np.asarray(sigma, dtype=complex)
    return 0.5 * float(np.sum(np.linalg.svd(diff, compute_uv=False)))


def superop_from_kraus(kraus_list: Sequence[np.ndarray]) -> np.ndarray:
    """Superoperator of ``rho -> sum_l A_l rho A_l^dagger``."""
    if len(kraus_list) == 0:
        raise ValidationError("Kraus list is empty")
    ops = [np.asarray(A, dtype=complex) for A in kraus_list]
    shape = ops[0].shape
    if any(A.shape != shape for A in ops):
        raise ValidationError("Kraus operators have inconsistent shapes")
    return sum(np.kron(A.conj(), A) for A in ops)


def superop_from_unitary(U: np.ndarray) -> np.ndarray:
    U = np.asarray(U, dtype=complex)
    return np.kron(U.conj(), U)


def identity_superop(d: int) -> np.ndarray:
    return np.eye(d * d, dtype=complex)


def superop_dim(S: np.ndarray) -> int:
    """Hilbert-space dimension ``d`` of a ``d^2 x d^2`` superoperator."""
    S = np.asarray(S)
    d = isqrt(S.shape[0])
    if S.ndim != 2 or S.shape[0] != S.shape[1] or d * d != S.shape[0]:
        raise ValidationError(f"shape {S.shape} is not that of a superoperator")
    return d


def apply_superop(S: np.ndarray, rho: np.ndarray) -> np.ndarray:
    S = np.asarray(S)
    rho = np.asarray(rho)
    if S.shape[1] != rho.size:
        raise ValidationError(f"superoperator {S.shape} cannot act on operator {rho.shape}")
    return unvec(S @ vec(rho))


def trace_functional(d: int) -> np.ndarray:
    """Row vector ``t`` with ``t @ vec(X) == Tr X``."""
    return vec(np.eye(d)).astype(complex)


def is_trace_preserving(S: np.ndarray, atol: float = 1e-10) -> bool:
    d = superop_dim(S)
    t = trace_functional(d)
    return bool(np.max(np.abs(t @ S - t)) <= atol)


def choi_of(S: np.ndarray) -> np.ndarray:
    """Choi matrix ``sum_{k,l} |k><l| (x) S[|k><l|]``.

    The reference copy sits in the first tensor slot and the map acts on the
    second, so block ``(k, l)`` of the result is ``S[|k><l|]``.
    """
    d = superop_dim(S)
    C = np.zeros((d * d, d * d), dtype=complex)
    for k in range(d):
        for l in range(d):
            E = np.zeros((d, d))
            E[k, l] = 1.0
            C += np.kron(E, apply_superop(S, E))
    return C


def min_eigenvalue_hermitian(M: np.ndarray, atol: float = 1e-9) -> float:
    M = np.asarray(M)
    scale = max(1.0, float(np.max(np.abs(M), initial=0.0)))
    if not is_hermitian(M, atol * scale):
        raise ValidationError("matrix is not Hermitian within tolerance")
    return float(np.linalg.eigvalsh(0.5 * (M + M.conj().T))[0])


def matrix_function(
    M: np.ndarray,
    f: Literal["exp", "log", "sqrt"],
    max_condition: float = 1e8,
) -> np.ndarray:
    """Apply ``exp``, principal ``log`` or principal ``sqrt`` to a square matrix.

    ``exp`` uses scaling and squaring. ``log`` and ``sqrt`` diagonalize ``M``
    and refuse inputs whose eigenvector matrix is worse conditioned than
    ``max_condition`` or whose spectrum touches the closed negative real axis
    (``log``) or the open one (``sqrt``).
    """
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValidationError(f"matrix_function needs a square matrix, got {M.shape}")
    if f == "exp":
        return scipy.linalg.expm(M)
    if f not in ("log", "sqrt"):
        raise ValidationError(f"unknown matrix function {f!r}")
    w, V = np.linalg.eig(M)
    cond = np.linalg.cond(V)
    if not np.isfinite(cond) or cond > max_condition:
        raise NumericalError(f"matrix is not safely diagonalizable (cond {cond:.2e})")
    scale = max(1.0, float(np.max(np.abs(w))))
    on_cut = (np.abs(w.imag) <= 1e-12 * scale) & (w.real < 0)
    if f == "log":
        if np.any(on_cut) or np.any(np.abs(w) <= 1e-14 * scale):
            raise NumericalError("spectrum touches the branch cut of the principal logarithm")
        fw = np.log(w.astype(complex))
    else:
        if np.any(on_cut & (w.real < -1e-12 * scale)):
            raise NumericalError("spectrum touches the branch cut of the principal square root")
        fw = np.sqrt(w.astype(complex))
    out = (V * fw) @ np.linalg.inv(V)
    if np.isrealobj(M) and np.max(np.abs(out.imag)) <= 1e-12 * max(1.0, np.max(np.abs(out))):
        return out.real
    return out


def random_density_matrix(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Ginibre-distributed mixed state (full rank unless ``rank`` is given)."""
    k = d if rank is None else rank
    G = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    rho = G @ G.conj().T
    return rho / np.trace(rho)


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR with phase correction."""
    Z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    ph = np.diag(R) / np.abs(np.diag(R))
    return Q * ph
