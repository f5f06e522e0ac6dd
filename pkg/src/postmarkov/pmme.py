"""Post-Markovian master equation

    d rho / dt = int_0^t k(t') exp(L t') E L rho(t - t') dt'

solved exactly in the damping basis of ``L``.

Writing ``rho(t) = sum_i mu_i(t) R_i`` and Laplace transforming gives the
linear system ``Omega(s) X(s) = mu(0)`` with

    Omega_ji(s) = s delta_ji - lambda_i Tr(L_j E[R_i]) K(s - lambda_j),

``K`` the Laplace transform of ``k``. The time-domain coefficient matrix
``W(t)`` is the inverse transform of ``Omega(s)^-1`` and
``mu(t) = W(t) mu(0)``.

The inversion runs on a Talbot contour for kernels with unbounded support.
A kernel supported on ``[0, T]`` has an entire transform of exponential type,
so ``det Omega(s)`` vanishes along an infinite chain of points drifting left
like ``-log|Im s| / T``. No bounded contour encloses them all, and for
``t < T`` the missed residues are not small. Those kernels are inverted on
the Bromwich line instead (de Hoog's method), which never leaves the right
half plane.

The dynamical map, its inverse, the time-local (TCL) generator and the
Choi-matrix positivity scan are all assembled from ``W``. An independent
time-domain integrator of the convolution equation serves as a cross-check.

For :class:`~postmarkov.kernels.DiracDeltaAtZero` the equation is taken in
its memoryless limit ``d rho / dt = L rho``: the measurement map drops out
and ``W(t) = diag(exp(lambda_i t))`` exactly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from postmarkov import dehoog, qcore, talbot
from postmarkov.errors import NumericalError, ValidationError
from postmarkov.kernels import MemoryKernel
from postmarkov.lindblad import SpectralDecomposition, spectral_decompose

log = logging.getLogger(__name__)

__all__ = [
    "PMMEProblem",
    "PropagatorW",
    "CPScanResult",
    "DirectSolution",
    "build_omega",
    "solve_W",
    "propagate",
    "propagate_all",
    "integrate_pmme_direct",
    "dynamical_map",
    "inverse_map",
    "tcl_generator",
    "nz_kernel",
    "cp_scan",
    "choi_from_damping_basis",
]

CP_TOL = 1e-8
HERMITICITY_TOL = 1e-8


@dataclass(frozen=True)
class PMMEProblem:
    """Generator ``L``, measurement map ``E`` and kernel ``k``, with derived damping-basis data.

    ``e_matrix[j, i] = Tr(L_j E[R_i])``.
    """

    generator: np.ndarray = field(repr=False)
    measurement_map: np.ndarray = field(repr=False)
    kernel: MemoryKernel
    spectral: SpectralDecomposition = field(repr=False)
    e_matrix: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, generator, measurement_map, kernel: MemoryKernel, cptp_tol: float = 1e-9) -> "PMMEProblem":
        L = np.asarray(generator, dtype=complex)
        E = np.asarray(measurement_map, dtype=complex)
        d = qcore.superop_dim(L)
        if E.shape != L.shape:
            raise ValidationError(f"measurement map shape {E.shape} does not match generator {L.shape}")
        t = qcore.trace_functional(d)
        if np.max(np.abs(t @ L)) > 1e-10:
            raise ValidationError("generator is not trace-annihilating")
        if not qcore.is_trace_preserving(E, cptp_tol):
            raise ValidationError("measurement map is not trace preserving")
        if qcore.min_eigenvalue_hermitian(qcore.choi_of(E)) < -cptp_tol:
            raise ValidationError("measurement map is not completely positive")
        sd = spectral_decompose(L)
        e_matrix = sd.left @ E @ sd.right
        return cls(L, E, kernel, sd, e_matrix)

    @property
    def dim(self) -> int:
        return self.spectral.dim

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.spectral.eigenvalues

    def imaginary_reach(self) -> float:
        """Rough bound on ``|Im s|`` over the singularities of ``Omega^-1``."""
        lam = self.eigenvalues
        B = self.e_matrix * lam[None, :]
        return float(max(np.max(np.abs(lam.imag)), np.linalg.norm(B, 2)))


@dataclass(frozen=True)
class PropagatorW:
    """``W(t)`` on a uniform grid starting at ``t = 0``."""

    times: np.ndarray
    matrices: np.ndarray = field(repr=False)
    inversion_error: float = 0.0
    method: str = "analytic"

    def index(self, t: float) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-12 * max(1.0, abs(t)):
            raise ValidationError(
                f"t={t!r} is not on the solution grid; re-solve on a grid that contains it"
            )
        return k

    def at(self, t: float) -> np.ndarray:
        return self.matrices[self.index(t)]

    @property
    def spacing(self) -> float:
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0


@dataclass(frozen=True)
class CPScanResult:
    times: np.ndarray
    min_eigenvalues: np.ndarray
    construction_mismatch: float
    tol: float = CP_TOL

    @property
    def is_cp(self) -> bool:
        return bool(np.all(self.min_eigenvalues >= -self.tol))

    def rows(self):
        return list(zip(self.times.tolist(), self.min_eigenvalues.tolist()))


@dataclass(frozen=True)
class DirectSolution:
    times: np.ndarray
    states: np.ndarray = field(repr=False)
    trace_drift: float = 0.0


def _check_grid(times) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ValidationError("time grid must be a non-empty 1-D array")
    if t[0] != 0.0:
        raise ValidationError("time grid must start at t = 0")
    if t.size > 1:
        h = np.diff(t)
        if np.any(h <= 0):
            raise ValidationError("time grid must be increasing")
        if np.max(np.abs(h - h[0])) > 1e-9 * max(1.0, t[-1]):
            raise ValidationError("time grid must be uniform")
    return t


def build_omega(problem: PMMEProblem, s) -> np.ndarray:
    """``Omega(s)`` for scalar or array ``s``; shape ``s.shape + (d^2, d^2)``."""
    s = np.asarray(s, dtype=complex)
    lam = problem.eigenvalues
    n = lam.size
    I = np.eye(n)
    if problem.kernel.is_delta:
        return s[..., None, None] * I - np.diag(lam)
    K = problem.kernel.laplace_shifted(s[..., None], lam)  # indexed by row j
    B = problem.e_matrix * lam[None, :]
    return s[..., None, None] * I - K[..., :, None] * B


INVERSION_METHODS = ("auto", "talbot", "dehoog")


# beyond this contour scale Talbot roundoff (~exp(0.17 mu) eps) exceeds ~1e-9
_TALBOT_MAX_MU = 100.0


def _pick_method(kernel: MemoryKernel, method: str, mu_needed: float = 0.0) -> str:
    if method not in INVERSION_METHODS:
        raise ValidationError(f"unknown inversion method {method!r}; choose from {INVERSION_METHODS}")
    if method == "auto":
        if np.isfinite(kernel.support) or mu_needed > _TALBOT_MAX_MU:
            return "dehoog"
        return "talbot"
    return method


def solve_W(
    problem: PMMEProblem,
    time_grid,
    nodes: int = talbot.DEFAULT_NODES,
    reach: float | None = None,
    tol: float = 1e-6,
    method: str = "auto",
) -> PropagatorW:
    """Inverse Laplace transform of ``Omega^-1`` on a uniform grid from ``t = 0``.

    ``W(0)`` is the identity. ``method="auto"`` uses the Talbot contour with
    ``nodes`` points unless the kernel has bounded support or the grid is so
    long that the contour would lose digits to roundoff; then it uses de
    Hoog's method. Raises :class:`NumericalError` if the refined
    check run (doubled nodes or terms) changes any entry by more than ``tol``.
    """
    t = _check_grid(time_grid)
    lam = problem.eigenvalues
    n = lam.size
    out = np.empty((t.size, n, n), dtype=complex)
    out[0] = np.eye(n)
    if problem.kernel.is_delta:
        out[:] = np.exp(t[:, None] * lam[None, :])[:, None, :] * np.eye(n)
        return PropagatorW(t, out, 0.0, "analytic")
    if reach is None:
        reach = problem.imaginary_reach()
    method = _pick_method(problem.kernel, method, talbot.contour_scale(t[-1], nodes, reach))
    if t.size == 1:
        return PropagatorW(t, out, 0.0, method)
    I = np.eye(n)

    if method == "talbot":
        vals, err = talbot.invert_checked(
            lambda s: np.linalg.inv(build_omega(problem, s)), t[1:], nodes=nodes, reach=reach, tol=tol
        )
    else:
        # subtracting the known 1/(s + 1) leading term removes the jump of
        # W at t = 0 and speeds up the Fourier series
        def F(s):
            return np.linalg.inv(build_omega(problem, s)) - I / (s[:, None, None] + 1)

        vals, err = dehoog.invert_checked(F, t[1:], check_tol=tol)
        vals = vals + np.exp(-t[1:])[:, None, None] * I
    out[1:] = vals
    log.debug("solve_W: %d times via %s, refinement change %.2e", t.size, method, err)
    return PropagatorW(t, out, err, method)


def _superop_from_W(problem: PMMEProblem, Wt: np.ndarray) -> np.ndarray:
    sd = problem.spectral
    return sd.right @ Wt @ sd.left


def _hermitize(rho: np.ndarray, t: float) -> np.ndarray:
    dev = float(np.max(np.abs(rho - rho.conj().T)))
    if dev > HERMITICITY_TOL:
        raise NumericalError(f"solution at t={t:.6g} deviates from Hermiticity by {dev:.2e}")
    if dev > 0:
        log.debug("hermiticity deviation %.2e at t=%.6g", dev, t)
    return 0.5 * (rho + rho.conj().T)


def propagate(problem: PMMEProblem, W: PropagatorW, rho0, t: float) -> np.ndarray:
    """``rho(t) = sum_ij W_ij(t) Tr(L_j rho0) R_i`` for ``t`` on the grid."""
    Wt = W.at(t)
    sd = problem.spectral
    mu = Wt @ sd.coefficients(rho0)
    return _hermitize(sd.expand(mu), t)


def propagate_all(problem: PMMEProblem, W: PropagatorW, rho0) -> np.ndarray:
    """States at every grid time, stacked along axis 0."""
    sd = problem.spectral
    mu0 = sd.coefficients(rho0)
    mus = W.matrices @ mu0
    d = problem.dim
    rhos = (sd.right @ mus.T).T.reshape(-1, d, d).transpose(0, 2, 1)
    return np.array([_hermitize(r, tk) for r, tk in zip(rhos, W.times)])


def dynamical_map(problem: PMMEProblem, W: PropagatorW, t: float) -> np.ndarray:
    """Superoperator of ``Phi(t)[A] = sum_ij W_ij(t) Tr(L_j A) R_i``."""
    return _superop_from_W(problem, W.at(t))


def inverse_map(problem: PMMEProblem, W: PropagatorW, t: float, det_tol: float = 1e-12) -> np.ndarray:
    Wt = W.at(t)
    det = np.linalg.det(Wt)
    if abs(det) <= det_tol:
        raise NumericalError(f"W(t) is singular at t={t:.6g} (|det| = {abs(det):.2e}); Phi(t) has no inverse")
    return _superop_from_W(problem, np.linalg.inv(Wt))


def _exp_generator_samples(L: np.ndarray, h: float, n: int) -> np.ndarray:
    """``exp(L j h)`` for ``j = 0..n-1`` by repeated multiplication."""
    step = scipy.linalg.expm(L * h)
    out = np.empty((n,) + L.shape, dtype=complex)
    out[0] = np.eye(L.shape[0])
    for j in range(1, n):
        out[j] = step @ out[j - 1]
    return out


def nz_kernel(problem: PMMEProblem, t_prime: float) -> np.ndarray:
    """Memory superoperator ``k(t') exp(L t') E L``."""
    if t_prime < 0:
        raise ValidationError("memory kernel is defined for t' >= 0")
    n = problem.generator.shape[0]
    if problem.kernel.is_delta:
        if t_prime == 0:
            raise ValidationError("the delta kernel is a distribution at t' = 0; it has no pointwise value")
        return np.zeros((n, n), dtype=complex)
    L = problem.generator
    k = float(problem.kernel.evaluate(t_prime))
    return k * scipy.linalg.expm(L * t_prime) @ problem.measurement_map @ L


def _nz_kernel_samples(problem: PMMEProblem, h: float, n: int) -> np.ndarray:
    L = problem.generator
    ks = np.asarray(problem.kernel.evaluate(h * np.arange(n)), dtype=float)
    EL = problem.measurement_map @ L
    return ks[:, None, None] * (_exp_generator_samples(L, h, n) @ EL)


def integrate_pmme_direct(problem: PMMEProblem, rho0, t_max: float, dt: float, trace_tol: float = 1e-6) -> DirectSolution:
    """Second-order time stepping of the convolution form of the equation.

    The memory integral is approximated with the trapezoidal rule on the
    step grid and the time derivative with the implicit trapezoidal rule;
    ``exp(L t')`` samples are cached as powers of ``exp(L dt)``. The delta
    kernel integrates ``d rho / dt = L rho`` with the same rule.
    """
    if not dt > 0 or not t_max >= 0:
        raise ValidationError("need dt > 0 and t_max >= 0")
    lam_max = float(np.max(np.abs(problem.eigenvalues)))
    if lam_max > 0 and dt > 1e-2 / lam_max * (1 + 1e-9):
        raise ValidationError(
            f"step size {dt} too large: need dt <= 1e-2 / max|lambda| = {1e-2 / lam_max:.3g}"
        )
    N = int(round(t_max / dt))
    if abs(N * dt - t_max) > 1e-9 * max(1.0, t_max):
        raise ValidationError("t_max must be an integer multiple of dt")
    d = problem.dim
    rho0 = np.asarray(rho0, dtype=complex)
    y = np.empty((N + 1, d * d), dtype=complex)
    y[0] = qcore.vec(rho0)
    n_op = d * d
    I = np.eye(n_op)
    if problem.kernel.is_delta:
        L = problem.generator
        lhs = np.linalg.inv(I - 0.5 * dt * L)
        rhs = I + 0.5 * dt * L
        step = lhs @ rhs
        for n in range(N):
            y[n + 1] = step @ y[n]
    else:
        K = _nz_kernel_samples(problem, dt, N + 1)
        solve = np.linalg.inv(I - 0.25 * dt * dt * K[0])
        I_prev = np.zeros(n_op, dtype=complex)  # memory integral at t_n
        for n in range(N):
            # S = sum_{j=1}^{n} K_j y_{n+1-j} + K_{n+1} y_0 / 2
            if n >= 1:
                S = np.einsum("jab,jb->a", K[1 : n + 1], y[n:0:-1])
            else:
                S = np.zeros(n_op, dtype=complex)
            S = S + 0.5 * K[n + 1] @ y[0]
            y[n + 1] = solve @ (y[n] + 0.5 * dt * I_prev + 0.5 * dt * dt * S)
            I_prev = dt * (0.5 * K[0] @ y[n + 1] + S)
    states = y.reshape(N + 1, d, d).transpose(0, 2, 1)
    traces = np.trace(states, axis1=1, axis2=2)
    drift = float(np.max(np.abs(traces - np.trace(rho0))))
    if drift > trace_tol:
        raise NumericalError(f"trace drifted by {drift:.2e}; reduce the step size")
    return DirectSolution(dt * np.arange(N + 1), states, drift)


def tcl_generator(problem: PMMEProblem, W: PropagatorW, t: float) -> np.ndarray:
    """Time-local generator ``int_0^t k(t') exp(L t') E L Phi(t - t') dt' Phi(t)^-1``.

    The integral is a trapezoidal sum over the grid of ``W``; the delta kernel
    gives ``L`` itself.
    """
    if problem.kernel.is_delta:
        return problem.generator.copy()
    n = W.index(t)
    if n == 0:
        return np.zeros_like(problem.generator)
    h = W.spacing
    K = _nz_kernel_samples(problem, h, n + 1)
    sd = problem.spectral
    Phis = sd.right @ W.matrices[n::-1] @ sd.left  # Phi(t_n - t_j) for j = 0..n
    wts = np.full(n + 1, h)
    wts[[0, -1]] *= 0.5
    integral = np.einsum("j,jab,jbc->ac", wts, K, Phis)
    for j in range(n + 1):
        if abs(np.linalg.det(W.matrices[j])) <= 1e-12:
            raise NumericalError(f"Phi is singular at t={W.times[j]:.6g} inside the TCL window")
    return integral @ inverse_map(problem, W, t)


def choi_from_damping_basis(problem: PMMEProblem, Wt: np.ndarray) -> np.ndarray:
    """``sum_ij W_ij L_j^T (x) R_i``."""
    d = problem.dim
    Lt = np.array([Lj.T for Lj in problem.spectral.left_ops])
    R = np.array(problem.spectral.right_ops)
    C = np.einsum("ij,jab,icd->acbd", Wt, Lt, R)
    return C.reshape(d * d, d * d)


def cp_scan(problem: PMMEProblem, W: PropagatorW, time_grid=None, tol: float = CP_TOL) -> CPScanResult:
    """Smallest eigenvalue of the Choi matrix of ``Phi(t)`` at each grid time.

    Also reports the largest entry-wise gap between the damping-basis Choi
    construction and :func:`postmarkov.qcore.choi_of` of the assembled map.
    """
    times = W.times if time_grid is None else np.asarray(time_grid, dtype=float)
    mins = np.empty(times.size)
    mismatch = 0.0
    for k, t in enumerate(times):
        Wt = W.at(t)
        C = choi_from_damping_basis(problem, Wt)
        C_ref = qcore.choi_of(_superop_from_W(problem, Wt))
        mismatch = max(mismatch, float(np.max(np.abs(C - C_ref))))
        Ch = 0.5 * (C + C.conj().T)
        mins[k] = float(np.linalg.eigvalsh(Ch)[0])
    return CPScanResult(times, mins, mismatch, tol)
