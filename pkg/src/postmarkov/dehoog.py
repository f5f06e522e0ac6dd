"""Numerical inverse Laplace transform on the Bromwich line (de Hoog's method).

The Bromwich integral along ``Re s = gamma`` is a Fourier series in ``t``
with period ``2 T``; its partial sums are accelerated with the quotient
difference continued fraction of de Hoog, Knight and Stokes. Unlike a
deformed contour, the line never enters the left half plane, so transforms
that grow there (entire functions of exponential type, e.g. kernels with
bounded support) are handled; their infinitely many left-lying poles need
not be enclosed.

Times are processed in geometric blocks ``(T/(2 scale), T/scale]`` that
share one set of abscissae, so the number of transform evaluations grows
with ``log(t_max / t_min)`` instead of the number of time points. Both
halves of the line are summed separately, so complex-valued time functions
are handled.

The aliasing error is about ``tol`` times the size of ``f`` near ``2 T``,
provided ``abscissa`` bounds the real parts of all singularities of ``F``.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from postmarkov.errors import NumericalError, ValidationError

__all__ = ["DEFAULT_TERMS", "DEFAULT_TOL", "invert", "invert_checked"]

DEFAULT_TERMS = 20
DEFAULT_TOL = 1e-10
_SCALE = 2.0


def _continued_fraction(a: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Evaluate ``sum_k a_k z^k`` through its QD continued fraction.

    ``a`` has shape ``(2M + 1, ...)``; ``z`` is 1-D. Returns shape
    ``(len(z), ...)``.
    """
    M = (a.shape[0] - 1) // 2
    q = a[1:] / a[:-1]
    e = np.zeros_like(a)
    d = [a[0]]
    for r in range(1, M + 1):
        e = q[1:] - q[:-1] + e[1 : q.shape[0]]
        d.append(-q[0])
        d.append(-e[0])
        if r < M:
            q = q[1:-1] * e[1:] / e[:-1]
    zz = z.reshape((-1,) + (1,) * (a.ndim - 1))
    A2, A1 = np.zeros_like(d[0]), d[0]
    B2, B1 = np.ones_like(d[0]), np.ones_like(d[0])
    for n in range(1, 2 * M):
        A2, A1 = A1, A1 + d[n] * zz * A2
        B2, B1 = B1, B1 + d[n] * zz * B2
    # tail of the continued fraction replaced by its limiting value
    h = 0.5 * (1 + zz * (d[2 * M - 1] - d[2 * M]))
    R = -h * (1 - np.sqrt(1 + zz * d[2 * M] / h**2))
    return (A1 + R * A2) / (B1 + R * B2)


def _series(vals: np.ndarray, z: np.ndarray, s: np.ndarray) -> np.ndarray:
    vals = vals.copy()
    vals[0] *= 0.5
    # QD breaks down on sequences that vanish identically; substitute a
    # generic sequence there and zero the result afterwards
    dead = np.all(vals == 0, axis=0)
    if np.any(dead):
        filler = (0.5 / (s + 1) ** 2).reshape((-1,) + (1,) * (vals.ndim - 1))
        filler[0] *= 0.5
        vals = np.where(dead, filler, vals)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = _continued_fraction(vals, z)
    return np.where(dead, 0.0, out)


def invert(
    F: Callable[[np.ndarray], np.ndarray],
    t,
    terms: int = DEFAULT_TERMS,
    tol: float = DEFAULT_TOL,
    abscissa: float = 0.0,
) -> np.ndarray:
    """Inverse Laplace transform of ``F`` at each time in ``t`` (all ``> 0``).

    ``F`` follows the calling convention of :func:`postmarkov.talbot.invert`:
    a 1-D array of points in, leading axis over those points out. Uses
    ``2 terms + 1`` points per half line and time block.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t <= 0):
        raise ValidationError("inverse Laplace transform needs t > 0")
    if terms < 2:
        raise ValidationError("de Hoog inversion needs at least 2 terms")
    if not 0 < tol < 1:
        raise ValidationError(f"tolerance must lie in (0, 1), got {tol}")
    out = None
    k = np.arange(2 * terms + 1)
    hi = float(t.max())
    while True:
        sel = (t <= hi) & (t > hi / 2)
        if np.any(sel):
            tb = t[sel]
            T = _SCALE * hi
            gamma = abscissa - np.log(tol) / (2 * T)
            sp = gamma + 1j * np.pi * k / T
            sm = np.conj(sp)
            vals = np.asarray(F(np.concatenate([sp, sm])), dtype=complex)
            z = np.exp(1j * np.pi * tb / T)
            S = _series(vals[: k.size], z, sp) + _series(vals[k.size :], np.conj(z), sm)
            scale = (np.exp(gamma * tb) / (2 * T)).reshape((-1,) + (1,) * (S.ndim - 1))
            if out is None:
                out = np.zeros((t.size,) + S.shape[1:], dtype=complex)
            out[sel] = scale * S
        if hi / 2 < t.min():
            break
        hi /= 2
    return out


def invert_checked(
    F: Callable[[np.ndarray], np.ndarray],
    t,
    terms: int = DEFAULT_TERMS,
    tol: float = DEFAULT_TOL,
    abscissa: float = 0.0,
    check_tol: float = 1e-6,
) -> tuple[np.ndarray, float]:
    """:func:`invert` plus an error estimate from a run with doubled terms.

    The check run also lowers the aliasing tolerance a hundredfold, so the
    estimate covers both truncation of the series and aliasing.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    f1 = invert(F, t, terms, tol, abscissa)
    f2 = invert(F, t, 2 * terms, tol * 1e-2, abscissa)
    diff = np.abs(f1 - f2)
    if not np.all(np.isfinite(diff)):
        raise NumericalError("de Hoog inversion produced non-finite values")
    err = float(diff.max(initial=0.0))
    if err > check_tol:
        worst = int(np.unravel_index(np.argmax(diff), diff.shape)[0])
        raise NumericalError(
            f"Bromwich-line inversion unstable: doubling terms changed the result by {err:.2e} "
            f"at t={t[worst]:.6g}. Raise the abscissa above all singularities or use the "
            "direct time-domain integrator."
        )
    return f1, err
