"""Memory kernel functions ``k(t)`` with unit integral on ``[0, inf)``.

Each kernel evaluates ``k(t)`` and the shifted Laplace transform
``F(s, lam) = int_0^inf k(t) exp(lam t) exp(-s t) dt``. Closed forms are
the analytic continuation of that integral, so they are valid on the whole
inversion contour and not just to the right of the abscissa of convergence.

Kernels with bounded support have entire transforms that grow like
``exp(-Re(s) T)`` as ``Re(s) -> -inf``. Their magnitudes are saturated at
``exp(LOG_CAP)`` (phase kept) so that far-left contour nodes stay finite;
at that size the memory term dominates ``Omega(s)`` completely.

``TruncatedGaussian`` is a continuum extension of the discrete Gaussian
weights used in the collision model; it is renormalized on its support.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from postmarkov.errors import ValidationError

__all__ = [
    "LOG_CAP",
    "MemoryKernel",
    "DiracDeltaAtZero",
    "Exponential",
    "TruncatedGaussian",
    "Tabulated",
    "kernel_laplace_shifted",
]

LOG_CAP = 200.0


def _saturate(logF: np.ndarray) -> np.ndarray:
    return np.exp(np.minimum(logF.real, LOG_CAP) + 1j * logF.imag)


class MemoryKernel(ABC):
    """Normalized, non-negative memory kernel."""

    is_delta = False

    @abstractmethod
    def evaluate(self, t):
        """``k(t)`` (vectorized)."""

    @abstractmethod
    def laplace_shifted(self, s, lam):
        """Laplace transform of ``k(t) exp(lam t)`` at ``s`` (broadcasting)."""

    @property
    def support(self) -> float:
        return math.inf

    def discrete_weights(self, tau: float, N: int, normalize: bool = True) -> np.ndarray:
        """Weights ``k(m tau) tau`` for ``m = 1..N``."""
        if self.is_delta:
            w = np.zeros(N)
            w[0] = 1.0
            return w
        w = np.asarray(self.evaluate(tau * np.arange(1, N + 1)), dtype=float) * tau
        return w / w.sum() if normalize else w


@dataclass(frozen=True)
class DiracDeltaAtZero(MemoryKernel):
    """All weight at ``t' = 0``: the memoryless limit."""

    is_delta = True

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t == 0, np.inf, 0.0)

    def laplace_shifted(self, s, lam):
        return np.ones(np.broadcast(np.asarray(s), np.asarray(lam)).shape, dtype=complex)

    @property
    def support(self) -> float:
        return 0.0


@dataclass(frozen=True)
class Exponential(MemoryKernel):
    """``k(t) = rate * exp(-rate t)``."""

    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValidationError(f"exponential kernel rate must be positive, got {self.rate}")

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t >= 0, self.rate * np.exp(-self.rate * np.abs(t)), 0.0)

    def laplace_shifted(self, s, lam):
        den = np.asarray(s, dtype=complex) - np.asarray(lam, dtype=complex) + self.rate
        if np.any(np.abs(den) < 1e-300):
            raise ValidationError("Laplace argument sits on the pole of the exponential kernel")
        return self.rate / den


@dataclass(frozen=True)
class TruncatedGaussian(MemoryKernel):
    """Gaussian bump centred at ``center`` with width ``width``, restricted to ``[0, support]``."""

    center: float
    width: float
    cutoff: float
    _norm: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.width > 0:
            raise ValidationError(f"gaussian width must be positive, got {self.width}")
        if not self.cutoff > 0:
            raise ValidationError(f"gaussian support must be positive, got {self.cutoff}")
        a = 1.0 / (self.width * math.sqrt(2.0))
        mass = self.width * math.sqrt(math.pi / 2) * (
            math.erf((self.cutoff - self.center) * a) + math.erf(self.center * a)
        )
        if not mass > 0:
            raise ValidationError("gaussian kernel has no mass on its support")
        object.__setattr__(self, "_norm", mass)

    @property
    def support(self) -> float:
        return self.cutoff

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        g = np.exp(-((t - self.center) ** 2) / (2 * self.width**2)) / self._norm
        return np.where((t >= 0) & (t <= self.cutoff), g, 0.0)

    def log_laplace_shifted(self, s, lam) -> np.ndarray:
        p = np.asarray(s, dtype=complex) - np.asarray(lam, dtype=complex)
        sig, t0, T = self.width, self.center, self.cutoff
        r2 = sig * math.sqrt(2.0)
        z1 = (p * sig**2 - t0) / r2
        z2 = z1 + T / r2
        log_c = math.log(sig * math.sqrt(math.pi / 2) / self._norm) - t0**2 / (2 * sig**2)
        X = z1**2 - z2**2  # = -(T / r2) (z1 + z2)
        out = np.empty(np.shape(p), dtype=complex)
        a = z1.real >= 0
        b = z2.real <= 0
        mid = ~(a | b)
        with np.errstate(over="ignore", invalid="ignore"):
            if np.any(a):
                out[a] = np.log(special.erfcx(z1[a]) - np.exp(X[a]) * special.erfcx(z2[a]))
            if np.any(b):
                out[b] = X[b] + np.log(
                    special.erfcx(-z2[b]) - np.exp(-X[b]) * special.erfcx(-z1[b])
                )
            if np.any(mid):
                # 2 exp(z1^2) - erfcx(-z1) - exp(X) erfcx(z2), shifted by the largest exponent
                ea = math.log(2.0) + z1[mid] ** 2
                eb = np.log(special.erfcx(-z1[mid]))
                ec = X[mid] + np.log(special.erfcx(z2[mid]))
                m = np.maximum(ea.real, np.maximum(eb.real, ec.real))
                out[mid] = m + np.log(np.exp(ea - m) - np.exp(eb - m) - np.exp(ec - m))
        return out + log_c

    def laplace_shifted(self, s, lam):
        return _saturate(self.log_laplace_shifted(s, lam))


@dataclass(frozen=True)
class Tabulated(MemoryKernel):
    """Kernel sampled on ``t_k = k * spacing`` and linearly interpolated between samples.

    The Laplace transform is that of the interpolant, integrated exactly.
    """

    samples: tuple[float, ...]
    spacing: float

    def __post_init__(self):
        k = np.asarray(self.samples, dtype=float)
        if k.ndim != 1 or k.size < 2:
            raise ValidationError("tabulated kernel needs at least two samples")
        if not self.spacing > 0:
            raise ValidationError("tabulated kernel spacing must be positive")
        if np.any(k < 0):
            raise ValidationError("tabulated kernel has negative samples")
        mass = np.trapezoid(k, dx=self.spacing)
        if abs(mass - 1.0) > 1e-8:
            raise ValidationError(f"tabulated kernel integrates to {mass:.10g}, expected 1")
        object.__setattr__(self, "samples", tuple(float(x) for x in k))

    @classmethod
    def from_function(cls, f, spacing: float, cutoff: float) -> "Tabulated":
        t = np.arange(0.0, cutoff + 0.5 * spacing, spacing)
        k = np.asarray(f(t), dtype=float)
        return cls(tuple(k / np.trapezoid(k, dx=spacing)), spacing)

    @property
    def times(self) -> np.ndarray:
        return self.spacing * np.arange(len(self.samples))

    @property
    def support(self) -> float:
        return self.spacing * (len(self.samples) - 1)

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        return np.interp(t, self.times, np.asarray(self.samples), left=0.0, right=0.0)

    def laplace_shifted(self, s, lam):
        return _saturate(self.log_laplace_shifted(s, lam))

    def log_laplace_shifted(self, s, lam) -> np.ndarray:
        """Exact transform of the linear interpolant, in log form.

        On each segment ``[t_j, t_j + h]`` the interpolant integrates to
        ``h (f_j exp(-p t_j) g(z) + f_{j+1} exp(-p t_{j+1}) g(-z))`` with
        ``z = -p h`` and ``g(z) = (exp(z) - 1 - z) / z^2``, so
        ``F = h (g(z) S_0 + g(-z) S_1)`` with ``S_0``, ``S_1`` the exponential
        sums over the left and right segment ends.
        """
        p = np.asarray(s, dtype=complex) - np.asarray(lam, dtype=complex)
        h = self.spacing
        t = self.times
        f = np.asarray(self.samples)
        flat = p.ravel()
        z = -flat * h
        log_g = _log_segment_factor(z)
        log_gm = _log_segment_factor(-z)
        out = np.empty(flat.shape, dtype=complex)
        # bound the (points x samples) work array to a few MB
        step = max(1, 2**18 // t.size)
        for i in range(0, flat.size, step):
            sl = slice(i, i + step)
            expo = -flat[sl, None] * t
            a = log_g[sl] + _log_expsum(f[:-1], expo[:, :-1])
            b = log_gm[sl] + _log_expsum(f[1:], expo[:, 1:])
            top = np.maximum(a.real, b.real)
            top = np.where(np.isfinite(top), top, 0.0)
            with np.errstate(divide="ignore"):
                out[sl] = top + np.log(np.exp(a - top) + np.exp(b - top))
        return (out + math.log(h)).reshape(p.shape)


def _log_expsum(weights: np.ndarray, expo: np.ndarray) -> np.ndarray:
    """``log(sum_k weights_k exp(expo_k))`` along the last axis."""
    shift = expo.real.max(axis=-1, keepdims=True)
    with np.errstate(divide="ignore"):
        return shift[..., 0] + np.log(np.sum(weights * np.exp(expo - shift), axis=-1))


_G_SERIES = [1.0 / math.factorial(n + 2) for n in range(18)]


def _log_segment_factor(z: np.ndarray) -> np.ndarray:
    """``log((exp(z) - 1 - z) / z^2)`` without overflow or cancellation."""
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape, dtype=complex)
    small = np.abs(z) < 0.5
    big = ~small & (z.real > 1)
    rest = ~(small | big)
    if np.any(small):
        out[small] = np.log(np.polyval(_G_SERIES[::-1], z[small]))
    if np.any(big):
        zb = z[big]
        out[big] = zb + np.log(1 - (1 + zb) * np.exp(-zb)) - 2 * np.log(zb)
    if np.any(rest):
        zr = z[rest]
        out[rest] = np.log((np.expm1(zr) - zr) / zr**2)
    return out


def kernel_laplace_shifted(k: MemoryKernel, s, lam):
    return k.laplace_shifted(s, lam)
