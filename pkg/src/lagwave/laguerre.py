"""Orthonormal Laguerre functions and the Laguerre time transform.

The transform pair used throughout the package is

    R_m = int_0^inf u(t) (ht)^(-a/2) l_m(ht) dt
    u(t) = (ht)^(a/2) sum_m R_m l_m(ht)

with l_m(ht) = sqrt(h m!/(m+a)!) (ht)^(a/2) exp(-ht/2) L_m^a(ht).  All
evaluations go through the pre-normalised kernel

    phi_m(x) = sqrt(m!/(m+a)!) exp(-x/2) L_m^a(x),   x = ht,

generated by a three-term recurrence that carries a per-sample log scale, so
neither the factorials nor exp(-x/2) ever overflow or underflow mid-way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

__all__ = [
    "LaguerreBasis",
    "SpectralSeries",
    "ConvolutionAccumulators",
    "eval_kernel_functions",
    "iter_kernel",
    "synthesis_functions",
    "forward_transform",
    "inverse_series",
    "conv_weight",
    "norm_factor",
    "accumulator_weight",
    "direct_convolution_sum",
    "accumulator_step",
    "accumulator_sum",
    "source_time_function",
    "default_quadrature_step",
]

# rescale the recurrence once scaled values exceed this
_RESCALE = 1e150


@dataclass(frozen=True)
class LaguerreBasis:
    """Parameters of the Laguerre expansion.

    Parameters
    ----------
    alpha : int
        Order of the Laguerre functions; at least 2 so the zero initial data
        of second-order-in-time problems are honoured.
    h : float
        Time scale of the transform, 1/s.
    n : int
        Number of harmonics kept.
    """

    alpha: int
    h: float
    n: int

    def __post_init__(self):
        if int(self.alpha) != self.alpha:
            raise ValueError(f"alpha must be an integer, got {self.alpha!r}")
        object.__setattr__(self, "alpha", int(self.alpha))
        if self.alpha < 2:
            raise ValueError(f"alpha must be >= 2, got {self.alpha}")
        if not self.h > 0:
            raise ValueError(f"h must be positive, got {self.h}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))


@dataclass
class SpectralSeries:
    """Laguerre coefficients of a scalar signal."""

    basis: LaguerreBasis
    coefficients: np.ndarray

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.shape != (self.basis.n,):
            raise ValueError(
                f"expected {self.basis.n} coefficients, got shape {self.coefficients.shape}"
            )

    def __len__(self):
        return self.basis.n


def iter_kernel(alpha: int, x, m_count: int, log_prefactor=0.0) -> Iterator[np.ndarray]:
    """Yield ``exp(log_prefactor) * phi_m(x)`` for m = 0 .. m_count-1.

    ``x`` may be a scalar or an array; every yielded value has its shape.  The
    recurrence works on scaled values and keeps the scale in log form, so the
    result underflows gracefully to zero instead of producing inf/nan.
    """
    x = np.asarray(x, dtype=float)
    a = float(alpha)
    log_scale = np.broadcast_to(
        -0.5 * x - 0.5 * math.lgamma(a + 1.0) + np.asarray(log_prefactor, dtype=float), x.shape
    ).astype(float)
    p_prev = np.zeros_like(x)
    p_cur = np.ones_like(x)
    with np.errstate(under="ignore", over="ignore", invalid="ignore"):
        for m in range(m_count):
            yield p_cur * np.exp(log_scale)
            if m + 1 == m_count:
                break
            p_next = ((2 * m + a + 1.0 - x) * p_cur - math.sqrt(m * (m + a)) * p_prev) / math.sqrt(
                (m + 1.0) * (m + 1.0 + a)
            )
            p_prev, p_cur = p_cur, p_next
            big = np.abs(p_cur) > _RESCALE
            if np.any(big):
                s = np.where(big, np.abs(p_cur), 1.0)
                p_cur = p_cur / s
                p_prev = p_prev / s
                log_scale = log_scale + np.log(s)


def _check_t(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(~np.isfinite(t)):
        raise ValueError("time must be finite and non-negative")
    return t


def eval_kernel_functions(basis: LaguerreBasis, t, m_max: int) -> np.ndarray:
    """Values phi_0 .. phi_{m_max} of the normalised kernel at ``x = h t``.

    Returns an array of shape ``(m_max + 1,) + np.shape(t)``.
    """
    t = _check_t(t)
    if m_max < 0 or m_max >= basis.n:
        raise ValueError(f"m_max must lie in [0, {basis.n - 1}], got {m_max}")
    x = basis.h * t
    return np.array(list(iter_kernel(basis.alpha, x, m_max + 1)))


def _log_power(x, p):
    # p*log(x) with the 0*log(0) = 0 convention
    x = np.asarray(x, dtype=float)
    if p == 0:
        return np.zeros_like(x)
    with np.errstate(divide="ignore"):
        return p * np.log(x)


def synthesis_functions(basis: LaguerreBasis, t, m_count: int | None = None) -> Iterator[np.ndarray]:
    """Yield ``(ht)^(a/2) l_m(ht)`` for each harmonic, the weights of the inverse sum."""
    t = _check_t(t)
    x = basis.h * t
    prefactor = 0.5 * math.log(basis.h) + _log_power(x, basis.alpha)
    return iter_kernel(basis.alpha, x, basis.n if m_count is None else m_count, prefactor)


def default_quadrature_step(basis: LaguerreBasis, f0: float) -> float:
    """Trapezoid step for the forward transform of a pulse with peak frequency ``f0``."""
    return min(1.0 / (20.0 * f0), 2.0 / basis.h)


def forward_transform(
    signal: Callable[[np.ndarray], np.ndarray] | np.ndarray,
    basis: LaguerreBasis,
    dt: float,
    t_end: float,
) -> SpectralSeries:
    """Laguerre coefficients of ``signal`` by composite trapezoid quadrature on [0, t_end].

    ``signal`` is either a vectorised callable of t or an array of samples on
    the grid ``arange(0, t_end + dt/2, dt)``.
    """
    if not t_end > 0:
        raise ValueError(f"t_end must be positive, got {t_end}")
    if not 0 < dt < t_end:
        raise ValueError(f"dt must lie in (0, t_end), got {dt}")
    nt = int(round(t_end / dt)) + 1
    t = np.linspace(0.0, dt * (nt - 1), nt)
    f = signal(t) if callable(signal) else np.asarray(signal, dtype=float)
    if f.shape != t.shape:
        raise ValueError(f"signal samples have shape {f.shape}, expected {t.shape}")
    wts = np.full(nt, dt)
    wts[0] = wts[-1] = 0.5 * dt
    fw = f * wts * math.sqrt(basis.h)
    coeffs = np.empty(basis.n)
    for m, phi in enumerate(iter_kernel(basis.alpha, basis.h * t, basis.n)):
        coeffs[m] = np.dot(fw, phi)
    return SpectralSeries(basis, coeffs)


def inverse_series(series: SpectralSeries | np.ndarray, basis: LaguerreBasis, t):
    """Evaluate ``(ht)^(a/2) sum_m R_m l_m(ht)``.

    ``series`` may also be a plain array whose first axis runs over the
    harmonics (for instance coefficients at several receivers, shape (n, k));
    the result then has shape ``np.shape(t) + coeffs.shape[1:]``.
    """
    coeffs = series.coefficients if isinstance(series, SpectralSeries) else np.asarray(series, float)
    if coeffs.shape[0] != basis.n:
        raise ValueError(f"expected {basis.n} coefficients along axis 0, got {coeffs.shape[0]}")
    t = _check_t(t)
    out = np.zeros(t.shape + coeffs.shape[1:])
    tail = (Ellipsis,) + (np.newaxis,) * (coeffs.ndim - 1)
    for m, g in enumerate(synthesis_functions(basis, t)):
        out += g[tail] * coeffs[m]
    return out if out.ndim else float(out)


def _log_rising(k: int, alpha: int) -> float:
    # log((k+alpha)!/k!) as a short exact-term sum; alpha is a small integer
    return math.fsum(math.log(k + j) for j in range(1, alpha + 1))


def accumulator_weight(k: int, alpha: int) -> float:
    """w_k = sqrt((k+alpha)!/k!)."""
    return math.exp(0.5 * _log_rising(k, alpha))


def norm_factor(m: int, alpha: int) -> float:
    """sqrt(m!/(m+alpha)!)."""
    return math.exp(-0.5 * _log_rising(m, alpha))


def conv_weight(m: int, k: int, alpha: int) -> float:
    """Coefficient (m-k) sqrt(m!/(m+a)!) sqrt((k+a)!/k!) of R_k in the m-th right-hand side."""
    if not 0 <= k < m:
        raise ValueError(f"need 0 <= k < m, got m={m}, k={k}")
    return (m - k) * math.exp(0.5 * (_log_rising(k, alpha) - _log_rising(m, alpha)))


def direct_convolution_sum(values, alpha: int, m: int):
    """O(m) reference for sum_{k<m} (m-k) w_k R_k; used by tests and self-checks."""
    total = 0.0
    for k in range(m):
        total = total + (m - k) * accumulator_weight(k, alpha) * np.asarray(values[k], dtype=float)
    return total


@dataclass
class ConvolutionAccumulators:
    """Running sums that give S_m = sum_{k<m} (m-k) w_k R_k in O(1) work per harmonic.

    ``P`` holds sum_{k<m} w_k R_k and ``S`` holds S_m itself; advancing by one
    harmonic is P += w_m R_m followed by S += P.  Keeping S rather than
    sum k w_k R_k avoids the cancellation in m P - sum k w_k R_k.
    """

    alpha: int
    P: np.ndarray | float = 0.0
    S: np.ndarray | float = 0.0
    m: int = 0
    _weight: Callable[[int, int], float] = field(default=accumulator_weight, repr=False)

    @classmethod
    def zeros(cls, alpha: int, shape=()) -> "ConvolutionAccumulators":
        return cls(alpha, np.zeros(shape), np.zeros(shape), 0)

    def step(self, R_m, m: int | None = None) -> "ConvolutionAccumulators":
        """Fold in the freshly computed harmonic ``R_m``; harmonics must arrive in order."""
        if m is not None and m != self.m:
            raise ValueError(f"expected harmonic {self.m}, got {m}")
        w = self._weight(self.m, self.alpha)
        if isinstance(self.P, np.ndarray) and self.P.shape == np.shape(R_m):
            self.P += w * R_m
            self.S += self.P
        else:
            self.P = self.P + w * np.asarray(R_m, dtype=float)
            self.S = self.S + self.P
        self.m += 1
        return self

    def sum(self, m: int | None = None):
        """S_m for the current harmonic index."""
        if m is not None and m != self.m:
            raise ValueError(f"accumulators hold harmonic {self.m}, asked for {m}")
        return self.S


def accumulator_step(acc: ConvolutionAccumulators, R_m, m: int | None = None) -> ConvolutionAccumulators:
    return acc.step(R_m, m)


def accumulator_sum(acc: ConvolutionAccumulators, m: int | None = None):
    return acc.sum(m)


def source_time_function(t, f0: float, t0: float, gamma: float):
    """Gaussian-modulated sine pulse exp(-(2 pi f0 (t-t0))^2/gamma^2) sin(2 pi f0 (t-t0))."""
    arg = 2.0 * np.pi * f0 * (np.asarray(t, dtype=float) - t0)
    return np.exp(-(arg**2) / gamma**2) * np.sin(arg)
