"""Preconditioned conjugate gradients and restarted GMRES.

Both solvers only see the operator and the preconditioner inverse as
callables on arrays of any shape.  Inner products are taken with a fixed
summation order so a given input always produces bit-identical iterates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "KrylovConfig",
    "SolveStats",
    "KrylovError",
    "NotSPDError",
    "StagnationError",
    "pcg",
    "gmres_k",
    "dot",
    "norm",
]

Apply = Callable[[np.ndarray], np.ndarray]


def dot(x: np.ndarray, y: np.ndarray) -> float:
    """Inner product with a fixed, data-independent reduction order."""
    return float(np.add.reduce((x * y).ravel()))


def norm(x: np.ndarray) -> float:
    return math.sqrt(dot(x, x))


@dataclass(frozen=True)
class KrylovConfig:
    """Stopping rule on the relative unpreconditioned residual ||b - Ax|| / ||b||."""

    tol: float = 1e-8
    max_iters: int = 1000
    restart_k: int = 10

    def __post_init__(self):
        if not 0 < self.tol < 1:
            raise ValueError(f"tol must lie in (0, 1), got {self.tol}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be positive, got {self.max_iters}")
        if self.restart_k < 1:
            raise ValueError(f"restart_k must be >= 1, got {self.restart_k}")


@dataclass
class SolveStats:
    """Iteration count, final relative residual and its history (length iterations + 1).

    For GMRES ``history`` holds the true relative residual after every
    inner step and ``cycle_residuals`` the preconditioned residual norm at
    each restart boundary.
    """

    iterations: int = 0
    residual: float = 0.0
    converged: bool = False
    history: list = field(default_factory=list)
    cycle_residuals: list = field(default_factory=list)

    def as_dict(self):
        return {
            "iterations": self.iterations,
            "residual": self.residual,
            "converged": self.converged,
        }


class KrylovError(RuntimeError):
    def __init__(self, message, stats: SolveStats | None = None):
        super().__init__(message)
        self.stats = stats


class NotSPDError(KrylovError):
    """Nonpositive curvature met in CG: the operator or preconditioner is not SPD."""


class StagnationError(KrylovError):
    """GMRES made no progress over several restart cycles."""


def pcg(applyA: Apply, applyBinv: Apply, rhs: np.ndarray, config: KrylovConfig = KrylovConfig(),
        x0: np.ndarray | None = None):
    """Solve A x = rhs by conjugate gradients preconditioned with B^{-1}.

    Returns ``(x, stats)``.  ``stats.converged`` is False when ``max_iters``
    ran out before the tolerance was met.
    """
    bnorm = norm(rhs)
    x = np.zeros_like(rhs) if x0 is None else np.array(x0, dtype=float)
    stats = SolveStats()
    if bnorm == 0.0:
        x[...] = 0.0
        stats.history = [0.0]
        stats.converged = True
        return x, stats
    r = rhs - applyA(x) if x0 is not None else rhs.copy()
    rel = norm(r) / bnorm
    stats.history.append(rel)
    if rel <= config.tol:
        stats.residual, stats.converged = rel, True
        return x, stats
    z = applyBinv(r)
    p = z.copy()
    rz = dot(r, z)
    for it in range(1, config.max_iters + 1):
        Ap = applyA(p)
        pAp = dot(p, Ap)
        if not pAp > 0.0:
            stats.iterations = it - 1
            raise NotSPDError(f"nonpositive curvature p.Ap = {pAp:.3e} at iteration {it}", stats)
        a = rz / pAp
        x += a * p
        r -= a * Ap
        rel = norm(r) / bnorm
        stats.history.append(rel)
        stats.iterations = it
        if rel <= config.tol:
            break
        z = applyBinv(r)
        rz_new = dot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    true_rel = norm(rhs - applyA(x)) / bnorm
    stats.residual = true_rel
    # the recursive residual can drift from the true one; trust the true one
    stats.converged = true_rel <= config.tol * 1.01 or (rel <= config.tol and true_rel <= 10 * config.tol)
    return x, stats


def _givens(a: float, b: float):
    if b == 0.0:
        return 1.0, 0.0
    h = math.hypot(a, b)
    return a / h, b / h


def _back_substitute(H, g, n):
    y = np.zeros(n)
    for i in range(n - 1, -1, -1):
        y[i] = (g[i] - np.dot(H[i, i + 1:n], y[i + 1:n])) / H[i, i]
    return y


def _combine(coeffs, vectors):
    out = coeffs[0] * vectors[0]
    for c, v in zip(coeffs[1:], vectors[1:]):
        out += c * v
    return out


def gmres_k(applyC: Apply, applyKinv: Apply, rhs: np.ndarray, config: KrylovConfig = KrylovConfig(),
            x0: np.ndarray | None = None, stagnation_cycles: int = 3):
    """Restarted GMRES(k) with left preconditioning by K^{-1}.

    Each cycle minimises ||K^{-1}(b - Cx)|| over the Krylov space; the
    stopping rule still uses the unpreconditioned residual.  Returns
    ``(x, stats)``.
    """
    k = config.restart_k
    bnorm = norm(rhs)
    x = np.zeros_like(rhs) if x0 is None else np.array(x0, dtype=float)
    stats = SolveStats()
    if bnorm == 0.0:
        x[...] = 0.0
        stats.history = [0.0]
        stats.converged = True
        return x, stats
    r = rhs - applyC(x) if x0 is not None else rhs.copy()
    rel = norm(r) / bnorm
    stats.history.append(rel)
    if rel <= config.tol:
        stats.residual, stats.converged = rel, True
        return x, stats
    best = math.inf
    stalled = 0
    total = 0
    while total < config.max_iters:
        z = applyKinv(r)
        beta = norm(z)
        stats.cycle_residuals.append(beta)
        if beta < best * (1 - 1e-14):
            best, stalled = beta, 0
        else:
            stalled += 1
            if stalled >= stagnation_cycles:
                stats.residual = rel
                raise StagnationError(f"no residual decrease over {stagnation_cycles} restart cycles", stats)
        if beta == 0.0:
            break
        V = [z / beta]
        CV = []
        H = np.zeros((k + 1, k))
        cs = np.zeros(k)
        sn = np.zeros(k)
        g = np.zeros(k + 1)
        g[0] = beta
        j_used = 0
        breakdown = False
        for j in range(k):
            CV.append(applyC(V[j]))
            w = applyKinv(CV[j])
            wnorm0 = norm(w)
            for i in range(j + 1):
                H[i, j] = dot(w, V[i])
                w = w - H[i, j] * V[i]
            hn = norm(w)
            if hn < 1e-8 * wnorm0:  # heavy cancellation: one more pass
                for i in range(j + 1):
                    c = dot(w, V[i])
                    H[i, j] += c
                    w = w - c * V[i]
                hn = norm(w)
            H[j + 1, j] = hn
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            cs[j], sn[j] = _givens(H[j, j], H[j + 1, j])
            H[j, j] = cs[j] * H[j, j] + sn[j] * H[j + 1, j]
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            j_used = j + 1
            total += 1
            # unpreconditioned residual from the stored C v_i, no extra operator call
            y = _back_substitute(H, g, j_used)
            dx = _combine(y, V)
            r_try = r - _combine(y, CV)
            rel = norm(r_try) / bnorm
            stats.history.append(rel)
            breakdown = hn <= 1e-14 * max(wnorm0, 1e-300)
            if rel <= config.tol or breakdown or total >= config.max_iters:
                break
            V.append(w / hn)
        x = x + dx
        r = r_try
        stats.iterations = total
        if rel <= config.tol:
            break
        if breakdown:
            # lucky termination: the Krylov space is invariant, x is exact up to roundoff
            break
    stats.iterations = total
    rel = norm(rhs - applyC(x)) / bnorm
    stats.residual = rel
    stats.converged = rel <= config.tol * 1.01 or stats.history[-1] <= config.tol and rel <= 10 * config.tol
    return x, stats
