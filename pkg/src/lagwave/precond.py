"""Separable preconditioners inverted by variable separation.

With the medium replaced by constants (midpoint of each parameter's range),
the r-weighted operator separates: in z it is a Neumann-Neumann second
difference on cell centres, diagonalised by the orthonormal DCT-II, and for
each z mode what remains is a tridiagonal system in r.  All N_z mode systems
are factored once and solved together by the tridiagonal engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .grid import AcousticMedium, ElasticMedium, Grid2D, sample_elastic, tilde
from .tridiag import FactoredTridiagonal, TridiagonalMatrix, factor, solve_batched

__all__ = [
    "ZModeTransform",
    "SeparableBlock",
    "SeparablePreconditioner",
    "neumann_eigenvalues",
    "build_acoustic_preconditioner",
    "build_elastic_preconditioner",
    "apply_inverse",
    "estimate_energy_bounds",
    "EnergyBoundsError",
    "build_count",
]

_BUILDS = [0]


def build_count() -> int:
    """Number of preconditioners built in this process so far."""
    return _BUILDS[0]


class ZModeTransform:
    """Orthonormal cosine transform along z (axis -1) and its inverse."""

    def __init__(self, n: int):
        self.n = int(n)

    def forward(self, y):
        return scipy.fft.dct(y, type=2, norm="ortho", axis=-1)

    def inverse(self, y):
        return scipy.fft.idct(y, type=2, norm="ortho", axis=-1)


def neumann_eigenvalues(n: int, hz: float) -> np.ndarray:
    """Eigenvalues -(4/hz^2) sin^2(pi j/(2n)) of the cell-centred Neumann second difference."""
    j = np.arange(n)
    return -(4.0 / hz**2) * np.sin(np.pi * j / (2 * n)) ** 2


@dataclass(frozen=True)
class SeparableBlock:
    """One operator -(Lambda_r + Lambda_z) + d with z-independent coefficients, factored per mode.

    ``a1``, ``a2`` and ``d`` are functions of r only (length N_r).
    """

    grid: Grid2D
    a1: np.ndarray
    a2: np.ndarray
    d: np.ndarray
    factored: FactoredTridiagonal

    @classmethod
    def build(cls, grid: Grid2D, a1, a2, d, workers: int = 1) -> "SeparableBlock":
        a1, a2, d = (np.asarray(v, dtype=float) for v in (a1, a2, d))
        return cls(grid, a1, a2, d, factor(mode_matrices(grid, a1, a2, d), workers))

    def apply(self, y):
        """The block operator itself (for checks; the solver never needs it)."""
        g = self.grid
        cr = self.a1[:-1, None] / g.h_r**2
        out = self.d[:, None] * y
        yi = y[:-1]
        fr = cr[:-1] * (yi[1:] - yi[:-1])
        out[:-2] -= fr
        out[1:-1] += fr
        out[-2] += cr[-1] * yi[-1]
        fz = (self.a2[:, None] / g.h_z**2) * (y[:, 1:] - y[:, :-1])
        out[:, :-1] -= fz
        out[:, 1:] += fz
        out[-1] = y[-1]
        return out

    def solve(self, phi, transform: ZModeTransform, parallel: bool = True):
        hat = np.ascontiguousarray(transform.forward(phi))
        return transform.inverse(solve_batched(self.factored, hat, parallel=parallel))


def mode_matrices(grid: Grid2D, a1, a2, d) -> TridiagonalMatrix:
    """Positive-definite r systems, one column per z mode; row N_r - 1 is the Dirichlet identity."""
    nr, nz = grid.shape
    cr = a1 / grid.h_r**2
    eig = neumann_eigenvalues(nz, grid.h_z)
    lower = np.zeros((nr, nz))
    upper = np.zeros((nr, nz))
    diag = np.empty((nr, nz))
    left = np.concatenate(([0.0], cr[:-1]))  # axis face carries no flux
    lower[1:-1] = -cr[:-2, None]
    upper[:-2] = -cr[:-2, None]
    diag[:-1] = (left[:-1] + cr[:-1])[:, None] + d[:-1, None] - a2[:-1, None] * eig[None, :]
    diag[-1] = 1.0
    return TridiagonalMatrix(lower, diag, upper)


@dataclass(frozen=True)
class SeparablePreconditioner:
    """Inverse of B (one block, acoustic) or K = diag(B1, B2) (elastic)."""

    grid: Grid2D
    blocks: tuple
    transform: ZModeTransform
    averages: dict
    parallel: bool = True

    def apply_inverse(self, phi):
        if len(self.blocks) == 1:
            if phi.shape != self.grid.shape:
                raise ValueError(f"field has shape {phi.shape}, grid is {self.grid.shape}")
            return self.blocks[0].solve(phi, self.transform, self.parallel)
        if phi.shape != (len(self.blocks),) + self.grid.shape:
            raise ValueError(f"field has shape {phi.shape}, expected {(len(self.blocks),) + self.grid.shape}")
        return np.stack([b.solve(p, self.transform, self.parallel) for b, p in zip(self.blocks, phi)])

    __call__ = apply_inverse

    def apply(self, y):
        if len(self.blocks) == 1:
            return self.blocks[0].apply(y)
        return np.stack([b.apply(p) for b, p in zip(self.blocks, y)])

    @property
    def eigenvalues(self):
        return neumann_eigenvalues(self.grid.N_z, self.grid.h_z)


def apply_inverse(P: SeparablePreconditioner, phi):
    return P.apply_inverse(phi)


def build_acoustic_preconditioner(grid: Grid2D, medium: AcousticMedium, h: float, workers: int = 1,
                                  parallel: bool = True) -> SeparablePreconditioner:
    r, z = grid.r[:, None], grid.z[None, :]
    rb, zb = grid.r_face[:, None], grid.z_face[None, :]
    # the range of kappa over every point where the operator samples it
    kap = tilde(np.concatenate([np.ravel(medium.kappa(rb, z) * np.ones(grid.shape)),
                                np.ravel(medium.kappa(r, zb) * np.ones(grid.shape))]))
    rho = tilde(medium.rho(r, z) * np.ones(grid.shape))
    _BUILDS[0] += 1
    block = SeparableBlock.build(grid, grid.r_face * kap, grid.r * kap, grid.r * (h * h / 4.0) * rho, workers)
    return SeparablePreconditioner(grid, (block,), ZModeTransform(grid.N_z), {"kappa": kap, "rho": rho}, parallel)


def build_elastic_preconditioner(grid: Grid2D, medium: ElasticMedium, h: float, workers: int = 1,
                                 b2_hoop_term: bool = False, parallel: bool = True) -> SeparablePreconditioner:
    """K = diag(B1, B2) acting on (Q, U).

    ``b2_hoop_term`` (experimental) adds the (lambda+2mu)/r term of B1 to B2 as well.
    """
    _BUILDS[0] += 1
    lam, mu, rho = sample_elastic(medium, grid)
    p = tilde(lam + 2 * mu)
    m = tilde(mu)
    rh = tilde(rho)
    r, rb = grid.r, grid.r_face
    mass = r * (h * h / 4.0) * rh
    b1 = SeparableBlock.build(grid, rb * p, r * m, mass + p / r, workers)
    b2 = SeparableBlock.build(grid, rb * m, r * p, mass + (p / r if b2_hoop_term else 0.0), workers)
    return SeparablePreconditioner(grid, (b1, b2), ZModeTransform(grid.N_z),
                                   {"lambda+2mu": p, "mu": m, "rho": rh}, parallel)


class EnergyBoundsError(RuntimeError):
    """Lanczos did not settle; ``gamma1``/``gamma2`` hold the best estimates."""

    def __init__(self, message, gamma1, gamma2):
        super().__init__(message)
        self.gamma1 = gamma1
        self.gamma2 = gamma2


def estimate_energy_bounds(applyA, applyBinv, shape, max_iter: int = 200, tol: float = 1e-10,
                           seed: int = 0):
    """Extreme values of (Ax, x)/(Bx, x) for symmetric positive definite A and B.

    Runs Lanczos on A B^{-1} in the B^{-1} inner product (only A and B^{-1}
    are needed) with full reorthogonalisation, and returns the extreme Ritz
    values (gamma1, gamma2) once both have settled.
    """
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(shape)
    z = applyBinv(v)
    beta = math.sqrt(float(np.vdot(v, z)))
    V, Z = [v / beta], [z / beta]
    alphas, betas = [], []
    history = []
    stable = 0
    lo = hi = float("nan")
    for j in range(max_iter):
        w = applyA(Z[j])
        alphas.append(float(np.vdot(w, Z[j])))
        for vi, zi in zip(V, Z):
            w = w - float(np.vdot(w, zi)) * vi
        for vi, zi in zip(V, Z):  # second pass keeps the basis orthogonal
            w = w - float(np.vdot(w, zi)) * vi
        T = np.diag(alphas) + np.diag(betas, 1) + np.diag(betas, -1)
        ritz = np.linalg.eigvalsh(T)
        lo, hi = float(ritz[0]), float(ritz[-1])
        if history and abs(lo - history[-1][0]) <= tol * abs(lo) and abs(hi - history[-1][1]) <= tol * abs(hi):
            stable += 1
        else:
            stable = 0
        history.append((lo, hi))
        z = applyBinv(w)
        bsq = float(np.vdot(w, z))
        scale = abs(alphas[-1]) + (betas[-1] if betas else 0.0)
        if bsq <= (1e-12 * scale) ** 2 or stable >= 3:
            return lo, hi
        beta = math.sqrt(bsq)
        betas.append(beta)
        V.append(w / beta)
        Z.append(z / beta)
    raise EnergyBoundsError(f"energy bounds did not settle in {max_iter} iterations", lo, hi)
