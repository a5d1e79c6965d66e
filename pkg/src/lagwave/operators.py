"""Discrete spectral-domain operators, point sources and harmonic right-hand sides.

Both operators act on r-weighted equations (every row is the cell average of
r times the continuous equation), which is what makes the acoustic operator
symmetric.  They are applied in positive orientation,

    M y = -(r-weighted elliptic operator) y + r rho h^2/4 y,

and the harmonic problem reads ``M y = -r * phi`` where ``phi`` is the
right-hand side of the continuous spectral equation (source term plus the
convolution tail over earlier harmonics).  The last r row is the Dirichlet
wall r = l1; it is kept as an identity row so fields keep grid shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .grid import AcousticMedium, ElasticMedium, Grid2D, sample_acoustic, sample_elastic
from .laguerre import ConvolutionAccumulators, norm_factor

__all__ = [
    "AcousticOperator",
    "ElasticOperator",
    "SourceKind",
    "SourceSpec",
    "apply_acoustic",
    "apply_elastic",
    "discretize_source",
    "build_acoustic_rhs",
    "build_elastic_rhs",
]


class AcousticOperator:
    """Five-point operator -(Lambda_r + Lambda_z) + w on the cell-centred grid."""

    def __init__(self, grid: Grid2D, a1: np.ndarray, a2: np.ndarray, w: np.ndarray):
        for name, arr in (("a1", a1), ("a2", a2), ("w", w)):
            if arr.shape != grid.shape:
                raise ValueError(f"{name} has shape {arr.shape}, grid is {grid.shape}")
        self.grid = grid
        self.a1 = a1
        self.a2 = a2
        self.w = w
        # face conductances; the axis flux and both z-wall fluxes are zero
        self._cr = a1[:-1] / grid.h_r**2
        self._cz = a2[:, :-1] / grid.h_z**2

    @classmethod
    def from_medium(cls, grid: Grid2D, medium: AcousticMedium, h: float) -> "AcousticOperator":
        return cls(grid, *sample_acoustic(medium, grid, h))

    @property
    def shape(self):
        return self.grid.shape

    def apply(self, y: np.ndarray) -> np.ndarray:
        if y.shape != self.grid.shape:
            raise ValueError(f"field has shape {y.shape}, grid is {self.grid.shape}")
        out = self.w * y
        yi = y[:-1]  # drop the Dirichlet row; its value is zero by construction
        fr = self._cr[:-1] * (yi[1:] - yi[:-1])
        out[:-2] -= fr
        out[1:-1] += fr
        out[-2] += self._cr[-1] * yi[-1]
        fz = self._cz * (y[:, 1:] - y[:, :-1])
        out[:, :-1] -= fz
        out[:, 1:] += fz
        out[-1] = y[-1]
        return out

    __call__ = apply

    def system_rhs(self, phi: np.ndarray) -> np.ndarray:
        """Right-hand side of M y = b for a continuous-form load ``phi``."""
        b = -self.grid.r[:, None] * phi
        b[-1] = 0.0
        return b


def apply_acoustic(op: AcousticOperator, y):
    return op.apply(y)


def _dz(f, hz):
    """d/dz at cell centres; second-order one-sided rows at both z walls."""
    d = np.empty_like(f)
    d[:, 1:-1] = (f[:, 2:] - f[:, :-2]) / (2 * hz)
    d[:, 0] = (-3 * f[:, 0] + 4 * f[:, 1] - f[:, 2]) / (2 * hz)
    d[:, -1] = (3 * f[:, -1] - 4 * f[:, -2] + f[:, -3]) / (2 * hz)
    return d


def _dr(f, hr, parity):
    """d/dr at cell centres; the axis row uses the ghost value parity * f[0]."""
    d = np.empty_like(f)
    d[1:-1] = (f[2:] - f[:-2]) / (2 * hr)
    d[0] = (f[1] - parity * f[0]) / (2 * hr)
    d[-1] = (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * hr)
    return d


class ElasticOperator:
    """Finite-volume operator for the displacement pair (Q, U) = (u_r, u_z) coefficients.

    Unknowns and material parameters live at cell centres; face parameters
    are arithmetic means of the neighbouring cells.  Normal stresses use the
    compact two-point difference across the face, tangential derivatives are
    averages of centred differences of the two neighbours.  The free surface
    z = 0 and the far wall z = l2 carry zero traction, the axis carries zero
    radial flux with Q odd and U even in r, and r = l1 is a Dirichlet wall.
    The operator is not symmetric.
    """

    def __init__(self, grid: Grid2D, lam: np.ndarray, mu: np.ndarray, rho: np.ndarray, h: float):
        if min(grid.N_r, grid.N_z) < 3:
            raise ValueError("elastic operator needs at least 3 cells per direction")
        for name, arr in (("lambda", lam), ("mu", mu), ("rho", rho)):
            if arr.shape != grid.shape:
                raise ValueError(f"{name} has shape {arr.shape}, grid is {grid.shape}")
        self.grid, self.lam, self.mu, self.rho, self.h = grid, lam, mu, rho, float(h)
        r = grid.r[:, None]
        self._r = r
        self._rb = grid.r_face[:-1, None]
        self._mass = rho * (h * h / 4.0) * r
        lam_rf = 0.5 * (lam[:-1] + lam[1:])
        mu_rf = 0.5 * (mu[:-1] + mu[1:])
        lam_zf = 0.5 * (lam[:, :-1] + lam[:, 1:])
        mu_zf = 0.5 * (mu[:, :-1] + mu[:, 1:])
        self._p_rf = self._rb * (lam_rf + 2 * mu_rf)
        self._l_rf = self._rb * lam_rf
        self._m_rf = self._rb * mu_rf
        self._p_zf = r * (lam_zf + 2 * mu_zf)
        self._l_zf = r * lam_zf
        self._m_zf = r * mu_zf

    @classmethod
    def from_medium(cls, grid: Grid2D, medium: ElasticMedium, h: float) -> "ElasticOperator":
        return cls(grid, *sample_elastic(medium, grid), h)

    @property
    def shape(self):
        return (2,) + self.grid.shape

    def apply(self, x: np.ndarray) -> np.ndarray:
        if x.shape != self.shape:
            raise ValueError(f"field pair has shape {x.shape}, expected {self.shape}")
        g = self.grid
        hr, hz = g.h_r, g.h_z
        r, rb = self._r, self._rb
        Q = x[0].copy()
        U = x[1].copy()
        Q[-1] = 0.0
        U[-1] = 0.0
        dzU, dzQ = _dz(U, hz), _dz(Q, hz)
        drU, drQ = _dr(U, hr, 1.0), _dr(Q, hr, -1.0)

        # Q equation: d/dr(r s_rr) + d/dz(r t_rz) - s_tt - mass Q
        fr = (self._p_rf * (Q[1:] - Q[:-1]) / hr
              + self._l_rf * (0.5 * (Q[:-1] + Q[1:]) / rb + 0.5 * (dzU[:-1] + dzU[1:])))
        fz = self._m_zf * ((Q[:, 1:] - Q[:, :-1]) / hz + 0.5 * (drU[:, :-1] + drU[:, 1:]))
        LQ = -(self.lam * (drQ + Q / r + dzU) + 2 * self.mu * Q / r) - self._mass * Q
        LQ[:-1] += fr / hr
        LQ[1:] -= fr / hr
        LQ[:, :-1] += fz / hz
        LQ[:, 1:] -= fz / hz

        # U equation: d/dr(r t_rz) + d/dz(r s_zz) - mass U
        fr = self._m_rf * ((U[1:] - U[:-1]) / hr + 0.5 * (dzQ[:-1] + dzQ[1:]))
        fz = (self._p_zf * (U[:, 1:] - U[:, :-1]) / hz
              + self._l_zf * (0.5 * (drQ[:, :-1] + drQ[:, 1:]) + 0.5 * (Q[:, :-1] + Q[:, 1:]) / r))
        LU = -self._mass * U
        LU[:-1] += fr / hr
        LU[1:] -= fr / hr
        LU[:, :-1] += fz / hz
        LU[:, 1:] -= fz / hz

        out = np.empty_like(x)
        out[0] = -LQ
        out[1] = -LU
        out[:, -1] = x[:, -1]
        return out

    __call__ = apply

    def system_rhs(self, phi: np.ndarray) -> np.ndarray:
        b = -self.grid.r[None, :, None] * phi
        b[:, -1] = 0.0
        return b


def apply_elastic(op: ElasticOperator, QU):
    return op.apply(QU)


# -- sources -----------------------------------------------------------------


class SourceKind(str, Enum):
    MONOPOLE = "monopole"
    CENTER_OF_PRESSURE = "center_of_pressure"


@dataclass(frozen=True)
class SourceSpec:
    """Point source at (r0, z0) with a Gaussian-modulated sine time function."""

    kind: SourceKind = SourceKind.MONOPOLE
    r0: float = 0.0
    z0: float = 0.0
    f0: float = 30.0
    t0: float = 0.2
    gamma: float = 4.0
    amplitude: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", SourceKind(self.kind))
        if self.r0 < 0 or self.z0 < 0:
            raise ValueError("source coordinates must be non-negative")


def discretize_source(source: SourceSpec, grid: Grid2D, f_m: float = 1.0, physics: str = "acoustic",
                      rho: np.ndarray | None = None):
    """Grid load of the source term of the spectral equation for a coefficient ``f_m``.

    Acoustic monopole: -(1/2pi) delta(x - x0)/r f_m, with the delta spread
    over the nearest cell, i.e. -f_m / (2 pi r_i0 h_r h_z) in that cell.

    Elastic sources return the pair (-rho F_r f_m, -rho F_z f_m); ``rho`` is
    the cell-centre density (taken as 1 when omitted).  The centre
    of pressure sits on the axis.  Its F_z part is the centred difference of
    the cell delta in z (cells j0 -+ 1, zero net force).  Its F_r part, the
    radial derivative of delta(r)/r, folds onto the axis cell once the odd
    ghost Q_0 = -Q_1 is used: its weighted cell load reproduces -2 dQ/dr(0).
    An elastic monopole is a vertical point force on the axis.
    """
    if not (source.r0 <= grid.l1 and source.z0 <= grid.l2):
        raise ValueError(f"source at ({source.r0}, {source.z0}) lies outside the domain")
    i0, j0 = grid.nearest_cell(source.r0, source.z0)
    hr, hz = grid.h_r, grid.h_z
    r = grid.r
    scale = f_m * source.amplitude
    if i0 == grid.N_r - 1:
        raise ValueError("source sits on the Dirichlet wall r = l1")
    if physics == "acoustic":
        if source.kind is not SourceKind.MONOPOLE:
            raise ValueError("acoustic runs support monopole sources only")
        phi = np.zeros(grid.shape)
        phi[i0, j0] = -scale / (2 * math.pi * r[i0] * hr * hz)
        return phi
    if physics != "elastic":
        raise ValueError(f"unknown physics {physics!r}")
    if i0 != 0:
        raise ValueError("elastic sources must lie on the axis r = 0")
    F = np.zeros((2,) + grid.shape)
    if source.kind is SourceKind.MONOPOLE:
        F[1, 0, j0] = 1.0 / (2 * math.pi * r[0] * hr * hz)
    else:
        if not 1 <= j0 <= grid.N_z - 2:
            raise ValueError("centre-of-pressure source needs a cell above and below it")
        # r-weighted loads divided back by r_0
        F[0, 0, j0] = -2.0 / (math.pi * hr * hr * hz) / r[0]
        F[1, 0, j0 - 1] = 1.0 / (4 * math.pi * hr * hz * hz) / r[0]
        F[1, 0, j0 + 1] = -1.0 / (4 * math.pi * hr * hz * hz) / r[0]
    if rho is not None:
        F *= rho[None]
    return -scale * F


def build_acoustic_rhs(m: int, f_m: float, unit_load: np.ndarray, acc: ConvolutionAccumulators,
                       rho: np.ndarray, h: float) -> np.ndarray:
    """phi = f_m * unit_load + rho h^2 sqrt(m!/(m+a)!) S_m for harmonic ``m``.

    ``unit_load`` is :func:`discretize_source` evaluated with f_m = 1 and
    ``acc`` must hold the running sums through harmonic m - 1.
    """
    if acc.m != m:
        raise ValueError(f"accumulators hold harmonic {acc.m}, building rhs for {m}")
    phi = f_m * unit_load
    if m > 0:
        phi = phi + rho * (h * h * norm_factor(m, acc.alpha)) * acc.sum(m)
    return phi


def build_elastic_rhs(m: int, f_m: float, unit_load: np.ndarray, acc: ConvolutionAccumulators,
                      rho: np.ndarray, h: float) -> np.ndarray:
    """Same as the acoustic form for the pair (Q, U); ``acc`` carries both components."""
    return build_acoustic_rhs(m, f_m, unit_load, acc, rho[None], h)
