"""Cell-centred r-z mesh, material models and their sampling onto the mesh.

Nodes sit at r_i = (i - 1/2) h_r and z_k = (k - 1/2) h_z (1-based) with
h_r = l1/(N_r - 1/2), so the last r node lands on the Dirichlet wall r = l1 and
no node ever sits on the axis.  Arrays in this package are indexed
``[i, k]`` with 0-based ``i`` along r and ``k`` along z.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

__all__ = [
    "Grid2D",
    "build_grid",
    "Constant",
    "Layered",
    "RasterModel",
    "RasterField",
    "RasterError",
    "RasterHeaderError",
    "RasterPayloadError",
    "RasterValueError",
    "RasterDomainError",
    "AcousticMedium",
    "ElasticMedium",
    "sample_acoustic",
    "sample_elastic",
    "tilde",
    "read_raster",
    "write_raster",
    "load_raster_model",
    "write_raster_text",
]


@dataclass(frozen=True)
class Grid2D:
    N_r: int
    N_z: int
    l1: float
    l2: float

    @property
    def h_r(self) -> float:
        return self.l1 / (self.N_r - 0.5)

    @property
    def h_z(self) -> float:
        return self.l2 / (self.N_z - 0.5)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.N_r, self.N_z)

    @property
    def r(self) -> np.ndarray:
        return (np.arange(self.N_r) + 0.5) * self.h_r

    @property
    def z(self) -> np.ndarray:
        return (np.arange(self.N_z) + 0.5) * self.h_z

    @property
    def r_face(self) -> np.ndarray:
        """r-bar_i = r_i + h_r/2, the right face of cell i."""
        return (np.arange(self.N_r) + 1.0) * self.h_r

    @property
    def z_face(self) -> np.ndarray:
        return (np.arange(self.N_z) + 1.0) * self.h_z

    def nearest_cell(self, r: float, z: float) -> tuple[int, int]:
        """0-based indices of the cell centre closest to (r, z)."""
        if not (0.0 <= r <= self.l1 and 0.0 <= z <= self.l2):
            raise ValueError(f"point ({r}, {z}) lies outside [0, {self.l1}] x [0, {self.l2}]")
        i = int(np.clip(np.floor(r / self.h_r), 0, self.N_r - 1))
        k = int(np.clip(np.floor(z / self.h_z), 0, self.N_z - 1))
        return i, k


def build_grid(l1: float, l2: float, N_r: int, N_z: int) -> Grid2D:
    if not (l1 > 0 and l2 > 0):
        raise ValueError(f"domain extents must be positive, got l1={l1}, l2={l2}")
    if N_r < 2 or N_z < 2:
        raise ValueError(f"need at least 2 nodes per direction, got {N_r} x {N_z}")
    return Grid2D(int(N_r), int(N_z), float(l1), float(l2))


# -- material fields ---------------------------------------------------------


@dataclass(frozen=True)
class Constant:
    value: float

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError(f"material values must be positive, got {self.value}")

    def __call__(self, r, z):
        return np.full(np.broadcast(np.asarray(r), np.asarray(z)).shape, float(self.value))

    def bounds(self):
        return self.value, self.value


@dataclass(frozen=True)
class Layered:
    """Piecewise-constant in z: ``values[j]`` holds for tops[j] <= z < tops[j+1]."""

    tops: tuple
    values: tuple

    def __post_init__(self):
        tops = tuple(float(t) for t in self.tops)
        values = tuple(float(v) for v in self.values)
        if len(tops) != len(values) or not tops:
            raise ValueError("layered model needs one value per layer top")
        if tops[0] != 0.0 or any(b <= a for a, b in zip(tops, tops[1:])):
            raise ValueError("layer tops must start at 0 and increase strictly")
        if min(values) <= 0:
            raise ValueError("material values must be positive")
        object.__setattr__(self, "tops", tops)
        object.__setattr__(self, "values", values)

    def __call__(self, r, z):
        r, z = np.broadcast_arrays(np.asarray(r, float), np.asarray(z, float))
        idx = np.searchsorted(np.asarray(self.tops), z, side="right") - 1
        return np.asarray(self.values)[np.clip(idx, 0, len(self.values) - 1)]

    def bounds(self):
        return min(self.values), max(self.values)


class RasterError(Exception):
    code = 20


class RasterHeaderError(RasterError):
    code = 21


class RasterPayloadError(RasterError):
    code = 22


class RasterValueError(RasterError):
    code = 23


class RasterDomainError(RasterError):
    code = 24


_MAGIC = b"LAGRAST1"
_HEADER = struct.Struct("<8s4I4d")
_NAME = struct.Struct("<16s")


@dataclass
class RasterModel:
    """Gridded parameters: ``values[name][i, k]`` is the value at (r0 + i dr, z0 + k dz)."""

    origin: tuple
    spacing: tuple
    values: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return next(iter(self.values.values())).shape

    def query(self, name: str, r, z):
        """Nearest-cell lookup.  Points further than one cell outside the raster raise."""
        arr = self.values[name]
        r, z = np.broadcast_arrays(np.asarray(r, float), np.asarray(z, float))
        fi = (r - self.origin[0]) / self.spacing[0]
        fk = (z - self.origin[1]) / self.spacing[1]
        nr, nz = arr.shape
        if np.any(fi < -1.5) or np.any(fi > nr + 0.5) or np.any(fk < -1.5) or np.any(fk > nz + 0.5):
            raise RasterDomainError(f"query outside raster extent for {name!r}")
        i = np.clip(np.floor(fi + 0.5).astype(int), 0, nr - 1)
        k = np.clip(np.floor(fk + 0.5).astype(int), 0, nz - 1)
        return arr[i, k]

    def field(self, name: str) -> "RasterField":
        if name not in self.values:
            raise RasterHeaderError(f"raster has no parameter {name!r}; available: {sorted(self.values)}")
        return RasterField(self, name)


@dataclass(frozen=True)
class RasterField:
    model: RasterModel
    name: str

    def __call__(self, r, z):
        return self.model.query(self.name, r, z)

    def bounds(self):
        a = self.model.values[self.name]
        return float(a.min()), float(a.max())


def write_raster(path, origin, spacing, values: dict) -> None:
    """Binary raster: magic, version, count, dims, origin, spacing, names, float64 payloads."""
    names = list(values)
    arrays = [np.ascontiguousarray(values[k], dtype="<f8") for k in names]
    nr, nz = arrays[0].shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, 1, len(names), nr, nz, *map(float, origin), *map(float, spacing)))
        for n in names:
            fh.write(_NAME.pack(n.encode("ascii")))
        for a in arrays:
            if a.shape != (nr, nz):
                raise ValueError("all parameter grids must share one shape")
            fh.write(a.tobytes())


def read_raster(path) -> RasterModel:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise RasterHeaderError(f"{path}: file shorter than the header")
    magic, version, count, nr, nz, r0, z0, dr, dz = _HEADER.unpack_from(data)
    if magic != _MAGIC or version != 1:
        raise RasterHeaderError(f"{path}: bad magic or version")
    if count < 1 or nr < 2 or nz < 2 or not (dr > 0 and dz > 0):
        raise RasterHeaderError(f"{path}: bad dimensions or spacing")
    off = _HEADER.size
    if len(data) < off + count * _NAME.size:
        raise RasterHeaderError(f"{path}: truncated parameter names")
    names = []
    for _ in range(count):
        names.append(_NAME.unpack_from(data, off)[0].rstrip(b"\0").decode("ascii"))
        off += _NAME.size
    need = count * nr * nz * 8
    if len(data) - off != need:
        raise RasterPayloadError(f"{path}: payload has {len(data) - off} bytes, expected {need}")
    values = {}
    for n in names:
        values[n] = np.frombuffer(data, dtype="<f8", count=nr * nz, offset=off).reshape(nr, nz).copy()
        off += nr * nz * 8
    return RasterModel((r0, z0), (dr, dz), values)


def write_raster_text(path, origin, spacing, values: dict) -> None:
    """Plain-text variant: ``key value`` header lines, then one block of rows per parameter."""
    names = list(values)
    nr, nz = np.shape(values[names[0]])
    lines = [
        "lagraster-text 1",
        f"dims {nr} {nz}",
        f"origin {origin[0]!r} {origin[1]!r}",
        f"spacing {spacing[0]!r} {spacing[1]!r}",
    ]
    for n in names:
        lines.append(f"param {n}")
        for row in np.asarray(values[n], float):
            lines.append(" ".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _read_raster_text(path) -> RasterModel:
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    try:
        if lines[0] != "lagraster-text 1":
            raise ValueError
        _, nr, nz = lines[1].split()
        nr, nz = int(nr), int(nz)
        k1, r0, z0 = lines[2].split()
        k2, dr, dz = lines[3].split()
        if (k1, k2) != ("origin", "spacing"):
            raise ValueError
        origin, spacing = (float(r0), float(z0)), (float(dr), float(dz))
    except (ValueError, IndexError) as exc:
        raise RasterHeaderError(f"{path}: malformed text header") from exc
    if nr < 2 or nz < 2 or not (spacing[0] > 0 and spacing[1] > 0):
        raise RasterHeaderError(f"{path}: bad dimensions or spacing")
    values, pos = {}, 4
    while pos < len(lines):
        if not lines[pos].startswith("param "):
            raise RasterPayloadError(f"{path}: expected a 'param' line at line {pos + 1}")
        name = lines[pos].split(None, 1)[1]
        rows = lines[pos + 1 : pos + 1 + nr]
        try:
            arr = np.array([[float(v) for v in row.split()] for row in rows])
        except ValueError as exc:
            raise RasterPayloadError(f"{path}: non-numeric payload for {name!r}") from exc
        if arr.shape != (nr, nz):
            raise RasterPayloadError(f"{path}: short payload for {name!r}")
        values[name] = arr
        pos += 1 + nr
    if not values:
        raise RasterPayloadError(f"{path}: no parameters")
    return RasterModel(origin, spacing, values)


def load_raster_model(path, mapping: dict | None = None) -> RasterModel:
    """Read a material raster (binary or text) and check it.

    ``mapping`` renames stored parameters to the names the caller expects,
    e.g. ``{"vp": "P_velocity"}``; missing names raise ``RasterHeaderError``.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(8)
    model = read_raster(path) if head == _MAGIC else _read_raster_text(path)
    if mapping:
        missing = [src for src in mapping.values() if src not in model.values]
        if missing:
            raise RasterHeaderError(f"{path}: parameters {missing} not in file")
        model = RasterModel(model.origin, model.spacing, {dst: model.values[src] for dst, src in mapping.items()})
    for name, arr in model.values.items():
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise RasterValueError(f"{path}: parameter {name!r} has non-positive or non-finite values")
    return model


# -- media ---------------------------------------------------------------------

Field = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class AcousticMedium:
    kappa: Field
    rho: Field


@dataclass(frozen=True)
class ElasticMedium:
    lam: Field
    mu: Field
    rho: Field

    @classmethod
    def from_velocities(cls, vp: Field, vs: Field, rho: Field) -> "ElasticMedium":
        def mu(r, z):
            return rho(r, z) * vs(r, z) ** 2

        def lam(r, z):
            return rho(r, z) * (vp(r, z) ** 2 - 2.0 * vs(r, z) ** 2)

        return cls(lam, mu, rho)


def _positive(name, arr):
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ValueError(f"sampled {name} must be finite and positive")
    return arr


def sample_acoustic(medium: AcousticMedium, grid: Grid2D, h: float):
    """Coefficient arrays a1 = r-bar kappa(r-bar, z), a2 = r kappa(r, z-bar), w = rho h^2/4 r."""
    r, z = grid.r[:, None], grid.z[None, :]
    rb, zb = grid.r_face[:, None], grid.z_face[None, :]
    a1 = rb * _positive("kappa", medium.kappa(rb, z))
    a2 = r * _positive("kappa", medium.kappa(r, zb))
    w = _positive("rho", medium.rho(r, z)) * (h * h / 4.0) * r
    shape = grid.shape
    return np.broadcast_to(a1, shape).copy(), np.broadcast_to(a2, shape).copy(), np.broadcast_to(w, shape).copy()


def sample_elastic(medium: ElasticMedium, grid: Grid2D):
    """lambda, mu, rho at cell centres, each of grid shape."""
    r, z = grid.r[:, None], grid.z[None, :]
    shape = grid.shape
    out = []
    for name, f in (("lambda", medium.lam), ("mu", medium.mu), ("rho", medium.rho)):
        out.append(np.broadcast_to(_positive(name, f(r, z)), shape).copy())
    return tuple(out)


def tilde(values) -> float:
    """Midpoint of the range, (min + max)/2."""
    a = np.asarray(values, dtype=float)
    if a.size == 0:
        raise ValueError("tilde of an empty field")
    return 0.5 * (float(a.min()) + float(a.max()))
