"""Factor-once / solve-many tridiagonal systems.

Two routes are provided:

* :func:`thomas_solve` - plain sequential elimination written with numpy, the
  reference the partitioned solver is checked against;
* :func:`factor` / :func:`solve_batched` - a partitioned solver.  Rows are
  split into ``workers`` contiguous blocks.  Factoring does all the O(N)
  preparation once: local LU multipliers of every block, the two "spike"
  columns describing how a block responds to its neighbours' boundary values,
  and the inverse of the small interface system.  A solve is then a local
  sweep per block, one sum of per-block contributions to the interface
  unknowns (an associative combine, done in a fixed left-to-right order) and
  a local correction.

Systems run along axis 0.  Right-hand sides are stacked as columns, shape
``(N, K)``.  The coefficient arrays are either shape ``(N,)`` (one matrix for
every column) or ``(N, K)`` (column ``j`` has its own matrix), which is how
the separable preconditioner solves one matrix per Fourier mode in one call.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numba
import numpy as np

__all__ = [
    "TridiagonalMatrix",
    "FactoredTridiagonal",
    "SingularMatrixError",
    "thomas_solve",
    "factor",
    "solve_batched",
    "partition_bounds",
    "comm_time_allreduce",
    "comm_time_dichotomy",
]

_TINY_PIVOT = 1e-300


class SingularMatrixError(ArithmeticError):
    """A (near-)zero pivot showed up during elimination; no pivoting is done."""


@dataclass(frozen=True)
class TridiagonalMatrix:
    """``lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1]``; lower[0] and upper[-1] are ignored."""

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        for name in ("lower", "diag", "upper"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if not (self.lower.shape == self.diag.shape == self.upper.shape):
            raise ValueError("lower, diag and upper must share one shape")
        if self.diag.ndim not in (1, 2) or self.diag.shape[0] < 1:
            raise ValueError("coefficient arrays must have shape (N,) or (N, K)")

    @property
    def N(self) -> int:
        return self.diag.shape[0]

    def matvec(self, x):
        """T @ x for x of shape (N,) or (N, K)."""
        x = np.asarray(x, dtype=float)
        lo, di, up = self.lower, self.diag, self.upper
        if x.ndim == 2 and di.ndim == 1:
            lo, di, up = lo[:, None], di[:, None], up[:, None]
        y = di * x
        y[1:] += lo[1:] * x[:-1]
        y[:-1] += up[:-1] * x[1:]
        return y

    def dense(self, column: int = 0) -> np.ndarray:
        """Dense matrix (of ``column`` when the coefficients are per-column)."""
        sel = (slice(None),) if self.diag.ndim == 1 else (slice(None), column)
        lo, di, up = self.lower[sel], self.diag[sel], self.upper[sel]
        return np.diag(di) + np.diag(lo[1:], -1) + np.diag(up[:-1], 1)


# -- numpy reference -----------------------------------------------------------


def thomas_solve(T: TridiagonalMatrix, rhs) -> np.ndarray:
    """Sequential Thomas elimination without pivoting.

    Vectorised across columns only; used as the oracle for the partitioned path.
    """
    b = np.array(rhs, dtype=float)
    n = T.N
    if b.shape[0] != n:
        raise ValueError(f"rhs has {b.shape[0]} rows, matrix has {n}")
    lo, di, up = T.lower, T.diag, T.upper
    if b.ndim == 2 and di.ndim == 1:
        lo, di, up = lo[:, None], di[:, None], up[:, None]
    cp = np.empty(np.broadcast_shapes(di.shape, b.shape))
    den = np.asarray(di[0], dtype=float).copy()
    if np.any(np.abs(den) < _TINY_PIVOT):
        raise SingularMatrixError("zero pivot in row 0")
    cp[0] = up[0] / den
    b[0] = b[0] / den
    for i in range(1, n):
        den = di[i] - lo[i] * cp[i - 1]
        if np.any(np.abs(den) < _TINY_PIVOT):
            raise SingularMatrixError(f"zero pivot in row {i}")
        cp[i] = up[i] / den
        b[i] = (b[i] - lo[i] * b[i - 1]) / den
    for i in range(n - 2, -1, -1):
        b[i] = b[i] - cp[i] * b[i + 1]
    return b


# -- compiled kernels --------------------------------------------------------


@numba.njit(cache=True, nogil=True)
def _factor_kernel(lo, di, up, cp, inv_den):
    n, kc = di.shape
    for j in range(kc):
        d = di[0, j]
        if abs(d) < _TINY_PIVOT:
            return 0
        inv_den[0, j] = 1.0 / d
        cp[0, j] = up[0, j] / d
    for i in range(1, n):
        for j in range(kc):
            d = di[i, j] - lo[i, j] * cp[i - 1, j]
            if abs(d) < _TINY_PIVOT:
                return i
            inv_den[i, j] = 1.0 / d
            cp[i, j] = up[i, j] / d
    return -1


@numba.njit(cache=True, nogil=True)
def _solve_kernel(lo, cp, inv_den, b, x):
    # x may alias b
    n, k = b.shape
    kc = cp.shape[1]
    if kc == 1:
        s = inv_den[0, 0]
        for j in range(k):
            x[0, j] = b[0, j] * s
        for i in range(1, n):
            a = lo[i, 0]
            s = inv_den[i, 0]
            for j in range(k):
                x[i, j] = (b[i, j] - a * x[i - 1, j]) * s
        for i in range(n - 2, -1, -1):
            c = cp[i, 0]
            for j in range(k):
                x[i, j] -= c * x[i + 1, j]
    else:
        for j in range(k):
            x[0, j] = b[0, j] * inv_den[0, j]
        for i in range(1, n):
            for j in range(k):
                x[i, j] = (b[i, j] - lo[i, j] * x[i - 1, j]) * inv_den[i, j]
        for i in range(n - 2, -1, -1):
            for j in range(k):
                x[i, j] -= cp[i, j] * x[i + 1, j]


@numba.njit(cache=True, nogil=True)
def _correct_kernel(y, g, hs, left, right, use_left, use_right):
    # y -= g * left + hs * right, broadcasting spikes over columns when needed
    n, k = y.shape
    kc = g.shape[1]
    lv = left if use_left else np.zeros_like(left)
    rv = right if use_right else np.zeros_like(right)
    if kc == 1:
        for i in range(n):
            gi = g[i, 0]
            hi = hs[i, 0]
            for j in range(k):
                y[i, j] -= gi * lv[j] + hi * rv[j]
    else:
        for i in range(n):
            for j in range(k):
                y[i, j] -= g[i, j] * lv[j] + hs[i, j] * rv[j]


# -- partitioned solver --------------------------------------------------------


def partition_bounds(n: int, workers: int) -> list[tuple[int, int]]:
    """Contiguous row blocks; every block gets at least two rows."""
    w = max(1, min(int(workers), n // 2 if n >= 2 else 1))
    edges = [(p * n) // w for p in range(w + 1)]
    return list(zip(edges[:-1], edges[1:]))


@dataclass(frozen=True)
class _Block:
    start: int
    stop: int
    lower: np.ndarray  # local sub-diagonal, row 0 unused
    cp: np.ndarray
    inv_den: np.ndarray
    g: np.ndarray | None  # response to the left neighbour's last unknown
    hs: np.ndarray | None  # response to the right neighbour's first unknown


@dataclass(frozen=True)
class FactoredTridiagonal:
    """Immutable preprocessing state; reusable for any number of solves."""

    N: int
    n_columns: int  # 1 when one matrix serves every column
    workers: int
    blocks: tuple
    interface_inverse: np.ndarray | None  # (n_columns, 2W, 2W)

    @property
    def bounds(self) -> list[tuple[int, int]]:
        return [(b.start, b.stop) for b in self.blocks]


def _as_2d(a):
    a = np.asarray(a, dtype=float)
    return np.ascontiguousarray(a[:, None] if a.ndim == 1 else a)


def _frozen(a):
    a.flags.writeable = False
    return a


def _local_factor(lo, di, up, offset):
    cp = np.empty_like(di)
    inv_den = np.empty_like(di)
    bad = _factor_kernel(lo, di, up, cp, inv_den)
    if bad >= 0:
        raise SingularMatrixError(f"zero pivot in row {offset + bad}")
    return cp, inv_den


def factor(T: TridiagonalMatrix, workers: int = 1) -> FactoredTridiagonal:
    """Precompute everything a solve needs; O(N) work per matrix."""
    lo_all, di_all, up_all = _as_2d(T.lower), _as_2d(T.diag), _as_2d(T.upper)
    n, kc = di_all.shape
    bounds = partition_bounds(n, workers)
    w = len(bounds)
    blocks = []
    for p, (s, e) in enumerate(bounds):
        lo = lo_all[s:e].copy()
        lo[0] = 0.0
        up = up_all[s:e].copy()
        up[-1] = 0.0
        di = np.ascontiguousarray(di_all[s:e])
        cp, inv_den = _local_factor(lo, di, up, s)
        g = hs = None
        if p > 0:
            rhs = np.zeros_like(di)
            rhs[0] = lo_all[s]
            g = np.empty_like(di)
            _solve_kernel(lo, cp, inv_den, rhs, g)
        if p < w - 1:
            rhs = np.zeros_like(di)
            rhs[-1] = up_all[e - 1]
            hs = np.empty_like(di)
            _solve_kernel(lo, cp, inv_den, rhs, hs)
        blocks.append(
            _Block(s, e, _frozen(lo), _frozen(cp), _frozen(inv_den),
                   None if g is None else _frozen(g), None if hs is None else _frozen(hs))
        )
    inverse = None
    if w > 1:
        # unknowns ordered (first_0, last_0, first_1, last_1, ...)
        m = np.zeros((kc, 2 * w, 2 * w))
        for p, blk in enumerate(blocks):
            for row, loc in ((2 * p, 0), (2 * p + 1, -1)):
                m[:, row, row] = 1.0
                if blk.g is not None:
                    m[:, row, 2 * p - 1] += blk.g[loc]
                if blk.hs is not None:
                    m[:, row, 2 * p + 2] += blk.hs[loc]
        if np.any(np.abs(np.linalg.det(m)) < _TINY_PIVOT):
            raise SingularMatrixError("singular interface system")
        inverse = _frozen(np.linalg.inv(m))
    return FactoredTridiagonal(n, kc, w, tuple(blocks), inverse)


@lru_cache(maxsize=None)
def _pool(workers: int) -> ThreadPoolExecutor:
    return ThreadPoolExecutor(max_workers=workers, thread_name_prefix="tridiag")


def solve_batched(F: FactoredTridiagonal, batch, *, parallel: bool = True, timings: list | None = None):
    """Solve T x = b for every column of ``batch`` (shape (N,) or (N, K)).

    With ``parallel`` the blocks run on a thread pool (the kernels release the
    GIL); the result is bit-identical either way.  If ``timings`` is a list it
    receives the CPU time each block spent in its local work.
    """
    b = np.asarray(batch, dtype=float)
    vector = b.ndim == 1
    b2 = np.ascontiguousarray(b[:, None] if vector else b)
    if b2.shape[0] != F.N:
        raise ValueError(f"batch has {b2.shape[0]} rows, system has {F.N}")
    k = b2.shape[1]
    if F.n_columns > 1 and k != F.n_columns:
        raise ValueError(f"factored per-column matrices expect {F.n_columns} columns, got {k}")
    x = np.empty_like(b2)
    w = F.workers
    cpu = [0.0] * w

    def local(p):
        t0 = time.thread_time()
        blk = F.blocks[p]
        _solve_kernel(blk.lower, blk.cp, blk.inv_den, b2[blk.start : blk.stop], x[blk.start : blk.stop])
        cpu[p] += time.thread_time() - t0

    def correct(p, iface):
        t0 = time.thread_time()
        blk = F.blocks[p]
        left = iface[:, 2 * p - 1] if p > 0 else iface[:, 0]
        right = iface[:, 2 * p + 2] if p < w - 1 else iface[:, 0]
        g = blk.g if blk.g is not None else blk.inv_den
        hs = blk.hs if blk.hs is not None else blk.inv_den
        _correct_kernel(x[blk.start : blk.stop], g, hs, np.ascontiguousarray(left),
                        np.ascontiguousarray(right), p > 0, p < w - 1)
        cpu[p] += time.thread_time() - t0

    run_parallel = parallel and w > 1
    if run_parallel:
        list(_pool(w).map(local, range(w)))
    else:
        for p in range(w):
            local(p)

    if w > 1:
        # interface unknowns = sum over blocks of inverse[:, :, cols_p] @ (first_p, last_p)
        iface = np.zeros((k, 2 * w))
        inv = F.interface_inverse
        for p, blk in enumerate(F.blocks):
            ends = np.stack((x[blk.start], x[blk.stop - 1]), axis=1)  # (k, 2)
            cols = inv[:, :, 2 * p : 2 * p + 2]
            if inv.shape[0] == 1:
                iface += ends @ cols[0].T
            else:
                iface += np.einsum("kij,kj->ki", cols, ends)
        if run_parallel:
            list(_pool(w).map(lambda p: correct(p, iface), range(w)))
        else:
            for p in range(w):
                correct(p, iface)

    if timings is not None:
        timings[:] = cpu
    return x[:, 0] if vector else x


# -- communication cost model --------------------------------------------------


def _log2_power(p) -> int:
    if int(p) != p or p < 1 or (int(p) & (int(p) - 1)):
        raise ValueError(f"p must be a power of two >= 1, got {p!r}")
    return int(p).bit_length() - 1


def comm_time_allreduce(p: int, alpha: float, beta: float, gamma: float) -> float:
    """All-reduce time for a global norm: 2 log2(p) alpha + (p-1)/p (gamma + 2 beta)."""
    lg = _log2_power(p)
    return 2.0 * lg * alpha + (p - 1) / p * (gamma + 2.0 * beta)


def comm_time_dichotomy(p: int, l: float, alpha: float, beta: float, gamma: float) -> float:
    """alpha (log2 p + 1) log2 p + l (log2 p - (p-1)/p)(gamma + 2 beta); ``l`` is the batch size."""
    lg = _log2_power(p)
    if l < 0:
        raise ValueError(f"l must be non-negative, got {l}")
    return alpha * (lg + 1) * lg + l * (lg - (p - 1) / p) * (gamma + 2.0 * beta)
