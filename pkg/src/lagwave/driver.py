"""Harmonic loop: one elliptic solve per Laguerre harmonic, then time synthesis.

Only O(1) grid fields live at any time: the current harmonic, the two
convolution accumulators and one partial sum per requested snapshot.
Receiver coefficients are kept for every harmonic (n x receivers numbers)
and summed into traces once the loop ends.
"""

from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .grid import AcousticMedium, ElasticMedium, Grid2D, sample_elastic
from .krylov import KrylovConfig, KrylovError, gmres_k, pcg
from .laguerre import (
    ConvolutionAccumulators,
    LaguerreBasis,
    default_quadrature_step,
    forward_transform,
    inverse_series,
    source_time_function,
    synthesis_functions,
)
from .operators import (
    AcousticOperator,
    ElasticOperator,
    SourceSpec,
    build_acoustic_rhs,
    build_elastic_rhs,
    discretize_source,
)
from .precond import build_acoustic_preconditioner, build_elastic_preconditioner

__all__ = [
    "SimulationConfig",
    "Seismogram",
    "Snapshot",
    "RunResult",
    "ConfigError",
    "HarmonicSolveError",
    "CredibleWindowWarning",
    "run_acoustic",
    "run_elastic",
    "run",
    "exact_acoustic_solution",
    "error_metric",
    "source_coefficients",
    "credible_time",
]

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid simulation setup."""


class HarmonicSolveError(RuntimeError):
    """The Krylov solver failed at one harmonic; ``report`` holds what ran so far."""

    def __init__(self, message, harmonic: int, report: dict):
        super().__init__(message)
        self.harmonic = harmonic
        self.report = report


class CredibleWindowWarning(UserWarning):
    """Output times reach past the first wall reflection at some receiver."""


@dataclass
class SimulationConfig:
    """Everything a run needs.

    ``receivers`` is a sequence of (r, z) positions in metres; output traces
    are sampled on ``t_start, t_start + dt, ... <= t_end``.
    """

    physics: str
    grid: Grid2D
    medium: AcousticMedium | ElasticMedium
    basis: LaguerreBasis
    source: SourceSpec
    receivers: list = field(default_factory=list)
    snapshot_times: tuple = ()
    t_start: float = 0.0
    t_end: float = 1.0
    dt: float = 1e-3
    krylov: KrylovConfig = field(default_factory=KrylovConfig)
    workers: int = 1
    quadrature_dt: float | None = None
    b2_hoop_term: bool = False

    def validate(self):
        if self.physics not in ("acoustic", "elastic"):
            raise ConfigError(f"physics must be 'acoustic' or 'elastic', got {self.physics!r}")
        want = AcousticMedium if self.physics == "acoustic" else ElasticMedium
        if not isinstance(self.medium, want):
            raise ConfigError(f"{self.physics} run needs a {want.__name__}")
        g = self.grid
        for k, (r, z) in enumerate(self.receivers):
            if not (0 <= r < g.l1 and 0 <= z <= g.l2):
                raise ConfigError(f"receiver {k} at (r={r}, z={z}) lies outside the domain "
                                  f"[0, {g.l1}) x [0, {g.l2}]")
            if g.nearest_cell(r, z)[0] == g.N_r - 1:
                raise ConfigError(f"receiver {k} at (r={r}, z={z}) falls on the Dirichlet wall r = l1")
        if not (0 <= self.source.r0 <= g.l1 and 0 <= self.source.z0 <= g.l2):
            raise ConfigError(f"source at (r={self.source.r0}, z={self.source.z0}) lies outside the domain")
        for t in self.snapshot_times:
            if t < 0:
                raise ConfigError(f"snapshot time {t} is negative")
        if not (0 <= self.t_start < self.t_end):
            raise ConfigError(f"need 0 <= t_start < t_end, got {self.t_start}, {self.t_end}")
        if not 0 < self.dt <= self.t_end - self.t_start:
            raise ConfigError(f"output dt {self.dt} does not fit in [t_start, t_end]")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")

    @property
    def times(self) -> np.ndarray:
        nt = int(math.floor((self.t_end - self.t_start) / self.dt + 1e-9)) + 1
        return self.t_start + self.dt * np.arange(nt)


@dataclass
class Seismogram:
    """Traces at each receiver.

    ``traces`` maps a component name (``u`` for acoustic runs, ``u_r`` and
    ``u_z`` for elastic runs) to an array of shape (len(time), n_receivers).
    """

    time: np.ndarray
    receivers: list
    cells: list
    traces: dict

    def component(self, name: str, k: int = 0) -> np.ndarray:
        return self.traces[name][:, k]


@dataclass
class Snapshot:
    time: float
    fields: dict


@dataclass
class RunResult:
    seismogram: Seismogram
    snapshots: list
    report: dict


def source_coefficients(source: SourceSpec, basis: LaguerreBasis, dt: float | None = None) -> np.ndarray:
    """Laguerre coefficients f_m of the source time function."""
    width = source.gamma / (2 * math.pi * source.f0)
    t_q = source.t0 + 8.0 * width
    dt = default_quadrature_step(basis, source.f0) if dt is None else dt
    dt = min(dt, t_q / 4)
    return forward_transform(lambda t: source_time_function(t, source.f0, source.t0, source.gamma),
                             basis, dt, t_q).coefficients


def _max_speed(config: SimulationConfig) -> float:
    g = config.grid
    r, z = g.r[:, None], g.z[None, :]
    if config.physics == "acoustic":
        c2 = config.medium.kappa(r, z) / config.medium.rho(r, z)
    else:
        lam, mu, rho = sample_elastic(config.medium, g)
        c2 = (lam + 2 * mu) / rho
    return float(np.sqrt(np.max(c2)))


def credible_time(config: SimulationConfig) -> float:
    """Earliest time a wall reflection can reach any receiver.

    Uses the fastest wave speed and the pulse onset, so it is a lower bound.
    """
    g, s = config.grid, config.source
    c = _max_speed(config)
    onset = s.t0 - 6.0 * s.gamma / (2 * math.pi * s.f0)
    best = math.inf
    for r, z in config.receivers:
        d_wall_r = (g.l1 - s.r0) + (g.l1 - r)
        d_wall_z = math.hypot(r - s.r0, 2 * g.l2 - s.z0 - z)
        best = min(best, d_wall_r, d_wall_z)
    return onset + best / c


def _check_window(config: SimulationConfig, report: dict):
    if not config.receivers:
        return
    t_c = credible_time(config)
    if config.t_end > t_c:
        msg = (f"t_end = {config.t_end:g} s passes the earliest wall reflection at about {t_c:g} s; "
               "late samples include artificial reflections")
        report["warnings"].append(msg)
        warnings.warn(msg, CredibleWindowWarning, stacklevel=3)


def _run(config: SimulationConfig) -> RunResult:
    config.validate()
    report = {"physics": config.physics, "warnings": [], "harmonics": []}
    _check_window(config, report)
    g, basis = config.grid, config.basis
    h = basis.h
    elastic = config.physics == "elastic"

    t0 = time.perf_counter()
    if elastic:
        op = ElasticOperator.from_medium(g, config.medium, h)
        P = build_elastic_preconditioner(g, config.medium, h, config.workers, config.b2_hoop_term)
        rho = op.rho
        unit = discretize_source(config.source, g, 1.0, "elastic", rho=rho)
        field_shape = op.shape
    else:
        op = AcousticOperator.from_medium(g, config.medium, h)
        P = build_acoustic_preconditioner(g, config.medium, h, config.workers)
        rho = config.medium.rho(g.r[:, None], g.z[None, :]) * np.ones(g.shape)
        unit = discretize_source(config.source, g, 1.0, "acoustic")
        field_shape = g.shape
    report["setup_seconds"] = time.perf_counter() - t0
    report["preconditioner_builds"] = 1
    report["tilde"] = dict(P.averages)

    f = source_coefficients(config.source, basis, config.quadrature_dt)
    acc = ConvolutionAccumulators.zeros(basis.alpha, field_shape)
    cells = [g.nearest_cell(r, z) for r, z in config.receivers]
    ri = np.array([c[0] for c in cells], dtype=int)
    zi = np.array([c[1] for c in cells], dtype=int)
    ncomp = 2 if elastic else 1
    rec = np.zeros((basis.n, ncomp, len(cells)))
    snap_t = np.asarray(config.snapshot_times, dtype=float)
    snaps = np.zeros((len(snap_t),) + field_shape)
    snap_weights = synthesis_functions(basis, snap_t) if len(snap_t) else None

    total_iters = 0
    loop_start = time.perf_counter()
    for m in range(basis.n):
        tic = time.perf_counter()
        if elastic:
            phi = build_elastic_rhs(m, f[m], unit, acc, rho, h)
        else:
            phi = build_acoustic_rhs(m, f[m], unit, acc, rho, h)
        b = op.system_rhs(phi)
        try:
            if elastic:
                y, stats = gmres_k(op.apply, P.apply_inverse, b, config.krylov)
            else:
                y, stats = pcg(op.apply, P.apply_inverse, b, config.krylov)
        except KrylovError as exc:
            report["failed_harmonic"] = m
            raise HarmonicSolveError(f"harmonic {m}: {exc}", m, report) from exc
        entry = {"m": m, **stats.as_dict(), "seconds": time.perf_counter() - tic}
        if elastic:
            entry["cycle_residuals"] = list(stats.cycle_residuals)
        report["harmonics"].append(entry)
        if not stats.converged:
            report["failed_harmonic"] = m
            raise HarmonicSolveError(
                f"harmonic {m}: no convergence in {stats.iterations} iterations "
                f"(relative residual {stats.residual:.3e})", m, report)
        total_iters += stats.iterations
        acc.step(y, m)
        if elastic:
            rec[m] = y[:, ri, zi]
        else:
            rec[m, 0] = y[ri, zi]
        if snap_weights is not None:
            w = next(snap_weights)
            for s in range(len(snap_t)):
                snaps[s] += w[s] * y
        if m % 100 == 0:
            log.debug("harmonic %d: %d iterations", m, stats.iterations)

    report["loop_seconds"] = time.perf_counter() - loop_start
    report["total_iterations"] = total_iters
    report["max_iterations"] = max((e["iterations"] for e in report["harmonics"]), default=0)

    t_out = config.times
    names = ("u_r", "u_z") if elastic else ("u",)
    traces = {}
    for c, name in enumerate(names):
        traces[name] = inverse_series(rec[:, c, :], basis, t_out).reshape(len(t_out), len(cells))
    seis = Seismogram(t_out, [tuple(p) for p in config.receivers], cells, traces)
    snapshots = []
    for s, ts in enumerate(snap_t):
        fields = {"u_r": snaps[s][0], "u_z": snaps[s][1]} if elastic else {"u": snaps[s]}
        snapshots.append(Snapshot(float(ts), fields))
    return RunResult(seis, snapshots, report)


def run_acoustic(config: SimulationConfig) -> RunResult:
    if config.physics != "acoustic":
        raise ConfigError("run_acoustic needs physics = 'acoustic'")
    return _run(config)


def run_elastic(config: SimulationConfig) -> RunResult:
    if config.physics != "elastic":
        raise ConfigError("run_elastic needs physics = 'elastic'")
    return _run(config)


def run(config: SimulationConfig) -> RunResult:
    return _run(config)


def exact_acoustic_solution(r, t, c: float, pulse, kappa: float = 1.0):
    """Free-surface response f(t - r/c) / (2 pi kappa r) to a monopole at the surface.

    ``pulse`` is a callable of time.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("exact solution needs r > 0")
    return pulse(np.asarray(t, dtype=float) - r / c) / (2 * math.pi * kappa * r)


def error_metric(u_exact, u_h, dt: float) -> float:
    """Relative L2-in-time misfit sqrt(int (u_exact - u_h)^2 / int u_exact^2), trapezoid rule."""
    u_exact = np.asarray(u_exact, dtype=float)
    u_h = np.asarray(u_h, dtype=float)
    if u_exact.shape != u_h.shape:
        raise ValueError(f"traces differ in shape: {u_exact.shape} vs {u_h.shape}")
    ref = np.trapezoid(u_exact**2, dx=dt)
    if not ref > 0:
        raise ValueError("reference trace has zero energy")
    return math.sqrt(np.trapezoid((u_exact - u_h) ** 2, dx=dt) / ref)
