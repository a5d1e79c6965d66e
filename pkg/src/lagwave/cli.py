"""Command-line entry point: ``lagwave {simulate,convergence,costmodel,selftest}``.

Exit codes: 0 success, 1 self-test failure, 2 configuration error, 3 solver
failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .driver import (
    ConfigError,
    CredibleWindowWarning,
    HarmonicSolveError,
    RunResult,
    SimulationConfig,
    error_metric,
    exact_acoustic_solution,
    run,
)
from .grid import Constant, write_raster
from .laguerre import source_time_function
from .scenario import effective_config, env_workers, load_scenario, wavelength, with_grid
from .selftest import format_report, perturbed_conv_weight, run_selftest
from .tridiag import comm_time_allreduce, comm_time_dichotomy

log = logging.getLogger("lagwave")

EXIT_OK, EXIT_SELFTEST, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3
DEFAULT_SEED = 20240521


class Manifest:
    """Output directory wrapper that records every file it writes."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.files: list[str] = []

    def path(self, name: str) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        if name not in self.files:
            self.files.append(name)
        return self.root / name

    def write_text(self, name: str, text: str):
        self.path(name).write_text(text)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write_table(path: Path, header: list[str], columns: list[np.ndarray]):
    data = np.column_stack(columns)
    np.savetxt(path, data, fmt="%.17g", header=" ".join(header), comments="# ")


def _workers(args) -> int | None:
    if args.workers is not None:
        return args.workers
    return env_workers()


def _report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, default=float) + "\n"


def _write_run(result: RunResult, cfg: SimulationConfig, out: Manifest, prefix: str = ""):
    seis = result.seismogram
    header, cols = ["t"], [seis.time]
    for k, (r, z) in enumerate(seis.receivers):
        for name, tr in seis.traces.items():
            header.append(f"{name}[{k}]@r={_fmt(r)},z={_fmt(z)}")
            cols.append(tr[:, k])
    _write_table(out.path(f"{prefix}seismogram.txt"), header, cols)
    g = cfg.grid
    for s, snap in enumerate(result.snapshots):
        write_raster(out.path(f"{prefix}snapshot_{s:03d}.bin"), (0.5 * g.h_r, 0.5 * g.h_z),
                     (g.h_r, g.h_z), snap.fields)


def _run_one(cfg: SimulationConfig):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", CredibleWindowWarning)
        result = run(cfg)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return result


def cmd_simulate(args) -> int:
    cfg, cp = load_scenario(args.scenario, _workers(args))
    out = Manifest(args.output_dir)
    try:
        result = _run_one(cfg)
    except HarmonicSolveError as exc:
        print(f"error: solver failed at harmonic {exc.harmonic}: {exc}", file=sys.stderr)
        report = {"config": effective_config(cp), "solver": exc.report, "status": "solver failure"}
        out.path("report.json")
        report["manifest"] = list(out.files)
        (out.root / "report.json").write_text(_report_json(report))
        return EXIT_SOLVER
    _write_run(result, cfg, out)
    report = {
        "config": effective_config(cp),
        "seed": args.seed,
        "status": "ok",
        "solver": result.report,
        "receiver_cells": [list(c) for c in result.seismogram.cells],
    }
    out.path("report.json")
    report["manifest"] = list(out.files)
    (out.root / "report.json").write_text(_report_json(report))
    print(f"wrote {len(out.files)} files to {out.root}")
    return EXIT_OK


def _is_homogeneous_acoustic(cfg: SimulationConfig) -> bool:
    if cfg.physics != "acoustic":
        return False
    m = cfg.medium
    return isinstance(m.kappa, Constant) and isinstance(m.rho, Constant)


def mesh_sizes(cfg: SimulationConfig, points_per_wavelength: float) -> tuple[int, int]:
    """Node counts giving a step close to wavelength / ppw."""
    step = wavelength(cfg) / points_per_wavelength
    return (max(3, int(round(cfg.grid.l1 / step + 0.5))), max(3, int(round(cfg.grid.l2 / step + 0.5))))


def convergence_table(cfg: SimulationConfig, meshes: list[float]):
    """Run ``cfg`` on every mesh and measure trace errors.

    Returns ``(rows, orders, kind)``.  With an analytic reference (homogeneous
    acoustic medium, source in the top cell row) each row holds the error
    against the exact trace; otherwise it holds the distance to the finest
    mesh's trace, and the finest mesh gets no row.
    """
    lam = wavelength(cfg)
    meshes = sorted(meshes)
    runs = []
    for p in meshes:
        c = with_grid(cfg, *mesh_sizes(cfg, p))
        runs.append((p, c, _run_one(c)))
    analytic = _is_homogeneous_acoustic(cfg) and cfg.grid.nearest_cell(cfg.source.r0, cfg.source.z0)[1] == 0
    rows = []
    if analytic:
        kappa, rho = cfg.medium.kappa.value, cfg.medium.rho.value
        speed = math.sqrt(kappa / rho)
        s = cfg.source

        def pulse(t):
            return s.amplitude * source_time_function(t, s.f0, s.t0, s.gamma)

        for p, c, res in runs:
            for k, (i, j) in enumerate(res.seismogram.cells):
                dist = math.hypot(c.grid.r[i], c.grid.z[j] if j > 0 else 0.0)
                ref = exact_acoustic_solution(dist, res.seismogram.time, speed, pulse, kappa)
                eps = error_metric(ref, res.seismogram.component("u", k), cfg.dt)
                rows.append((p, k, cfg.receivers[k][0], eps))
    else:
        _, _, finest = runs[-1]
        name = "u" if cfg.physics == "acoustic" else "u_z"
        for p, _, res in runs[:-1]:
            for k in range(len(cfg.receivers)):
                eps = error_metric(finest.seismogram.component(name, k), res.seismogram.component(name, k), cfg.dt)
                rows.append((p, k, cfg.receivers[k][0], eps))
    orders = []
    by_rec: dict[int, list] = {}
    for p, k, _, eps in rows:
        by_rec.setdefault(k, []).append((p, eps))
    for k, seq in by_rec.items():
        for (p1, e1), (p2, e2) in zip(seq, seq[1:]):
            if e1 > 0 and e2 > 0:
                orders.append((k, p1, p2, math.log(e1 / e2) / math.log(p2 / p1)))
    return rows, orders, ("analytic" if analytic else "finest-mesh"), lam


def cmd_convergence(args) -> int:
    cfg, cp = load_scenario(args.scenario, _workers(args))
    try:
        meshes = [float(v) for v in args.meshes.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--meshes must be a comma-separated list of numbers, got {args.meshes!r}") from None
    if not meshes or min(meshes) <= 0:
        raise ConfigError("--meshes needs at least one positive points-per-wavelength value")
    if len(meshes) < 2 and not _is_homogeneous_acoustic(cfg):
        raise ConfigError("a finest-mesh reference needs at least two meshes")
    out = Manifest(args.output_dir)
    try:
        rows, orders, kind, lam = convergence_table(cfg, meshes)
    except HarmonicSolveError as exc:
        print(f"error: solver failed at harmonic {exc.harmonic}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    lines = [f"# reference: {kind}; wavelength = {_fmt(lam)} m",
             "# mesh_step_wavelengths receiver r_m r_wavelengths epsilon"]
    for p, k, r, eps in rows:
        lines.append(f"{_fmt(1.0 / p)} {k} {_fmt(r)} {_fmt(r / lam)} {_fmt(eps)}")
    lines.append("# observed orders: receiver coarse_ppw fine_ppw order")
    for k, p1, p2, order in orders:
        lines.append(f"# {k} {_fmt(p1)} {_fmt(p2)} {_fmt(order)}")
    text = "\n".join(lines) + "\n"
    out.write_text("convergence.txt", text)
    report = {"config": effective_config(cp), "meshes": meshes, "reference": kind, "seed": args.seed,
              "rows": [list(r) for r in rows], "orders": [list(o) for o in orders]}
    out.path("report.json")
    report["manifest"] = list(out.files)
    (out.root / "report.json").write_text(_report_json(report))
    sys.stdout.write(text)
    return EXIT_OK


def cmd_costmodel(args) -> int:
    try:
        ps = [int(v) for v in args.p.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"-p must be a comma-separated list of integers, got {args.p!r}") from None
    lines = ["p allreduce dichotomy ratio"]
    for p in ps:
        try:
            a = comm_time_allreduce(p, args.alpha, args.beta, args.gamma)
            d = comm_time_dichotomy(p, args.l, args.alpha, args.beta, args.gamma)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        ratio = d / a if a != 0 else float("nan")
        lines.append(f"{p} {_fmt(a)} {_fmt(d)} {_fmt(ratio)}")
    print("\n".join(lines))
    return EXIT_OK


def cmd_selftest(args) -> int:
    weight = perturbed_conv_weight if args.fault == "conv_weight" else None
    results = run_selftest(args.seed, weight) if weight else run_selftest(args.seed)
    text = format_report(results)
    print(text)
    if args.output_dir is not None:
        out = Manifest(args.output_dir)
        out.write_text("selftest.txt", text + "\n")
    return EXIT_OK if all(r.passed for r in results) else EXIT_SELFTEST


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--workers", type=int, default=None,
                        help="worker threads for the tridiagonal engine (overrides $WORKERS)")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help="seed for randomised checks")
    common.add_argument("--output-dir", default=None, help="directory for output files")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="lagwave", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="run one scenario")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_simulate, default_out="out")

    p = sub.add_parser("convergence", parents=[common], help="rerun a scenario on several meshes")
    p.add_argument("scenario")
    p.add_argument("--meshes", default="20,40,80", help="points per wavelength, comma separated")
    p.set_defaults(func=cmd_convergence, default_out="out")

    p = sub.add_parser("costmodel", parents=[common], help="communication time models")
    p.add_argument("-p", default="1,2,4,8,16,32,64", help="processor counts (powers of two)")
    p.add_argument("--alpha", type=float, default=1.0, help="latency per message")
    p.add_argument("--beta", type=float, default=0.0, help="time per transferred word")
    p.add_argument("--gamma", type=float, default=0.0, help="time per arithmetic operation")
    p.add_argument("-l", type=float, default=1.0, help="batch size (right-hand sides per solve)")
    p.set_defaults(func=cmd_costmodel, default_out=None)

    p = sub.add_parser("selftest", parents=[common], help="run the embedded oracle checks")
    p.add_argument("--fault", choices=["conv_weight"], default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_selftest, default_out=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.output_dir is None:
        args.output_dir = args.default_out
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.workers is not None and args.workers < 1:
            raise ConfigError(f"--workers must be >= 1, got {args.workers}")
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
