"""Scenario files: INI sections mapped onto :class:`SimulationConfig`.

Example::

    [run]
    physics = acoustic
    t_end = 0.6
    dt = 2.5e-4

    [grid]
    l1 = 1000
    l2 = 600
    n_r = 300
    n_z = 180

    [medium]
    type = constant
    kappa = 1.0
    rho = 2.5e-7

    [basis]
    alpha = 9
    h = 400
    n = 600

    [source]
    kind = monopole
    r0 = 0
    z0 = 0

    [receivers]
    positions = 333.3 0; 500 0

Unknown sections or keys are rejected.  Omitted optional keys take the
defaults listed in ``SCHEMA``; :func:`effective_config` echoes every value
that was actually used.
"""

from __future__ import annotations

import configparser
import dataclasses
import os
from pathlib import Path

import numpy as np

from .driver import ConfigError, SimulationConfig
from .grid import (
    AcousticMedium,
    Constant,
    ElasticMedium,
    Layered,
    RasterError,
    build_grid,
    load_raster_model,
)
from .krylov import KrylovConfig
from .laguerre import LaguerreBasis
from .operators import SourceSpec

__all__ = ["SCHEMA", "load_scenario", "parse_scenario", "effective_config", "wavelength", "with_grid",
           "env_workers"]

_REQ = object()

# section -> key -> default (_REQ marks required keys)
SCHEMA = {
    "run": {"physics": _REQ, "t_start": "0", "t_end": _REQ, "dt": _REQ, "workers": "1"},
    "grid": {"l1": _REQ, "l2": _REQ, "n_r": _REQ, "n_z": _REQ},
    "medium": {"type": "constant", "kappa": "", "rho": "", "vp": "", "vs": "", "tops": "", "path": "",
               "kappa_name": "kappa", "rho_name": "rho", "vp_name": "vp", "vs_name": "vs"},
    "basis": {"alpha": _REQ, "h": _REQ, "n": _REQ},
    "source": {"kind": "monopole", "r0": "0", "z0": "0", "f0": "30", "t0": "0.2", "gamma": "4",
               "amplitude": "1"},
    "receivers": {"positions": ""},
    "snapshots": {"times": ""},
    "solver": {"tol": "1e-8", "max_iters": "1000", "restart_k": "10", "b2_hoop_term": "false",
               "quadrature_dt": ""},
}
_REQUIRED_SECTIONS = ("run", "grid", "medium", "basis", "source")


def _floats(text, what):
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"{what}: cannot parse numbers from {text!r}") from None


def _float(sec, key):
    try:
        return float(sec[key])
    except ValueError:
        raise ConfigError(f"[{sec.name}] {key}: not a number: {sec[key]!r}") from None


def _int(sec, key):
    try:
        return int(sec[key])
    except ValueError:
        raise ConfigError(f"[{sec.name}] {key}: not an integer: {sec[key]!r}") from None


def _check_keys(cp: configparser.ConfigParser):
    for name in cp.sections():
        if name not in SCHEMA:
            raise ConfigError(f"unknown section [{name}]")
        for key in cp[name]:
            if key not in SCHEMA[name]:
                raise ConfigError(f"unknown key {key!r} in section [{name}]")
    for name in _REQUIRED_SECTIONS:
        if not cp.has_section(name):
            raise ConfigError(f"missing section [{name}]")
    for name, keys in SCHEMA.items():
        if not cp.has_section(name):
            cp.add_section(name)
        for key, default in keys.items():
            if key not in cp[name]:
                if default is _REQ:
                    raise ConfigError(f"missing required key {key!r} in section [{name}]")
                cp[name][key] = default


def _field(sec, key, tops):
    text = sec[key]
    if not text:
        raise ConfigError(f"[medium] {key} is required for type = {sec['type']}")
    vals = _floats(text, f"[medium] {key}")
    try:
        if tops is None:
            if len(vals) != 1:
                raise ConfigError(f"[medium] {key}: constant medium takes one value")
            return Constant(vals[0])
        return Layered(tuple(tops), tuple(vals))
    except ValueError as exc:
        raise ConfigError(f"[medium] {key}: {exc}") from None


def _medium(sec, physics, base: Path):
    kind = sec["type"]
    names = ("kappa", "rho") if physics == "acoustic" else ("vp", "vs", "rho")
    if kind == "raster":
        if not sec["path"]:
            raise ConfigError("[medium] path is required for type = raster")
        path = Path(sec["path"])
        if not path.is_absolute():
            path = base / path
        try:
            model = load_raster_model(path)
            fields = [model.field(sec[f"{n}_name"]) for n in names]
        except (RasterError, OSError, KeyError) as exc:
            raise ConfigError(f"[medium] raster {path}: {exc}") from None
    elif kind in ("constant", "layered"):
        tops = _floats(sec["tops"], "[medium] tops") if kind == "layered" else None
        if kind == "layered" and not tops:
            raise ConfigError("[medium] tops is required for type = layered")
        fields = [_field(sec, n, tops) for n in names]
    else:
        raise ConfigError(f"[medium] type must be constant, layered or raster, got {kind!r}")
    if physics == "acoustic":
        return AcousticMedium(*fields)
    return ElasticMedium.from_velocities(*fields)


def _receivers(text):
    out = []
    for k, item in enumerate(p for p in text.split(";") if p.strip()):
        vals = _floats(item, f"[receivers] receiver {k}")
        if len(vals) != 2:
            raise ConfigError(f"[receivers] receiver {k}: expected 'r z', got {item.strip()!r}")
        out.append((vals[0], vals[1]))
    return out


def parse_scenario(text: str, base: Path | str = ".", workers: int | None = None) -> tuple:
    """Parse scenario text; returns ``(SimulationConfig, configparser with defaults filled)``."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed scenario: {exc}") from None
    _check_keys(cp)
    run, gs, bs, ss, sol = cp["run"], cp["grid"], cp["basis"], cp["source"], cp["solver"]
    physics = run["physics"].strip()
    if physics not in ("acoustic", "elastic"):
        raise ConfigError(f"[run] physics must be acoustic or elastic, got {physics!r}")
    if workers is not None:
        run["workers"] = str(workers)
    try:
        grid = build_grid(_float(gs, "l1"), _float(gs, "l2"), _int(gs, "n_r"), _int(gs, "n_z"))
        basis = LaguerreBasis(_int(bs, "alpha"), _float(bs, "h"), _int(bs, "n"))
        source = SourceSpec(ss["kind"].strip(), _float(ss, "r0"), _float(ss, "z0"), _float(ss, "f0"),
                            _float(ss, "t0"), _float(ss, "gamma"), _float(ss, "amplitude"))
        krylov = KrylovConfig(_float(sol, "tol"), _int(sol, "max_iters"), _int(sol, "restart_k"))
        hoop = sol.getboolean("b2_hoop_term")
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    cfg = SimulationConfig(
        physics=physics,
        grid=grid,
        medium=_medium(cp["medium"], physics, Path(base)),
        basis=basis,
        source=source,
        receivers=_receivers(cp["receivers"]["positions"]),
        snapshot_times=tuple(_floats(cp["snapshots"]["times"], "[snapshots] times")),
        t_start=_float(run, "t_start"),
        t_end=_float(run, "t_end"),
        dt=_float(run, "dt"),
        krylov=krylov,
        workers=_int(run, "workers"),
        quadrature_dt=_float(sol, "quadrature_dt") if sol["quadrature_dt"] else None,
        b2_hoop_term=hoop,
    )
    cfg.validate()
    return cfg, cp


def load_scenario(path, workers: int | None = None):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from None
    return parse_scenario(text, path.parent, workers)


def effective_config(cp: configparser.ConfigParser) -> dict:
    return {name: dict(cp[name]) for name in SCHEMA}


def wavelength(cfg: SimulationConfig) -> float:
    """Shortest wavelength at the source peak frequency (S waves for elastic runs)."""
    g = cfg.grid
    r, z = g.r[:, None], g.z[None, :]
    if cfg.physics == "acoustic":
        c = np.sqrt(cfg.medium.kappa(r, z) / cfg.medium.rho(r, z))
    else:
        c = np.sqrt(cfg.medium.mu(r, z) / cfg.medium.rho(r, z))
    return float(np.min(c)) / cfg.source.f0


def with_grid(cfg: SimulationConfig, n_r: int, n_z: int) -> SimulationConfig:
    """Copy of ``cfg`` on another mesh of the same domain."""
    return dataclasses.replace(cfg, grid=build_grid(cfg.grid.l1, cfg.grid.l2, n_r, n_z))


def env_workers() -> int | None:
    text = os.environ.get("WORKERS")
    if text is None or not text.strip():
        return None
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"WORKERS must be an integer, got {text!r}") from None
